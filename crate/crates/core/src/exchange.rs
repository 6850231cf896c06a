//! Two-party exchange orchestration over the ledger.
//!
//! The exchange choreography: the initiator converts funding notes into a
//! primary/sibling pair (the primary owned by a shared key derived from the
//! out-of-band secret), the counterparty either responds before the
//! block-height threshold by spending the shared primary against its debt,
//! or the initiator cancels after the threshold by spending primary and
//! sibling together. After a response the initiator completes by spending
//! the sibling with evidence that the primary's nullifier was published.
//!
//! Each party drives its own session object; sessions interact only
//! through the ledger. Competing spends of the primary resolve at the
//! ledger (first accepted nullifier wins) and a session finding itself on
//! the losing side reconciles its state from ledger evidence.

use thiserror::Error;

use crate::digest::Digest32;
use crate::ledger::{Ledger, RejectReason};
use crate::note::{AssetAmount, Note};
use crate::primitives::{self, PaymentAddress, SpendingKey};
use crate::transactions::{
    build_joinsplit, CaseId, InputSpec, JoinSplitRequest, JoinSplitTransaction, OutputSpec,
    PairEvidence, Recipient, TxError, MEMO_BYTES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Counterparty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Created,
    Offered,
    Responded,
    Cancelled,
    Completed,
    Aborted,
}

/// What polling the ledger for the counterparty's move revealed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PollOutcome {
    Pending,
    /// The expected primary nullifier is on the ledger; carries its tree
    /// position and membership path for the completion witness.
    Responded {
        position: u64,
        path: crate::merkle::MerklePath,
    },
    /// Past the threshold with no response; only cancellation remains.
    Expired,
}

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("operation not allowed in state {0:?}")]
    InvalidState(SessionState),
    #[error("funding notes sum to {have}, need exactly {need}")]
    FundingMismatch { have: u64, need: u64 },
    #[error("wrong funding color")]
    WrongColor,
    #[error("note value {have} does not cover the {need} debt")]
    DebtNotCovered { have: u64, need: u64 },
    #[error("block height {now} is past the threshold {bt}")]
    PastThreshold { now: u32, bt: u32 },
    #[error("block height {now} has not passed the threshold {bt}")]
    BeforeThreshold { now: u32, bt: u32 },
    #[error("counterparty already responded; cancellation impossible")]
    AlreadyResponded,
    #[error("no response evidence; poll the ledger first")]
    NoEvidence,
    #[error("offer not found on the ledger")]
    OfferNotFound,
    #[error("ledger rejected the transaction: {}", .0.code())]
    Rejected(RejectReason),
    #[error(transparent)]
    Build(#[from] TxError),
}

/// A funding note with its commitment position on the ledger.
#[derive(Clone, Debug)]
pub struct OwnedNote {
    pub note: Note,
    pub position: u64,
}

/// One party's view of an exchange.
#[derive(Clone, Debug)]
pub struct ExchangeSession {
    pub role: Role,
    pub give: AssetAmount,
    pub ask: AssetAmount,
    pub bt: u32,
    shared_secret: Vec<u8>,
    pub state: SessionState,
    // Populated once the offer is on the ledger (by initiate or by
    // observe_offer).
    primary_note: Option<Note>,
    sibling_note: Option<Note>,
    primary_pos: Option<u64>,
    sibling_pos: Option<u64>,
    shared_key: Option<SpendingKey>,
    primary_nf_expected: Option<Digest32>,
    response_evidence: Option<(u64, crate::merkle::MerklePath)>,
}

impl ExchangeSession {
    /// `give`/`ask` are from the initiator's perspective for both roles.
    pub fn new(
        role: Role,
        give: AssetAmount,
        ask: AssetAmount,
        bt: u32,
        shared_secret: &[u8],
    ) -> ExchangeSession {
        ExchangeSession {
            role,
            give,
            ask,
            bt,
            shared_secret: shared_secret.to_vec(),
            state: SessionState::Created,
            primary_note: None,
            sibling_note: None,
            primary_pos: None,
            sibling_pos: None,
            shared_key: None,
            primary_nf_expected: None,
            response_evidence: None,
        }
    }

    pub fn primary_note(&self) -> Option<&Note> {
        self.primary_note.as_ref()
    }

    pub fn sibling_note(&self) -> Option<&Note> {
        self.sibling_note.as_ref()
    }

    pub fn expected_primary_nullifier(&self) -> Option<&Digest32> {
        self.primary_nf_expected.as_ref()
    }

    fn require(&self, state: SessionState) -> Result<(), ExchangeError> {
        if self.state != state {
            return Err(ExchangeError::InvalidState(self.state));
        }
        Ok(())
    }

    fn record_offer(&mut self, primary: Note, sibling: Note, ppos: u64, spos: u64) {
        let h_sig = primary.pair_tag;
        let shared = primitives::derive_shared_spending_key(&self.shared_secret, &h_sig)
            .expect("session secrets are non-empty");
        self.primary_nf_expected = Some(primitives::prf_nf(&shared, &primary.rho));
        self.shared_key = Some(shared);
        self.primary_note = Some(primary);
        self.sibling_note = Some(sibling);
        self.primary_pos = Some(ppos);
        self.sibling_pos = Some(spos);
        self.state = SessionState::Offered;
    }

    /// Initiator: converts funding notes (summing exactly to the offered
    /// amount) into the primary/sibling pair and appends the transaction.
    pub fn initiate(
        &mut self,
        ledger: &mut Ledger,
        funding: &[OwnedNote],
        owner_key: &SpendingKey,
        owner_addr: &PaymentAddress,
        rng: &mut impl rand::RngCore,
    ) -> Result<JoinSplitTransaction, ExchangeError> {
        self.require(SessionState::Created)?;
        assert_eq!(self.role, Role::Initiator, "only the initiator offers");
        let have: u64 = funding.iter().map(|f| f.note.v1).sum();
        if have != self.give.amount {
            return Err(ExchangeError::FundingMismatch {
                have,
                need: self.give.amount,
            });
        }
        if funding.iter().any(|f| f.note.color1 != self.give.color) {
            return Err(ExchangeError::WrongColor);
        }
        let inputs = inputs_with_dummy_padding(ledger, funding, owner_key, rng);
        let request = JoinSplitRequest {
            rt: ledger.root(),
            block_n: ledger.block_height(),
            inputs,
            outputs: [
                OutputSpec {
                    recipient: Recipient::Shared {
                        secret: self.shared_secret.clone(),
                    },
                    s: 0,
                    primary: self.give,
                    debt: self.ask,
                    bt: self.bt,
                },
                OutputSpec {
                    recipient: Recipient::from_address(owner_addr),
                    s: 1,
                    primary: self.ask,
                    debt: AssetAmount::zero(),
                    bt: self.bt,
                },
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::ExchangeInit,
            evidence: None,
        };
        let (tx, outputs) = build_joinsplit(&ledger.params().pk_joinsplit, &request, rng)?;
        let accepted = ledger
            .verify_and_append(&tx)
            .map_err(ExchangeError::Rejected)?;
        self.record_offer(
            outputs[0],
            outputs[1],
            accepted.positions[0],
            accepted.positions[1],
        );
        Ok(tx)
    }

    /// Counterparty: finds the shared primary note on the ledger by trying
    /// the shared secret against every transaction's h_sig.
    pub fn observe_offer(&mut self, ledger: &mut Ledger) -> Result<(), ExchangeError> {
        self.require(SessionState::Created)?;
        assert_eq!(self.role, Role::Counterparty, "initiators know their offer");
        for entry in ledger.entries() {
            let crate::ledger::LedgerEntry::JoinSplit(tx) = entry else {
                continue;
            };
            let h_sig = primitives::compute_h_sig(&tx.nf_old_1, &tx.nf_old_2, &tx.pk_sig);
            let Ok(shared) = primitives::derive_shared_spending_key(&self.shared_secret, &h_sig)
            else {
                continue;
            };
            let addr = primitives::derive_address(&shared);
            for (ciphertext, cm) in [
                (&tx.enc_note_1, &tx.cm_new_1),
                (&tx.enc_note_2, &tx.cm_new_2),
            ] {
                let Ok(plain) = primitives::decrypt_note(&addr.enc_sk, ciphertext) else {
                    continue;
                };
                let Ok(note) = crate::note::deserialize_note(&plain) else {
                    continue;
                };
                if note.a_pk != addr.a_pk
                    || note.s != 0
                    || note.primary() != self.give
                    || note.debt() != self.ask
                    || note.bt != self.bt
                {
                    continue;
                }
                let Some((pos, _)) = ledger.commitment_path(cm) else {
                    continue;
                };
                self.primary_nf_expected = Some(primitives::prf_nf(&shared, &note.rho));
                self.shared_key = Some(shared);
                self.primary_note = Some(note);
                self.primary_pos = Some(pos);
                self.state = SessionState::Offered;
                return Ok(());
            }
        }
        Err(ExchangeError::OfferNotFound)
    }

    /// Counterparty: spends the shared primary together with an own note
    /// covering the debt, before the threshold. Outputs: the offered asset
    /// and the change, both to the counterparty.
    pub fn respond(
        &mut self,
        ledger: &mut Ledger,
        funding: &OwnedNote,
        owner_key: &SpendingKey,
        owner_addr: &PaymentAddress,
        rng: &mut impl rand::RngCore,
    ) -> Result<JoinSplitTransaction, ExchangeError> {
        self.require(SessionState::Offered)?;
        assert_eq!(self.role, Role::Counterparty, "only the counterparty responds");
        let now = ledger.block_height();
        if now > self.bt {
            return Err(ExchangeError::PastThreshold { now, bt: self.bt });
        }
        let primary = self.primary_note.expect("offered state carries the primary");
        if funding.note.color1 != primary.color2 {
            return Err(ExchangeError::WrongColor);
        }
        if funding.note.v1 < primary.v2 {
            return Err(ExchangeError::DebtNotCovered {
                have: funding.note.v1,
                need: primary.v2,
            });
        }
        let shared_key = self.shared_key.expect("offered state carries the key");
        let primary_pos = self.primary_pos.expect("offered state carries the position");
        let inputs = [
            InputSpec {
                note: primary,
                a_sk: shared_key,
                path: ledger.tree().path(primary_pos).expect("primary on ledger"),
            },
            InputSpec {
                note: funding.note,
                a_sk: *owner_key,
                path: ledger
                    .tree()
                    .path(funding.position)
                    .expect("funding note on ledger"),
            },
        ];
        let change = funding.note.v1 - primary.v2;
        let request = JoinSplitRequest {
            rt: ledger.root(),
            block_n: now,
            inputs,
            outputs: [
                OutputSpec::plain(
                    Recipient::from_address(owner_addr),
                    AssetAmount::new(primary.color1, primary.v1),
                ),
                OutputSpec::plain(
                    Recipient::from_address(owner_addr),
                    AssetAmount::new(funding.note.color1, change),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::CounterpartyResponse,
            evidence: None,
        };
        let (tx, _) = build_joinsplit(&ledger.params().pk_joinsplit, &request, rng)?;
        ledger
            .verify_and_append(&tx)
            .map_err(ExchangeError::Rejected)?;
        self.state = SessionState::Responded;
        Ok(tx)
    }

    /// Initiator: checks the nullifier pool for the counterparty's spend of
    /// the shared primary. Detecting it moves the session to Responded.
    pub fn poll_counterparty(&mut self, ledger: &Ledger) -> Result<PollOutcome, ExchangeError> {
        if self.state != SessionState::Offered && self.state != SessionState::Responded {
            return Err(ExchangeError::InvalidState(self.state));
        }
        let nf = self
            .primary_nf_expected
            .expect("offered state carries the expected nullifier");
        if let Some((position, path)) = ledger.scan_nullifier(&nf) {
            self.state = SessionState::Responded;
            self.response_evidence = Some((position, path.clone()));
            return Ok(PollOutcome::Responded { position, path });
        }
        if ledger.block_height() > self.bt {
            return Ok(PollOutcome::Expired);
        }
        Ok(PollOutcome::Pending)
    }

    /// Initiator: recovers the offered asset after the threshold by
    /// spending primary and sibling together. If the counterparty already
    /// responded, the session reconciles to Responded and errors.
    pub fn cancel(
        &mut self,
        ledger: &mut Ledger,
        owner_key: &SpendingKey,
        owner_addr: &PaymentAddress,
        rng: &mut impl rand::RngCore,
    ) -> Result<JoinSplitTransaction, ExchangeError> {
        self.require(SessionState::Offered)?;
        assert_eq!(self.role, Role::Initiator, "only the initiator cancels");
        // A published response forecloses cancellation at any height.
        let nf = self.primary_nf_expected.expect("offered state");
        if ledger.nullifier_spent(&nf) {
            self.reconcile_responded(ledger, &nf);
            return Err(ExchangeError::AlreadyResponded);
        }
        let now = ledger.block_height();
        if now <= self.bt {
            return Err(ExchangeError::BeforeThreshold { now, bt: self.bt });
        }
        let primary = self.primary_note.expect("offered state");
        let sibling = self.sibling_note.expect("initiator stored the sibling");
        let inputs = [
            InputSpec {
                note: primary,
                a_sk: self.shared_key.expect("offered state"),
                path: ledger
                    .tree()
                    .path(self.primary_pos.expect("offered state"))
                    .expect("primary on ledger"),
            },
            InputSpec {
                note: sibling,
                a_sk: *owner_key,
                path: ledger
                    .tree()
                    .path(self.sibling_pos.expect("offered state"))
                    .expect("sibling on ledger"),
            },
        ];
        let request = JoinSplitRequest {
            rt: ledger.root(),
            block_n: now,
            inputs,
            outputs: [
                OutputSpec::plain(Recipient::from_address(owner_addr), self.give),
                OutputSpec::plain(
                    Recipient::from_address(owner_addr),
                    AssetAmount::new(self.give.color, 0),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::CancelByInitiator,
            evidence: None,
        };
        let (tx, _) = build_joinsplit(&ledger.params().pk_joinsplit, &request, rng)?;
        match ledger.verify_and_append(&tx) {
            Ok(_) => {
                self.state = SessionState::Cancelled;
                Ok(tx)
            }
            Err(RejectReason::DuplicateNullifier) if ledger.nullifier_spent(&nf) => {
                // Lost the race: the counterparty's response landed first.
                self.reconcile_responded(ledger, &nf);
                Err(ExchangeError::AlreadyResponded)
            }
            Err(reason) => Err(ExchangeError::Rejected(reason)),
        }
    }

    /// Adopts the ledger's verdict that the primary was spent: moves to
    /// Responded and captures the nullifier evidence for completion.
    fn reconcile_responded(&mut self, ledger: &Ledger, nf: &Digest32) {
        self.state = SessionState::Responded;
        if let Some((position, path)) = ledger.scan_nullifier(nf) {
            self.response_evidence = Some((position, path));
        }
    }

    /// Initiator: after the counterparty's response and past the threshold,
    /// spends the sibling using the nullifier evidence. The received asset
    /// lands in `split` notes (one full note plus a zero note by default).
    pub fn complete(
        &mut self,
        ledger: &mut Ledger,
        owner_key: &SpendingKey,
        owner_addr: &PaymentAddress,
        split: Option<(u64, u64)>,
        rng: &mut impl rand::RngCore,
    ) -> Result<JoinSplitTransaction, ExchangeError> {
        self.require(SessionState::Responded)?;
        assert_eq!(self.role, Role::Initiator, "only the initiator completes");
        let now = ledger.block_height();
        if now <= self.bt {
            return Err(ExchangeError::BeforeThreshold { now, bt: self.bt });
        }
        let (_, _) = self
            .response_evidence
            .as_ref()
            .ok_or(ExchangeError::NoEvidence)?;
        let sibling = self.sibling_note.expect("initiator stored the sibling");
        let primary = self.primary_note.expect("offered state");
        let sibling_pos = self.sibling_pos.expect("offered state");
        let primary_pos = self.primary_pos.expect("offered state");
        let nf = self.primary_nf_expected.expect("offered state");
        // Refresh the paths against the current root.
        let (nf_pos, path_4) = ledger
            .scan_nullifier(&nf)
            .ok_or(ExchangeError::NoEvidence)?;
        let _ = nf_pos;
        let evidence = PairEvidence {
            n_old_3: primary,
            a_sk_3: self.shared_key.expect("offered state"),
            path_3: ledger.tree().path(primary_pos).expect("primary on ledger"),
            path_4,
            nf_old_3: nf,
        };
        let (split_a, split_b) = split.unwrap_or((self.ask.amount, 0));
        assert_eq!(
            split_a + split_b,
            self.ask.amount,
            "completion split must conserve the asked amount"
        );
        let (dummy_note, dummy_key) = Note::dummy(rng);
        let inputs = [
            InputSpec {
                note: sibling,
                a_sk: *owner_key,
                path: ledger.tree().path(sibling_pos).expect("sibling on ledger"),
            },
            InputSpec {
                note: dummy_note,
                a_sk: dummy_key,
                path: crate::merkle::MerklePath::placeholder(ledger.tree().depth()),
            },
        ];
        let request = JoinSplitRequest {
            rt: ledger.root(),
            block_n: now,
            inputs,
            outputs: [
                OutputSpec::plain(
                    Recipient::from_address(owner_addr),
                    AssetAmount::new(self.ask.color, split_a),
                ),
                OutputSpec::plain(
                    Recipient::from_address(owner_addr),
                    AssetAmount::new(self.ask.color, split_b),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::CompleteByInitiator,
            evidence: Some(evidence),
        };
        let (tx, _) = build_joinsplit(&ledger.params().pk_joinsplit, &request, rng)?;
        ledger
            .verify_and_append(&tx)
            .map_err(ExchangeError::Rejected)?;
        self.state = SessionState::Completed;
        Ok(tx)
    }
}

/// Pads a funding list to exactly two inputs with a fresh dummy note.
pub fn inputs_with_dummy_padding(
    ledger: &Ledger,
    funding: &[OwnedNote],
    owner_key: &SpendingKey,
    rng: &mut impl rand::RngCore,
) -> [InputSpec; 2] {
    assert!((1..=2).contains(&funding.len()), "one or two funding notes");
    let spec = |f: &OwnedNote| InputSpec {
        note: f.note,
        a_sk: *owner_key,
        path: ledger.tree().path(f.position).expect("funding on ledger"),
    };
    match funding {
        [only] => {
            let (dummy_note, dummy_key) = Note::dummy(rng);
            [
                spec(only),
                InputSpec {
                    note: dummy_note,
                    a_sk: dummy_key,
                    path: crate::merkle::MerklePath::placeholder(ledger.tree().depth()),
                },
            ]
        }
        [a, b] => [spec(a), spec(b)],
        _ => unreachable!(),
    }
}
