//! Append-only single-node ledger: block-height clock, transaction
//! verification, nullifier double-spend set, joint Merkle maintenance,
//! minted-supply bookkeeping and wallet-facing scanning.
//!
//! There is no consensus layer; the block height is an explicit clock the
//! harness advances. A JoinSplit carries no height field, so its proof pins
//! the height it was built for: verification reconstructs the public input
//! at the ledger's current height and a stale transaction simply fails
//! proof verification.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::digest::Digest32;
use crate::merkle::{CombinedTree, LeafKind, MerklePath};
use crate::note::{deserialize_note, AssetAmount, Note};
use crate::primitives::{self, EncSecretKey, SpendingKey};
use crate::proving::SetupParams;
use crate::transactions::{JoinSplitTransaction, MintTransaction};

/// Why a JoinSplit was rejected; one reason per verification check.
/// h_sig enters the reconstructed public input by derivation from the
/// transaction's own fields, which is the consistency check itself — a
/// prover who bound any other h_sig into the proof fails `ProofInvalid`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    ProofInvalid,
    SignatureInvalid,
    DuplicateNullifier,
    UnknownRoot,
    HsigMismatch,
}

impl RejectReason {
    /// Stable reason codes used in traces and scenario expectations.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::ProofInvalid => "proof-invalid",
            RejectReason::SignatureInvalid => "signature-invalid",
            RejectReason::DuplicateNullifier => "duplicate-nullifier",
            RejectReason::UnknownRoot => "unknown-root",
            RejectReason::HsigMismatch => "h-sig-mismatch",
        }
    }

    pub fn from_code(code: &str) -> Option<RejectReason> {
        Some(match code {
            "proof-invalid" => RejectReason::ProofInvalid,
            "signature-invalid" => RejectReason::SignatureInvalid,
            "duplicate-nullifier" => RejectReason::DuplicateNullifier,
            "unknown-root" => RejectReason::UnknownRoot,
            "h-sig-mismatch" => RejectReason::HsigMismatch,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum MintReject {
    #[error("mint color 0 is reserved")]
    ReservedColor,
    #[error("mint commitment does not open to the stated note")]
    CommitmentMismatch,
    #[error("tree is full")]
    TreeFull,
}

/// Tree positions an accepted JoinSplit occupies: cm_1, cm_2, nf_1, nf_2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcceptedJoinSplit {
    pub positions: [u64; 4],
}

/// A recorded ledger entry, in acceptance order.
#[derive(Clone, Debug)]
pub enum LedgerEntry {
    JoinSplit(Box<JoinSplitTransaction>),
    Mint(Box<MintTransaction>),
}

#[derive(Clone)]
pub struct Ledger {
    tree: CombinedTree,
    nullifier_set: HashSet<Digest32>,
    nullifier_pos: HashMap<Digest32, u64>,
    commitment_pos: HashMap<Digest32, u64>,
    entries: Vec<LedgerEntry>,
    block_n: u32,
    /// Cumulative minted supply per color.
    minted: BTreeMap<u32, u128>,
    /// Value that left the shielded pool through public outputs.
    deshielded: BTreeMap<u32, u128>,
    params: SetupParams,
}

impl Ledger {
    pub fn new(depth: usize, params: SetupParams) -> Ledger {
        Ledger {
            tree: CombinedTree::new(depth),
            nullifier_set: HashSet::new(),
            nullifier_pos: HashMap::new(),
            commitment_pos: HashMap::new(),
            entries: Vec::new(),
            block_n: 0,
            minted: BTreeMap::new(),
            deshielded: BTreeMap::new(),
            params,
        }
    }

    pub fn params(&self) -> &SetupParams {
        &self.params
    }

    pub fn block_height(&self) -> u32 {
        self.block_n
    }

    pub fn root(&self) -> Digest32 {
        self.tree.root()
    }

    pub fn tree(&self) -> &CombinedTree {
        &self.tree
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn nullifier_spent(&self, nf: &Digest32) -> bool {
        self.nullifier_set.contains(nf)
    }

    pub fn minted_supply(&self, color: u32) -> u128 {
        self.minted.get(&color).copied().unwrap_or(0)
    }

    pub fn deshielded_supply(&self, color: u32) -> u128 {
        self.deshielded.get(&color).copied().unwrap_or(0)
    }

    pub fn colors_seen(&self) -> impl Iterator<Item = u32> + '_ {
        self.minted.keys().copied()
    }

    /// Path for a published commitment against the current root.
    pub fn commitment_path(&self, cm: &Digest32) -> Option<(u64, MerklePath)> {
        let pos = *self.commitment_pos.get(cm)?;
        Some((pos, self.tree.path(pos).expect("recorded position exists")))
    }

    /// Advances the block-height clock by `n` (at least 1).
    pub fn advance_block(&mut self, n: u32) -> u32 {
        assert!(n >= 1, "block clock only moves forward");
        self.block_n = self.block_n.saturating_add(n);
        self.block_n
    }

    /// Full JoinSplit verification; on acceptance appends cm_1, cm_2, nf_1,
    /// nf_2 to the tree in that order and records the transaction.
    ///
    /// A transaction is accepted only when every check holds; the checks
    /// are not ordered by the protocol, so they run cheapest-and-most-
    /// diagnostic first: a replayed transaction reads as duplicate-nullifier
    /// even when its proof has also gone stale.
    pub fn verify_and_append(
        &mut self,
        tx: &JoinSplitTransaction,
    ) -> Result<AcceptedJoinSplit, RejectReason> {
        if self.nullifier_set.contains(&tx.nf_old_1)
            || self.nullifier_set.contains(&tx.nf_old_2)
            || tx.nf_old_1 == tx.nf_old_2
        {
            return Err(RejectReason::DuplicateNullifier);
        }
        if !self.tree.is_known_root(&tx.rt) {
            return Err(RejectReason::UnknownRoot);
        }
        let chi = tx.public_input(self.block_n);
        if !self.params.vk_joinsplit.verify(&chi, &tx.proof) {
            return Err(RejectReason::ProofInvalid);
        }
        let m = JoinSplitTransaction::signed_message(
            &chi,
            &tx.proof,
            &tx.memo,
            &tx.enc_note_1,
            &tx.enc_note_2,
        );
        if !primitives::verify_sig(&tx.pk_sig, &m, &tx.delta) {
            return Err(RejectReason::SignatureInvalid);
        }
        if self.tree.leaf_count() + 4 > self.tree.capacity() {
            // At desk scale a full tree is a configuration error, not a
            // protocol outcome.
            panic!("combined tree is full; raise --depth");
        }
        let positions = [
            self.append_leaf(tx.cm_new_1, LeafKind::Commitment),
            self.append_leaf(tx.cm_new_2, LeafKind::Commitment),
            self.append_leaf(tx.nf_old_1, LeafKind::Nullifier),
            self.append_leaf(tx.nf_old_2, LeafKind::Nullifier),
        ];
        self.nullifier_set.insert(tx.nf_old_1);
        self.nullifier_set.insert(tx.nf_old_2);
        if tx.v_pub_new.amount > 0 {
            *self.deshielded.entry(tx.v_pub_new.color).or_insert(0) +=
                tx.v_pub_new.amount as u128;
        }
        self.entries.push(LedgerEntry::JoinSplit(Box::new(tx.clone())));
        Ok(AcceptedJoinSplit { positions })
    }

    fn append_leaf(&mut self, leaf: Digest32, kind: LeafKind) -> u64 {
        let pos = self
            .tree
            .append(leaf, kind)
            .expect("capacity checked before append");
        match kind {
            LeafKind::Commitment => {
                self.commitment_pos.insert(leaf, pos);
            }
            LeafKind::Nullifier => {
                self.nullifier_pos.insert(leaf, pos);
            }
        }
        pos
    }

    /// Validates a mint (color range and commitment integrity), appends the
    /// commitment and credits the minted supply.
    pub fn apply_mint(&mut self, tx: &MintTransaction) -> Result<u64, MintReject> {
        if tx.color == 0 {
            return Err(MintReject::ReservedColor);
        }
        let rebuilt = Note::new(
            tx.a_pk,
            0,
            AssetAmount::new(tx.color, tx.v),
            AssetAmount::zero(),
            0,
            tx.rho,
            tx.gamma,
            Digest32::ZERO,
        )
        .map_err(|_| MintReject::CommitmentMismatch)?;
        if rebuilt.cm != tx.cm {
            return Err(MintReject::CommitmentMismatch);
        }
        if self.tree.leaf_count() >= self.tree.capacity() {
            return Err(MintReject::TreeFull);
        }
        let pos = self.append_leaf(tx.cm, LeafKind::Commitment);
        *self.minted.entry(tx.color).or_insert(0) += tx.v as u128;
        self.entries.push(LedgerEntry::Mint(Box::new(tx.clone())));
        Ok(pos)
    }

    /// Scans every encrypted note on the ledger with the given receiving
    /// keys; returns the notes addressed to this wallet and whether each is
    /// still spendable (its nullifier unseen).
    pub fn scan_receive(&self, enc_sk: &EncSecretKey, a_sk: &SpendingKey) -> Vec<(Note, bool)> {
        let a_pk = primitives::derive_address(a_sk).a_pk;
        let mut out = Vec::new();
        let mut try_note = |ciphertext: &[u8], expected_cm: &Digest32| {
            let Ok(plain) = primitives::decrypt_note(enc_sk, ciphertext) else {
                return;
            };
            let Ok(note) = deserialize_note(&plain) else {
                return;
            };
            if note.a_pk != a_pk || note.cm != *expected_cm {
                return;
            }
            let nf = primitives::prf_nf(a_sk, &note.rho);
            out.push((note, !self.nullifier_set.contains(&nf)));
        };
        for entry in &self.entries {
            match entry {
                LedgerEntry::JoinSplit(tx) => {
                    try_note(&tx.enc_note_1, &tx.cm_new_1);
                    try_note(&tx.enc_note_2, &tx.cm_new_2);
                }
                LedgerEntry::Mint(tx) => try_note(&tx.enc_note, &tx.cm),
            }
        }
        out
    }

    /// Looks up a published nullifier; returns its tree position and a
    /// membership path against the current root.
    pub fn scan_nullifier(&self, nf: &Digest32) -> Option<(u64, MerklePath)> {
        let pos = *self.nullifier_pos.get(nf)?;
        Some((pos, self.tree.path(pos).expect("recorded position exists")))
    }

    /// Line-oriented state dump: one record per leaf (kind, position, hex).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (pos, kind, digest) in self.tree.leaves() {
            let kind = match kind {
                LeafKind::Commitment => "commitment",
                LeafKind::Nullifier => "nullifier",
            };
            out.push_str(&format!("{kind} {pos} {digest}\n"));
        }
        out
    }
}
