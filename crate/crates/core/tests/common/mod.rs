//! Shared test bed: drives one coherent ledger through every spending case
//! and captures the (public input, witness) statements along the way.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use noteswap_core::digest::Digest32;
use noteswap_core::ledger::Ledger;
use noteswap_core::merkle::MerklePath;
use noteswap_core::note::{AssetAmount, Note};
use noteswap_core::primitives::{self, PaymentAddress, SpendingKey};
use noteswap_core::proving::setup;
use noteswap_core::transactions::{
    prepare_joinsplit, CaseId, InputSpec, JoinSplitRequest, OutputSpec, PairEvidence, PublicInput,
    Recipient, Witness, MEMO_BYTES,
};

pub const BED_DEPTH: usize = 8;
pub const GREEN: u32 = 3;
pub const RED: u32 = 2;
pub const YELLOW: u32 = 4;
pub const BLUE: u32 = 5;

pub struct CapturedStatement {
    pub case: CaseId,
    pub chi: PublicInput,
    pub omega: Witness,
    pub tx_bytes: Vec<u8>,
}

pub struct Party {
    pub key: SpendingKey,
    pub addr: PaymentAddress,
}

impl Party {
    pub fn new(rng: &mut ChaCha20Rng) -> Party {
        let key = SpendingKey::random(rng);
        let addr = primitives::derive_address(&key);
        Party { key, addr }
    }

    pub fn recipient(&self) -> Recipient {
        Recipient::from_address(&self.addr)
    }
}

pub struct Bed {
    pub ledger: Ledger,
    pub rng: ChaCha20Rng,
    pub alice: Party,
    pub bob: Party,
    pub carol: Party,
}

/// An on-ledger note with everything needed to spend it.
#[derive(Clone)]
pub struct Spendable {
    pub note: Note,
    pub key: SpendingKey,
    pub position: u64,
}

impl Bed {
    pub fn new(seed: u64) -> Bed {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let params = setup(BED_DEPTH, &mut rng);
        let alice = Party::new(&mut rng);
        let bob = Party::new(&mut rng);
        let carol = Party::new(&mut rng);
        Bed {
            ledger: Ledger::new(BED_DEPTH, params),
            rng,
            alice,
            bob,
            carol,
        }
    }

    pub fn mint(&mut self, party: &Party, color: u32, value: u64) -> Spendable {
        let (tx, note) =
            noteswap_core::transactions::build_mint(&party.recipient(), color, value, &mut self.rng)
                .unwrap();
        let position = self.ledger.apply_mint(&tx).unwrap();
        Spendable {
            note,
            key: party.key,
            position,
        }
    }

    pub fn input(&self, s: &Spendable) -> InputSpec {
        InputSpec {
            note: s.note,
            a_sk: s.key,
            path: self.ledger.tree().path(s.position).unwrap(),
        }
    }

    pub fn dummy_input(&mut self) -> InputSpec {
        let (note, a_sk) = Note::dummy(&mut self.rng);
        InputSpec {
            note,
            a_sk,
            path: MerklePath::placeholder(BED_DEPTH),
        }
    }

    /// Prepares, proves, appends and captures one statement.
    pub fn run(&mut self, request: &JoinSplitRequest) -> (CapturedStatement, [Spendable; 2]) {
        let prep = prepare_joinsplit(request, &mut self.rng).expect("request is well-formed");
        let proof = self
            .ledger
            .params()
            .pk_joinsplit
            .prove(&prep.chi, &prep.omega)
            .expect("honest statement proves");
        let mut captured = CapturedStatement {
            case: request.intent,
            chi: prep.chi.clone(),
            omega: prep.omega.clone(),
            tx_bytes: Vec::new(),
        };
        let outputs = prep.outputs;
        let tx = prep.into_transaction_with_proof([0u8; MEMO_BYTES], proof);
        captured.tx_bytes = tx.serialize();
        self.ledger.verify_and_append(&tx).expect("honest tx accepted");
        let spendables = [0, 1].map(|j| {
            let position = self
                .ledger
                .commitment_path(&outputs[j].cm)
                .expect("just appended")
                .0;
            Spendable {
                note: outputs[j],
                // callers patch in the right key when it is not obvious
                key: self.alice.key,
                position,
            }
        });
        (captured, spendables)
    }

    pub fn base_request(&self, intent: CaseId) -> JoinSplitRequest {
        JoinSplitRequest {
            rt: self.ledger.root(),
            block_n: self.ledger.block_height(),
            inputs: [
                InputSpec {
                    note: noteswap_core::transactions::placeholder_note(),
                    a_sk: SpendingKey([0u8; 32]),
                    path: MerklePath::placeholder(BED_DEPTH),
                },
                InputSpec {
                    note: noteswap_core::transactions::placeholder_note(),
                    a_sk: SpendingKey([0u8; 32]),
                    path: MerklePath::placeholder(BED_DEPTH),
                },
            ],
            outputs: [
                OutputSpec::plain(self.alice.recipient(), AssetAmount::zero()),
                OutputSpec::plain(self.alice.recipient(), AssetAmount::zero()),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent,
            evidence: None,
        }
    }
}

/// The full corpus: one honest statement per spending case, all appended to
/// one ledger, with randomized (seeded) amounts.
pub fn statement_corpus(seed: u64) -> Vec<CapturedStatement> {
    let mut bed = Bed::new(seed);
    let mut out = Vec::new();

    // amounts
    let pay_total = bed.rng.gen_range(2..30u64);
    let pay_part = bed.rng.gen_range(1..pay_total);
    let give_c = bed.rng.gen_range(1..25u64); // cancelled exchange: green for red
    let ask_c = bed.rng.gen_range(1..25u64);
    let give_a = bed.rng.gen_range(1..25u64); // completed exchange: yellow for red
    let ask_a = bed.rng.gen_range(2..25u64);
    let extra_a = bed.rng.gen_range(0..6u64);
    let give_a2 = bed.rng.gen_range(1..25u64); // second-scenario source: blue for red
    let ask_a2 = bed.rng.gen_range(2..25u64);
    let give_b = bed.rng.gen_range(1..25u64); // carol's exchange: green for red
    let ask_b = bed.rng.gen_range(1..=ask_a2); // coverable by the a2 sibling

    // funding mints
    let pay_note = bed.mint(&bed.alice_ref(), GREEN, pay_total);
    let c_fund = bed.mint(&bed.alice_ref(), GREEN, give_c);
    let a_fund = bed.mint(&bed.alice_ref(), YELLOW, give_a);
    let a2_fund = bed.mint(&bed.alice_ref(), BLUE, give_a2);
    let b_fund_a = bed.mint(&bed.bob_ref(), RED, ask_a + extra_a);
    let b_fund_a2 = bed.mint(&bed.bob_ref(), RED, ask_a2);
    let carol_fund = bed.mint(&bed.carol_ref(), GREEN, give_b);

    // --- case 0: default payment with change -------------------------------
    let mut request = bed.base_request(CaseId::DefaultPayment);
    request.inputs = [bed.input(&pay_note), bed.dummy_input()];
    request.outputs = [
        OutputSpec::plain(bed.bob.recipient(), AssetAmount::new(GREEN, pay_part)),
        OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, pay_total - pay_part)),
    ];
    let (stmt, _) = bed.run(&request);
    out.push(stmt);

    // --- case 1: three initiations (bt = 2 for C/A/A2, 10 for B) ----------
    let mut offers = Vec::new();
    for (funding, give_color, give_v, ask_v, bt, secret) in [
        (&c_fund, GREEN, give_c, ask_c, 2u32, &b"pact-c"[..]),
        (&a_fund, YELLOW, give_a, ask_a, 2, &b"pact-a"[..]),
        (&a2_fund, BLUE, give_a2, ask_a2, 2, &b"pact-a2"[..]),
    ] {
        let mut request = bed.base_request(CaseId::ExchangeInit);
        request.inputs = [bed.input(funding), bed.dummy_input()];
        request.outputs = [
            OutputSpec {
                recipient: Recipient::Shared {
                    secret: secret.to_vec(),
                },
                s: 0,
                primary: AssetAmount::new(give_color, give_v),
                debt: AssetAmount::new(RED, ask_v),
                bt,
            },
            OutputSpec {
                recipient: bed.alice.recipient(),
                s: 1,
                primary: AssetAmount::new(RED, ask_v),
                debt: AssetAmount::zero(),
                bt,
            },
        ];
        let (stmt, outputs) = bed.run(&request);
        out.push(stmt);
        offers.push((outputs, secret.to_vec()));
    }
    // carol's exchange B
    let mut request = bed.base_request(CaseId::ExchangeInit);
    request.inputs = [bed.input(&carol_fund), bed.dummy_input()];
    request.outputs = [
        OutputSpec {
            recipient: Recipient::Shared {
                secret: b"pact-b".to_vec(),
            },
            s: 0,
            primary: AssetAmount::new(GREEN, give_b),
            debt: AssetAmount::new(RED, ask_b),
            bt: 10,
        },
        OutputSpec {
            recipient: bed.carol.recipient(),
            s: 1,
            primary: AssetAmount::new(RED, ask_b),
            debt: AssetAmount::zero(),
            bt: 10,
        },
    ];
    let (stmt, offer_b) = bed.run(&request);
    out.push(stmt);

    let shared_of = |pair: &[Spendable; 2], secret: &[u8]| -> SpendingKey {
        primitives::derive_shared_spending_key(secret, &pair[0].note.pair_tag).unwrap()
    };

    // --- case 3: bob responds to exchanges A and A2 at height 1 -----------
    bed.ledger.advance_block(1);
    let mut responded = Vec::new();
    for (offer_idx, funding) in [(1usize, &b_fund_a), (2usize, &b_fund_a2)] {
        let (pair, secret) = &offers[offer_idx];
        let primary = pair[0].note;
        let shared = shared_of(pair, secret);
        let mut request = bed.base_request(CaseId::CounterpartyResponse);
        request.inputs = [
            InputSpec {
                note: primary,
                a_sk: shared,
                path: bed.ledger.tree().path(pair[0].position).unwrap(),
            },
            bed.input(funding),
        ];
        request.outputs = [
            OutputSpec::plain(bed.bob.recipient(), primary.primary()),
            OutputSpec::plain(
                bed.bob.recipient(),
                AssetAmount::new(RED, funding.note.v1 - primary.v2),
            ),
        ];
        let (stmt, _) = bed.run(&request);
        out.push(stmt);
        let nf = primitives::prf_nf(&shared, &primary.rho);
        responded.push((offer_idx, nf));
    }

    // --- past the threshold ------------------------------------------------
    bed.ledger.advance_block(2); // height 3 > bt 2

    // --- case 2: alice cancels exchange C ----------------------------------
    {
        let (pair, secret) = &offers[0];
        let shared = shared_of(pair, secret);
        let mut request = bed.base_request(CaseId::CancelByInitiator);
        request.inputs = [
            InputSpec {
                note: pair[0].note,
                a_sk: shared,
                path: bed.ledger.tree().path(pair[0].position).unwrap(),
            },
            InputSpec {
                note: pair[1].note,
                a_sk: bed.alice.key,
                path: bed.ledger.tree().path(pair[1].position).unwrap(),
            },
        ];
        let split = bed.rng.gen_range(0..=give_c);
        request.outputs = [
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, split)),
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, give_c - split)),
        ];
        let (stmt, _) = bed.run(&request);
        out.push(stmt);
    }

    // --- case 4: alice completes exchange A --------------------------------
    {
        let (pair, secret) = &offers[1];
        let (_, nf) = responded[0];
        let shared = shared_of(pair, secret);
        let (_, path_4) = bed.ledger.scan_nullifier(&nf).unwrap();
        let evidence = PairEvidence {
            n_old_3: pair[0].note,
            a_sk_3: shared,
            path_3: bed.ledger.tree().path(pair[0].position).unwrap(),
            path_4,
            nf_old_3: nf,
        };
        let mut request = bed.base_request(CaseId::CompleteByInitiator);
        request.inputs = [
            InputSpec {
                note: pair[1].note,
                a_sk: bed.alice.key,
                path: bed.ledger.tree().path(pair[1].position).unwrap(),
            },
            bed.dummy_input(),
        ];
        let split = bed.rng.gen_range(0..=ask_a);
        request.outputs = [
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(RED, split)),
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(RED, ask_a - split)),
        ];
        request.evidence = Some(evidence);
        let (stmt, _) = bed.run(&request);
        out.push(stmt);
    }

    // --- case 5: alice completes A2 while answering carol's B --------------
    {
        let (pair_a2, secret_a2) = &offers[2];
        let (_, nf_a2) = responded[1];
        let shared_a2 = shared_of(pair_a2, secret_a2);
        let primary_b = offer_b[0].note;
        let shared_b = primitives::derive_shared_spending_key(b"pact-b", &primary_b.pair_tag).unwrap();
        let (_, path_4) = bed.ledger.scan_nullifier(&nf_a2).unwrap();
        let evidence = PairEvidence {
            n_old_3: pair_a2[0].note,
            a_sk_3: shared_a2,
            path_3: bed.ledger.tree().path(pair_a2[0].position).unwrap(),
            path_4,
            nf_old_3: nf_a2,
        };
        let mut request = bed.base_request(CaseId::CompleteSecondScenario);
        request.inputs = [
            InputSpec {
                note: pair_a2[1].note,
                a_sk: bed.alice.key,
                path: bed.ledger.tree().path(pair_a2[1].position).unwrap(),
            },
            InputSpec {
                note: primary_b,
                a_sk: shared_b,
                path: bed.ledger.tree().path(offer_b[0].position).unwrap(),
            },
        ];
        request.outputs = [
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(RED, ask_a2 - ask_b)),
            OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, give_b)),
        ];
        request.evidence = Some(evidence);
        let (stmt, _) = bed.run(&request);
        out.push(stmt);
    }

    out
}

// small borrow helpers so `bed.mint(&bed.alice, ...)` does not fight the
// borrow checker
impl Bed {
    pub fn alice_ref(&self) -> Party {
        Party {
            key: self.alice.key,
            addr: self.alice.addr,
        }
    }

    pub fn bob_ref(&self) -> Party {
        Party {
            key: self.bob.key,
            addr: self.bob.addr,
        }
    }

    pub fn carol_ref(&self) -> Party {
        Party {
            key: self.carol.key,
            addr: self.carol.addr,
        }
    }
}

pub type Mutation = (
    &'static str,
    fn(&mut PublicInput, &mut Witness, &mut ChaCha20Rng),
);

/// Single-field statement mutations exercised by the equivalence suites.
pub fn mutations() -> Vec<Mutation> {
    vec![
        ("rt-random", |chi, _, rng| chi.rt = Digest32::random(rng)),
        ("nf1-random", |chi, _, rng| {
            chi.nf_old_1 = Digest32::random(rng)
        }),
        ("nf-swap", |chi, _, _| {
            std::mem::swap(&mut chi.nf_old_1, &mut chi.nf_old_2)
        }),
        ("cm1-random", |chi, _, rng| {
            chi.cm_new_1 = Digest32::random(rng)
        }),
        ("cm-swap", |chi, _, _| {
            std::mem::swap(&mut chi.cm_new_1, &mut chi.cm_new_2)
        }),
        ("hsig-random", |chi, _, rng| {
            chi.h_sig = Digest32::random(rng)
        }),
        ("block-up", |chi, _, _| {
            chi.block_n = chi.block_n.saturating_add(1)
        }),
        ("block-down", |chi, _, _| {
            chi.block_n = chi.block_n.saturating_sub(1)
        }),
        ("vpub-new-nonzero", |chi, _, _| {
            chi.v_pub_new = AssetAmount::new(7, 1)
        }),
        ("vpub-old-nonzero", |chi, _, _| {
            chi.v_pub_old = AssetAmount::new(7, 1)
        }),
        ("old1-value", |_, omega, _| {
            omega.n_old_1.v1 = omega.n_old_1.v1.wrapping_add(1)
        }),
        ("old2-color", |_, omega, _| {
            omega.n_old_2.color1 = omega.n_old_2.color1.wrapping_add(1)
        }),
        ("old1-bt-up", |_, omega, _| {
            omega.n_old_1.bt = omega.n_old_1.bt.saturating_add(1)
        }),
        ("old2-bt-down", |_, omega, _| {
            omega.n_old_2.bt = omega.n_old_2.bt.saturating_sub(1)
        }),
        ("old1-flag", |_, omega, _| omega.n_old_1.s ^= 1),
        ("new1-value", |_, omega, _| {
            omega.n_new_1.v1 = omega.n_new_1.v1.wrapping_add(1)
        }),
        ("new1-debt", |_, omega, _| {
            omega.n_new_1.v2 = omega.n_new_1.v2.wrapping_add(1)
        }),
        ("new2-flag", |_, omega, _| omega.n_new_2.s ^= 1),
        ("new1-gamma", |_, omega, rng| {
            omega.n_new_1.gamma = Digest32::random(rng)
        }),
        ("new2-rho", |_, omega, rng| {
            omega.n_new_2.rho = Digest32::random(rng)
        }),
        ("new1-tag", |_, omega, rng| {
            omega.n_new_1.pair_tag = Digest32::random(rng)
        }),
        ("dummy1-flip", |_, omega, _| omega.dummy_1 = !omega.dummy_1),
        ("phi-random", |_, omega, rng| {
            omega.phi = Digest32::random(rng)
        }),
        ("ask1-random", |_, omega, rng| {
            omega.a_sk_1 = SpendingKey(Digest32::random(rng).0)
        }),
        ("path1-pos", |_, omega, _| omega.path_1.pos ^= 1),
        ("path1-sibling", |_, omega, rng| {
            omega.path_1.siblings[0] = Digest32::random(rng)
        }),
        ("path3-pos", |_, omega, _| {
            omega.path_3.pos = omega.path_3.pos.wrapping_add(1)
        }),
        ("path4-sibling", |_, omega, rng| {
            omega.path_4.siblings[1] = Digest32::random(rng)
        }),
        ("nf3-random", |_, omega, rng| {
            omega.nf_old_3 = Digest32::random(rng)
        }),
        ("old3-tag", |_, omega, rng| {
            omega.n_old_3.pair_tag = Digest32::random(rng)
        }),
        ("old3-rho", |_, omega, rng| {
            omega.n_old_3.rho = Digest32::random(rng)
        }),
        ("input-swap", |_, omega, _| {
            std::mem::swap(&mut omega.n_old_1, &mut omega.n_old_2);
            std::mem::swap(&mut omega.path_1, &mut omega.path_2);
            std::mem::swap(&mut omega.a_sk_1, &mut omega.a_sk_2);
            let d = omega.dummy_1;
            omega.dummy_1 = omega.dummy_2;
            omega.dummy_2 = d;
        }),
    ]
}
