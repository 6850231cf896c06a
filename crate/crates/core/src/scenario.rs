//! Scripted scenario runner: line-oriented scripts driving multi-party
//! schedules over a fresh ledger, with per-step expectations, an omniscient
//! auditor and deterministic trace emission.
//!
//! Script format: one action per line, `#` starts a comment. Header lines
//! `seed N` and `depth N` may precede the first action.
//!
//! ```text
//! party alice
//! mint alice green 3
//! initiate x1 alice bob give green 5 ask red 7 bt 10
//! respond x1
//! advance 11
//! complete x1
//! assert_balance alice red 7
//! attempt_double_spend bob            # expects reject duplicate-nullifier
//! ```
//!
//! Any action may end with `expect accept` or `expect reject <code>`;
//! adversarial `attempt_*` actions default to their expected rejection.
//! Colors are small integers or the aliases green=3, red=2, yellow=4,
//! blue=5.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::digest::Digest32;
use crate::exchange::{ExchangeError, ExchangeSession, OwnedNote, Role};
use crate::ledger::{Ledger, MintReject, RejectReason};
use crate::note::{AssetAmount, Note};
use crate::primitives::{self, PaymentAddress, SpendingKey};
use crate::proving::{setup, Proof, SetupParams, PROOF_LEN};
use crate::transactions::{
    build_joinsplit, build_mint, prepare_joinsplit, CaseId, InputSpec, JoinSplitRequest,
    OutputSpec, PairEvidence, Recipient, TxError, MEMO_BYTES,
};

pub const DEFAULT_DEPTH: usize = 16;

pub fn color_id(token: &str) -> Option<u32> {
    match token {
        "red" => Some(2),
        "green" => Some(3),
        "yellow" => Some(4),
        "blue" => Some(5),
        _ => token.parse().ok().filter(|&c| c != 0),
    }
}

// ---------------------------------------------------------------------------
// Script model
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    Accept,
    Reject(String),
}

#[derive(Clone, Debug)]
pub enum Action {
    Party {
        name: String,
    },
    Mint {
        party: String,
        color: u32,
        value: u64,
    },
    Pay {
        from: String,
        to: String,
        color: u32,
        value: u64,
    },
    Advance {
        blocks: u32,
    },
    Initiate {
        session: String,
        initiator: String,
        counterparty: String,
        give: AssetAmount,
        ask: AssetAmount,
        bt: u32,
    },
    Respond {
        session: String,
    },
    Cancel {
        session: String,
    },
    Complete {
        session: String,
        split: Option<(u64, u64)>,
    },
    AttemptDoubleSpend {
        party: String,
    },
    AttemptSiblingAlone {
        session: String,
    },
    AttemptForgedProof {
        party: String,
    },
    AssertBalance {
        party: String,
        color: u32,
        value: u64,
    },
}

#[derive(Clone, Debug)]
pub struct Step {
    pub line: usize,
    pub action: Action,
    pub expect: Expectation,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub depth: usize,
    pub steps: Vec<Step>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: expected {expected}, got {got}")]
    Expectation {
        line: usize,
        expected: String,
        got: String,
    },
    #[error("line {line}: invariant violated: {msg}")]
    Invariant { line: usize, msg: String },
}

impl ScenarioError {
    /// Process exit code: 1 expectation failure, 2 invariant violation,
    /// 3 parse error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Expectation { .. } => 1,
            ScenarioError::Invariant { .. } => 2,
            ScenarioError::Parse { .. } => 3,
        }
    }
}

pub fn parse_scenario(src: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario {
        seed: 0,
        depth: DEFAULT_DEPTH,
        steps: Vec::new(),
    };
    let err = |line: usize, msg: &str| ScenarioError::Parse {
        line,
        msg: msg.to_string(),
    };
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = body.split_whitespace().collect();
        // trailing expectation clause
        let mut expect = None;
        if let Some(pos) = tokens.iter().position(|&t| t == "expect") {
            let clause = tokens.split_off(pos);
            expect = Some(match clause {
                ref c if c.len() == 2 && c[1] == "accept" => Expectation::Accept,
                ref c if c.len() == 3 && c[1] == "reject" => Expectation::Reject(c[2].to_string()),
                _ => return Err(err(line, "expect clause must be `expect accept` or `expect reject <code>`")),
            });
        }
        let parse_u64 = |t: &str, what: &str| -> Result<u64, ScenarioError> {
            t.parse().map_err(|_| err(line, &format!("bad {what}: {t}")))
        };
        let parse_color = |t: &str| -> Result<u32, ScenarioError> {
            color_id(t).ok_or_else(|| err(line, &format!("bad color: {t}")))
        };
        let action = match tokens.as_slice() {
            ["seed", n] => {
                scenario.seed = parse_u64(n, "seed")?;
                continue;
            }
            ["depth", n] => {
                scenario.depth = parse_u64(n, "depth")? as usize;
                continue;
            }
            ["party", name] => Action::Party {
                name: name.to_string(),
            },
            ["mint", party, color, value] => Action::Mint {
                party: party.to_string(),
                color: parse_color(color)?,
                value: parse_u64(value, "amount")?,
            },
            ["pay", from, to, color, value] => Action::Pay {
                from: from.to_string(),
                to: to.to_string(),
                color: parse_color(color)?,
                value: parse_u64(value, "amount")?,
            },
            ["advance", n] => Action::Advance {
                blocks: parse_u64(n, "block count")? as u32,
            },
            ["initiate", session, initiator, counterparty, "give", gc, gv, "ask", ac, av, "bt", bt] => {
                Action::Initiate {
                    session: session.to_string(),
                    initiator: initiator.to_string(),
                    counterparty: counterparty.to_string(),
                    give: AssetAmount::new(parse_color(gc)?, parse_u64(gv, "amount")?),
                    ask: AssetAmount::new(parse_color(ac)?, parse_u64(av, "amount")?),
                    bt: parse_u64(bt, "threshold")? as u32,
                }
            }
            ["respond", session] => Action::Respond {
                session: session.to_string(),
            },
            ["cancel", session] => Action::Cancel {
                session: session.to_string(),
            },
            ["complete", session] => Action::Complete {
                session: session.to_string(),
                split: None,
            },
            ["complete", session, "split", a, b] => Action::Complete {
                session: session.to_string(),
                split: Some((parse_u64(a, "split")?, parse_u64(b, "split")?)),
            },
            ["attempt_double_spend", party] => Action::AttemptDoubleSpend {
                party: party.to_string(),
            },
            ["attempt_sibling_alone", session] => Action::AttemptSiblingAlone {
                session: session.to_string(),
            },
            ["attempt_forged_proof", party] => Action::AttemptForgedProof {
                party: party.to_string(),
            },
            ["assert_balance", party, color, value] => Action::AssertBalance {
                party: party.to_string(),
                color: parse_color(color)?,
                value: parse_u64(value, "amount")?,
            },
            _ => return Err(err(line, &format!("unrecognized action: {body}"))),
        };
        let expect = expect.unwrap_or_else(|| default_expectation(&action));
        scenario.steps.push(Step { line, action, expect });
    }
    Ok(scenario)
}

fn default_expectation(action: &Action) -> Expectation {
    match action {
        Action::AttemptDoubleSpend { .. } => {
            Expectation::Reject("duplicate-nullifier".to_string())
        }
        Action::AttemptSiblingAlone { .. } => Expectation::Reject("proof-invalid".to_string()),
        Action::AttemptForgedProof { .. } => Expectation::Reject("proof-invalid".to_string()),
        _ => Expectation::Accept,
    }
}

// ---------------------------------------------------------------------------
// Omniscient auditor
// ---------------------------------------------------------------------------

/// A plaintext view of one note in existence, with enough key material to
/// recompute its nullifier.
#[derive(Clone, Debug)]
struct TrackedNote {
    note: Note,
    a_sk: SpendingKey,
}

/// Test-only observer holding every plaintext note ever created; asserts
/// the per-color conservation equation after every step:
/// minted = unspent primary + unspent sibling - outstanding debt
///          + deshielded.
#[derive(Clone, Debug, Default)]
pub struct Auditor {
    notes: Vec<TrackedNote>,
}

impl Auditor {
    pub fn track(&mut self, note: Note, a_sk: SpendingKey) {
        self.notes.push(TrackedNote { note, a_sk });
    }

    pub fn check_conservation(&self, ledger: &Ledger) -> Result<(), String> {
        let mut primary: BTreeMap<u32, i128> = BTreeMap::new();
        let mut sibling: BTreeMap<u32, i128> = BTreeMap::new();
        let mut debt: BTreeMap<u32, i128> = BTreeMap::new();
        for tracked in &self.notes {
            let nf = primitives::prf_nf(&tracked.a_sk, &tracked.note.rho);
            if ledger.nullifier_spent(&nf) {
                continue;
            }
            let n = &tracked.note;
            if n.color1 != 0 {
                let target = if n.s == 1 { &mut sibling } else { &mut primary };
                *target.entry(n.color1).or_insert(0) += n.v1 as i128;
            }
            if n.v2 > 0 {
                *debt.entry(n.color2).or_insert(0) += n.v2 as i128;
            }
        }
        let mut colors: Vec<u32> = ledger.colors_seen().collect();
        colors.extend(primary.keys().chain(sibling.keys()).chain(debt.keys()));
        colors.sort_unstable();
        colors.dedup();
        for c in colors {
            let lhs = ledger.minted_supply(c) as i128;
            let rhs = primary.get(&c).copied().unwrap_or(0)
                + sibling.get(&c).copied().unwrap_or(0)
                - debt.get(&c).copied().unwrap_or(0)
                + ledger.deshielded_supply(c) as i128;
            if lhs != rhs {
                return Err(format!(
                    "color {c}: minted {lhs} != primary+sibling-debt+deshielded {rhs}"
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct Wallet {
    key: SpendingKey,
    addr: PaymentAddress,
    notes: Vec<OwnedNote>,
    spent: Vec<OwnedNote>,
}

impl Wallet {
    fn unspent_of_color(&self, color: u32) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.notes.len())
            .filter(|&i| self.notes[i].note.color1 == color)
            .collect();
        idx.sort_by_key(|&i| std::cmp::Reverse(self.notes[i].note.v1));
        idx
    }

    fn balance(&self, color: u32) -> u64 {
        self.notes
            .iter()
            .filter(|n| n.note.color1 == color && n.note.s == 0 && n.note.v2 == 0)
            .map(|n| n.note.v1)
            .sum()
    }
}

struct SessionPair {
    initiator: String,
    counterparty: String,
    init_side: ExchangeSession,
    counter_side: ExchangeSession,
}

/// Result of running a scenario to completion.
pub struct RunReport {
    pub trace: String,
    pub ledger_dump: String,
}

pub struct Engine {
    ledger: Ledger,
    rng: ChaCha20Rng,
    wallets: BTreeMap<String, Wallet>,
    sessions: BTreeMap<String, SessionPair>,
    auditor: Auditor,
    trace: String,
    /// Cross-check wallet views against ledger scans after each step;
    /// quadratic, so only scripted runs enable it.
    scan_cross_check: bool,
}

enum Outcome {
    Accept(String),
    Denied { stage: &'static str, code: String },
}

impl Outcome {
    fn reject(reason: RejectReason) -> Outcome {
        Outcome::Denied {
            stage: "reject",
            code: reason.code().to_string(),
        }
    }

    fn refuse(code: &str) -> Outcome {
        Outcome::Denied {
            stage: "refuse",
            code: code.to_string(),
        }
    }
}

fn tx_error_code(e: &TxError) -> String {
    match e {
        TxError::KeyMismatch => "key-mismatch".into(),
        TxError::SameNullifier => "duplicate-nullifier".into(),
        TxError::WrongCase { .. } => "wrong-case".into(),
        TxError::DisallowedCase => "disallowed-case".into(),
        TxError::MissingEvidence => "missing-evidence".into(),
        TxError::UnsupportedPublicValue => "unsupported-public-value".into(),
        TxError::ReservedColor => "reserved-color".into(),
        TxError::Note(_) => "malformed-note".into(),
        TxError::Primitive(_) => "primitive-error".into(),
        TxError::Prove(_) => "proving-refused".into(),
        TxError::Malformed(_) => "malformed".into(),
    }
}

fn exchange_error_code(e: &ExchangeError) -> String {
    match e {
        ExchangeError::InvalidState(_) => "invalid-state".into(),
        ExchangeError::FundingMismatch { .. } => "insufficient-funding".into(),
        ExchangeError::WrongColor => "wrong-color".into(),
        ExchangeError::DebtNotCovered { .. } => "debt-not-covered".into(),
        ExchangeError::PastThreshold { .. } => "past-threshold".into(),
        ExchangeError::BeforeThreshold { .. } => "before-threshold".into(),
        ExchangeError::AlreadyResponded => "already-responded".into(),
        ExchangeError::NoEvidence => "missing-evidence".into(),
        ExchangeError::OfferNotFound => "offer-not-found".into(),
        ExchangeError::Rejected(r) => r.code().into(),
        ExchangeError::Build(tx) => tx_error_code(tx),
    }
}

impl Engine {
    pub fn new(scenario: &Scenario) -> Engine {
        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let params = setup(scenario.depth, &mut rng);
        Engine::with_params(scenario, params, rng, true)
    }

    pub fn with_params(
        scenario: &Scenario,
        params: SetupParams,
        rng: ChaCha20Rng,
        scan_cross_check: bool,
    ) -> Engine {
        let mut trace = String::new();
        let _ = writeln!(
            trace,
            "init depth={} seed={}",
            scenario.depth, scenario.seed
        );
        Engine {
            ledger: Ledger::new(scenario.depth, params),
            rng,
            wallets: BTreeMap::new(),
            sessions: BTreeMap::new(),
            auditor: Auditor::default(),
            trace,
            scan_cross_check,
        }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn run(mut self, scenario: &Scenario) -> Result<RunReport, ScenarioError> {
        for step in &scenario.steps {
            self.execute_step(step)?;
        }
        Ok(RunReport {
            trace: self.trace,
            ledger_dump: self.ledger.dump(),
        })
    }

    fn wallet(&mut self, name: &str, line: usize) -> Result<&mut Wallet, ScenarioError> {
        self.wallets.get_mut(name).ok_or_else(|| ScenarioError::Parse {
            line,
            msg: format!("unknown party {name}"),
        })
    }

    fn ensure_party(&mut self, name: &str) {
        if self.wallets.contains_key(name) {
            return;
        }
        let key = SpendingKey::random(&mut self.rng);
        let addr = primitives::derive_address(&key);
        self.wallets.insert(
            name.to_string(),
            Wallet {
                key,
                addr,
                notes: Vec::new(),
                spent: Vec::new(),
            },
        );
    }

    fn execute_step(&mut self, step: &Step) -> Result<(), ScenarioError> {
        let outcome = self.perform(step)?;
        let (stage, detail) = match &outcome {
            Outcome::Accept(detail) => ("accept", detail.clone()),
            Outcome::Denied { stage, code } => (*stage, format!("code={code}")),
        };
        let head = action_trace_head(&step.action);
        if detail.is_empty() {
            let _ = writeln!(self.trace, "{head} {stage}");
        } else {
            let _ = writeln!(self.trace, "{head} {stage} {detail}");
        }
        // expectation check
        let matches = match (&step.expect, &outcome) {
            (Expectation::Accept, Outcome::Accept(_)) => true,
            (Expectation::Reject(code), Outcome::Denied { code: got, .. }) => code == got,
            _ => false,
        };
        if !matches {
            let got = match &outcome {
                Outcome::Accept(_) => "accept".to_string(),
                Outcome::Denied { code, .. } => format!("reject {code}"),
            };
            let expected = match &step.expect {
                Expectation::Accept => "accept".to_string(),
                Expectation::Reject(code) => format!("reject {code}"),
            };
            return Err(ScenarioError::Expectation {
                line: step.line,
                expected,
                got,
            });
        }
        // invariants after every step
        if let Err(msg) = self.auditor.check_conservation(&self.ledger) {
            return Err(ScenarioError::Invariant {
                line: step.line,
                msg,
            });
        }
        if self.scan_cross_check {
            self.cross_check_scans(step.line)?;
        }
        Ok(())
    }

    /// Wallet bookkeeping must agree with what ledger scanning reveals.
    fn cross_check_scans(&self, line: usize) -> Result<(), ScenarioError> {
        for (name, wallet) in &self.wallets {
            let scanned: Vec<Note> = self
                .ledger
                .scan_receive(&wallet.addr.enc_sk, &wallet.key)
                .into_iter()
                .filter(|(_, spendable)| *spendable)
                .map(|(n, _)| n)
                .collect();
            for owned in &wallet.notes {
                if !scanned.contains(&owned.note) {
                    return Err(ScenarioError::Invariant {
                        line,
                        msg: format!("wallet {name} holds a note the ledger scan cannot see"),
                    });
                }
            }
        }
        Ok(())
    }

    fn spend_from_wallet(&mut self, party: &str, positions: &[u64]) {
        let wallet = self.wallets.get_mut(party).expect("party exists");
        let mut kept = Vec::new();
        for owned in wallet.notes.drain(..) {
            if positions.contains(&owned.position) {
                wallet.spent.push(owned);
            } else {
                kept.push(owned);
            }
        }
        wallet.notes = kept;
    }

    fn perform(&mut self, step: &Step) -> Result<Outcome, ScenarioError> {
        let line = step.line;
        match &step.action {
            Action::Party { name } => {
                self.ensure_party(name);
                Ok(Outcome::Accept(String::new()))
            }
            Action::Mint {
                party,
                color,
                value,
            } => {
                self.ensure_party(party);
                let recipient = {
                    let wallet = self.wallet(party, line)?;
                    Recipient::from_address(&wallet.addr)
                };
                let (tx, note) = match build_mint(&recipient, *color, *value, &mut self.rng) {
                    Ok(ok) => ok,
                    Err(e) => return Ok(Outcome::refuse(&tx_error_code(&e))),
                };
                match self.ledger.apply_mint(&tx) {
                    Ok(pos) => {
                        let key = self.wallet(party, line)?.key;
                        self.auditor.track(note, key);
                        self.wallet(party, line)?
                            .notes
                            .push(OwnedNote { note, position: pos });
                        Ok(Outcome::Accept(format!("pos={pos}")))
                    }
                    Err(MintReject::ReservedColor) => Ok(Outcome::refuse("reserved-color")),
                    Err(MintReject::CommitmentMismatch) => {
                        Ok(Outcome::refuse("commitment-mismatch"))
                    }
                    Err(MintReject::TreeFull) => Ok(Outcome::refuse("tree-full")),
                }
            }
            Action::Advance { blocks } => {
                let height = self.ledger.advance_block(*blocks);
                Ok(Outcome::Accept(format!("height={height}")))
            }
            Action::Pay {
                from,
                to,
                color,
                value,
            } => self.do_pay(from, to, *color, *value, line),
            Action::Initiate {
                session,
                initiator,
                counterparty,
                give,
                ask,
                bt,
            } => self.do_initiate(session, initiator, counterparty, *give, *ask, *bt, line),
            Action::Respond { session } => self.do_respond(session, line),
            Action::Cancel { session } => self.do_cancel(session, line),
            Action::Complete { session, split } => self.do_complete(session, *split, line),
            Action::AttemptDoubleSpend { party } => self.do_double_spend(party, line),
            Action::AttemptSiblingAlone { session } => self.do_sibling_alone(session, line),
            Action::AttemptForgedProof { party } => self.do_forged_proof(party, line),
            Action::AssertBalance {
                party,
                color,
                value,
            } => {
                let actual = self.wallet(party, line)?.balance(*color);
                if actual == *value {
                    Ok(Outcome::Accept(String::new()))
                } else {
                    Err(ScenarioError::Expectation {
                        line,
                        expected: format!("balance {value}"),
                        got: format!("balance {actual}"),
                    })
                }
            }
        }
    }

    fn do_pay(
        &mut self,
        from: &str,
        to: &str,
        color: u32,
        value: u64,
        line: usize,
    ) -> Result<Outcome, ScenarioError> {
        self.ensure_party(from);
        self.ensure_party(to);
        let (funding, key) = {
            let wallet = self.wallet(from, line)?;
            let candidates = wallet.unspent_of_color(color);
            let mut picked: Vec<OwnedNote> = Vec::new();
            let mut sum = 0u64;
            for i in candidates {
                if sum >= value {
                    break;
                }
                sum += wallet.notes[i].note.v1;
                picked.push(wallet.notes[i].clone());
                if picked.len() == 2 {
                    break;
                }
            }
            if sum < value {
                return Ok(Outcome::refuse("insufficient-funding"));
            }
            (picked, wallet.key)
        };
        let change = funding.iter().map(|f| f.note.v1).sum::<u64>() - value;
        let (to_addr, from_addr) = (
            self.wallet(to, line)?.addr,
            self.wallet(from, line)?.addr,
        );
        let inputs =
            crate::exchange::inputs_with_dummy_padding(&self.ledger, &funding, &key, &mut self.rng);
        let request = JoinSplitRequest {
            rt: self.ledger.root(),
            block_n: self.ledger.block_height(),
            inputs,
            outputs: [
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: to_addr.a_pk,
                        enc_pk: to_addr.enc_pk,
                    },
                    AssetAmount::new(color, value),
                ),
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: from_addr.a_pk,
                        enc_pk: from_addr.enc_pk,
                    },
                    AssetAmount::new(color, change),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::DefaultPayment,
            evidence: None,
        };
        let (tx, outputs) =
            match build_joinsplit(&self.ledger.params().pk_joinsplit, &request, &mut self.rng) {
                Ok(ok) => ok,
                Err(e) => return Ok(Outcome::refuse(&tx_error_code(&e))),
            };
        match self.ledger.verify_and_append(&tx) {
            Ok(accepted) => {
                self.spend_from_wallet(from, &funding.iter().map(|f| f.position).collect::<Vec<_>>());
                let to_key = self.wallet(to, line)?.key;
                let from_key = key;
                self.auditor.track(outputs[0], to_key);
                self.auditor.track(outputs[1], from_key);
                self.wallet(to, line)?.notes.push(OwnedNote {
                    note: outputs[0],
                    position: accepted.positions[0],
                });
                if outputs[1].v1 > 0 {
                    self.wallet(from, line)?.notes.push(OwnedNote {
                        note: outputs[1],
                        position: accepted.positions[1],
                    });
                }
                Ok(Outcome::Accept(format!(
                    "pos={}",
                    fmt_positions(&accepted.positions)
                )))
            }
            Err(reason) => Ok(Outcome::reject(reason)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn do_initiate(
        &mut self,
        sid: &str,
        initiator: &str,
        counterparty: &str,
        give: AssetAmount,
        ask: AssetAmount,
        bt: u32,
        line: usize,
    ) -> Result<Outcome, ScenarioError> {
        self.ensure_party(initiator);
        self.ensure_party(counterparty);
        if self.sessions.contains_key(sid) {
            return Ok(Outcome::refuse("invalid-state"));
        }
        // Exact funding with at most two notes.
        let funding = {
            let wallet = self.wallet(initiator, line)?;
            let idx = wallet.unspent_of_color(give.color);
            let mut exact: Option<Vec<OwnedNote>> = None;
            for (k, &i) in idx.iter().enumerate() {
                if wallet.notes[i].note.v1 == give.amount {
                    exact = Some(vec![wallet.notes[i].clone()]);
                    break;
                }
                for &j in idx.iter().skip(k + 1) {
                    if wallet.notes[i].note.v1 + wallet.notes[j].note.v1 == give.amount {
                        exact = Some(vec![wallet.notes[i].clone(), wallet.notes[j].clone()]);
                        break;
                    }
                }
                if exact.is_some() {
                    break;
                }
            }
            match exact {
                Some(f) => f,
                None => return Ok(Outcome::refuse("insufficient-funding")),
            }
        };
        // The shared secret is per-session, agreed out of band.
        let secret = format!("secret:{sid}").into_bytes();
        let mut init_side = ExchangeSession::new(Role::Initiator, give, ask, bt, &secret);
        let (key, addr) = {
            let w = self.wallet(initiator, line)?;
            (w.key, w.addr)
        };
        match init_side.initiate(&mut self.ledger, &funding, &key, &addr, &mut self.rng) {
            Ok(_) => {}
            Err(e) => return Ok(Outcome::refuse(&exchange_error_code(&e))),
        }
        self.spend_from_wallet(
            initiator,
            &funding.iter().map(|f| f.position).collect::<Vec<_>>(),
        );
        // Track the pair: the primary under the shared key, the sibling
        // under the initiator's key.
        let primary = *init_side.primary_note().unwrap();
        let sibling = *init_side.sibling_note().unwrap();
        let shared_key =
            primitives::derive_shared_spending_key(&secret, &primary.pair_tag).unwrap();
        self.auditor.track(primary, shared_key);
        self.auditor.track(sibling, key);
        let mut counter_side = ExchangeSession::new(Role::Counterparty, give, ask, bt, &secret);
        counter_side
            .observe_offer(&mut self.ledger)
            .expect("offer was just appended");
        let ppos = self.ledger.commitment_path(&primary.cm).expect("appended").0;
        let spos = self.ledger.commitment_path(&sibling.cm).expect("appended").0;
        let detail = format!(
            "initiator={initiator} counterparty={counterparty} give={}:{} ask={}:{} bt={bt} pos={ppos},{spos}",
            give.color, give.amount, ask.color, ask.amount
        );
        self.sessions.insert(
            sid.to_string(),
            SessionPair {
                initiator: initiator.to_string(),
                counterparty: counterparty.to_string(),
                init_side,
                counter_side,
            },
        );
        Ok(Outcome::Accept(detail))
    }

    fn do_respond(&mut self, sid: &str, line: usize) -> Result<Outcome, ScenarioError> {
        let Some(pair) = self.sessions.get(sid) else {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("unknown session {sid}"),
            });
        };
        let counterparty = pair.counterparty.clone();
        let debt = pair.counter_side.ask;
        let funding = {
            let wallet = self.wallet(&counterparty, line)?;
            let idx = wallet.unspent_of_color(debt.color);
            match idx.first() {
                Some(&i) if wallet.notes[i].note.v1 >= debt.amount => wallet.notes[i].clone(),
                Some(&i) => {
                    // try anyway so the library-level error surfaces
                    wallet.notes[i].clone()
                }
                None => return Ok(Outcome::refuse("insufficient-funding")),
            }
        };
        let (key, addr) = {
            let w = self.wallet(&counterparty, line)?;
            (w.key, w.addr)
        };
        let pair = self.sessions.get_mut(sid).unwrap();
        match pair
            .counter_side
            .respond(&mut self.ledger, &funding, &key, &addr, &mut self.rng)
        {
            Ok(tx) => {
                self.spend_from_wallet(&counterparty, &[funding.position]);
                // received + change notes, both to the counterparty
                let received = self
                    .ledger
                    .scan_receive(&addr.enc_sk, &key)
                    .into_iter()
                    .filter(|(n, spendable)| *spendable && (n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2))
                    .collect::<Vec<_>>();
                let accepted_positions: Vec<u64> = received
                    .iter()
                    .map(|(n, _)| self.ledger.commitment_path(&n.cm).unwrap().0)
                    .collect();
                for (n, _) in &received {
                    self.auditor.track(*n, key);
                }
                let wallet = self.wallet(&counterparty, line)?;
                for ((n, _), pos) in received.iter().zip(&accepted_positions) {
                    if n.v1 > 0 {
                        wallet.notes.push(OwnedNote {
                            note: *n,
                            position: *pos,
                        });
                    }
                }
                Ok(Outcome::Accept(tx_positions(&self.ledger, &tx)))
            }
            Err(e) => Ok(Outcome::refuse(&exchange_error_code(&e))),
        }
    }

    fn do_cancel(&mut self, sid: &str, line: usize) -> Result<Outcome, ScenarioError> {
        let Some(pair) = self.sessions.get(sid) else {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("unknown session {sid}"),
            });
        };
        let initiator = pair.initiator.clone();
        let (key, addr) = {
            let w = self.wallet(&initiator, line)?;
            (w.key, w.addr)
        };
        let pair = self.sessions.get_mut(sid).unwrap();
        match pair
            .init_side
            .cancel(&mut self.ledger, &key, &addr, &mut self.rng)
        {
            Ok(tx) => {
                let recovered = self
                    .ledger
                    .scan_receive(&addr.enc_sk, &key)
                    .into_iter()
                    .filter(|(n, spendable)| {
                        *spendable && (n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
                    })
                    .collect::<Vec<_>>();
                for (n, _) in &recovered {
                    self.auditor.track(*n, key);
                    if n.v1 > 0 {
                        let pos = self.ledger.commitment_path(&n.cm).unwrap().0;
                        self.wallet(&initiator, line)?.notes.push(OwnedNote {
                            note: *n,
                            position: pos,
                        });
                    }
                }
                Ok(Outcome::Accept(tx_positions(&self.ledger, &tx)))
            }
            Err(e) => Ok(Outcome::refuse(&exchange_error_code(&e))),
        }
    }

    fn do_complete(
        &mut self,
        sid: &str,
        split: Option<(u64, u64)>,
        line: usize,
    ) -> Result<Outcome, ScenarioError> {
        let Some(pair) = self.sessions.get(sid) else {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("unknown session {sid}"),
            });
        };
        let initiator = pair.initiator.clone();
        let (key, addr) = {
            let w = self.wallet(&initiator, line)?;
            (w.key, w.addr)
        };
        let pair = self.sessions.get_mut(sid).unwrap();
        // completion rides on evidence from polling
        let _ = pair.init_side.poll_counterparty(&self.ledger);
        match pair
            .init_side
            .complete(&mut self.ledger, &key, &addr, split, &mut self.rng)
        {
            Ok(tx) => {
                let received = self
                    .ledger
                    .scan_receive(&addr.enc_sk, &key)
                    .into_iter()
                    .filter(|(n, spendable)| {
                        *spendable && (n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
                    })
                    .collect::<Vec<_>>();
                for (n, _) in &received {
                    self.auditor.track(*n, key);
                    if n.v1 > 0 {
                        let pos = self.ledger.commitment_path(&n.cm).unwrap().0;
                        self.wallet(&initiator, line)?.notes.push(OwnedNote {
                            note: *n,
                            position: pos,
                        });
                    }
                }
                Ok(Outcome::Accept(tx_positions(&self.ledger, &tx)))
            }
            Err(e) => Ok(Outcome::refuse(&exchange_error_code(&e))),
        }
    }

    /// Rebuild a spend of an already-spent note: the proof goes through
    /// (satisfiability does not know the nullifier set) and the ledger must
    /// reject with duplicate-nullifier.
    fn do_double_spend(&mut self, party: &str, line: usize) -> Result<Outcome, ScenarioError> {
        let (spent, key, addr) = {
            let wallet = self.wallet(party, line)?;
            let Some(spent) = wallet.spent.last().cloned() else {
                return Ok(Outcome::refuse("nothing-spent-yet"));
            };
            (spent, wallet.key, wallet.addr)
        };
        let inputs = crate::exchange::inputs_with_dummy_padding(
            &self.ledger,
            &[spent.clone()],
            &key,
            &mut self.rng,
        );
        let request = JoinSplitRequest {
            rt: self.ledger.root(),
            block_n: self.ledger.block_height(),
            inputs,
            outputs: [
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    spent.note.primary(),
                ),
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    AssetAmount::new(spent.note.color1, 0),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::DefaultPayment,
            evidence: None,
        };
        let (tx, _) =
            match build_joinsplit(&self.ledger.params().pk_joinsplit, &request, &mut self.rng) {
                Ok(ok) => ok,
                Err(e) => return Ok(Outcome::refuse(&tx_error_code(&e))),
            };
        match self.ledger.verify_and_append(&tx) {
            Ok(_) => Ok(Outcome::Accept(String::new())),
            Err(reason) => Ok(Outcome::reject(reason)),
        }
    }

    /// Spending a sibling without evidence must refuse at proving; a
    /// structurally complete forgery must be rejected by the ledger.
    fn do_sibling_alone(&mut self, sid: &str, line: usize) -> Result<Outcome, ScenarioError> {
        let Some(pair) = self.sessions.get(sid) else {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("unknown session {sid}"),
            });
        };
        let initiator = pair.initiator.clone();
        let Some(sibling) = pair.init_side.sibling_note().copied() else {
            return Ok(Outcome::refuse("invalid-state"));
        };
        let (key, addr) = {
            let w = self.wallet(&initiator, line)?;
            (w.key, w.addr)
        };
        let Some((sib_pos, _)) = self.ledger.commitment_path(&sibling.cm) else {
            return Ok(Outcome::refuse("invalid-state"));
        };
        let (dummy_note, dummy_key) = Note::dummy(&mut self.rng);
        let depth = self.ledger.tree().depth();
        let request = JoinSplitRequest {
            rt: self.ledger.root(),
            block_n: self.ledger.block_height(),
            inputs: [
                InputSpec {
                    note: sibling,
                    a_sk: key,
                    path: self.ledger.tree().path(sib_pos).unwrap(),
                },
                InputSpec {
                    note: dummy_note,
                    a_sk: dummy_key,
                    path: crate::merkle::MerklePath::placeholder(depth),
                },
            ],
            outputs: [
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    sibling.primary(),
                ),
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    AssetAmount::new(sibling.color1, 0),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::CompleteByInitiator,
            evidence: Some(PairEvidence {
                n_old_3: crate::transactions::placeholder_note(),
                a_sk_3: SpendingKey([0u8; 32]),
                path_3: crate::merkle::MerklePath::placeholder(depth),
                path_4: crate::merkle::MerklePath::placeholder(depth),
                nf_old_3: Digest32::ZERO,
            }),
        };
        // 1) proving refusal without valid evidence
        match build_joinsplit(&self.ledger.params().pk_joinsplit, &request, &mut self.rng) {
            Err(TxError::Prove(_)) => {}
            Ok(_) => {
                return Err(ScenarioError::Invariant {
                    line,
                    msg: "sibling-alone spend was proven".to_string(),
                })
            }
            Err(other) => {
                return Ok(Outcome::refuse(&tx_error_code(&other)));
            }
        }
        // 2) structural forgery with a fabricated proof
        let prep = match prepare_joinsplit(&request, &mut self.rng) {
            Ok(p) => p,
            Err(e) => return Ok(Outcome::refuse(&tx_error_code(&e))),
        };
        let mut proof_bytes = [0u8; PROOF_LEN];
        rand::RngCore::fill_bytes(&mut self.rng, &mut proof_bytes);
        let forged = prep.into_transaction_with_proof([0u8; MEMO_BYTES], Proof(proof_bytes));
        match self.ledger.verify_and_append(&forged) {
            Ok(_) => Err(ScenarioError::Invariant {
                line,
                msg: "forged sibling-alone spend was accepted".to_string(),
            }),
            Err(reason) => Ok(Outcome::reject(reason)),
        }
    }

    /// A valid transaction with one proof byte flipped must fail b1.
    fn do_forged_proof(&mut self, party: &str, line: usize) -> Result<Outcome, ScenarioError> {
        let (note, key, addr) = {
            let wallet = self.wallet(party, line)?;
            let Some(owned) = wallet.notes.first().cloned() else {
                return Ok(Outcome::refuse("insufficient-funding"));
            };
            (owned, wallet.key, wallet.addr)
        };
        let inputs = crate::exchange::inputs_with_dummy_padding(
            &self.ledger,
            &[note.clone()],
            &key,
            &mut self.rng,
        );
        let request = JoinSplitRequest {
            rt: self.ledger.root(),
            block_n: self.ledger.block_height(),
            inputs,
            outputs: [
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    note.note.primary(),
                ),
                OutputSpec::plain(
                    Recipient::Address {
                        a_pk: addr.a_pk,
                        enc_pk: addr.enc_pk,
                    },
                    AssetAmount::new(note.note.color1, 0),
                ),
            ],
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            memo: [0u8; MEMO_BYTES],
            intent: CaseId::DefaultPayment,
            evidence: None,
        };
        let (mut tx, _) =
            match build_joinsplit(&self.ledger.params().pk_joinsplit, &request, &mut self.rng) {
                Ok(ok) => ok,
                Err(e) => return Ok(Outcome::refuse(&tx_error_code(&e))),
            };
        tx.proof.0[0] ^= 0x01;
        match self.ledger.verify_and_append(&tx) {
            Ok(_) => Err(ScenarioError::Invariant {
                line,
                msg: "forged proof was accepted".to_string(),
            }),
            Err(reason) => Ok(Outcome::reject(reason)),
        }
    }
}

fn tx_positions(ledger: &Ledger, tx: &crate::transactions::JoinSplitTransaction) -> String {
    let cm1 = ledger.commitment_path(&tx.cm_new_1).map(|(p, _)| p);
    let cm2 = ledger.commitment_path(&tx.cm_new_2).map(|(p, _)| p);
    match (cm1, cm2) {
        (Some(a), Some(b)) => format!("pos={a},{b}"),
        _ => String::new(),
    }
}

fn fmt_positions(positions: &[u64; 4]) -> String {
    format!(
        "{},{},{},{}",
        positions[0], positions[1], positions[2], positions[3]
    )
}

fn action_trace_head(action: &Action) -> String {
    match action {
        Action::Party { name } => format!("party name={name}"),
        Action::Mint {
            party,
            color,
            value,
        } => format!("mint party={party} color={color} value={value}"),
        Action::Pay {
            from,
            to,
            color,
            value,
        } => format!("pay from={from} to={to} color={color} value={value}"),
        Action::Advance { blocks } => format!("advance blocks={blocks}"),
        Action::Initiate { session, .. } => format!("initiate session={session}"),
        Action::Respond { session } => format!("respond session={session}"),
        Action::Cancel { session } => format!("cancel session={session}"),
        Action::Complete { session, .. } => format!("complete session={session}"),
        Action::AttemptDoubleSpend { party } => format!("attempt_double_spend party={party}"),
        Action::AttemptSiblingAlone { session } => {
            format!("attempt_sibling_alone session={session}")
        }
        Action::AttemptForgedProof { party } => format!("attempt_forged_proof party={party}"),
        Action::AssertBalance {
            party,
            color,
            value,
        } => format!("assert_balance party={party} color={color} value={value}"),
    }
}

/// Parses and runs a scenario from source text.
pub fn run_scenario(src: &str) -> Result<RunReport, ScenarioError> {
    let scenario = parse_scenario(src)?;
    Engine::new(&scenario).run(&scenario)
}
