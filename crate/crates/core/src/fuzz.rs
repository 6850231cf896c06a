//! Randomized exchange schedules for the fairness and balance suites.
//!
//! Each session gets a fresh ledger and an independent rng derived from the
//! master seed and the session index, so results do not depend on execution
//! order: the parallel (rayon) and sequential paths produce identical
//! reports, and re-running with the same seed reproduces the report
//! byte-for-byte.
//!
//! A session initiates an exchange with randomized colors, amounts and
//! threshold, then walks the block clock while the counterparty tries to
//! respond at a random height (sometimes too late, sometimes underfunded)
//! and the initiator tries to cancel at a random height (sometimes too
//! early). Whatever the interleaving, the session must end Completed or
//! Cancelled, never both ways and never stuck.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::exchange::{ExchangeError, ExchangeSession, OwnedNote, PollOutcome, Role, SessionState};
use crate::ledger::Ledger;
use crate::note::AssetAmount;
use crate::primitives::{self, PaymentAddress, SpendingKey};
use crate::proving::{setup, SetupParams};
use crate::scenario::Auditor;
use crate::transactions::{build_mint, Recipient};

/// Tree depth used by fuzz ledgers; sessions stay tiny.
pub const FUZZ_DEPTH: usize = 8;

/// How one randomized session ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionVerdict {
    Completed,
    Cancelled,
    /// Both the response and the cancellation were accepted: fairness
    /// broken (must never happen).
    BothAccepted,
    /// The session could reach neither terminal state (must never happen).
    NeitherReachable,
    /// A conservation or bookkeeping invariant failed.
    InvariantViolation,
}

/// Aggregated outcome counts of a fuzz run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzReport {
    pub sessions: u64,
    pub completed: u64,
    pub cancelled: u64,
    pub both_accepted: u64,
    pub neither_reachable: u64,
    pub invariant_violations: u64,
    /// Adversarial re-spends attempted and correctly turned away.
    pub rejected_double_spends: u64,
}

impl FuzzReport {
    pub fn is_fair(&self) -> bool {
        self.both_accepted == 0 && self.neither_reachable == 0 && self.invariant_violations == 0
    }
}

impl std::fmt::Display for FuzzReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "sessions              {}", self.sessions)?;
        writeln!(f, "completed             {}", self.completed)?;
        writeln!(f, "cancelled             {}", self.cancelled)?;
        writeln!(f, "both-accepted         {}", self.both_accepted)?;
        writeln!(f, "neither-reachable     {}", self.neither_reachable)?;
        writeln!(f, "invariant-violations  {}", self.invariant_violations)?;
        write!(f, "rejected-double-spends {}", self.rejected_double_spends)
    }
}

/// How to shard sessions across workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Fan sessions out over the rayon pool (falls back to sequential when
    /// the `parallel` feature is off).
    Parallel,
    Sequential,
}

fn split_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over (seed, index) so per-session streams are independent.
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct FuzzParty {
    key: SpendingKey,
    addr: PaymentAddress,
}

impl FuzzParty {
    fn new(rng: &mut ChaCha20Rng) -> FuzzParty {
        let key = SpendingKey::random(rng);
        let addr = primitives::derive_address(&key);
        FuzzParty { key, addr }
    }
}

struct SessionTally {
    verdict: SessionVerdict,
    rejected_double_spends: u64,
}

/// Runs `count` randomized sessions and aggregates the verdicts.
pub fn run_random_schedules(count: u64, seed: u64) -> FuzzReport {
    run_random_schedules_with_mode(count, seed, ExecutionMode::Parallel)
}

pub fn run_random_schedules_with_mode(count: u64, seed: u64, mode: ExecutionMode) -> FuzzReport {
    run_random_schedules_at_depth(count, seed, FUZZ_DEPTH, mode)
}

pub fn run_random_schedules_at_depth(
    count: u64,
    seed: u64,
    depth: usize,
    mode: ExecutionMode,
) -> FuzzReport {
    // One circuit build shared by every session; the params clone is an Arc
    // bump.
    let params = setup(depth, &mut ChaCha20Rng::seed_from_u64(seed));
    let run_one = |i: u64| run_session(split_seed(seed, i), depth, params.clone());
    let tallies: Vec<SessionTally> = match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(run_one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        ExecutionMode::Parallel => (0..count).map(run_one).collect(),
        ExecutionMode::Sequential => (0..count).map(run_one).collect(),
    };
    let mut report = FuzzReport {
        sessions: count,
        ..FuzzReport::default()
    };
    for tally in tallies {
        match tally.verdict {
            SessionVerdict::Completed => report.completed += 1,
            SessionVerdict::Cancelled => report.cancelled += 1,
            SessionVerdict::BothAccepted => report.both_accepted += 1,
            SessionVerdict::NeitherReachable => report.neither_reachable += 1,
            SessionVerdict::InvariantViolation => report.invariant_violations += 1,
        }
        report.rejected_double_spends += tally.rejected_double_spends;
    }
    report
}

/// One randomized session against its own fresh ledger.
fn run_session(seed: u64, depth: usize, params: SetupParams) -> SessionTally {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ledger = Ledger::new(depth, params);
    let mut auditor = Auditor::default();
    let mut rejected_double_spends = 0u64;

    let alice = FuzzParty::new(&mut rng);
    let bob = FuzzParty::new(&mut rng);

    // Randomized exchange parameters.
    let give_color = rng.gen_range(1..=6u32);
    let ask_color = loop {
        let c = rng.gen_range(1..=6u32);
        if c != give_color {
            break c;
        }
    };
    let give = AssetAmount::new(give_color, rng.gen_range(1..=50u64));
    let ask = AssetAmount::new(ask_color, rng.gen_range(1..=50u64));
    let bt = rng.gen_range(1..=6u32);

    // Funding: the initiator gets exact denominations (one or two notes);
    // the counterparty is usually solvent, sometimes short.
    let mint_to = |party: &FuzzParty,
                       color: u32,
                       value: u64,
                       ledger: &mut Ledger,
                       rng: &mut ChaCha20Rng,
                       auditor: &mut Auditor|
     -> OwnedNote {
        let (tx, note) =
            build_mint(&Recipient::from_address(&party.addr), color, value, rng).unwrap();
        let position = ledger.apply_mint(&tx).unwrap();
        auditor.track(note, party.key);
        OwnedNote { note, position }
    };
    let alice_funding: Vec<OwnedNote> = if give.amount > 1 && rng.gen_bool(0.5) {
        let a = rng.gen_range(1..give.amount);
        vec![
            mint_to(&alice, give.color, a, &mut ledger, &mut rng, &mut auditor),
            mint_to(&alice, give.color, give.amount - a, &mut ledger, &mut rng, &mut auditor),
        ]
    } else {
        vec![mint_to(&alice, give.color, give.amount, &mut ledger, &mut rng, &mut auditor)]
    };
    let bob_solvent = rng.gen_bool(0.85);
    let bob_value = if bob_solvent {
        ask.amount + rng.gen_range(0..=10u64)
    } else {
        rng.gen_range(0..ask.amount)
    };
    let bob_funding = mint_to(&bob, ask.color, bob_value, &mut ledger, &mut rng, &mut auditor);

    let secret = seed.to_be_bytes();
    let mut alice_session = ExchangeSession::new(Role::Initiator, give, ask, bt, &secret);
    let mut bob_session = ExchangeSession::new(Role::Counterparty, give, ask, bt, &secret);
    if alice_session
        .initiate(&mut ledger, &alice_funding, &alice.key, &alice.addr, &mut rng)
        .is_err()
    {
        return SessionTally {
            verdict: SessionVerdict::InvariantViolation,
            rejected_double_spends,
        };
    }
    {
        let primary = *alice_session.primary_note().unwrap();
        let shared = primitives::derive_shared_spending_key(&secret, &primary.pair_tag).unwrap();
        auditor.track(primary, shared);
        auditor.track(*alice_session.sibling_note().unwrap(), alice.key);
    }
    if bob_session.observe_offer(&mut ledger).is_err() {
        return SessionTally {
            verdict: SessionVerdict::InvariantViolation,
            rejected_double_spends,
        };
    }

    // Randomized interleaving around the threshold.
    let respond_height = rng.gen_range(0..=bt + 2);
    let cancel_height = rng.gen_range(bt.saturating_sub(1)..=bt + 3);
    let horizon = bt + 4;

    let mut respond_accepted = false;
    let mut cancel_accepted = false;
    let mut audit_ok = true;

    let audit = |ledger: &Ledger, auditor: &Auditor, ok: &mut bool| {
        if auditor.check_conservation(ledger).is_err() {
            *ok = false;
        }
    };

    for height in 0..=horizon {
        if height > 0 {
            ledger.advance_block(1);
        }
        // Bob moves first at his chosen height; order within a height is
        // itself randomized when both fire together.
        let bob_turn = height == respond_height;
        let alice_turn = height == cancel_height;
        let bob_first = !alice_turn || rng.gen_bool(0.5);
        for actor in [bob_first, !bob_first] {
            if actor && bob_turn {
                let result = bob_session.respond(
                    &mut ledger,
                    &bob_funding,
                    &bob.key,
                    &bob.addr,
                    &mut rng,
                );
                if let Ok(tx) = &result {
                    respond_accepted = true;
                    for (note, _) in ledger
                        .scan_receive(&bob.addr.enc_sk, &bob.key)
                        .into_iter()
                        .filter(|(n, _)| n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
                    {
                        auditor.track(note, bob.key);
                    }
                    // An immediate replay-style second spend of the shared
                    // primary must be turned away.
                    let mut clone_session =
                        ExchangeSession::new(Role::Counterparty, give, ask, bt, &secret);
                    if clone_session.observe_offer(&mut ledger).is_ok() {
                        match clone_session.respond(
                            &mut ledger,
                            &bob_funding,
                            &bob.key,
                            &bob.addr,
                            &mut rng,
                        ) {
                            Err(ExchangeError::Rejected(
                                crate::ledger::RejectReason::DuplicateNullifier,
                            ))
                            | Err(ExchangeError::Build(_)) => rejected_double_spends += 1,
                            Err(_) => {}
                            Ok(_) => audit_ok = false,
                        }
                    }
                }
                audit(&ledger, &auditor, &mut audit_ok);
            }
            if !actor && alice_turn {
                let result =
                    alice_session.cancel(&mut ledger, &alice.key, &alice.addr, &mut rng);
                if let Ok(tx) = &result {
                    cancel_accepted = true;
                    for (note, _) in ledger
                        .scan_receive(&alice.addr.enc_sk, &alice.key)
                        .into_iter()
                        .filter(|(n, _)| n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
                    {
                        auditor.track(note, alice.key);
                    }
                }
                audit(&ledger, &auditor, &mut audit_ok);
            }
        }
    }

    // Terminal phase: whatever happened above, the initiator must be able
    // to finish the exchange now that the threshold has passed.
    if alice_session.state == SessionState::Offered {
        match alice_session.poll_counterparty(&ledger) {
            Ok(PollOutcome::Responded { .. }) => {}
            Ok(PollOutcome::Expired) | Ok(PollOutcome::Pending) => {
                if let Ok(tx) =
                    alice_session.cancel(&mut ledger, &alice.key, &alice.addr, &mut rng)
                {
                    cancel_accepted = true;
                    for (note, _) in ledger
                        .scan_receive(&alice.addr.enc_sk, &alice.key)
                        .into_iter()
                        .filter(|(n, _)| n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
                    {
                        auditor.track(note, alice.key);
                    }
                }
            }
            Err(_) => {}
        }
    }
    if alice_session.state == SessionState::Responded {
        let split = if ask.amount > 1 && rng.gen_bool(0.5) {
            let a = rng.gen_range(0..=ask.amount);
            Some((a, ask.amount - a))
        } else {
            None
        };
        if let Ok(tx) =
            alice_session.complete(&mut ledger, &alice.key, &alice.addr, split, &mut rng)
        {
            for (note, _) in ledger
                .scan_receive(&alice.addr.enc_sk, &alice.key)
                .into_iter()
                .filter(|(n, _)| n.cm == tx.cm_new_1 || n.cm == tx.cm_new_2)
            {
                auditor.track(note, alice.key);
            }
        }
    }
    audit(&ledger, &auditor, &mut audit_ok);

    let verdict = if !audit_ok {
        SessionVerdict::InvariantViolation
    } else if respond_accepted && cancel_accepted {
        SessionVerdict::BothAccepted
    } else if alice_session.state == SessionState::Completed {
        SessionVerdict::Completed
    } else if alice_session.state == SessionState::Cancelled {
        SessionVerdict::Cancelled
    } else {
        SessionVerdict::NeitherReachable
    };
    SessionTally {
        verdict,
        rejected_double_spends,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_run_is_fair_and_deterministic() {
        let a = run_random_schedules(12, 7);
        assert_eq!(a.sessions, 12);
        assert!(a.is_fair(), "report: {a}");
        assert!(a.completed + a.cancelled == 12);
        let b = run_random_schedules(12, 7);
        assert_eq!(a, b);
        let c = run_random_schedules_with_mode(12, 7, ExecutionMode::Sequential);
        assert_eq!(a, c, "parallel and sequential runs must agree");
    }
}
