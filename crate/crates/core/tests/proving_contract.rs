//! Mock proving backend contract: completeness, constant proof size,
//! witness independence, forgery resistance and the issue-log soundness
//! instrumentation.

mod common;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use common::{statement_corpus, Bed, GREEN};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use noteswap_core::digest::Digest32;
use noteswap_core::note::AssetAmount;
use noteswap_core::proving::{Proof, ProveError, PROOF_LEN};
use noteswap_core::transactions::{prepare_joinsplit, CaseId, OutputSpec};

#[test]
fn prove_verify_roundtrip_and_chi_binding() {
    let corpus = statement_corpus(200);
    let bed = Bed::new(200); // fresh params with the same circuit shape
    let params = bed.ledger.params();
    for stmt in &corpus {
        // The corpus was proven under its own bed's keys; re-prove here.
        let proof = params.pk_joinsplit.prove(&stmt.chi, &stmt.omega).unwrap();
        assert_eq!(proof.0.len(), PROOF_LEN);
        assert!(params.vk_joinsplit.verify(&stmt.chi, &proof));
        // any single-byte chi perturbation invalidates the proof
        let mut chi = stmt.chi.clone();
        chi.block_n ^= 1;
        assert!(!params.vk_joinsplit.verify(&chi, &proof));
    }
}

#[test]
fn forged_random_proofs_never_verify() {
    let corpus = statement_corpus(201);
    let bed = Bed::new(201);
    let params = bed.ledger.params();
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let chi = &corpus[0].chi;
    for _ in 0..1000 {
        let mut bytes = [0u8; PROOF_LEN];
        rng.fill_bytes(&mut bytes);
        assert!(!params.vk_joinsplit.verify(chi, &Proof(bytes)));
    }
}

#[test]
fn proof_depends_on_public_input_only() {
    // Two witnesses for the same chi: the second input is a dummy, so its
    // membership path is unconstrained and can be anything.
    let mut bed = Bed::new(202);
    let note = bed.mint(&bed.alice_ref(), GREEN, 9);
    let mut request = bed.base_request(CaseId::DefaultPayment);
    request.inputs = [bed.input(&note), bed.dummy_input()];
    request.outputs = [
        OutputSpec::plain(bed.bob.recipient(), AssetAmount::new(GREEN, 9)),
        OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, 0)),
    ];
    let prep = prepare_joinsplit(&request, &mut bed.rng).unwrap();
    let pk = &bed.ledger.params().pk_joinsplit;

    let mut omega_a = prep.omega.clone();
    let mut omega_b = prep.omega.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for s in omega_a.path_2.siblings.iter_mut() {
        *s = Digest32::random(&mut rng);
    }
    for s in omega_b.path_2.siblings.iter_mut() {
        *s = Digest32::random(&mut rng);
    }
    // also vary the unused evidence fields
    omega_b.n_old_3.gamma = Digest32::random(&mut rng);

    let pa = pk.prove(&prep.chi, &omega_a).unwrap();
    let pb = pk.prove(&prep.chi, &omega_b).unwrap();
    assert_eq!(pa.0, pb.0, "proof bytes must be a function of chi alone");
}

#[test]
fn refusal_carries_the_failing_constraint() {
    let mut bed = Bed::new(203);
    let note = bed.mint(&bed.alice_ref(), GREEN, 9);
    let mut request = bed.base_request(CaseId::DefaultPayment);
    request.inputs = [bed.input(&note), bed.dummy_input()];
    request.outputs = [
        OutputSpec::plain(bed.bob.recipient(), AssetAmount::new(GREEN, 9)),
        OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, 0)),
    ];
    let prep = prepare_joinsplit(&request, &mut bed.rng).unwrap();
    // imbalance the books: the value-conservation constraint must refuse
    let mut omega = prep.omega.clone();
    omega.n_new_1.v1 += 1;
    match bed.ledger.params().pk_joinsplit.prove(&prep.chi, &omega) {
        Err(ProveError::Unsatisfied { constraint, label }) => {
            assert!(!label.is_empty());
            assert!(constraint < bed.ledger.params().pk_joinsplit.circuit().num_constraints());
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn every_verifying_proof_was_issued_by_a_prove_call() {
    // Soundness at the process level: instrument the proving key with an
    // issue log, run a corpus, and check that every proof the verifier
    // accepts is in the log for exactly that public input.
    let mut bed = Bed::new(204);
    let log = Arc::new(Mutex::new(HashSet::new()));
    let pk = bed
        .ledger
        .params()
        .pk_joinsplit
        .clone()
        .with_issue_log(log.clone());
    let vk = bed.ledger.params().vk_joinsplit.clone();

    let note = bed.mint(&bed.alice_ref(), GREEN, 5);
    let mut request = bed.base_request(CaseId::DefaultPayment);
    request.inputs = [bed.input(&note), bed.dummy_input()];
    request.outputs = [
        OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, 2)),
        OutputSpec::plain(bed.alice.recipient(), AssetAmount::new(GREEN, 3)),
    ];
    let prep = prepare_joinsplit(&request, &mut bed.rng).unwrap();
    let proof = pk.prove(&prep.chi, &prep.omega).unwrap();
    assert!(vk.verify(&prep.chi, &proof));

    let key = noteswap_core::primitives::crh(&prep.chi.canonical_encoding());
    let log = log.lock().unwrap();
    assert!(
        log.contains(&(key, proof.0)),
        "verifying proof missing from the issue log"
    );
    assert_eq!(log.len(), 1);
}
