//! Independent reference implementation of the field-native hash, written
//! over arbitrary-precision integers with no shared code beyond the
//! published constants (prime, round-constant derivation, matrix, domain
//! encoding). The production limb-arithmetic path must agree everywhere,
//! and a handful of protocol values are frozen as regression vectors.

mod common;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use noteswap_core::digest::Digest32;
use noteswap_core::field::Fp;
use noteswap_core::hashc::{self, HcDomain, RATE, ROUNDS, STATE_WIDTH};
use noteswap_core::note::{commit_note, AssetAmount, Note};
use noteswap_core::primitives::{self, SpendingKey};

fn prime() -> BigUint {
    (BigUint::from(1u8) << 192u32) - (BigUint::from(1u8) << 64u32) - BigUint::from(1u8)
}

fn rc(round: usize, lane: usize, p: &BigUint) -> BigUint {
    let mut h = Sha256::new();
    h.update(b"noteswap.hc.rc.v1");
    h.update((round as u32).to_be_bytes());
    h.update([lane as u8]);
    BigUint::from_bytes_be(&h.finalize()) % p
}

fn permute_ref(state: &mut [BigUint; STATE_WIDTH], p: &BigUint) {
    for round in 0..ROUNDS {
        for (lane, s) in state.iter_mut().enumerate() {
            let x = (&*s + rc(round, lane, p)) % p;
            *s = (&x * &x % p) * &x % p;
        }
        let sum = (&state[0] + &state[1] + &state[2]) % p;
        for s in state.iter_mut() {
            *s = (&*s + &sum) % p;
        }
    }
}

fn hash_ref(domain: u64, inputs: &[BigUint], p: &BigUint) -> BigUint {
    let iv = (BigUint::from(domain) << 64u32) + BigUint::from(inputs.len());
    let mut state = [BigUint::from(0u8), BigUint::from(0u8), iv];
    if inputs.is_empty() {
        permute_ref(&mut state, p);
        return state[0].clone();
    }
    for chunk in inputs.chunks(RATE) {
        for (i, x) in chunk.iter().enumerate() {
            state[i] = (&state[i] + x) % p;
        }
        permute_ref(&mut state, p);
    }
    state[0].clone()
}

fn to_big(x: Fp) -> BigUint {
    BigUint::from_bytes_be(&x.to_be24())
}

fn digest_big(d: &Digest32) -> BigUint {
    BigUint::from_bytes_be(&d.0) % prime()
}

fn limbs_big(d: &Digest32) -> [BigUint; 2] {
    [
        BigUint::from_bytes_be(&d.0[0..16]),
        BigUint::from_bytes_be(&d.0[16..32]),
    ]
}

#[test]
fn sponge_agrees_with_bigint_reference() {
    let p = prime();
    let mut rng = ChaCha20Rng::seed_from_u64(60);
    for len in 0..=12usize {
        for _ in 0..20 {
            let inputs: Vec<Fp> = (0..len).map(|_| Fp::random(&mut rng)).collect();
            let big_inputs: Vec<BigUint> = inputs.iter().map(|x| to_big(*x)).collect();
            for domain in [
                HcDomain::Addr,
                HcDomain::Nullifier,
                HcDomain::Rho,
                HcDomain::Commitment,
                HcDomain::MerkleNode,
                HcDomain::EmptyLeaf,
            ] {
                let ours = to_big(hashc::hc_hash(domain, &inputs));
                let reference = hash_ref(domain as u64, &big_inputs, &p);
                assert_eq!(ours, reference, "domain {domain:?} len {len}");
            }
        }
    }
}

#[test]
fn protocol_values_match_reference_derivations() {
    let p = prime();
    let a_sk = SpendingKey([0x01; 32]);
    let rho = Digest32([0x02; 32]);

    // nullifier: H(nf; a_sk.hi, a_sk.lo, rho)
    let nf = primitives::prf_nf(&a_sk, &rho);
    let limbs = limbs_big(&Digest32(a_sk.0));
    let expect = hash_ref(
        HcDomain::Nullifier as u64,
        &[limbs[0].clone(), limbs[1].clone(), digest_big(&rho)],
        &p,
    );
    assert_eq!(BigUint::from_bytes_be(&nf.0), expect);

    // address: H(addr; a_sk.hi, a_sk.lo, 0)
    let a_pk = primitives::derive_address(&a_sk).a_pk;
    let expect = hash_ref(
        HcDomain::Addr as u64,
        &[limbs[0].clone(), limbs[1].clone(), BigUint::from(0u8)],
        &p,
    );
    assert_eq!(BigUint::from_bytes_be(&a_pk.0), expect);

    // output seed: H(rho; index, phi.hi, phi.lo, h_sig.hi, h_sig.lo)
    let phi = Digest32([0x03; 32]);
    let h_sig = Digest32([0x04; 32]);
    let out = primitives::prf_rho(&phi, 2, &h_sig).unwrap();
    let phi_l = limbs_big(&phi);
    let hs_l = limbs_big(&h_sig);
    let expect = hash_ref(
        HcDomain::Rho as u64,
        &[
            BigUint::from(2u8),
            phi_l[0].clone(),
            phi_l[1].clone(),
            hs_l[0].clone(),
            hs_l[1].clone(),
        ],
        &p,
    );
    assert_eq!(BigUint::from_bytes_be(&out.0), expect);

    // merkle node: H(node; left, right)
    let left = hashc::fp_to_digest(Fp::from_u64(11));
    let right = hashc::fp_to_digest(Fp::from_u64(22));
    let node = hashc::hc_node(&left, &right);
    let expect = hash_ref(
        HcDomain::MerkleNode as u64,
        &[digest_big(&left), digest_big(&right)],
        &p,
    );
    assert_eq!(BigUint::from_bytes_be(&node.0), expect);
}

#[test]
fn commitment_of_the_worked_example_note_matches_reference() {
    // The 5-green-with-7-red-debt primary note, fully pinned inputs.
    let note = Note::new(
        Digest32([0x11; 32]),
        0,
        AssetAmount::new(3, 5),
        AssetAmount::new(2, 7),
        10,
        hashc::fp_to_digest(Fp::from_u64(1001)),
        hashc::fp_to_digest(Fp::from_u64(1002)),
        Digest32([0x22; 32]),
    )
    .unwrap();
    let p = prime();
    let tag = limbs_big(&note.pair_tag);
    let inputs = vec![
        digest_big(&note.a_pk),
        BigUint::from(note.s),
        BigUint::from(note.color1),
        BigUint::from(note.v1),
        BigUint::from(note.color2),
        BigUint::from(note.v2),
        BigUint::from(note.bt),
        digest_big(&note.rho),
        digest_big(&note.gamma),
        tag[0].clone(),
        tag[1].clone(),
    ];
    let expect = hash_ref(HcDomain::Commitment as u64, &inputs, &p);
    assert_eq!(BigUint::from_bytes_be(&commit_note(&note).0), expect);
    // Frozen regression vector, computed with this reference.
    assert_eq!(
        commit_note(&note).to_hex(),
        FROZEN_WORKED_EXAMPLE_COMMITMENT
    );
}

// Computed once with the bigint reference above; pins the permutation,
// round constants and encoding against accidental drift.
const FROZEN_WORKED_EXAMPLE_COMMITMENT: &str =
    "0000000000000000057f8c2a3d3ee0ab7e170586498a0984e7cdcd66965dd8a9";

#[test]
fn frozen_primitive_vectors() {
    let a_sk = SpendingKey([0x01; 32]);
    let rho = Digest32([0x02; 32]);
    assert_eq!(primitives::prf_nf(&a_sk, &rho).to_hex(), FROZEN_NF);
    assert_eq!(
        primitives::derive_address(&a_sk).a_pk.to_hex(),
        FROZEN_A_PK
    );
    assert_eq!(
        primitives::prf_rho(&Digest32([0x03; 32]), 1, &Digest32([0x04; 32]))
            .unwrap()
            .to_hex(),
        FROZEN_RHO_1
    );
    assert_eq!(
        primitives::prf_spend_auth(&a_sk, 1, &Digest32([0x04; 32]))
            .unwrap()
            .to_hex(),
        FROZEN_SPEND_AUTH
    );
    assert_eq!(
        Digest32(
            primitives::derive_shared_spending_key(b"shared", &Digest32([0x04; 32]))
                .unwrap()
                .0
        )
        .to_hex(),
        FROZEN_SHARED_KEY
    );
    assert_eq!(hashc::hc_empty_leaf().to_hex(), FROZEN_EMPTY_LEAF);
}

const FROZEN_NF: &str =
    "0000000000000000ebeb6edf276e20397337ae187810f28edd443e84982948eb";
const FROZEN_A_PK: &str =
    "00000000000000006ac85e77b709ef07845d9589a2f79822d1c00f1b69abb27c";
const FROZEN_RHO_1: &str =
    "000000000000000083e8a0caa68dc92bc01b8446b710c5564d02369ccf3f528c";
const FROZEN_SPEND_AUTH: &str =
    "a5e6a6d6dbb0e0c301c92cf6e3f798b09d9b646bc909cea0eb7033059e41ad9d";
const FROZEN_SHARED_KEY: &str =
    "daf1fffcc99e4c6cef7dd63f9eb536a2ff368a979cd888befa34c3ea7ea3119e";
const FROZEN_EMPTY_LEAF: &str =
    "0000000000000000fa8ba22ba59b6615aef5d486e0a7647efb60741b2e23f992";
