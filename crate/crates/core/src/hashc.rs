//! Field-native sponge hash.
//!
//! Every value the proving circuit makes a statement about — note
//! commitments, nullifiers, Merkle nodes, spend-address derivation, output
//! serial seeds — is hashed with this function, so the same computation can
//! be evaluated natively and re-checked constraint-by-constraint inside the
//! circuit. SHA-256 stays on the byte-level paths (transaction binding,
//! signatures, proof authenticators, note encryption) that are never proven.
//!
//! Construction: a width-3 sponge (rate 2, capacity 1) over F_p with
//! `ROUNDS` full rounds per permutation. Each round adds a round constant,
//! applies the cube s-box to every lane, and mixes with the circulant
//! matrix I + J. Round constants are derived from SHA-256 so the whole
//! permutation is reproducible from this file alone.

use std::sync::OnceLock;

use sha2::{Digest as _, Sha256};

use crate::digest::Digest32;
use crate::field::Fp;

pub const STATE_WIDTH: usize = 3;
pub const RATE: usize = 2;
pub const ROUNDS: usize = 32;

/// Domain tags, one per hash role. A tag is bound into the sponge capacity
/// together with the input length, so no two roles share a hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum HcDomain {
    Addr = 0,
    Nullifier = 1,
    Rho = 2,
    Commitment = 5,
    MerkleNode = 6,
    EmptyLeaf = 7,
}

fn round_constants() -> &'static [[Fp; STATE_WIDTH]; ROUNDS] {
    static RC: OnceLock<[[Fp; STATE_WIDTH]; ROUNDS]> = OnceLock::new();
    RC.get_or_init(|| {
        let mut rc = [[Fp::ZERO; STATE_WIDTH]; ROUNDS];
        for (r, row) in rc.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                let mut h = Sha256::new();
                h.update(b"noteswap.hc.rc.v1");
                h.update((r as u32).to_be_bytes());
                h.update([i as u8]);
                let bytes: [u8; 32] = h.finalize().into();
                *slot = Fp::from_be32_reduced(&bytes);
            }
        }
        rc
    })
}

/// Round constants for one round, shared with the in-circuit gadget.
pub fn round_constant(round: usize) -> [Fp; STATE_WIDTH] {
    round_constants()[round]
}

#[inline]
fn cube(x: Fp) -> Fp {
    x * x * x
}

/// Mix with the circulant matrix I + J: out_i = s_i + (s_0 + s_1 + s_2).
#[inline]
fn mix(state: &mut [Fp; STATE_WIDTH]) {
    let sum = state[0] + state[1] + state[2];
    for s in state.iter_mut() {
        *s = *s + sum;
    }
}

pub fn permute(state: &mut [Fp; STATE_WIDTH]) {
    let rc = round_constants();
    for row in rc.iter() {
        for i in 0..STATE_WIDTH {
            state[i] = cube(state[i] + row[i]);
        }
        mix(state);
    }
}

/// Initial capacity element: binds the domain tag and the input length.
pub fn capacity_iv(domain: HcDomain, input_len: usize) -> Fp {
    Fp::from_u128(((domain as u64 as u128) << 64) | input_len as u128)
}

/// Absorbs `inputs` in rate-sized chunks and squeezes one element.
pub fn hc_hash(domain: HcDomain, inputs: &[Fp]) -> Fp {
    let mut state = [Fp::ZERO, Fp::ZERO, capacity_iv(domain, inputs.len())];
    if inputs.is_empty() {
        permute(&mut state);
        return state[0];
    }
    for chunk in inputs.chunks(RATE) {
        for (i, x) in chunk.iter().enumerate() {
            state[i] = state[i] + *x;
        }
        permute(&mut state);
    }
    state[0]
}

/// Splits a 32-byte digest into two field elements (hi and lo 128 bits);
/// injective for all 256-bit strings. Used for full-range digests (SHA-256
/// outputs, raw secrets) that do not fit in one field element.
pub fn digest_limbs(d: &Digest32) -> [Fp; 2] {
    let hi = u128::from_be_bytes(d.0[0..16].try_into().unwrap());
    let lo = u128::from_be_bytes(d.0[16..32].try_into().unwrap());
    [Fp::from_u128(hi), Fp::from_u128(lo)]
}

/// Interprets a digest as a single field element by reduction. Injective on
/// canonical field-element digests (every hash output in this crate); full
/// 256-bit digests lose nothing we rely on, since only canonical values
/// flow through the positions that use this encoding.
pub fn digest_fp(d: &Digest32) -> Fp {
    Fp::from_be32_reduced(&d.0)
}

/// Encodes a field element as a 32-byte digest (big-endian, zero padded).
pub fn fp_to_digest(x: Fp) -> Digest32 {
    let mut out = [0u8; 32];
    out[8..32].copy_from_slice(&x.to_be24());
    Digest32(out)
}

/// Inverse of [`fp_to_digest`]; fails if the digest is not a canonical
/// field-element encoding.
pub fn digest_to_fp(d: &Digest32) -> Option<Fp> {
    if d.0[0..8] != [0u8; 8] {
        return None;
    }
    Fp::from_be24(d.0[8..32].try_into().unwrap())
}

/// a_pk derivation: PRF over the spending key with a zero argument.
pub fn hc_prf_addr(a_sk_limbs: [Fp; 2]) -> Fp {
    hc_hash(HcDomain::Addr, &[a_sk_limbs[0], a_sk_limbs[1], Fp::ZERO])
}

/// Nullifier PRF over (spending key, rho). rho is always a canonical
/// field-element digest, so it takes one slot.
pub fn hc_prf_nf(a_sk_limbs: [Fp; 2], rho: Fp) -> Fp {
    hc_hash(HcDomain::Nullifier, &[a_sk_limbs[0], a_sk_limbs[1], rho])
}

/// Output serial seed PRF over (index, phi, h_sig); index is 1 or 2.
pub fn hc_prf_rho(index: u8, phi_limbs: [Fp; 2], h_sig_limbs: [Fp; 2]) -> Fp {
    hc_hash(
        HcDomain::Rho,
        &[
            Fp::from_u64(index as u64),
            phi_limbs[0],
            phi_limbs[1],
            h_sig_limbs[0],
            h_sig_limbs[1],
        ],
    )
}

/// Interior Merkle node hash, domain-separated from leaf values. Tree
/// leaves and nodes are canonical field-element digests, so each side takes
/// one slot and a node costs a single permutation.
pub fn hc_node(left: &Digest32, right: &Digest32) -> Digest32 {
    fp_to_digest(hc_hash(
        HcDomain::MerkleNode,
        &[digest_fp(left), digest_fp(right)],
    ))
}

/// Default value for an unoccupied leaf slot.
pub fn hc_empty_leaf() -> Digest32 {
    fp_to_digest(hc_hash(HcDomain::EmptyLeaf, &[]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn determinism_and_domain_separation() {
        let xs = [Fp::from_u64(1), Fp::from_u64(2)];
        assert_eq!(hc_hash(HcDomain::Nullifier, &xs), hc_hash(HcDomain::Nullifier, &xs));
        assert_ne!(hc_hash(HcDomain::Nullifier, &xs), hc_hash(HcDomain::Rho, &xs));
        assert_ne!(hc_hash(HcDomain::Addr, &xs), hc_hash(HcDomain::Commitment, &xs));
    }

    #[test]
    fn length_binding() {
        // [x] and [x, 0] must hash differently: the IV carries the length.
        let x = Fp::from_u64(42);
        assert_ne!(
            hc_hash(HcDomain::Commitment, &[x]),
            hc_hash(HcDomain::Commitment, &[x, Fp::ZERO])
        );
    }

    #[test]
    fn digest_limb_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = Digest32::random(&mut rng);
            let l = digest_limbs(&d);
            let mut back = [0u8; 32];
            back[0..16].copy_from_slice(&l[0].to_be24()[8..24]);
            back[16..32].copy_from_slice(&l[1].to_be24()[8..24]);
            assert_eq!(Digest32(back), d);
        }
    }

    #[test]
    fn fp_digest_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x = Fp::random(&mut rng);
            assert_eq!(digest_to_fp(&fp_to_digest(x)), Some(x));
        }
        // Non-canonical digests are rejected.
        let full = Digest32([0xff; 32]);
        assert_eq!(digest_to_fp(&full), None);
    }

    #[test]
    fn randomized_collision_absence() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            let x = Fp::random(&mut rng);
            let y = Fp::random(&mut rng);
            let h = hc_hash(HcDomain::Commitment, &[x, y]);
            assert!(seen.insert(h.to_be24()), "collision in randomized corpus");
        }
    }
}
