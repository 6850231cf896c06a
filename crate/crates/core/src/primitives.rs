//! Byte-level cryptographic primitives.
//!
//! The collision-resistant hash is SHA-256. Pseudo-random functions are
//! domain-separated by a single leading tag byte so no two roles can collide
//! on byte-identical payloads. Roles whose statements are proven in-circuit
//! (nullifiers, address derivation, output serial seeds, commitments) are
//! backed by the field-native hash in [`crate::hashc`]; everything here
//! stays on the never-proven byte paths.
//!
//! The signature scheme is a deterministic hash-based one-time signature
//! (Lamport with a compressed public key). Every transaction signs exactly
//! one message under a fresh keypair, which is the regime where a one-time
//! scheme is strongly unforgeable. Note encryption is a key-committing
//! authenticated scheme under hash-derived keys standing in for real
//! public-key encryption; decryption failure means "not addressed to this
//! wallet".

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::digest::Digest32;
use crate::field::Fp;
use crate::hashc;

/// Domain-separation tag bytes for the PRF roles.
pub const TAG_ADDR: u8 = 0x00;
pub const TAG_NF: u8 = 0x01;
pub const TAG_RHO: u8 = 0x02;
pub const TAG_SPEND_AUTH: u8 = 0x03;
pub const TAG_SHARED: u8 = 0x04;
pub const TAG_CM: u8 = 0x05;

// Plumbing tags (signatures, encryption, proof MAC) live above 0x0f.
const TAG_SIG_SK: u8 = 0x11;
const TAG_SIG_LEAF: u8 = 0x12;
const TAG_SIG_PK: u8 = 0x13;
const TAG_SIG_MSG: u8 = 0x14;
const TAG_ENC_STREAM: u8 = 0x15;
const TAG_ENC_MAC: u8 = 0x16;
const TAG_ENC_SK: u8 = 0x17;
const TAG_ENC_PK: u8 = 0x18;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("note index out of range (must be 1 or 2)")]
    IndexOutOfRange,
    #[error("shared secret must be non-empty")]
    EmptySharedSecret,
}

/// Decryption failure signals "not addressed to this wallet".
#[derive(Debug, Error, PartialEq, Eq)]
#[error("ciphertext not addressed to this key")]
pub struct NotAddressed;

/// Collision-resistant hash: SHA-256.
pub fn crh(data: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(data);
    Digest32(h.finalize().into())
}

fn crh_parts(parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest32(h.finalize().into())
}

/// HMAC-SHA256 (RFC 2104), used for the proof authenticator and the
/// note-encryption tag.
pub fn hmac_sha256(key: &[u8], msg: &[u8]) -> Digest32 {
    const BLOCK: usize = 64;
    let mut k = [0u8; BLOCK];
    if key.len() > BLOCK {
        k[..32].copy_from_slice(crh(key).as_bytes());
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let mut ipad = [0x36u8; BLOCK];
    let mut opad = [0x5cu8; BLOCK];
    for i in 0..BLOCK {
        ipad[i] ^= k[i];
        opad[i] ^= k[i];
    }
    let inner = crh_parts(&[&ipad, msg]);
    crh_parts(&[&opad, inner.as_bytes()])
}

// ---------------------------------------------------------------------------
// Spending keys and addresses
// ---------------------------------------------------------------------------

/// Spending key: a 32-byte secret, either uniformly random or derived from
/// an exchange shared secret.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpendingKey(pub [u8; 32]);

impl SpendingKey {
    pub fn random(rng: &mut impl rand::RngCore) -> SpendingKey {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        SpendingKey(b)
    }

    pub fn limbs(&self) -> [Fp; 2] {
        hashc::digest_limbs(&Digest32(self.0))
    }
}

impl std::fmt::Debug for SpendingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpendingKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EncPublicKey(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncSecretKey(pub [u8; 32]);

impl std::fmt::Debug for EncSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EncSecretKey(..)")
    }
}

/// Payment address bundle: the public spend hash plus the note-encryption
/// keypair, all derived deterministically from the spending key.
#[derive(Clone, Copy, Debug)]
pub struct PaymentAddress {
    pub a_pk: Digest32,
    pub enc_pk: EncPublicKey,
    pub enc_sk: EncSecretKey,
}

/// Nullifier PRF: field-native, provable in-circuit.
pub fn prf_nf(a_sk: &SpendingKey, rho: &Digest32) -> Digest32 {
    hashc::fp_to_digest(hashc::hc_prf_nf(a_sk.limbs(), hashc::digest_fp(rho)))
}

/// Output serial seed PRF over (phi, index, h_sig); index must be 1 or 2.
/// Field-native, provable in-circuit.
pub fn prf_rho(phi: &Digest32, index: u8, h_sig: &Digest32) -> Result<Digest32, PrimitiveError> {
    if index != 1 && index != 2 {
        return Err(PrimitiveError::IndexOutOfRange);
    }
    Ok(hashc::fp_to_digest(hashc::hc_prf_rho(
        index,
        hashc::digest_limbs(phi),
        hashc::digest_limbs(h_sig),
    )))
}

/// Spend-authorization digest h_i binding the signature key to knowledge of
/// the spending key. Never proven in-circuit, so it stays on SHA-256.
pub fn prf_spend_auth(
    a_sk: &SpendingKey,
    index: u8,
    h_sig: &Digest32,
) -> Result<Digest32, PrimitiveError> {
    if index != 1 && index != 2 {
        return Err(PrimitiveError::IndexOutOfRange);
    }
    Ok(crh_parts(&[
        &[TAG_SPEND_AUTH, index],
        &a_sk.0,
        h_sig.as_bytes(),
    ]))
}

/// Both exchange parties derive the identical spending key from the
/// out-of-band shared secret and the initiating transaction's h_sig.
pub fn derive_shared_spending_key(
    shared_secret: &[u8],
    h_sig: &Digest32,
) -> Result<SpendingKey, PrimitiveError> {
    if shared_secret.is_empty() {
        return Err(PrimitiveError::EmptySharedSecret);
    }
    let d = crh_parts(&[&[TAG_SHARED], shared_secret, h_sig.as_bytes()]);
    Ok(SpendingKey(d.0))
}

/// Derives the payment address for a spending key. The spend hash a_pk is
/// field-native (its validity is an in-circuit statement); the encryption
/// keypair is byte-level plumbing.
pub fn derive_address(a_sk: &SpendingKey) -> PaymentAddress {
    let a_pk = hashc::fp_to_digest(hashc::hc_prf_addr(a_sk.limbs()));
    let enc_sk = EncSecretKey(crh_parts(&[&[TAG_ENC_SK], &a_sk.0]).0);
    let enc_pk = enc_public_key(&enc_sk);
    PaymentAddress { a_pk, enc_pk, enc_sk }
}

fn enc_public_key(enc_sk: &EncSecretKey) -> EncPublicKey {
    EncPublicKey(crh_parts(&[&[TAG_ENC_PK], &enc_sk.0]).0)
}

// ---------------------------------------------------------------------------
// Authenticated note encryption
// ---------------------------------------------------------------------------

/// Ciphertext overhead: 16-byte nonce plus 32-byte authentication tag.
pub const ENC_OVERHEAD: usize = 48;

/// Encrypts a note plaintext to a recipient's encryption key. Ciphertext
/// length is `plaintext.len() + ENC_OVERHEAD` regardless of content.
pub fn encrypt_note(
    enc_pk: &EncPublicKey,
    plaintext: &[u8],
    rng: &mut impl rand::RngCore,
) -> Vec<u8> {
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    let mut out = Vec::with_capacity(plaintext.len() + ENC_OVERHEAD);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(plaintext);
    xor_keystream(enc_pk, &nonce, &mut out[16..]);
    let mac_key = crh_parts(&[&[TAG_ENC_MAC], &enc_pk.0]);
    let tag = hmac_sha256(mac_key.as_bytes(), &out);
    out.extend_from_slice(tag.as_bytes());
    out
}

/// Decrypts a note ciphertext; fails if it was not produced under the
/// matching encryption key or was tampered with.
pub fn decrypt_note(enc_sk: &EncSecretKey, ciphertext: &[u8]) -> Result<Vec<u8>, NotAddressed> {
    if ciphertext.len() < ENC_OVERHEAD {
        return Err(NotAddressed);
    }
    let enc_pk = enc_public_key(enc_sk);
    let (body, tag) = ciphertext.split_at(ciphertext.len() - 32);
    let mac_key = crh_parts(&[&[TAG_ENC_MAC], &enc_pk.0]);
    if hmac_sha256(mac_key.as_bytes(), body).as_bytes() != tag {
        return Err(NotAddressed);
    }
    let nonce: [u8; 16] = body[..16].try_into().unwrap();
    let mut pt = body[16..].to_vec();
    xor_keystream(&enc_pk, &nonce, &mut pt);
    Ok(pt)
}

fn xor_keystream(enc_pk: &EncPublicKey, nonce: &[u8; 16], buf: &mut [u8]) {
    for (block_i, chunk) in buf.chunks_mut(32).enumerate() {
        let block = crh_parts(&[
            &[TAG_ENC_STREAM],
            &enc_pk.0,
            nonce,
            &(block_i as u32).to_be_bytes(),
        ]);
        for (b, k) in chunk.iter_mut().zip(block.as_bytes()) {
            *b ^= k;
        }
    }
}

// ---------------------------------------------------------------------------
// One-time signatures
// ---------------------------------------------------------------------------

/// Serialized signature length: 256 bit positions, 64 bytes each.
pub const SIG_LEN: usize = 256 * 64;
/// Serialized verification key length.
pub const PK_SIG_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SigVerifyKey(pub [u8; 32]);

#[derive(Clone, Copy)]
pub struct SigSigningKey {
    seed: [u8; 32],
}

#[derive(Clone, PartialEq, Eq)]
pub struct Signature(pub Vec<u8>);

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({} bytes)", self.0.len())
    }
}

fn sig_secret_part(seed: &[u8; 32], index: u16, bit: u8) -> Digest32 {
    crh_parts(&[&[TAG_SIG_SK], seed, &index.to_be_bytes(), &[bit]])
}

fn sig_leaf(part: &Digest32) -> Digest32 {
    crh_parts(&[&[TAG_SIG_LEAF], part.as_bytes()])
}

/// Creates a fresh one-time signature keypair.
pub fn sig_keypair(rng: &mut impl rand::RngCore) -> (SigVerifyKey, SigSigningKey) {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let sk = SigSigningKey { seed };
    let mut h = Sha256::new();
    h.update([TAG_SIG_PK]);
    for i in 0..256u16 {
        for bit in 0..2u8 {
            h.update(sig_leaf(&sig_secret_part(&seed, i, bit)).as_bytes());
        }
    }
    (SigVerifyKey(h.finalize().into()), sk)
}

/// Signs a message. Deterministic: signing the same message twice yields
/// byte-identical signatures. A keypair must sign at most one message.
pub fn sign(sk: &SigSigningKey, message: &[u8]) -> Signature {
    let digest = crh_parts(&[&[TAG_SIG_MSG], message]);
    let mut out = Vec::with_capacity(SIG_LEN);
    for i in 0..256u16 {
        let byte = digest.0[(i / 8) as usize];
        let bit = (byte >> (7 - (i % 8))) & 1;
        // Reveal the preimage for the message bit and the leaf hash for the
        // complementary slot so the verifier can rebuild the key commitment.
        out.extend_from_slice(sig_secret_part(&sk.seed, i, bit).as_bytes());
        out.extend_from_slice(sig_leaf(&sig_secret_part(&sk.seed, i, 1 - bit)).as_bytes());
    }
    Signature(out)
}

/// Verifies a signature over exactly `message`; malformed bytes yield false.
pub fn verify_sig(pk: &SigVerifyKey, message: &[u8], signature: &Signature) -> bool {
    if signature.0.len() != SIG_LEN {
        return false;
    }
    let digest = crh_parts(&[&[TAG_SIG_MSG], message]);
    let mut h = Sha256::new();
    h.update([TAG_SIG_PK]);
    for i in 0..256usize {
        let byte = digest.0[i / 8];
        let bit = (byte >> (7 - (i % 8))) & 1;
        let part = &signature.0[i * 64..i * 64 + 32];
        let other_leaf = &signature.0[i * 64 + 32..i * 64 + 64];
        let revealed_leaf = sig_leaf(&Digest32::from_slice(part).unwrap());
        if bit == 0 {
            h.update(revealed_leaf.as_bytes());
            h.update(other_leaf);
        } else {
            h.update(other_leaf);
            h.update(revealed_leaf.as_bytes());
        }
    }
    h.finalize().as_slice() == pk.0
}

/// h_sig binds the input nullifiers to the transaction signature key.
pub fn compute_h_sig(nf1: &Digest32, nf2: &Digest32, pk_sig: &SigVerifyKey) -> Digest32 {
    crh_parts(&[nf1.as_bytes(), nf2.as_bytes(), &pk_sig.0])
}
