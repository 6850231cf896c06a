//! The extended multi-asset note: owner key, primary/sibling flag, primary
//! and debt (color, value) pairs, block-height threshold, nullifier seed,
//! trapdoor and pair tag.
//!
//! Serialization is a fixed 165-byte layout so every encrypted note
//! ciphertext has the same length regardless of content. The commitment is
//! the field-native hash of the same field sequence.

use thiserror::Error;

use crate::digest::Digest32;
use crate::field::Fp;
use crate::hashc::{self, HcDomain};
use crate::primitives::{self, SpendingKey};

/// Serialized note length: the 157-byte field layout plus 8 reserved zero
/// bytes, kept so all note plaintexts share one fixed shape.
pub const NOTE_BYTES: usize = 165;
const FIELDS_LEN: usize = 157;

/// A (color, amount) pair. Color 0 is reserved for dummy notes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AssetAmount {
    pub color: u32,
    pub amount: u64,
}

impl AssetAmount {
    pub fn new(color: u32, amount: u64) -> AssetAmount {
        AssetAmount { color, amount }
    }

    pub fn zero() -> AssetAmount {
        AssetAmount { color: 0, amount: 0 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NoteError {
    #[error("debt color and value must be zero together")]
    DebtMismatch,
    #[error("sibling notes carry no debt")]
    SiblingWithDebt,
    #[error("dummy notes must be all-zero with s = 0")]
    MalformedDummy,
    #[error("note flag must be 0 or 1")]
    BadFlag,
    #[error("serialized note must be exactly {NOTE_BYTES} bytes")]
    BadLength,
    #[error("reserved padding bytes must be zero")]
    BadPadding,
    #[error("spending key does not own this note")]
    KeyMismatch,
    #[error("exchange pair requires nonzero colors and amounts")]
    EmptyExchangeLeg,
}

/// A multi-asset private note. `cm` is always the commitment recomputed
/// from the other fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Note {
    pub a_pk: Digest32,
    /// 0 = primary, 1 = sibling.
    pub s: u8,
    pub color1: u32,
    pub v1: u64,
    pub color2: u32,
    pub v2: u64,
    pub bt: u32,
    pub rho: Digest32,
    pub gamma: Digest32,
    /// Shared by a matched note pair; equals the creating transaction's
    /// h_sig (zero for minted notes).
    pub pair_tag: Digest32,
    pub cm: Digest32,
}

impl Note {
    /// Validates the note invariants and computes the commitment.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a_pk: Digest32,
        s: u8,
        primary: AssetAmount,
        debt: AssetAmount,
        bt: u32,
        rho: Digest32,
        gamma: Digest32,
        pair_tag: Digest32,
    ) -> Result<Note, NoteError> {
        let mut note = Note {
            a_pk,
            s,
            color1: primary.color,
            v1: primary.amount,
            color2: debt.color,
            v2: debt.amount,
            bt,
            rho,
            gamma,
            pair_tag,
            cm: Digest32::ZERO,
        };
        note.validate()?;
        note.cm = commit_note(&note);
        Ok(note)
    }

    /// A dummy input note: color 0, zero values, fresh random seed and
    /// trapdoor. It never has a commitment on the ledger; its (unique)
    /// nullifier is still published when it pads a transaction.
    pub fn dummy(rng: &mut impl rand::RngCore) -> (Note, SpendingKey) {
        let a_sk = SpendingKey::random(rng);
        let a_pk = primitives::derive_address(&a_sk).a_pk;
        let note = Note::new(
            a_pk,
            0,
            AssetAmount::zero(),
            AssetAmount::zero(),
            0,
            hashc::fp_to_digest(Fp::random(rng)),
            hashc::fp_to_digest(Fp::random(rng)),
            Digest32::ZERO,
        )
        .expect("dummy note shape is always valid");
        (note, a_sk)
    }

    pub fn is_dummy(&self) -> bool {
        self.color1 == 0
    }

    pub fn is_sibling(&self) -> bool {
        self.s == 1
    }

    pub fn has_debt(&self) -> bool {
        self.v2 > 0
    }

    pub fn primary(&self) -> AssetAmount {
        AssetAmount::new(self.color1, self.v1)
    }

    pub fn debt(&self) -> AssetAmount {
        AssetAmount::new(self.color2, self.v2)
    }

    pub fn validate(&self) -> Result<(), NoteError> {
        if self.s > 1 {
            return Err(NoteError::BadFlag);
        }
        if (self.color2 == 0) != (self.v2 == 0) {
            return Err(NoteError::DebtMismatch);
        }
        if self.s == 1 && (self.color2 != 0 || self.v2 != 0) {
            return Err(NoteError::SiblingWithDebt);
        }
        if self.color1 == 0 && (self.v1 != 0 || self.color2 != 0 || self.v2 != 0 || self.s != 0) {
            return Err(NoteError::MalformedDummy);
        }
        Ok(())
    }

    /// The field-element sequence hashed by the commitment; mirrors the
    /// byte serialization order. a_pk, rho and gamma are canonical
    /// field-element digests and take one slot each; the pair tag is a full
    /// 256-bit value and takes two.
    pub fn field_encoding(&self) -> [Fp; 11] {
        let tag = hashc::digest_limbs(&self.pair_tag);
        [
            hashc::digest_fp(&self.a_pk),
            Fp::from_u64(self.s as u64),
            Fp::from_u64(self.color1 as u64),
            Fp::from_u64(self.v1),
            Fp::from_u64(self.color2 as u64),
            Fp::from_u64(self.v2),
            Fp::from_u64(self.bt as u64),
            hashc::digest_fp(&self.rho),
            hashc::digest_fp(&self.gamma),
            tag[0],
            tag[1],
        ]
    }
}

/// Commitment: field-native hash over the full field layout, hiding via
/// gamma and binding by collision resistance.
pub fn commit_note(note: &Note) -> Digest32 {
    hashc::fp_to_digest(hashc::hc_hash(HcDomain::Commitment, &note.field_encoding()))
}

/// Fixed-length serialization (commitment excluded): a_pk, s, color1, v1,
/// color2, v2, bt, rho, gamma, pair_tag, zero padding.
pub fn serialize_note(note: &Note) -> [u8; NOTE_BYTES] {
    let mut out = [0u8; NOTE_BYTES];
    out[0..32].copy_from_slice(note.a_pk.as_bytes());
    out[32] = note.s;
    out[33..37].copy_from_slice(&note.color1.to_be_bytes());
    out[37..45].copy_from_slice(&note.v1.to_be_bytes());
    out[45..49].copy_from_slice(&note.color2.to_be_bytes());
    out[49..57].copy_from_slice(&note.v2.to_be_bytes());
    out[57..61].copy_from_slice(&note.bt.to_be_bytes());
    out[61..93].copy_from_slice(note.rho.as_bytes());
    out[93..125].copy_from_slice(note.gamma.as_bytes());
    out[125..157].copy_from_slice(note.pair_tag.as_bytes());
    out
}

/// Inverse of [`serialize_note`]; rejects wrong lengths, nonzero padding
/// and invariant violations, and recomputes the commitment.
pub fn deserialize_note(bytes: &[u8]) -> Result<Note, NoteError> {
    if bytes.len() != NOTE_BYTES {
        return Err(NoteError::BadLength);
    }
    if bytes[FIELDS_LEN..].iter().any(|&b| b != 0) {
        return Err(NoteError::BadPadding);
    }
    Note::new(
        Digest32::from_slice(&bytes[0..32]).unwrap(),
        bytes[32],
        AssetAmount::new(
            u32::from_be_bytes(bytes[33..37].try_into().unwrap()),
            u64::from_be_bytes(bytes[37..45].try_into().unwrap()),
        ),
        AssetAmount::new(
            u32::from_be_bytes(bytes[45..49].try_into().unwrap()),
            u64::from_be_bytes(bytes[49..57].try_into().unwrap()),
        ),
        u32::from_be_bytes(bytes[57..61].try_into().unwrap()),
        Digest32::from_slice(&bytes[61..93]).unwrap(),
        Digest32::from_slice(&bytes[93..125]).unwrap(),
        Digest32::from_slice(&bytes[125..157]).unwrap(),
    )
}

/// A matched primary/sibling pair created at exchange initiation.
#[derive(Clone, Copy, Debug)]
pub struct NotePair {
    pub primary: Note,
    pub sibling: Note,
}

impl NotePair {
    pub fn validate(&self) -> Result<(), NoteError> {
        let p = &self.primary;
        let q = &self.sibling;
        p.validate()?;
        q.validate()?;
        if p.s != 0 || q.s != 1 {
            return Err(NoteError::BadFlag);
        }
        if p.pair_tag != q.pair_tag || p.bt != q.bt {
            return Err(NoteError::DebtMismatch);
        }
        if p.color2 != q.color1 || p.v2 != q.v1 || q.v2 != 0 {
            return Err(NoteError::DebtMismatch);
        }
        Ok(())
    }
}

/// Builds the primary/sibling pair for an exchange offer: the primary
/// carries the given asset plus the asked asset as debt and is owned by the
/// shared address; the sibling carries the asked asset and is owned by the
/// initiator.
#[allow(clippy::too_many_arguments)]
pub fn make_exchange_pair(
    a_pk_shared: Digest32,
    a_pk_self: Digest32,
    give: AssetAmount,
    ask: AssetAmount,
    bt: u32,
    h_sig: &Digest32,
    phi: &Digest32,
    rng: &mut impl rand::RngCore,
) -> Result<NotePair, NoteError> {
    if give.amount == 0 || ask.amount == 0 || give.color == 0 || ask.color == 0 {
        return Err(NoteError::EmptyExchangeLeg);
    }
    let rho_p = primitives::prf_rho(phi, 1, h_sig).expect("index 1 in range");
    let rho_q = primitives::prf_rho(phi, 2, h_sig).expect("index 2 in range");
    let primary = Note::new(
        a_pk_shared,
        0,
        give,
        ask,
        bt,
        rho_p,
        hashc::fp_to_digest(Fp::random(rng)),
        *h_sig,
    )?;
    let sibling = Note::new(
        a_pk_self,
        1,
        ask,
        AssetAmount::zero(),
        bt,
        rho_q,
        hashc::fp_to_digest(Fp::random(rng)),
        *h_sig,
    )?;
    let pair = NotePair { primary, sibling };
    pair.validate()?;
    Ok(pair)
}

/// A published spend marker: PRF of the note's seed under its spending key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Nullifier(pub Digest32);

/// Computes the nullifier of a note, checking key ownership first.
pub fn nullifier_of(note: &Note, a_sk: &SpendingKey) -> Result<Nullifier, NoteError> {
    if primitives::derive_address(a_sk).a_pk != note.a_pk {
        return Err(NoteError::KeyMismatch);
    }
    Ok(Nullifier(primitives::prf_nf(a_sk, &note.rho)))
}
