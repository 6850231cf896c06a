//! JoinSplit and Mint transactions: spending-case classification, the
//! plain-arithmetic satisfying-condition predicates, statement assembly,
//! transaction construction, signing and bit-exact serialization.
//!
//! Every JoinSplit consumes two input notes and creates two output notes.
//! Which conditions the zero-knowledge statement must satisfy depends on
//! the spending case, determined by the input/output note types (primary or
//! sibling) and the presence of debt:
//!
//! | inputs | in-debt | outputs | case                                       |
//! |--------|---------|---------|--------------------------------------------|
//! | <0,0>  | no      | <0,0>   | default shielded payment                   |
//! | <0,0>  | no      | <0,1>   | exchange initialization                    |
//! | <0,0>  | yes     | <0,0>   | counterparty response                      |
//! | <0,0>  | yes     | <0,1>   | exchange initialization                    |
//! | <0,1>  | no      | <0,*>   | completion by the initiator                |
//! | <0,1>  | yes     | <0,0>   | cancellation or second-scenario completion |
//! | <0,1>  | yes     | <0,1>   | cancellation                               |
//! | <1,1>  | *       | *       | disallowed                                 |
//!
//! Notes never change case by being reordered: every condition set is
//! evaluated over all position arrangements of inputs and outputs.

use thiserror::Error;

use crate::digest::Digest32;
use crate::merkle::{verify_path, MerklePath};
use crate::note::NOTE_BYTES;
use crate::note::{commit_note, AssetAmount, Note, NoteError};
use crate::primitives::{
    self, EncPublicKey, SigVerifyKey, Signature, SpendingKey, PK_SIG_LEN, SIG_LEN,
};
use crate::proving::{Proof, ProveError, ProvingKey, PROOF_LEN};

/// Fixed memo length; zero padded, covered only by the binding signature.
pub const MEMO_BYTES: usize = 64;
/// Encrypted note length (fixed plaintext plus encryption overhead).
pub const ENC_NOTE_BYTES: usize = NOTE_BYTES + primitives::ENC_OVERHEAD;
/// Canonical public-input encoding length.
pub const CHI_BYTES: usize = 5 * 32 + 2 * 12 + 4 + 3 * 32;
/// Serialized JoinSplit transaction length, identical for all spending
/// cases.
pub const TX_BYTES: usize =
    5 * 32 + 12 + MEMO_BYTES + PK_SIG_LEN + 2 * 32 + PROOF_LEN + 2 * ENC_NOTE_BYTES + SIG_LEN;

/// The spending cases of the combined JoinSplit statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// Ordinary shielded payment; no exchange semantics.
    DefaultPayment,
    /// Case 1: the initiator converts assets into a primary/sibling pair.
    ExchangeInit,
    /// Case 2: the initiator spends primary and sibling together after the
    /// threshold to recover the offered asset.
    CancelByInitiator,
    /// Case 3: the counterparty spends the shared primary, cancelling its
    /// debt with an own note, before the threshold.
    CounterpartyResponse,
    /// Case 4: the initiator spends the sibling after the counterparty's
    /// response, proving the paired primary was nullified.
    CompleteByInitiator,
    /// Case 5: completion that simultaneously answers a second exchange:
    /// the sibling cancels the debt of another primary note.
    CompleteSecondScenario,
    /// Any input/output shape outside the table above.
    Disallowed,
}

impl CaseId {
    pub const ALL_VALID: [CaseId; 6] = [
        CaseId::DefaultPayment,
        CaseId::ExchangeInit,
        CaseId::CancelByInitiator,
        CaseId::CounterpartyResponse,
        CaseId::CompleteByInitiator,
        CaseId::CompleteSecondScenario,
    ];
}

/// Public input of the zero-knowledge statement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicInput {
    pub rt: Digest32,
    pub nf_old_1: Digest32,
    pub nf_old_2: Digest32,
    pub cm_new_1: Digest32,
    pub cm_new_2: Digest32,
    pub v_pub_old: AssetAmount,
    pub v_pub_new: AssetAmount,
    pub block_n: u32,
    pub h_sig: Digest32,
    pub h_1: Digest32,
    pub h_2: Digest32,
}

impl PublicInput {
    /// Fixed-order, fixed-width encoding; field order is declaration order.
    pub fn canonical_encoding(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CHI_BYTES);
        out.extend_from_slice(self.rt.as_bytes());
        out.extend_from_slice(self.nf_old_1.as_bytes());
        out.extend_from_slice(self.nf_old_2.as_bytes());
        out.extend_from_slice(self.cm_new_1.as_bytes());
        out.extend_from_slice(self.cm_new_2.as_bytes());
        out.extend_from_slice(&self.v_pub_old.color.to_be_bytes());
        out.extend_from_slice(&self.v_pub_old.amount.to_be_bytes());
        out.extend_from_slice(&self.v_pub_new.color.to_be_bytes());
        out.extend_from_slice(&self.v_pub_new.amount.to_be_bytes());
        out.extend_from_slice(&self.block_n.to_be_bytes());
        out.extend_from_slice(self.h_sig.as_bytes());
        out.extend_from_slice(self.h_1.as_bytes());
        out.extend_from_slice(self.h_2.as_bytes());
        debug_assert_eq!(out.len(), CHI_BYTES);
        out
    }
}

/// Witness of the zero-knowledge statement. The sibling-spend evidence
/// fields (`path_3` through `nf_old_3`) are populated only when a sibling
/// input is being completed; otherwise they hold fixed placeholders so the
/// witness shape never varies.
#[derive(Clone, Debug)]
pub struct Witness {
    pub path_1: MerklePath,
    pub path_2: MerklePath,
    pub n_old_1: Note,
    pub n_old_2: Note,
    pub a_sk_1: SpendingKey,
    pub a_sk_2: SpendingKey,
    pub phi: Digest32,
    pub dummy_1: bool,
    pub dummy_2: bool,
    pub n_new_1: Note,
    pub n_new_2: Note,
    pub path_3: MerklePath,
    pub n_old_3: Note,
    pub a_sk_3: SpendingKey,
    pub path_4: MerklePath,
    pub nf_old_3: Digest32,
}

/// The all-zero placeholder note used to keep the witness shape uniform.
pub fn placeholder_note() -> Note {
    Note::new(
        Digest32::ZERO,
        0,
        AssetAmount::zero(),
        AssetAmount::zero(),
        0,
        Digest32::ZERO,
        Digest32::ZERO,
        Digest32::ZERO,
    )
    .expect("all-zero note is a valid dummy shape")
}

/// Evidence that a sibling input's paired primary note was already spent:
/// the primary's opening with membership paths for its commitment and its
/// nullifier, adjacent to the sibling's own commitment.
#[derive(Clone, Debug)]
pub struct PairEvidence {
    pub n_old_3: Note,
    pub a_sk_3: SpendingKey,
    pub path_3: MerklePath,
    pub path_4: MerklePath,
    pub nf_old_3: Digest32,
}

// ---------------------------------------------------------------------------
// Case classification
// ---------------------------------------------------------------------------

/// Classifies the spending case from the four note shapes. Position
/// insensitive: reordering inputs or outputs never changes the case.
pub fn classify_case(n_old_1: &Note, n_old_2: &Note, n_new_1: &Note, n_new_2: &Note) -> CaseId {
    let in_sib = n_old_1.s as u32 + n_old_2.s as u32;
    let out_sib = n_new_1.s as u32 + n_new_2.s as u32;
    let in_debt = n_old_1.has_debt() || n_old_2.has_debt();
    if in_sib > 1 || out_sib > 1 {
        return CaseId::Disallowed;
    }
    match (in_sib, in_debt, out_sib) {
        (0, false, 0) => CaseId::DefaultPayment,
        (0, _, 1) => CaseId::ExchangeInit,
        (0, true, 0) => CaseId::CounterpartyResponse,
        (1, false, _) => CaseId::CompleteByInitiator,
        (1, true, 1) => CaseId::CancelByInitiator,
        (1, true, 0) => {
            // The debt-carrying primary is either the sibling's own paired
            // primary (a cancellation) or some other exchange's primary (a
            // second-scenario completion); the pair tag decides.
            let (sib, other) = if n_old_1.is_sibling() {
                (n_old_1, n_old_2)
            } else {
                (n_old_2, n_old_1)
            };
            if sib.pair_tag == other.pair_tag {
                CaseId::CancelByInitiator
            } else {
                CaseId::CompleteSecondScenario
            }
        }
        _ => CaseId::Disallowed,
    }
}

// ---------------------------------------------------------------------------
// Satisfying-condition predicates (plain integer arithmetic)
// ---------------------------------------------------------------------------

/// The checks common to every JoinSplit statement: input membership (unless
/// dummy), nullifier integrity, spending-key validity, output seed
/// uniqueness, output commitments and pair-tag binding, plus note shape
/// invariants. Dummy flags must agree with the notes they describe.
pub fn common_checks(chi: &PublicInput, omega: &Witness, depth: usize) -> bool {
    let inputs = [
        (&omega.n_old_1, &omega.a_sk_1, &omega.path_1, omega.dummy_1, &chi.nf_old_1),
        (&omega.n_old_2, &omega.a_sk_2, &omega.path_2, omega.dummy_2, &chi.nf_old_2),
    ];
    for (note, a_sk, path, dummy, nf) in inputs {
        if note.validate().is_err() || dummy != note.is_dummy() {
            return false;
        }
        if path.siblings.len() != depth || path.pos >= (1u64 << depth) {
            return false;
        }
        if !dummy && !verify_path(&chi.rt, &commit_note(note), path) {
            return false;
        }
        if *nf != primitives::prf_nf(a_sk, &note.rho) {
            return false;
        }
        if note.a_pk != primitives::derive_address(a_sk).a_pk {
            return false;
        }
    }
    let outputs = [
        (&omega.n_new_1, 1u8, &chi.cm_new_1),
        (&omega.n_new_2, 2u8, &chi.cm_new_2),
    ];
    for (note, index, cm) in outputs {
        if note.validate().is_err() {
            return false;
        }
        match primitives::prf_rho(&omega.phi, index, &chi.h_sig) {
            Ok(rho) if rho == note.rho => {}
            _ => return false,
        }
        if *cm != commit_note(note) {
            return false;
        }
        if note.pair_tag != chi.h_sig {
            return false;
        }
    }
    omega.path_3.siblings.len() == depth
        && omega.path_4.siblings.len() == depth
        && omega.path_3.pos < (1u64 << depth)
        && omega.path_4.pos < (1u64 << depth)
}

/// One positional view of the statement: inputs and outputs possibly
/// swapped.
struct View<'a> {
    inp: [&'a Note; 2],
    out: [&'a Note; 2],
    in_pos: [u64; 2],
    in_dummy: [bool; 2],
}

impl<'a> View<'a> {
    fn new(omega: &'a Witness, in_swap: bool, out_swap: bool) -> View<'a> {
        let mut inp = [&omega.n_old_1, &omega.n_old_2];
        let mut in_pos = [omega.path_1.pos, omega.path_2.pos];
        let mut in_dummy = [omega.dummy_1, omega.dummy_2];
        let mut out = [&omega.n_new_1, &omega.n_new_2];
        if in_swap {
            inp.swap(0, 1);
            in_pos.swap(0, 1);
            in_dummy.swap(0, 1);
        }
        if out_swap {
            out.swap(0, 1);
        }
        View {
            inp,
            out,
            in_pos,
            in_dummy,
        }
    }
}

fn exchange_case_vpub_zero(chi: &PublicInput) -> bool {
    chi.v_pub_old.amount == 0 && chi.v_pub_new.amount == 0
}

/// Sibling-spend evidence checks shared by cases 4 and 5; `sibling` is the
/// sibling input of the view and `sib_pos` its commitment position.
fn evidence_checks(chi: &PublicInput, omega: &Witness, sibling: &Note, sib_pos: u64) -> bool {
    let n3 = &omega.n_old_3;
    if n3.pair_tag != sibling.pair_tag {
        return false;
    }
    if !verify_path(&chi.rt, &commit_note(n3), &omega.path_3) {
        return false;
    }
    if omega.nf_old_3 != primitives::prf_nf(&omega.a_sk_3, &n3.rho) {
        return false;
    }
    if n3.a_pk != primitives::derive_address(&omega.a_sk_3).a_pk {
        return false;
    }
    if !verify_path(&chi.rt, &omega.nf_old_3, &omega.path_4) {
        return false;
    }
    omega.path_3.pos.abs_diff(sib_pos) == 1
}

fn default_payment_view(chi: &PublicInput, v: &View<'_>) -> bool {
    for n in v.inp.iter().chain(v.out.iter()) {
        if n.s != 0 || n.v2 != 0 {
            return false;
        }
    }
    // All participating colors agree on one transaction color; outputs are
    // pinned to it unconditionally (a zero-value change output carries the
    // color with amount zero), dummy inputs are exempt.
    let mut c_tx: Option<u32> = None;
    let mut merge = |color: u32| -> bool {
        match c_tx {
            None => {
                c_tx = Some(color);
                true
            }
            Some(c) => c == color,
        }
    };
    for (i, n) in v.inp.iter().enumerate() {
        if !v.in_dummy[i] && !merge(n.color1) {
            return false;
        }
    }
    if !merge(v.out[0].color1) || !merge(v.out[1].color1) {
        return false;
    }
    let c = c_tx.unwrap_or(0);
    if chi.v_pub_old.amount > 0 && chi.v_pub_old.color != c {
        return false;
    }
    if chi.v_pub_new.amount > 0 && chi.v_pub_new.color != c {
        return false;
    }
    let lhs = chi.v_pub_old.amount as u128 + v.inp[0].v1 as u128 + v.inp[1].v1 as u128;
    let rhs = chi.v_pub_new.amount as u128 + v.out[0].v1 as u128 + v.out[1].v1 as u128;
    lhs == rhs
}

fn exchange_init_view(v: &View<'_>) -> bool {
    let [p, q] = v.out;
    if v.inp.iter().any(|n| n.s != 0 || n.v2 != 0) {
        return false;
    }
    if p.s != 0 || q.s != 1 {
        return false;
    }
    if p.v2 == 0 || q.v2 != 0 {
        return false;
    }
    if p.color2 != q.color1 || p.v2 != q.v1 || p.bt != q.bt {
        return false;
    }
    for (i, n) in v.inp.iter().enumerate() {
        if !v.in_dummy[i] && n.color1 != p.color1 {
            return false;
        }
    }
    v.inp[0].v1 as u128 + v.inp[1].v1 as u128 == p.v1 as u128
}

fn cancel_view(chi: &PublicInput, v: &View<'_>) -> bool {
    let [p, q] = v.inp;
    if p.s != 0 || q.s != 1 || p.v2 == 0 {
        return false;
    }
    // The sibling must be the primary's own pair.
    if p.pair_tag != q.pair_tag || p.color2 != q.color1 || p.v2 != q.v1 || p.bt != q.bt {
        return false;
    }
    if v.out.iter().any(|n| n.s != 0 || n.v2 != 0) {
        return false;
    }
    if v.out.iter().any(|n| n.color1 != p.color1) {
        return false;
    }
    if v.out[0].v1 as u128 + v.out[1].v1 as u128 != p.v1 as u128 {
        return false;
    }
    chi.block_n > p.bt
}

fn respond_view(chi: &PublicInput, v: &View<'_>) -> bool {
    let [p, f] = v.inp;
    let [r, c] = v.out;
    if p.s != 0 || f.s != 0 || r.s != 0 || c.s != 0 {
        return false;
    }
    if p.v2 == 0 || f.v2 != 0 || r.v2 != 0 || c.v2 != 0 {
        return false;
    }
    if r.v1 != p.v1 || r.color1 != p.color1 {
        return false;
    }
    if p.color2 != f.color1 || c.color1 != f.color1 {
        return false;
    }
    if p.v2 as u128 + c.v1 as u128 != f.v1 as u128 {
        return false;
    }
    chi.block_n <= p.bt
}

fn complete_view(chi: &PublicInput, omega: &Witness, v: &View<'_>) -> bool {
    let [q, e] = v.inp;
    if q.s != 1 || e.s != 0 {
        return false;
    }
    if q.v2 != 0 || e.v2 != 0 {
        return false;
    }
    if v.out.iter().any(|n| n.s != 0 || n.v2 != 0) {
        return false;
    }
    if !v.in_dummy[1] && e.color1 != q.color1 {
        return false;
    }
    if v.out.iter().any(|n| n.color1 != q.color1) {
        return false;
    }
    if q.v1 as u128 + e.v1 as u128 != v.out[0].v1 as u128 + v.out[1].v1 as u128 {
        return false;
    }
    if chi.block_n <= q.bt {
        return false;
    }
    evidence_checks(chi, omega, q, v.in_pos[0])
}

fn complete_second_view(chi: &PublicInput, omega: &Witness, v: &View<'_>) -> bool {
    let [q, d] = v.inp;
    let [r, t] = v.out;
    if q.s != 1 || d.s != 0 || q.v2 != 0 || d.v2 == 0 {
        return false;
    }
    if r.s != 0 || t.s != 0 || r.v2 != 0 || t.v2 != 0 {
        return false;
    }
    if q.color1 != d.color2 || r.color1 != q.color1 || t.color1 != d.color1 {
        return false;
    }
    if q.v1 as u128 != d.v2 as u128 + r.v1 as u128 {
        return false;
    }
    if d.v1 != t.v1 {
        return false;
    }
    if chi.block_n <= q.bt || chi.block_n > d.bt {
        return false;
    }
    evidence_checks(chi, omega, q, v.in_pos[0])
}

/// Evaluates the satisfying-condition set of `case` as plain arithmetic
/// over every position arrangement; does not include the common checks.
pub fn case_conditions(case: CaseId, chi: &PublicInput, omega: &Witness) -> bool {
    if case != CaseId::DefaultPayment && !exchange_case_vpub_zero(chi) {
        return false;
    }
    match case {
        CaseId::DefaultPayment => default_payment_view(chi, &View::new(omega, false, false)),
        CaseId::ExchangeInit => [false, true]
            .into_iter()
            .any(|out_swap| exchange_init_view(&View::new(omega, false, out_swap))),
        CaseId::CancelByInitiator => [false, true]
            .into_iter()
            .any(|in_swap| cancel_view(chi, &View::new(omega, in_swap, false))),
        CaseId::CounterpartyResponse => [false, true].into_iter().any(|in_swap| {
            [false, true]
                .into_iter()
                .any(|out_swap| respond_view(chi, &View::new(omega, in_swap, out_swap)))
        }),
        CaseId::CompleteByInitiator => [false, true]
            .into_iter()
            .any(|in_swap| complete_view(chi, omega, &View::new(omega, in_swap, false))),
        CaseId::CompleteSecondScenario => [false, true].into_iter().any(|in_swap| {
            [false, true]
                .into_iter()
                .any(|out_swap| complete_second_view(chi, omega, &View::new(omega, in_swap, out_swap)))
        }),
        CaseId::Disallowed => false,
    }
}

/// The full predicate for one case: common checks plus the case's
/// satisfying conditions. This is the independent oracle the circuit is
/// tested against.
pub fn case_predicate(case: CaseId, chi: &PublicInput, omega: &Witness, depth: usize) -> bool {
    common_checks(chi, omega, depth) && case_conditions(case, chi, omega)
}

/// Whether any valid spending case is satisfied; mirrors combined-circuit
/// satisfiability.
pub fn statement_predicate(chi: &PublicInput, omega: &Witness, depth: usize) -> bool {
    common_checks(chi, omega, depth)
        && CaseId::ALL_VALID
            .iter()
            .any(|&case| case_conditions(case, chi, omega))
}

// ---------------------------------------------------------------------------
// Transactions
// ---------------------------------------------------------------------------

/// A shielded two-in/two-out transaction. Serialized length and field
/// layout are identical for all spending cases; no field reveals the case.
#[derive(Clone, Debug)]
pub struct JoinSplitTransaction {
    pub rt: Digest32,
    pub nf_old_1: Digest32,
    pub nf_old_2: Digest32,
    pub cm_new_1: Digest32,
    pub cm_new_2: Digest32,
    pub v_pub_new: AssetAmount,
    pub memo: [u8; MEMO_BYTES],
    pub pk_sig: SigVerifyKey,
    pub h_1: Digest32,
    pub h_2: Digest32,
    pub proof: Proof,
    pub enc_note_1: Vec<u8>,
    pub enc_note_2: Vec<u8>,
    pub delta: Signature,
}

#[derive(Debug, Error)]
pub enum TxError {
    #[error("spending key does not own an input note")]
    KeyMismatch,
    #[error("input notes produce the same nullifier")]
    SameNullifier,
    #[error("requested shape classifies as {found:?}, not the intended {intent:?}")]
    WrongCase { intent: CaseId, found: CaseId },
    #[error("intended case is disallowed")]
    DisallowedCase,
    #[error("sibling-spend evidence required for completion cases")]
    MissingEvidence,
    #[error("public value transfers are only carried on the new side")]
    UnsupportedPublicValue,
    #[error("mint color 0 is reserved for dummy notes")]
    ReservedColor,
    #[error("note error: {0}")]
    Note(#[from] NoteError),
    #[error("primitive error: {0}")]
    Primitive(#[from] primitives::PrimitiveError),
    #[error("proving refused: {0}")]
    Prove(#[from] ProveError),
    #[error("malformed transaction bytes: {0}")]
    Malformed(&'static str),
}

impl JoinSplitTransaction {
    /// Reassembles the public input under a verifier-chosen block height.
    /// The shielded-in public value is always zero: minting is the only way
    /// value enters the pool.
    pub fn public_input(&self, block_n: u32) -> PublicInput {
        PublicInput {
            rt: self.rt,
            nf_old_1: self.nf_old_1,
            nf_old_2: self.nf_old_2,
            cm_new_1: self.cm_new_1,
            cm_new_2: self.cm_new_2,
            v_pub_old: AssetAmount::zero(),
            v_pub_new: self.v_pub_new,
            block_n,
            h_sig: primitives::compute_h_sig(&self.nf_old_1, &self.nf_old_2, &self.pk_sig),
            h_1: self.h_1,
            h_2: self.h_2,
        }
    }

    /// The message bound by the delta signature.
    pub fn signed_message(
        chi: &PublicInput,
        proof: &Proof,
        memo: &[u8; MEMO_BYTES],
        enc_1: &[u8],
        enc_2: &[u8],
    ) -> Vec<u8> {
        let mut m = chi.canonical_encoding();
        m.extend_from_slice(&proof.0);
        m.extend_from_slice(memo);
        m.extend_from_slice(enc_1);
        m.extend_from_slice(enc_2);
        m
    }

    /// Bit-exact serialization; constant length across all cases.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TX_BYTES);
        out.extend_from_slice(self.rt.as_bytes());
        out.extend_from_slice(self.nf_old_1.as_bytes());
        out.extend_from_slice(self.nf_old_2.as_bytes());
        out.extend_from_slice(self.cm_new_1.as_bytes());
        out.extend_from_slice(self.cm_new_2.as_bytes());
        out.extend_from_slice(&self.v_pub_new.color.to_be_bytes());
        out.extend_from_slice(&self.v_pub_new.amount.to_be_bytes());
        out.extend_from_slice(&self.memo);
        out.extend_from_slice(&self.pk_sig.0);
        out.extend_from_slice(self.h_1.as_bytes());
        out.extend_from_slice(self.h_2.as_bytes());
        out.extend_from_slice(&self.proof.0);
        out.extend_from_slice(&self.enc_note_1);
        out.extend_from_slice(&self.enc_note_2);
        out.extend_from_slice(&self.delta.0);
        debug_assert_eq!(out.len(), TX_BYTES);
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<JoinSplitTransaction, TxError> {
        if bytes.len() != TX_BYTES {
            return Err(TxError::Malformed("wrong length"));
        }
        let mut off = 0usize;
        let mut next = |n: usize| {
            let s = &bytes[off..off + n];
            off += n;
            s
        };
        let rt = Digest32::from_slice(next(32)).unwrap();
        let nf_old_1 = Digest32::from_slice(next(32)).unwrap();
        let nf_old_2 = Digest32::from_slice(next(32)).unwrap();
        let cm_new_1 = Digest32::from_slice(next(32)).unwrap();
        let cm_new_2 = Digest32::from_slice(next(32)).unwrap();
        let color = u32::from_be_bytes(next(4).try_into().unwrap());
        let amount = u64::from_be_bytes(next(8).try_into().unwrap());
        let memo: [u8; MEMO_BYTES] = next(MEMO_BYTES).try_into().unwrap();
        let pk_sig = SigVerifyKey(next(PK_SIG_LEN).try_into().unwrap());
        let h_1 = Digest32::from_slice(next(32)).unwrap();
        let h_2 = Digest32::from_slice(next(32)).unwrap();
        let proof = Proof(next(PROOF_LEN).try_into().unwrap());
        let enc_note_1 = next(ENC_NOTE_BYTES).to_vec();
        let enc_note_2 = next(ENC_NOTE_BYTES).to_vec();
        let delta = Signature(next(SIG_LEN).to_vec());
        Ok(JoinSplitTransaction {
            rt,
            nf_old_1,
            nf_old_2,
            cm_new_1,
            cm_new_2,
            v_pub_new: AssetAmount::new(color, amount),
            memo,
            pk_sig,
            h_1,
            h_2,
            proof,
            enc_note_1,
            enc_note_2,
            delta,
        })
    }
}

/// Transparent issuance: mints one debt-free primary note with the stated
/// color and value; the opening is public so the ledger can check the
/// commitment.
#[derive(Clone, Debug)]
pub struct MintTransaction {
    pub cm: Digest32,
    pub color: u32,
    pub v: u64,
    pub a_pk: Digest32,
    pub rho: Digest32,
    pub gamma: Digest32,
    pub enc_note: Vec<u8>,
}

/// Where an output note goes.
#[derive(Clone, Debug)]
pub enum Recipient {
    /// A known payment address (public half).
    Address { a_pk: Digest32, enc_pk: EncPublicKey },
    /// The exchange shared address, derived from the shared secret and the
    /// transaction's own h_sig once known.
    Shared { secret: Vec<u8> },
}

impl Recipient {
    pub fn from_address(addr: &primitives::PaymentAddress) -> Recipient {
        Recipient::Address {
            a_pk: addr.a_pk,
            enc_pk: addr.enc_pk,
        }
    }
}

/// One requested output note.
#[derive(Clone, Debug)]
pub struct OutputSpec {
    pub recipient: Recipient,
    pub s: u8,
    pub primary: AssetAmount,
    pub debt: AssetAmount,
    pub bt: u32,
}

impl OutputSpec {
    pub fn plain(recipient: Recipient, asset: AssetAmount) -> OutputSpec {
        OutputSpec {
            recipient,
            s: 0,
            primary: asset,
            debt: AssetAmount::zero(),
            bt: 0,
        }
    }
}

/// One input note with its spending key and membership path (placeholder
/// path for dummies).
#[derive(Clone, Debug)]
pub struct InputSpec {
    pub note: Note,
    pub a_sk: SpendingKey,
    pub path: MerklePath,
}

/// Everything a JoinSplit build needs besides the proving key and rng.
#[derive(Clone, Debug)]
pub struct JoinSplitRequest {
    pub rt: Digest32,
    pub block_n: u32,
    pub inputs: [InputSpec; 2],
    pub outputs: [OutputSpec; 2],
    pub v_pub_old: AssetAmount,
    pub v_pub_new: AssetAmount,
    pub memo: [u8; MEMO_BYTES],
    pub intent: CaseId,
    pub evidence: Option<PairEvidence>,
}

/// Canonicalizes a statement into the uniform (chi, omega) shape,
/// zero-filling the sibling-spend fields when unused.
#[allow(clippy::too_many_arguments)]
pub fn assemble_statement(
    rt: Digest32,
    block_n: u32,
    v_pub_old: AssetAmount,
    v_pub_new: AssetAmount,
    inputs: &[InputSpec; 2],
    nullifiers: [Digest32; 2],
    outputs: [Note; 2],
    phi: Digest32,
    h_sig: Digest32,
    h_1: Digest32,
    h_2: Digest32,
    evidence: Option<&PairEvidence>,
) -> (PublicInput, Witness) {
    let depth = inputs[0].path.siblings.len();
    let chi = PublicInput {
        rt,
        nf_old_1: nullifiers[0],
        nf_old_2: nullifiers[1],
        cm_new_1: outputs[0].cm,
        cm_new_2: outputs[1].cm,
        v_pub_old,
        v_pub_new,
        block_n,
        h_sig,
        h_1,
        h_2,
    };
    let (path_3, n_old_3, a_sk_3, path_4, nf_old_3) = match evidence {
        Some(ev) => (
            ev.path_3.clone(),
            ev.n_old_3,
            ev.a_sk_3,
            ev.path_4.clone(),
            ev.nf_old_3,
        ),
        None => (
            MerklePath::placeholder(depth),
            placeholder_note(),
            SpendingKey([0u8; 32]),
            MerklePath::placeholder(depth),
            Digest32::ZERO,
        ),
    };
    let omega = Witness {
        path_1: inputs[0].path.clone(),
        path_2: inputs[1].path.clone(),
        n_old_1: inputs[0].note,
        n_old_2: inputs[1].note,
        a_sk_1: inputs[0].a_sk,
        a_sk_2: inputs[1].a_sk,
        phi,
        dummy_1: inputs[0].note.is_dummy(),
        dummy_2: inputs[1].note.is_dummy(),
        n_new_1: outputs[0],
        n_new_2: outputs[1],
        path_3,
        n_old_3,
        a_sk_3,
        path_4,
        nf_old_3,
    };
    (chi, omega)
}

/// A fully assembled statement together with the signing and encryption
/// material, ready for proving.
pub struct PreparedJoinSplit {
    pub chi: PublicInput,
    pub omega: Witness,
    pub outputs: [Note; 2],
    pk_sig: SigVerifyKey,
    sk_sig: primitives::SigSigningKey,
    enc_note_1: Vec<u8>,
    enc_note_2: Vec<u8>,
}

/// Executes the JoinSplit construction steps up to (but excluding) the
/// proof: nullifiers, fresh signature key, h_sig, output notes with
/// PRF-derived seeds, spend-auth digests, encrypted outputs and the uniform
/// (chi, omega) assembly.
pub fn prepare_joinsplit(
    request: &JoinSplitRequest,
    rng: &mut impl rand::RngCore,
) -> Result<PreparedJoinSplit, TxError> {
    if request.intent == CaseId::Disallowed {
        return Err(TxError::DisallowedCase);
    }
    if request.v_pub_old.amount != 0 {
        // The transaction format carries only the outbound public value.
        return Err(TxError::UnsupportedPublicValue);
    }
    if request.v_pub_new.amount != 0 && request.v_pub_new.color == 0 {
        return Err(TxError::ReservedColor);
    }
    if matches!(
        request.intent,
        CaseId::CompleteByInitiator | CaseId::CompleteSecondScenario
    ) && request.evidence.is_none()
    {
        return Err(TxError::MissingEvidence);
    }

    // Nullifiers; ownership is checked against each note's a_pk.
    let mut nullifiers = [Digest32::ZERO; 2];
    for (i, input) in request.inputs.iter().enumerate() {
        let nf = crate::note::nullifier_of(&input.note, &input.a_sk)
            .map_err(|_| TxError::KeyMismatch)?;
        nullifiers[i] = nf.0;
    }
    if nullifiers[0] == nullifiers[1] {
        return Err(TxError::SameNullifier);
    }

    let (pk_sig, sk_sig) = primitives::sig_keypair(rng);
    let h_sig = primitives::compute_h_sig(&nullifiers[0], &nullifiers[1], &pk_sig);
    let phi = Digest32::random(rng);

    // Resolve recipients (the shared address needs h_sig) and build the
    // output notes with PRF-derived seeds and fresh trapdoors.
    let mut outputs: Vec<Note> = Vec::with_capacity(2);
    let mut enc_keys: Vec<EncPublicKey> = Vec::with_capacity(2);
    for (j, spec) in request.outputs.iter().enumerate() {
        let (a_pk, enc_pk) = match &spec.recipient {
            Recipient::Address { a_pk, enc_pk } => (*a_pk, *enc_pk),
            Recipient::Shared { secret } => {
                let shared = primitives::derive_shared_spending_key(secret, &h_sig)?;
                let addr = primitives::derive_address(&shared);
                (addr.a_pk, addr.enc_pk)
            }
        };
        let rho = primitives::prf_rho(&phi, (j + 1) as u8, &h_sig)?;
        let gamma = crate::hashc::fp_to_digest(crate::field::Fp::random(rng));
        let note = Note::new(a_pk, spec.s, spec.primary, spec.debt, spec.bt, rho, gamma, h_sig)?;
        outputs.push(note);
        enc_keys.push(enc_pk);
    }
    let outputs: [Note; 2] = [outputs[0], outputs[1]];

    let found = classify_case(
        &request.inputs[0].note,
        &request.inputs[1].note,
        &outputs[0],
        &outputs[1],
    );
    if found != request.intent {
        return Err(TxError::WrongCase {
            intent: request.intent,
            found,
        });
    }

    let h_1 = primitives::prf_spend_auth(&request.inputs[0].a_sk, 1, &h_sig)?;
    let h_2 = primitives::prf_spend_auth(&request.inputs[1].a_sk, 2, &h_sig)?;
    let enc_note_1 =
        primitives::encrypt_note(&enc_keys[0], &crate::note::serialize_note(&outputs[0]), rng);
    let enc_note_2 =
        primitives::encrypt_note(&enc_keys[1], &crate::note::serialize_note(&outputs[1]), rng);

    let (chi, omega) = assemble_statement(
        request.rt,
        request.block_n,
        request.v_pub_old,
        request.v_pub_new,
        &request.inputs,
        nullifiers,
        outputs,
        phi,
        h_sig,
        h_1,
        h_2,
        request.evidence.as_ref(),
    );
    Ok(PreparedJoinSplit {
        chi,
        omega,
        outputs,
        pk_sig,
        sk_sig,
        enc_note_1,
        enc_note_2,
    })
}

impl PreparedJoinSplit {
    /// Assembles a signed transaction around an externally supplied proof.
    /// This is how a forger without the prover's satisfiability gate would
    /// package a transaction; the ledger must reject it at proof
    /// verification.
    pub fn into_transaction_with_proof(
        self,
        memo: [u8; MEMO_BYTES],
        proof: Proof,
    ) -> JoinSplitTransaction {
        let m = JoinSplitTransaction::signed_message(
            &self.chi,
            &proof,
            &memo,
            &self.enc_note_1,
            &self.enc_note_2,
        );
        let delta = primitives::sign(&self.sk_sig, &m);
        JoinSplitTransaction {
            rt: self.chi.rt,
            nf_old_1: self.chi.nf_old_1,
            nf_old_2: self.chi.nf_old_2,
            cm_new_1: self.chi.cm_new_1,
            cm_new_2: self.chi.cm_new_2,
            v_pub_new: self.chi.v_pub_new,
            memo,
            pk_sig: self.pk_sig,
            h_1: self.chi.h_1,
            h_2: self.chi.h_2,
            proof,
            enc_note_1: self.enc_note_1,
            enc_note_2: self.enc_note_2,
            delta,
        }
    }
}

/// Builds a complete JoinSplit transaction: statement preparation, proof
/// and binding signature.
pub fn build_joinsplit(
    pk: &ProvingKey,
    request: &JoinSplitRequest,
    rng: &mut impl rand::RngCore,
) -> Result<(JoinSplitTransaction, [Note; 2]), TxError> {
    let prep = prepare_joinsplit(request, rng)?;
    let proof = pk.prove(&prep.chi, &prep.omega)?;
    let m = JoinSplitTransaction::signed_message(
        &prep.chi,
        &proof,
        &request.memo,
        &prep.enc_note_1,
        &prep.enc_note_2,
    );
    let delta = primitives::sign(&prep.sk_sig, &m);

    let tx = JoinSplitTransaction {
        rt: prep.chi.rt,
        nf_old_1: prep.chi.nf_old_1,
        nf_old_2: prep.chi.nf_old_2,
        cm_new_1: prep.chi.cm_new_1,
        cm_new_2: prep.chi.cm_new_2,
        v_pub_new: prep.chi.v_pub_new,
        memo: request.memo,
        pk_sig: prep.pk_sig,
        h_1: prep.chi.h_1,
        h_2: prep.chi.h_2,
        proof,
        enc_note_1: prep.enc_note_1,
        enc_note_2: prep.enc_note_2,
        delta,
    };
    Ok((tx, prep.outputs))
}

/// Builds a mint transaction for `v` units of `color` addressed to the
/// recipient; zero-value mints are allowed, color 0 is not.
pub fn build_mint(
    recipient: &Recipient,
    color: u32,
    v: u64,
    rng: &mut impl rand::RngCore,
) -> Result<(MintTransaction, Note), TxError> {
    if color == 0 {
        return Err(TxError::ReservedColor);
    }
    let (a_pk, enc_pk) = match recipient {
        Recipient::Address { a_pk, enc_pk } => (*a_pk, *enc_pk),
        Recipient::Shared { .. } => return Err(TxError::Malformed("mint to shared address")),
    };
    let rho = crate::hashc::fp_to_digest(crate::field::Fp::random(rng));
    let gamma = crate::hashc::fp_to_digest(crate::field::Fp::random(rng));
    let note = Note::new(
        a_pk,
        0,
        AssetAmount::new(color, v),
        AssetAmount::zero(),
        0,
        rho,
        gamma,
        Digest32::ZERO,
    )?;
    let enc_note = primitives::encrypt_note(&enc_pk, &crate::note::serialize_note(&note), rng);
    let tx = MintTransaction {
        cm: note.cm,
        color,
        v,
        a_pk,
        rho,
        gamma,
        enc_note,
    };
    Ok((tx, note))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn note(s: u8, c1: u32, v1: u64, c2: u32, v2: u64, tag: u8) -> Note {
        Note::new(
            Digest32([tag; 32]),
            s,
            AssetAmount::new(c1, v1),
            AssetAmount::new(c2, v2),
            0,
            Digest32([tag.wrapping_add(1); 32]),
            Digest32([tag.wrapping_add(2); 32]),
            Digest32([tag.wrapping_add(3); 32]),
        )
        .unwrap()
    }

    fn dummy() -> Note {
        note(0, 0, 0, 0, 0, 0)
    }

    #[test]
    fn classification_covers_the_case_table() {
        let plain = |tag| note(0, 3, 5, 0, 0, tag);
        let debt = |tag| note(0, 3, 5, 2, 7, tag);
        let sib = |tag| note(1, 2, 7, 0, 0, tag);

        // inputs <0,0> no debt
        assert_eq!(
            classify_case(&plain(1), &dummy(), &plain(2), &plain(3)),
            CaseId::DefaultPayment
        );
        assert_eq!(
            classify_case(&plain(1), &plain(2), &debt(3), &sib(4)),
            CaseId::ExchangeInit
        );
        assert_eq!(
            classify_case(&plain(1), &plain(2), &sib(3), &sib(4)),
            CaseId::Disallowed
        );
        // inputs <0,0> with debt
        assert_eq!(
            classify_case(&debt(1), &plain(2), &plain(3), &plain(4)),
            CaseId::CounterpartyResponse
        );
        assert_eq!(
            classify_case(&debt(1), &plain(2), &debt(3), &sib(4)),
            CaseId::ExchangeInit
        );
        // inputs <0,1> no debt
        assert_eq!(
            classify_case(&sib(1), &plain(2), &plain(3), &plain(4)),
            CaseId::CompleteByInitiator
        );
        assert_eq!(
            classify_case(&sib(1), &plain(2), &debt(3), &sib(4)),
            CaseId::CompleteByInitiator
        );
        // inputs <0,1> with debt: pair tag decides cancel vs second-scenario
        let mut paired_primary = note(0, 3, 5, 2, 7, 9);
        let mut sibling = note(1, 2, 7, 0, 0, 9);
        paired_primary.pair_tag = Digest32([0xaa; 32]);
        sibling.pair_tag = Digest32([0xaa; 32]);
        assert_eq!(
            classify_case(&paired_primary, &sibling, &plain(3), &plain(4)),
            CaseId::CancelByInitiator
        );
        let unrelated_primary = note(0, 3, 5, 2, 7, 5); // different pair tag
        assert_eq!(
            classify_case(&unrelated_primary, &sibling, &plain(3), &plain(4)),
            CaseId::CompleteSecondScenario
        );
        assert_eq!(
            classify_case(&paired_primary, &sibling, &debt(3), &sib(4)),
            CaseId::CancelByInitiator
        );
        // inputs <1,1>
        assert_eq!(
            classify_case(&sib(1), &sib(2), &plain(3), &plain(4)),
            CaseId::Disallowed
        );
    }

    #[test]
    fn classification_is_position_insensitive() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        use rand::Rng;
        for _ in 0..2000 {
            let mut mk = || {
                let s = rng.gen_range(0..2u8);
                let c1 = rng.gen_range(0..4u32);
                let has_debt = s == 0 && c1 != 0 && rng.gen_bool(0.4);
                note(
                    if c1 == 0 { 0 } else { s },
                    c1,
                    if c1 == 0 { 0 } else { rng.gen_range(0..9u64) },
                    if has_debt { rng.gen_range(1..4u32) } else { 0 },
                    if has_debt { rng.gen_range(1..9u64) } else { 0 },
                    rng.gen(),
                )
            };
            let (a, b, c, d) = (mk(), mk(), mk(), mk());
            let base = classify_case(&a, &b, &c, &d);
            assert_eq!(base, classify_case(&b, &a, &c, &d));
            assert_eq!(base, classify_case(&a, &b, &d, &c));
            assert_eq!(base, classify_case(&b, &a, &d, &c));
        }
    }

    #[test]
    fn transaction_serialization_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let (pk_sig, sk_sig) = primitives::sig_keypair(&mut rng);
        let tx = JoinSplitTransaction {
            rt: Digest32::random(&mut rng),
            nf_old_1: Digest32::random(&mut rng),
            nf_old_2: Digest32::random(&mut rng),
            cm_new_1: Digest32::random(&mut rng),
            cm_new_2: Digest32::random(&mut rng),
            v_pub_new: AssetAmount::new(7, 99),
            memo: [3u8; MEMO_BYTES],
            pk_sig,
            h_1: Digest32::random(&mut rng),
            h_2: Digest32::random(&mut rng),
            proof: Proof([9u8; PROOF_LEN]),
            enc_note_1: vec![1u8; ENC_NOTE_BYTES],
            enc_note_2: vec![2u8; ENC_NOTE_BYTES],
            delta: primitives::sign(&sk_sig, b"m"),
        };
        let bytes = tx.serialize();
        assert_eq!(bytes.len(), TX_BYTES);
        let back = JoinSplitTransaction::deserialize(&bytes).unwrap();
        assert_eq!(back.serialize(), bytes);
        assert!(JoinSplitTransaction::deserialize(&bytes[1..]).is_err());
    }

    #[test]
    fn canonical_encoding_is_fixed_width() {
        let chi = PublicInput {
            rt: Digest32::ZERO,
            nf_old_1: Digest32::ZERO,
            nf_old_2: Digest32::ZERO,
            cm_new_1: Digest32::ZERO,
            cm_new_2: Digest32::ZERO,
            v_pub_old: AssetAmount::zero(),
            v_pub_new: AssetAmount::zero(),
            block_n: 0,
            h_sig: Digest32::ZERO,
            h_1: Digest32::ZERO,
            h_2: Digest32::ZERO,
        };
        assert_eq!(chi.canonical_encoding().len(), CHI_BYTES);
    }
}
