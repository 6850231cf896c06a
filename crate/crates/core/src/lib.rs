//! Multi-asset shielded ledger with atomic, oblivious two-party exchange.
//!
//! Assets live in committed notes on an append-only single-node ledger.
//! Spending happens through two-in/two-out JoinSplit transactions whose
//! validity conditions — including the five exchange spending cases — are
//! compiled into one combined rank-1 constraint system and enforced by a
//! mock proving backend. A fair exchange is a short choreography of such
//! transactions: initiate, then respond before the block-height threshold
//! or cancel/complete after it.

pub mod circuit;
pub mod digest;
pub mod exchange;
pub mod field;
pub mod fuzz;
pub mod hashc;
pub mod ledger;
pub mod merkle;
pub mod note;
pub mod primitives;
pub mod proving;
pub mod r1cs;
pub mod scenario;
pub mod transactions;

pub use digest::Digest32;
pub use field::Fp;
pub use note::{AssetAmount, Note, NotePair, Nullifier};
