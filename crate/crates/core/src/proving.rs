//! Mock proving backend.
//!
//! Stands in for a pairing-based SNARK while keeping the contract shape:
//! `prove` refuses unless the full assignment satisfies the combined
//! circuit, then emits a constant-size authenticator computed as
//! HMAC(setup secret, canonical-encoding(chi)). The proof is a function of
//! the public input alone — never of the witness — so proof bytes reveal
//! nothing about which spending case was taken. `verify` recomputes the
//! authenticator. Soundness is process-level: the secret never leaves the
//! setup object, so a verifying proof must have been issued by a prove call
//! that checked satisfiability for exactly this public input.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::circuit::{build_joinsplit_circuit, JoinSplitCircuit, Satisfiability, ShapeError};
use crate::digest::Digest32;
use crate::primitives::hmac_sha256;
use crate::transactions::{PublicInput, Witness};

/// Proof length in bytes; constant for every transaction and case.
pub const PROOF_LEN: usize = 32;

/// Constant-size opaque proof.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Proof(pub [u8; PROOF_LEN]);

impl std::fmt::Debug for Proof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Proof({})", hex::encode(self.0))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProveError {
    #[error("assignment does not satisfy constraint {constraint} ({label})")]
    Unsatisfied {
        constraint: usize,
        label: &'static str,
    },
    #[error("statement shape: {0}")]
    Shape(#[from] ShapeError),
}

/// Record of issued proofs, used by tests to assert that every verifying
/// proof traces back to a satisfiability-checked prove call.
pub type IssueLog = Arc<Mutex<HashSet<(Digest32, [u8; PROOF_LEN])>>>;

/// Proving key: the combined circuit plus the authenticator secret.
#[derive(Clone)]
pub struct ProvingKey {
    circuit: Arc<JoinSplitCircuit>,
    secret: [u8; 32],
    issue_log: Option<IssueLog>,
}

impl std::fmt::Debug for ProvingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProvingKey")
            .field("constraints", &self.circuit.num_constraints())
            .finish_non_exhaustive()
    }
}

/// Verifying key: the matched authenticator secret.
#[derive(Clone)]
pub struct VerifyingKey {
    secret: [u8; 32],
}

impl std::fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifyingKey").finish_non_exhaustive()
    }
}

/// Public parameters: the proving/verifying key pair plus opaque parameter
/// material for the encryption and signature schemes.
#[derive(Clone, Debug)]
pub struct SetupParams {
    pub pk_joinsplit: ProvingKey,
    pub vk_joinsplit: VerifyingKey,
    pub pp_enc: [u8; 32],
    pub pp_sig: [u8; 32],
}

/// Runs setup: builds the combined circuit for the tree depth and draws the
/// authenticator secret. The proving and verifying keys are a matched pair.
pub fn setup(depth: usize, rng: &mut impl rand::RngCore) -> SetupParams {
    let circuit = Arc::new(build_joinsplit_circuit(depth));
    let mut secret = [0u8; 32];
    rng.fill_bytes(&mut secret);
    let mut pp_enc = [0u8; 32];
    rng.fill_bytes(&mut pp_enc);
    let mut pp_sig = [0u8; 32];
    rng.fill_bytes(&mut pp_sig);
    SetupParams {
        pk_joinsplit: ProvingKey {
            circuit,
            secret,
            issue_log: None,
        },
        vk_joinsplit: VerifyingKey { secret },
        pp_enc,
        pp_sig,
    }
}

fn authenticator(secret: &[u8; 32], chi: &PublicInput) -> Proof {
    Proof(hmac_sha256(secret, &chi.canonical_encoding()).0)
}

impl ProvingKey {
    /// Attaches an issue log that records every (chi, proof) this key
    /// emits.
    pub fn with_issue_log(mut self, log: IssueLog) -> ProvingKey {
        self.issue_log = Some(log);
        self
    }

    pub fn circuit(&self) -> &JoinSplitCircuit {
        &self.circuit
    }

    pub fn depth(&self) -> usize {
        self.circuit.depth()
    }

    /// Checks full satisfiability of (chi, omega) against the combined
    /// circuit and, on success, emits the authenticator over chi.
    pub fn prove(&self, chi: &PublicInput, omega: &Witness) -> Result<Proof, ProveError> {
        match self.circuit.evaluate(chi, omega)? {
            Satisfiability::Satisfied => {
                let proof = authenticator(&self.secret, chi);
                if let Some(log) = &self.issue_log {
                    let key = crate::primitives::crh(&chi.canonical_encoding());
                    log.lock().expect("issue log poisoned").insert((key, proof.0));
                }
                Ok(proof)
            }
            Satisfiability::Unsatisfied { constraint, label } => {
                Err(ProveError::Unsatisfied { constraint, label })
            }
        }
    }
}

impl VerifyingKey {
    /// True iff `proof` is the authenticator for exactly this public input.
    pub fn verify(&self, chi: &PublicInput, proof: &Proof) -> bool {
        authenticator(&self.secret, chi).0 == proof.0
    }
}
