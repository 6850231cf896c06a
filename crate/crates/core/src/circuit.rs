//! The combined JoinSplit circuit.
//!
//! One constraint system covers every spending case. The always-on part
//! carries the common checks: Merkle membership of the (non-dummy) input
//! commitments, nullifier integrity, spending-key validity, output seed
//! derivation, output commitments, pair-tag binding and note shape
//! invariants. Each (case, position-arrangement) pair gets a boolean
//! selector; exactly one selector is active and every case-specific
//! condition is enforced as `selector * expr = 0`, so the constraint set —
//! and everything a verifier sees — is identical across cases.
//!
//! The prover synthesizes the statement-determined variables once, then
//! searches the selector candidates (classified case first) for one whose
//! gated constraints hold. Products that feed gated conditions (adjacency
//! windows, comparison bits, nonzero flags) are computed unconditionally so
//! gating stays rank-1.

use crate::field::Fp;
use crate::hashc::{self, HcDomain};
use crate::r1cs::{Builder, ConstraintSystem, Lc, Phase, Var};
use crate::transactions::{classify_case, CaseId, PublicInput, Witness};

/// One selector of the combined circuit: a spending case under a fixed
/// position arrangement of inputs and outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CaseArrangement {
    pub case: CaseId,
    pub in_swap: bool,
    pub out_swap: bool,
}

/// All fifteen selector slots of the combined circuit.
pub fn arrangements() -> Vec<CaseArrangement> {
    let mut out = Vec::with_capacity(15);
    let mk = |case, in_swap, out_swap| CaseArrangement {
        case,
        in_swap,
        out_swap,
    };
    out.push(mk(CaseId::DefaultPayment, false, false));
    for o in [false, true] {
        out.push(mk(CaseId::ExchangeInit, false, o));
    }
    for i in [false, true] {
        out.push(mk(CaseId::CancelByInitiator, i, false));
    }
    for i in [false, true] {
        for o in [false, true] {
            out.push(mk(CaseId::CounterpartyResponse, i, o));
        }
    }
    for i in [false, true] {
        out.push(mk(CaseId::CompleteByInitiator, i, false));
    }
    for i in [false, true] {
        for o in [false, true] {
            out.push(mk(CaseId::CompleteSecondScenario, i, o));
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct NoteVars {
    a_pk: Var,
    s: Var,
    color1: Var,
    v1: Var,
    color2: Var,
    v2: Var,
    bt: Var,
    rho: Var,
    gamma: Var,
    tag_hi: Var,
    tag_lo: Var,
}

#[derive(Clone, Debug)]
struct PathVars {
    siblings: Vec<Var>,
    pos: Var,
    pos_bits: Vec<Var>,
}

#[derive(Clone, Debug)]
struct Layout {
    // public inputs, in canonical chi order
    rt: Var,
    nf: [Var; 2],
    cm: [Var; 2],
    vpub_old_color: Var,
    vpub_old_amount: Var,
    vpub_new_color: Var,
    vpub_new_amount: Var,
    block_n: Var,
    h_sig: [Var; 2],
    h_auth: [[Var; 2]; 2],
    // witness slots
    paths: [PathVars; 2],
    n_old: [NoteVars; 2],
    a_sk: [[Var; 2]; 2],
    phi: [Var; 2],
    dummy: [Var; 2],
    n_new: [NoteVars; 2],
    path3: PathVars,
    n_old3: NoteVars,
    a_sk3: [Var; 2],
    path4: PathVars,
    nf_old3: Var,
    // candidate-phase slot
    c_tx: Var,
}

/// Whether an assignment satisfies the circuit, and if not, where it broke.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Satisfiability {
    Satisfied,
    Unsatisfied {
        constraint: usize,
        label: &'static str,
    },
}

impl Satisfiability {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Satisfiability::Satisfied)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("witness path length does not match the circuit depth")]
    PathLength,
}

/// The combined circuit plus its variable layout and selector table.
#[derive(Clone, Debug)]
pub struct JoinSplitCircuit {
    pub cs: ConstraintSystem,
    depth: usize,
    layout: Layout,
    selectors: Vec<(CaseArrangement, Var)>,
}

/// Builds the one combined circuit for the given tree depth.
pub fn build_joinsplit_circuit(depth: usize) -> JoinSplitCircuit {
    Build::run(depth)
}

/// Internal builder state shared by the construction passes.
struct Build {
    b: Builder,
    depth: usize,
}

impl Build {
    fn run(depth: usize) -> JoinSplitCircuit {
        let mut bld = Build {
            b: Builder::new(),
            depth,
        };
        let layout = bld.alloc_layout();
        // debt-presence flags, reused by the case conditions
        let w_old = [
            bld.wellformed_note(&layout.n_old[0]),
            bld.wellformed_note(&layout.n_old[1]),
        ];
        let w_new = [
            bld.wellformed_note(&layout.n_new[0]),
            bld.wellformed_note(&layout.n_new[1]),
        ];
        bld.input_dummy_rules(&layout);
        bld.output_zero_color_rules(&layout);
        let common = bld.common_hash_checks(&layout);
        let t_adj = bld.adjacency_products(&layout);
        let heights = bld.height_bits(&layout);

        // candidate phase: selectors, the case color variable and the
        // gated per-case condition sets
        bld.b.set_phase(Phase::Candidate);
        let selectors: Vec<(CaseArrangement, Var)> = arrangements()
            .into_iter()
            .map(|ca| {
                let v = bld.b.alloc();
                bld.b.assert_boolean(v);
                (ca, v)
            })
            .collect();
        let sum = selectors
            .iter()
            .fold(Lc::zero(), |acc, (_, v)| acc.plus_var(*v));
        bld.b.assert_zero(sum.minus(&Lc::one()), "selector-sum");

        let p_dummy = [
            bld.b.mul(
                Lc::var(layout.dummy[0]),
                Lc::var(layout.c_tx),
                "dummy-color-gate",
            ),
            bld.b.mul(
                Lc::var(layout.dummy[1]),
                Lc::var(layout.c_tx),
                "dummy-color-gate",
            ),
        ];
        let r_old = bld.b.mul(
            Lc::var(layout.vpub_old_amount),
            Lc::var(layout.vpub_old_color).minus(&Lc::var(layout.c_tx)),
            "vpub-old-color",
        );
        let r_new = bld.b.mul(
            Lc::var(layout.vpub_new_amount),
            Lc::var(layout.vpub_new_color).minus(&Lc::var(layout.c_tx)),
            "vpub-new-color",
        );

        let sel0 = selectors
            .iter()
            .find(|(ca, _)| ca.case == CaseId::DefaultPayment)
            .map(|&(_, v)| v)
            .expect("default selector exists");
        bld.b.assert_zero_under(
            Lc::one().minus_var(sel0),
            Lc::var(layout.vpub_old_amount),
            "vpub-old-exchange-zero",
        );
        bld.b.assert_zero_under(
            Lc::one().minus_var(sel0),
            Lc::var(layout.vpub_new_amount),
            "vpub-new-exchange-zero",
        );

        let ctx = CaseCtx {
            layout: &layout,
            w_old,
            w_new,
            p_dummy,
            r_old,
            r_new,
            common: &common,
            t_adj,
            heights: &heights,
        };
        for (ca, sel) in &selectors {
            bld.emit_case(*ca, *sel, &ctx);
        }

        let depth = bld.depth;
        JoinSplitCircuit {
            cs: bld.b.finish(),
            depth,
            layout,
            selectors,
        }
    }

    fn alloc_note(&mut self) -> NoteVars {
        NoteVars {
            a_pk: self.b.alloc(),
            s: self.b.alloc(),
            color1: self.b.alloc(),
            v1: self.b.alloc(),
            color2: self.b.alloc(),
            v2: self.b.alloc(),
            bt: self.b.alloc(),
            rho: self.b.alloc(),
            gamma: self.b.alloc(),
            tag_hi: self.b.alloc(),
            tag_lo: self.b.alloc(),
        }
    }

    fn alloc_path(&mut self) -> PathVars {
        let siblings: Vec<Var> = (0..self.depth).map(|_| self.b.alloc()).collect();
        let pos = self.b.alloc();
        let pos_bits = self.b.bits_unchecked(Lc::var(pos), self.depth);
        // positions always decompose into depth bits
        self.b.assert_zero(
            Builder::bits_value(&pos_bits).minus(&Lc::var(pos)),
            "pos-recompose",
        );
        PathVars {
            siblings,
            pos,
            pos_bits,
        }
    }

    fn alloc_layout(&mut self) -> Layout {
        let rt = self.b.alloc_public();
        let nf = [self.b.alloc_public(), self.b.alloc_public()];
        let cm = [self.b.alloc_public(), self.b.alloc_public()];
        let vpub_old_color = self.b.alloc_public();
        let vpub_old_amount = self.b.alloc_public();
        let vpub_new_color = self.b.alloc_public();
        let vpub_new_amount = self.b.alloc_public();
        let block_n = self.b.alloc_public();
        let h_sig = [self.b.alloc_public(), self.b.alloc_public()];
        let h_auth = [
            [self.b.alloc_public(), self.b.alloc_public()],
            [self.b.alloc_public(), self.b.alloc_public()],
        ];
        let paths = [self.alloc_path(), self.alloc_path()];
        let n_old = [self.alloc_note(), self.alloc_note()];
        let a_sk = [
            [self.b.alloc(), self.b.alloc()],
            [self.b.alloc(), self.b.alloc()],
        ];
        let phi = [self.b.alloc(), self.b.alloc()];
        let dummy = [self.b.alloc(), self.b.alloc()];
        self.b.assert_boolean(dummy[0]);
        self.b.assert_boolean(dummy[1]);
        let n_new = [self.alloc_note(), self.alloc_note()];
        let path3 = self.alloc_path();
        let n_old3 = self.alloc_note();
        let a_sk3 = [self.b.alloc(), self.b.alloc()];
        let path4 = self.alloc_path();
        let nf_old3 = self.b.alloc();
        // the candidate-phase color slot
        self.b.set_phase(Phase::Candidate);
        let c_tx = self.b.alloc();
        self.b.set_phase(Phase::Base);
        Layout {
            rt,
            nf,
            cm,
            vpub_old_color,
            vpub_old_amount,
            vpub_new_color,
            vpub_new_amount,
            block_n,
            h_sig,
            h_auth,
            paths,
            n_old,
            a_sk,
            phi,
            dummy,
            n_new,
            path3,
            n_old3,
            a_sk3,
            path4,
            nf_old3,
            c_tx,
        }
    }

    /// Shape invariants shared by the four statement notes; returns the
    /// debt-presence flag nonzero(v2).
    fn wellformed_note(&mut self, n: &NoteVars) -> Var {
        self.b.assert_boolean(n.s);
        let debt_color = self.b.nonzero_flag(Lc::var(n.color2));
        let debt_value = self.b.nonzero_flag(Lc::var(n.v2));
        // (color2 = 0) iff (v2 = 0)
        self.b.assert_zero(
            Lc::var(debt_color).minus(&Lc::var(debt_value)),
            "debt-fields-zero-together",
        );
        // a sibling carries no debt
        self.b
            .assert_zero_under(Lc::var(n.s), Lc::var(n.v2), "sibling-no-debt");
        debt_value
    }

    /// Input dummy flags agree with color 0 and dummies are worthless.
    fn input_dummy_rules(&mut self, l: &Layout) {
        for i in 0..2 {
            let g = self.b.nonzero_flag(Lc::var(l.n_old[i].color1));
            self.b.assert_zero(
                Lc::var(l.dummy[i]).plus_var(g).minus(&Lc::one()),
                "dummy-flag-consistency",
            );
            let d = Lc::var(l.dummy[i]);
            self.b
                .assert_zero_under(d.clone(), Lc::var(l.n_old[i].v1), "dummy-worthless");
            self.b
                .assert_zero_under(d.clone(), Lc::var(l.n_old[i].v2), "dummy-no-debt");
            self.b
                .assert_zero_under(d, Lc::var(l.n_old[i].s), "dummy-not-sibling");
        }
    }

    /// Output notes with color 0 must be all-zero dummies.
    fn output_zero_color_rules(&mut self, l: &Layout) {
        for j in 0..2 {
            let g = self.b.nonzero_flag(Lc::var(l.n_new[j].color1));
            let not_g = Lc::one().minus_var(g);
            self.b.assert_zero_under(
                not_g.clone(),
                Lc::var(l.n_new[j].v1),
                "zero-color-worthless",
            );
            self.b.assert_zero_under(
                not_g.clone(),
                Lc::var(l.n_new[j].v2),
                "zero-color-no-debt",
            );
            self.b
                .assert_zero_under(not_g, Lc::var(l.n_new[j].s), "zero-color-not-sibling");
        }
    }

    fn note_lcs(n: &NoteVars) -> Vec<Lc> {
        [
            n.a_pk, n.s, n.color1, n.v1, n.color2, n.v2, n.bt, n.rho, n.gamma, n.tag_hi, n.tag_lo,
        ]
        .iter()
        .map(|&v| Lc::var(v))
        .collect()
    }

    /// The always-on hash statements; returns the evidence-side linear
    /// combinations needed by the completion cases.
    fn common_hash_checks(&mut self, l: &Layout) -> CommonHashes {
        for i in 0..2 {
            let cm_old = self
                .b
                .hash_gadget(HcDomain::Commitment, &Self::note_lcs(&l.n_old[i]));
            let root =
                self.b
                    .merkle_fold_gadget(cm_old, &l.paths[i].siblings, &l.paths[i].pos_bits);
            self.b.assert_zero_under(
                Lc::one().minus_var(l.dummy[i]),
                root.minus(&Lc::var(l.rt)),
                "old-note-membership",
            );
            let ask = [Lc::var(l.a_sk[i][0]), Lc::var(l.a_sk[i][1])];
            let nf = self.b.hash_gadget(
                HcDomain::Nullifier,
                &[ask[0].clone(), ask[1].clone(), Lc::var(l.n_old[i].rho)],
            );
            self.b
                .assert_zero(nf.minus(&Lc::var(l.nf[i])), "nullifier-integrity");
            let apk = self
                .b
                .hash_gadget(HcDomain::Addr, &[ask[0].clone(), ask[1].clone(), Lc::zero()]);
            self.b
                .assert_zero(apk.minus(&Lc::var(l.n_old[i].a_pk)), "spend-key-validity");
        }
        for j in 0..2 {
            let rho = self.b.hash_gadget(
                HcDomain::Rho,
                &[
                    Lc::constant(Fp::from_u64(j as u64 + 1)),
                    Lc::var(l.phi[0]),
                    Lc::var(l.phi[1]),
                    Lc::var(l.h_sig[0]),
                    Lc::var(l.h_sig[1]),
                ],
            );
            self.b
                .assert_zero(rho.minus(&Lc::var(l.n_new[j].rho)), "rho-uniqueness");
            let cm = self
                .b
                .hash_gadget(HcDomain::Commitment, &Self::note_lcs(&l.n_new[j]));
            self.b.assert_zero(cm.minus(&Lc::var(l.cm[j])), "note-commit");
            self.b.assert_zero(
                Lc::var(l.n_new[j].tag_hi).minus(&Lc::var(l.h_sig[0])),
                "pair-tag-binding",
            );
            self.b.assert_zero(
                Lc::var(l.n_new[j].tag_lo).minus(&Lc::var(l.h_sig[1])),
                "pair-tag-binding",
            );
        }
        // evidence side: computed unconditionally, equated under the
        // completion selectors
        let cm3 = self
            .b
            .hash_gadget(HcDomain::Commitment, &Self::note_lcs(&l.n_old3));
        let root3 = self
            .b
            .merkle_fold_gadget(cm3, &l.path3.siblings, &l.path3.pos_bits);
        let root4 =
            self.b
                .merkle_fold_gadget(Lc::var(l.nf_old3), &l.path4.siblings, &l.path4.pos_bits);
        let ask3 = [Lc::var(l.a_sk3[0]), Lc::var(l.a_sk3[1])];
        let nf3 = self.b.hash_gadget(
            HcDomain::Nullifier,
            &[ask3[0].clone(), ask3[1].clone(), Lc::var(l.n_old3.rho)],
        );
        let apk3 = self
            .b
            .hash_gadget(HcDomain::Addr, &[ask3[0].clone(), ask3[1].clone(), Lc::zero()]);
        CommonHashes {
            root3,
            root4,
            nf3,
            apk3,
        }
    }

    /// (pos3 - pos_i - 1)(pos3 - pos_i + 1), zero iff |pos3 - pos_i| = 1.
    fn adjacency_products(&mut self, l: &Layout) -> [Var; 2] {
        let mut out = [0; 2];
        for i in 0..2 {
            let d = Lc::var(l.path3.pos).minus(&Lc::var(l.paths[i].pos));
            out[i] = self.b.mul(
                d.clone().minus(&Lc::one()),
                d.plus(&Lc::one()),
                "sibling-adjacency",
            );
        }
        out
    }

    /// Comparison bit vectors per input note: block_n > bt (strict) and
    /// block_n <= bt; recomposition is gated per case.
    fn height_bits(&mut self, l: &Layout) -> HeightBits {
        let mut gt = Vec::with_capacity(2);
        let mut le = Vec::with_capacity(2);
        for i in 0..2 {
            let after = Lc::var(l.block_n)
                .minus(&Lc::var(l.n_old[i].bt))
                .minus(&Lc::one());
            gt.push(self.b.bits_unchecked(after, 32));
            let before = Lc::var(l.n_old[i].bt).minus(&Lc::var(l.block_n));
            le.push(self.b.bits_unchecked(before, 32));
        }
        HeightBits { gt, le }
    }

    /// Gated recomposition tying a bit vector to its expression.
    fn gate_bits(&mut self, gate: &Lc, bits: &[Var], expr: Lc, label: &'static str) {
        self.b
            .assert_zero_under(gate.clone(), Builder::bits_value(bits).minus(&expr), label);
    }

    fn emit_case(&mut self, ca: CaseArrangement, sel: Var, ctx: &CaseCtx<'_>) {
        let l = ctx.layout;
        let g = Lc::var(sel);
        let a = ca.in_swap as usize; // actual index of the view's first input
        let o = ca.out_swap as usize; // actual index of the view's first output
        let inp = [&l.n_old[a], &l.n_old[1 - a]];
        let out = [&l.n_new[o], &l.n_new[1 - o]];
        let in_w = [ctx.w_old[a], ctx.w_old[1 - a]];
        let out_w = [ctx.w_new[o], ctx.w_new[1 - o]];
        let in_dummy_gate = [ctx.p_dummy[a], ctx.p_dummy[1 - a]];
        match ca.case {
            CaseId::DefaultPayment => {
                for i in 0..2 {
                    self.zero_under(&g, inp[i].s, "pay-plain-inputs");
                    self.zero_under(&g, inp[i].v2, "pay-no-input-debt");
                    self.zero_under(&g, out[i].s, "pay-plain-outputs");
                    self.zero_under(&g, out[i].v2, "pay-no-output-debt");
                    // dummy inputs are exempt from the color rule
                    self.b.assert_zero_under(
                        g.clone(),
                        Lc::var(inp[i].color1)
                            .minus(&Lc::var(l.c_tx))
                            .plus_var(in_dummy_gate[i]),
                        "pay-input-color",
                    );
                    self.b.assert_zero_under(
                        g.clone(),
                        Lc::var(out[i].color1).minus(&Lc::var(l.c_tx)),
                        "pay-output-color",
                    );
                }
                self.zero_under(&g, ctx.r_old, "pay-vpub-old-color");
                self.zero_under(&g, ctx.r_new, "pay-vpub-new-color");
                let balance = Lc::var(l.vpub_old_amount)
                    .plus_var(inp[0].v1)
                    .plus_var(inp[1].v1)
                    .minus_var(l.vpub_new_amount)
                    .minus_var(out[0].v1)
                    .minus_var(out[1].v1);
                self.b.assert_zero_under(g, balance, "pay-balance");
            }
            CaseId::ExchangeInit => {
                let (p, q) = (out[0], out[1]);
                for i in 0..2 {
                    self.zero_under(&g, inp[i].s, "init-plain-inputs");
                    self.zero_under(&g, inp[i].v2, "init-no-input-debt");
                    self.b.assert_zero_under(
                        g.clone(),
                        Lc::var(inp[i].color1)
                            .minus(&Lc::var(l.c_tx))
                            .plus_var(in_dummy_gate[i]),
                        "init-input-color",
                    );
                }
                self.zero_under(&g, p.s, "init-primary-flag");
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::var(q.s).minus(&Lc::one()),
                    "init-sibling-flag",
                );
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::one().minus_var(out_w[0]),
                    "init-primary-has-debt",
                );
                self.eq_under(&g, p.color2, q.color1, "init-pair-color");
                self.eq_under(&g, p.v2, q.v1, "init-pair-value");
                self.eq_under(&g, p.bt, q.bt, "init-pair-threshold");
                self.eq_under(&g, l.c_tx, p.color1, "init-give-color");
                let balance = Lc::var(inp[0].v1).plus_var(inp[1].v1).minus_var(p.v1);
                self.b.assert_zero_under(g, balance, "init-give-value");
            }
            CaseId::CancelByInitiator => {
                let (p, q) = (inp[0], inp[1]);
                self.zero_under(&g, p.s, "cancel-primary-flag");
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::var(q.s).minus(&Lc::one()),
                    "cancel-sibling-flag",
                );
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::one().minus_var(in_w[0]),
                    "cancel-primary-has-debt",
                );
                self.eq_under(&g, p.tag_hi, q.tag_hi, "cancel-pair-tag");
                self.eq_under(&g, p.tag_lo, q.tag_lo, "cancel-pair-tag");
                self.eq_under(&g, p.color2, q.color1, "cancel-pair-color");
                self.eq_under(&g, p.v2, q.v1, "cancel-pair-value");
                self.eq_under(&g, p.bt, q.bt, "cancel-pair-threshold");
                for j in 0..2 {
                    self.zero_under(&g, out[j].s, "cancel-plain-outputs");
                    self.zero_under(&g, out[j].v2, "cancel-no-output-debt");
                    self.eq_under(&g, out[j].color1, p.color1, "cancel-output-color");
                }
                let balance = Lc::var(out[0].v1).plus_var(out[1].v1).minus_var(p.v1);
                self.b
                    .assert_zero_under(g.clone(), balance, "cancel-recover-value");
                let after = Lc::var(l.block_n).minus(&Lc::var(p.bt)).minus(&Lc::one());
                self.gate_bits(&g, &ctx.heights.gt[a], after, "cancel-past-threshold");
            }
            CaseId::CounterpartyResponse => {
                let (p, f) = (inp[0], inp[1]);
                let (r, c) = (out[0], out[1]);
                for i in 0..2 {
                    self.zero_under(&g, inp[i].s, "respond-plain-inputs");
                    self.zero_under(&g, out[i].s, "respond-plain-outputs");
                    self.zero_under(&g, out[i].v2, "respond-no-output-debt");
                }
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::one().minus_var(in_w[0]),
                    "respond-primary-has-debt",
                );
                self.zero_under(&g, f.v2, "respond-funding-no-debt");
                self.eq_under(&g, r.v1, p.v1, "respond-receive-value");
                self.eq_under(&g, r.color1, p.color1, "respond-receive-color");
                self.eq_under(&g, p.color2, f.color1, "respond-debt-color");
                self.eq_under(&g, c.color1, f.color1, "respond-change-color");
                let debt = Lc::var(p.v2).plus_var(c.v1).minus_var(f.v1);
                self.b
                    .assert_zero_under(g.clone(), debt, "respond-debt-cancelled");
                let before = Lc::var(p.bt).minus(&Lc::var(l.block_n));
                self.gate_bits(&g, &ctx.heights.le[a], before, "respond-within-threshold");
            }
            CaseId::CompleteByInitiator => {
                let (q, e) = (inp[0], inp[1]);
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::var(q.s).minus(&Lc::one()),
                    "complete-sibling-flag",
                );
                self.zero_under(&g, e.s, "complete-extra-plain");
                self.zero_under(&g, q.v2, "complete-no-input-debt");
                self.zero_under(&g, e.v2, "complete-no-input-debt");
                self.eq_under(&g, l.c_tx, q.color1, "complete-color");
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::var(e.color1)
                        .minus(&Lc::var(l.c_tx))
                        .plus_var(in_dummy_gate[1]),
                    "complete-extra-color",
                );
                for j in 0..2 {
                    self.zero_under(&g, out[j].s, "complete-plain-outputs");
                    self.zero_under(&g, out[j].v2, "complete-no-output-debt");
                    self.eq_under(&g, out[j].color1, l.c_tx, "complete-output-color");
                }
                let balance = Lc::var(q.v1)
                    .plus_var(e.v1)
                    .minus_var(out[0].v1)
                    .minus_var(out[1].v1);
                self.b
                    .assert_zero_under(g.clone(), balance, "complete-balance");
                let after = Lc::var(l.block_n).minus(&Lc::var(q.bt)).minus(&Lc::one());
                self.gate_bits(&g, &ctx.heights.gt[a], after, "complete-past-threshold");
                self.emit_evidence(&g, ctx, q, a);
            }
            CaseId::CompleteSecondScenario => {
                let (q, d) = (inp[0], inp[1]);
                let (r, t) = (out[0], out[1]);
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::var(q.s).minus(&Lc::one()),
                    "second-sibling-flag",
                );
                self.zero_under(&g, d.s, "second-debt-note-plain");
                self.b.assert_zero_under(
                    g.clone(),
                    Lc::one().minus_var(in_w[1]),
                    "second-debt-present",
                );
                for j in 0..2 {
                    self.zero_under(&g, out[j].s, "second-plain-outputs");
                    self.zero_under(&g, out[j].v2, "second-no-output-debt");
                }
                self.eq_under(&g, q.color1, d.color2, "second-debt-color");
                self.eq_under(&g, r.color1, q.color1, "second-receive-color");
                self.eq_under(&g, t.color1, d.color1, "second-passthrough-color");
                let covers = Lc::var(q.v1).minus_var(d.v2).minus_var(r.v1);
                self.b
                    .assert_zero_under(g.clone(), covers, "second-debt-covered");
                self.eq_under(&g, d.v1, t.v1, "second-passthrough-value");
                let after = Lc::var(l.block_n).minus(&Lc::var(q.bt)).minus(&Lc::one());
                self.gate_bits(&g, &ctx.heights.gt[a], after, "second-past-threshold");
                let before = Lc::var(d.bt).minus(&Lc::var(l.block_n));
                self.gate_bits(&g, &ctx.heights.le[1 - a], before, "second-within-threshold");
                self.emit_evidence(&g, ctx, q, a);
            }
            CaseId::Disallowed => unreachable!("no selector for disallowed shapes"),
        }
    }

    fn zero_under(&mut self, gate: &Lc, v: Var, label: &'static str) {
        self.b.assert_zero_under(gate.clone(), Lc::var(v), label);
    }

    fn eq_under(&mut self, gate: &Lc, x: Var, y: Var, label: &'static str) {
        self.b
            .assert_zero_under(gate.clone(), Lc::var(x).minus(&Lc::var(y)), label);
    }

    /// The sibling-spend evidence under a completion selector: the paired
    /// primary's tag matches the sibling's, its commitment and nullifier
    /// are both in the tree, the nullifier and key derivations hold, and
    /// the commitment sits adjacent to the sibling's.
    fn emit_evidence(&mut self, g: &Lc, ctx: &CaseCtx<'_>, sibling: &NoteVars, sib_index: usize) {
        let l = ctx.layout;
        self.b.assert_zero_under(
            g.clone(),
            Lc::var(l.n_old3.tag_hi).minus(&Lc::var(sibling.tag_hi)),
            "evidence-pair-tag",
        );
        self.b.assert_zero_under(
            g.clone(),
            Lc::var(l.n_old3.tag_lo).minus(&Lc::var(sibling.tag_lo)),
            "evidence-pair-tag",
        );
        self.b.assert_zero_under(
            g.clone(),
            ctx.common.root3.clone().minus(&Lc::var(l.rt)),
            "evidence-primary-membership",
        );
        self.b.assert_zero_under(
            g.clone(),
            ctx.common.root4.clone().minus(&Lc::var(l.rt)),
            "evidence-nullifier-membership",
        );
        self.b.assert_zero_under(
            g.clone(),
            ctx.common.nf3.clone().minus(&Lc::var(l.nf_old3)),
            "evidence-nullifier-integrity",
        );
        self.b.assert_zero_under(
            g.clone(),
            ctx.common.apk3.clone().minus(&Lc::var(l.n_old3.a_pk)),
            "evidence-key-validity",
        );
        self.b.assert_zero_under(
            g.clone(),
            Lc::var(ctx.t_adj[sib_index]),
            "evidence-adjacency",
        );
    }
}

struct CommonHashes {
    root3: Lc,
    root4: Lc,
    nf3: Lc,
    apk3: Lc,
}

struct HeightBits {
    gt: Vec<Vec<Var>>,
    le: Vec<Vec<Var>>,
}

struct CaseCtx<'a> {
    layout: &'a Layout,
    w_old: [Var; 2],
    w_new: [Var; 2],
    p_dummy: [Var; 2],
    r_old: Var,
    r_new: Var,
    common: &'a CommonHashes,
    t_adj: [Var; 2],
    heights: &'a HeightBits,
}

impl JoinSplitCircuit {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_constraints(&self) -> usize {
        self.cs.constraints.len()
    }

    fn fill_note(&self, w: &mut [Fp], vars: &NoteVars, note: &crate::note::Note) {
        let tag = hashc::digest_limbs(&note.pair_tag);
        w[vars.a_pk] = hashc::digest_fp(&note.a_pk);
        w[vars.s] = Fp::from_u64(note.s as u64);
        w[vars.color1] = Fp::from_u64(note.color1 as u64);
        w[vars.v1] = Fp::from_u64(note.v1);
        w[vars.color2] = Fp::from_u64(note.color2 as u64);
        w[vars.v2] = Fp::from_u64(note.v2);
        w[vars.bt] = Fp::from_u64(note.bt as u64);
        w[vars.rho] = hashc::digest_fp(&note.rho);
        w[vars.gamma] = hashc::digest_fp(&note.gamma);
        w[vars.tag_hi] = tag[0];
        w[vars.tag_lo] = tag[1];
    }

    fn fill_path(
        &self,
        w: &mut [Fp],
        vars: &PathVars,
        path: &crate::merkle::MerklePath,
    ) -> Result<(), ShapeError> {
        if path.siblings.len() != self.depth {
            return Err(ShapeError::PathLength);
        }
        for (v, s) in vars.siblings.iter().zip(&path.siblings) {
            w[*v] = hashc::digest_fp(s);
        }
        w[vars.pos] = Fp::from_u64(path.pos);
        Ok(())
    }

    fn fill_slots(
        &self,
        chi: &PublicInput,
        omega: &Witness,
        w: &mut [Fp],
    ) -> Result<(), ShapeError> {
        let l = &self.layout;
        w[l.rt] = hashc::digest_fp(&chi.rt);
        w[l.nf[0]] = hashc::digest_fp(&chi.nf_old_1);
        w[l.nf[1]] = hashc::digest_fp(&chi.nf_old_2);
        w[l.cm[0]] = hashc::digest_fp(&chi.cm_new_1);
        w[l.cm[1]] = hashc::digest_fp(&chi.cm_new_2);
        w[l.vpub_old_color] = Fp::from_u64(chi.v_pub_old.color as u64);
        w[l.vpub_old_amount] = Fp::from_u64(chi.v_pub_old.amount);
        w[l.vpub_new_color] = Fp::from_u64(chi.v_pub_new.color as u64);
        w[l.vpub_new_amount] = Fp::from_u64(chi.v_pub_new.amount);
        w[l.block_n] = Fp::from_u64(chi.block_n as u64);
        let hs = hashc::digest_limbs(&chi.h_sig);
        w[l.h_sig[0]] = hs[0];
        w[l.h_sig[1]] = hs[1];
        for (vars, digest) in l.h_auth.iter().zip([&chi.h_1, &chi.h_2]) {
            let limbs = hashc::digest_limbs(digest);
            w[vars[0]] = limbs[0];
            w[vars[1]] = limbs[1];
        }
        self.fill_path(w, &l.paths[0], &omega.path_1)?;
        self.fill_path(w, &l.paths[1], &omega.path_2)?;
        self.fill_note(w, &l.n_old[0], &omega.n_old_1);
        self.fill_note(w, &l.n_old[1], &omega.n_old_2);
        for (vars, key) in l.a_sk.iter().zip([&omega.a_sk_1, &omega.a_sk_2]) {
            let limbs = key.limbs();
            w[vars[0]] = limbs[0];
            w[vars[1]] = limbs[1];
        }
        let phi = hashc::digest_limbs(&omega.phi);
        w[l.phi[0]] = phi[0];
        w[l.phi[1]] = phi[1];
        w[l.dummy[0]] = Fp::from_u64(omega.dummy_1 as u64);
        w[l.dummy[1]] = Fp::from_u64(omega.dummy_2 as u64);
        self.fill_note(w, &l.n_new[0], &omega.n_new_1);
        self.fill_note(w, &l.n_new[1], &omega.n_new_2);
        self.fill_path(w, &l.path3, &omega.path_3)?;
        self.fill_note(w, &l.n_old3, &omega.n_old_3);
        let a3 = omega.a_sk_3.limbs();
        w[l.a_sk3[0]] = a3[0];
        w[l.a_sk3[1]] = a3[1];
        self.fill_path(w, &l.path4, &omega.path_4)?;
        w[l.nf_old3] = hashc::digest_fp(&omega.nf_old_3);
        Ok(())
    }

    /// The transaction color the prover assigns under a candidate.
    fn candidate_c_tx(&self, ca: &CaseArrangement, omega: &Witness) -> Fp {
        let inp = [&omega.n_old_1, &omega.n_old_2];
        let out = [&omega.n_new_1, &omega.n_new_2];
        let color = match ca.case {
            CaseId::DefaultPayment => {
                if !omega.dummy_1 {
                    inp[0].color1
                } else if !omega.dummy_2 {
                    inp[1].color1
                } else {
                    out[0].color1
                }
            }
            CaseId::ExchangeInit => out[ca.out_swap as usize].color1,
            CaseId::CancelByInitiator => inp[ca.in_swap as usize].color1,
            CaseId::CompleteByInitiator => inp[ca.in_swap as usize].color1,
            _ => 0,
        };
        Fp::from_u64(color as u64)
    }

    fn fill_candidate(&self, ca: &CaseArrangement, omega: &Witness, w: &mut [Fp]) {
        for (slot, sel) in &self.selectors {
            w[*sel] = if slot == ca { Fp::ONE } else { Fp::ZERO };
        }
        w[self.layout.c_tx] = self.candidate_c_tx(ca, omega);
    }

    /// Full satisfiability search over the selector candidates. The
    /// classified case is tried first; failure diagnostics come from the
    /// first candidate tried.
    pub fn evaluate(
        &self,
        chi: &PublicInput,
        omega: &Witness,
    ) -> Result<Satisfiability, ShapeError> {
        let mut w = self.cs.blank_assignment();
        self.fill_slots(chi, omega, &mut w)?;
        self.cs.synthesize_phase(Phase::Base, &mut w);
        if let Some(i) = self.cs.first_unsatisfied_base(&w) {
            return Ok(Satisfiability::Unsatisfied {
                constraint: i,
                label: self.cs.label(i),
            });
        }
        let preferred =
            classify_case(&omega.n_old_1, &omega.n_old_2, &omega.n_new_1, &omega.n_new_2);
        let mut order: Vec<&(CaseArrangement, Var)> = self.selectors.iter().collect();
        order.sort_by_key(|(ca, _)| ca.case != preferred);
        let mut first_failure: Option<usize> = None;
        for (ca, _) in order {
            self.fill_candidate(ca, omega, &mut w);
            self.cs.synthesize_phase(Phase::Candidate, &mut w);
            match self.cs.first_unsatisfied_candidate(&w) {
                None => return Ok(Satisfiability::Satisfied),
                Some(i) => {
                    first_failure.get_or_insert(i);
                }
            }
        }
        let constraint = first_failure.expect("at least one candidate was tried");
        Ok(Satisfiability::Unsatisfied {
            constraint,
            label: self.cs.label(constraint),
        })
    }

    /// Satisfiability as a plain boolean; shape violations are
    /// unsatisfiable.
    pub fn is_satisfiable(&self, chi: &PublicInput, omega: &Witness) -> bool {
        matches!(self.evaluate(chi, omega), Ok(Satisfiability::Satisfied))
    }
}
