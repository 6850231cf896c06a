//! Rank-1 constraint system and gadget library.
//!
//! A constraint is a triple of sparse linear combinations (a, b, s) over the
//! variable vector w, satisfied when <a,w> * <b,w> = <s,w>. Variable 0 is
//! the constant 1 and public variables precede auxiliary variables.
//!
//! The [`Builder`] records, next to every constraint, a synthesis recipe for
//! each derived variable (products, bit decompositions, nonzero flags), so
//! an assignment can be produced mechanically from the slot variables. The
//! prover distinguishes two variable phases: `Base` values depend only on
//! the statement being proven, while `Candidate` values (the spending-case
//! selectors and whatever hangs off them) are re-synthesized per candidate
//! case during satisfiability search.

use crate::field::Fp;
use crate::hashc::{self, HcDomain, RATE, ROUNDS, STATE_WIDTH};

pub type Var = usize;

/// Sparse linear combination: sum of coefficient * variable.
#[derive(Clone, Debug, Default)]
pub struct Lc {
    pub terms: Vec<(Fp, Var)>,
}

impl Lc {
    pub fn zero() -> Lc {
        Lc { terms: Vec::new() }
    }

    pub fn constant(c: Fp) -> Lc {
        Lc {
            terms: vec![(c, 0)],
        }
    }

    pub fn one() -> Lc {
        Lc::constant(Fp::ONE)
    }

    pub fn var(v: Var) -> Lc {
        Lc {
            terms: vec![(Fp::ONE, v)],
        }
    }

    pub fn term(c: Fp, v: Var) -> Lc {
        Lc {
            terms: vec![(c, v)],
        }
    }

    pub fn plus(mut self, other: &Lc) -> Lc {
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn minus(mut self, other: &Lc) -> Lc {
        self.terms
            .extend(other.terms.iter().map(|&(c, v)| (-c, v)));
        self
    }

    pub fn plus_var(self, v: Var) -> Lc {
        self.plus(&Lc::var(v))
    }

    pub fn minus_var(self, v: Var) -> Lc {
        self.minus(&Lc::var(v))
    }

    pub fn plus_const(self, c: Fp) -> Lc {
        self.plus(&Lc::constant(c))
    }

    pub fn scaled(&self, k: Fp) -> Lc {
        Lc {
            terms: self.terms.iter().map(|&(c, v)| (c * k, v)).collect(),
        }
    }

    pub fn eval(&self, w: &[Fp]) -> Fp {
        let mut acc = Fp::ZERO;
        for &(c, v) in &self.terms {
            acc += c * w[v];
        }
        acc
    }

}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub a: Lc,
    pub b: Lc,
    pub s: Lc,
    pub label: &'static str,
}

impl Constraint {
    pub fn is_satisfied(&self, w: &[Fp]) -> bool {
        self.a.eval(w) * self.b.eval(w) == self.s.eval(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    /// Determined by the statement (chi, omega) alone.
    Base,
    /// Depends on the selected spending case.
    Candidate,
}

#[derive(Clone, Debug)]
enum Recipe {
    /// w[out] = <a,w> * <b,w>
    Mul { a: Lc, b: Lc, out: Var },
    /// w[first..first+count] = low bits of <expr,w>
    Bits { expr: Lc, first: Var, count: usize },
    /// flag = (expr != 0), inv = expr^-1 or 0
    NonZero { expr: Lc, inv: Var, flag: Var },
}

/// A finished constraint system plus the synthesis recipes and the
/// base/candidate partition of constraints.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub constraints: Vec<Constraint>,
    pub num_public: usize,
    pub num_vars: usize,
    recipes: Vec<(Phase, Recipe)>,
    base_constraints: Vec<usize>,
    candidate_constraints: Vec<usize>,
}

impl ConstraintSystem {
    pub fn num_aux(&self) -> usize {
        self.num_vars - self.num_public
    }

    pub fn blank_assignment(&self) -> Vec<Fp> {
        let mut w = vec![Fp::ZERO; self.num_vars];
        w[0] = Fp::ONE;
        w
    }

    /// Index of the first unsatisfied constraint, if any.
    pub fn first_unsatisfied(&self, w: &[Fp]) -> Option<usize> {
        self.constraints
            .iter()
            .position(|c| !c.is_satisfied(w))
    }

    pub fn is_satisfied(&self, w: &[Fp]) -> bool {
        self.first_unsatisfied(w).is_none()
    }

    fn check_subset(&self, indices: &[usize], w: &[Fp]) -> Option<usize> {
        indices
            .iter()
            .copied()
            .find(|&i| !self.constraints[i].is_satisfied(w))
    }

    /// First unsatisfied base-phase constraint.
    pub fn first_unsatisfied_base(&self, w: &[Fp]) -> Option<usize> {
        self.check_subset(&self.base_constraints, w)
    }

    /// First unsatisfied candidate-phase constraint.
    pub fn first_unsatisfied_candidate(&self, w: &[Fp]) -> Option<usize> {
        self.check_subset(&self.candidate_constraints, w)
    }

    /// Runs the synthesis recipes of one phase over the assignment.
    pub fn synthesize_phase(&self, phase: Phase, w: &mut Vec<Fp>) {
        for (p, recipe) in &self.recipes {
            if *p != phase {
                continue;
            }
            match recipe {
                Recipe::Mul { a, b, out } => {
                    w[*out] = a.eval(w) * b.eval(w);
                }
                Recipe::Bits { expr, first, count } => {
                    let value = expr.eval(w);
                    let low = u64::from_be_bytes(value.to_be24()[16..24].try_into().unwrap());
                    for i in 0..*count {
                        w[first + i] = Fp::from_u64((low >> i) & 1);
                    }
                }
                Recipe::NonZero { expr, inv, flag } => {
                    let value = expr.eval(w);
                    match value.invert() {
                        Some(v) => {
                            w[*inv] = v;
                            w[*flag] = Fp::ONE;
                        }
                        None => {
                            w[*inv] = Fp::ZERO;
                            w[*flag] = Fp::ZERO;
                        }
                    }
                }
            }
        }
    }

    pub fn label(&self, index: usize) -> &'static str {
        self.constraints[index].label
    }
}

/// Incremental circuit builder.
pub struct Builder {
    constraints: Vec<Constraint>,
    recipes: Vec<(Phase, Recipe)>,
    var_phase: Vec<Phase>,
    num_public: usize,
    public_closed: bool,
    phase: Phase,
}

impl Default for Builder {
    fn default() -> Self {
        Builder::new()
    }
}

impl Builder {
    pub fn new() -> Builder {
        Builder {
            constraints: Vec::new(),
            recipes: Vec::new(),
            var_phase: vec![Phase::Base], // the constant one
            num_public: 1,
            public_closed: false,
            phase: Phase::Base,
        }
    }

    /// Switches the phase for subsequently allocated variables/recipes.
    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Allocates a public-input slot; must precede all auxiliary variables.
    pub fn alloc_public(&mut self) -> Var {
        assert!(!self.public_closed, "public inputs must come first");
        let v = self.var_phase.len();
        self.var_phase.push(Phase::Base);
        self.num_public += 1;
        v
    }

    /// Allocates an auxiliary slot variable, filled externally.
    pub fn alloc(&mut self) -> Var {
        self.public_closed = true;
        let v = self.var_phase.len();
        self.var_phase.push(self.phase);
        v
    }

    pub fn enforce(&mut self, a: Lc, b: Lc, s: Lc, label: &'static str) {
        self.constraints.push(Constraint { a, b, s, label });
    }

    /// expr = 0.
    pub fn assert_zero(&mut self, expr: Lc, label: &'static str) {
        self.enforce(expr, Lc::one(), Lc::zero(), label);
    }

    /// gate * expr = 0 (rank-1 directly: both sides are linear).
    pub fn assert_zero_under(&mut self, gate: Lc, expr: Lc, label: &'static str) {
        self.enforce(gate, expr, Lc::zero(), label);
    }

    /// var * (1 - var) = 0.
    pub fn assert_boolean(&mut self, var: Var) {
        self.enforce(
            Lc::var(var),
            Lc::one().minus_var(var),
            Lc::zero(),
            "boolean",
        );
    }

    /// (sum of coefficient*var - target) * 1 = 0.
    pub fn assert_linear_sum(&mut self, terms: &[(Fp, Var)], target: Lc) {
        let sum = Lc {
            terms: terms.to_vec(),
        };
        self.assert_zero(sum.minus(&target), "linear-sum");
    }

    /// Product variable: out = <a,w> * <b,w>, with synthesis recipe.
    pub fn mul(&mut self, a: Lc, b: Lc, label: &'static str) -> Var {
        let out = self.alloc();
        self.enforce(a.clone(), b.clone(), Lc::var(out), label);
        self.recipes.push((self.phase, Recipe::Mul { a, b, out }));
        out
    }

    /// Allocates `count` boolean-constrained bit variables for `expr`
    /// without asserting recomposition (callers gate it as needed).
    pub fn bits_unchecked(&mut self, expr: Lc, count: usize) -> Vec<Var> {
        let first = self.var_phase.len();
        let mut vars = Vec::with_capacity(count);
        for _ in 0..count {
            let v = self.alloc();
            self.assert_boolean(v);
            vars.push(v);
        }
        self.recipes
            .push((self.phase, Recipe::Bits { expr, first, count }));
        vars
    }

    /// Recomposition expression for a bit vector: sum 2^i * bit_i.
    pub fn bits_value(bits: &[Var]) -> Lc {
        let mut lc = Lc::zero();
        let mut coeff = Fp::ONE;
        for &b in bits {
            lc = lc.plus(&Lc::term(coeff, b));
            coeff = coeff + coeff;
        }
        lc
    }

    /// Forces x <= y for values representable in `bits` bits by
    /// bit-decomposing y - x and asserting recomposition.
    pub fn assert_leq_bits(&mut self, x: Lc, y: Lc, bits: usize) {
        let diff = y.minus(&x);
        let bit_vars = self.bits_unchecked(diff.clone(), bits);
        self.assert_zero(Self::bits_value(&bit_vars).minus(&diff), "leq-recompose");
    }

    /// Nonzero flag: returns t with t = 1 iff expr != 0 (and t boolean).
    pub fn nonzero_flag(&mut self, expr: Lc) -> Var {
        let inv = self.alloc();
        let flag = self.alloc();
        // expr * inv = flag ; expr * (1 - flag) = 0
        self.enforce(expr.clone(), Lc::var(inv), Lc::var(flag), "nonzero-inv");
        self.enforce(
            expr.clone(),
            Lc::one().minus_var(flag),
            Lc::zero(),
            "nonzero-gate",
        );
        self.recipes
            .push((self.phase, Recipe::NonZero { expr, inv, flag }));
        flag
    }

    /// In-circuit sponge permutation over linear-combination state.
    fn permute_gadget(&mut self, state: [Lc; STATE_WIDTH]) -> [Lc; STATE_WIDTH] {
        let mut state = state;
        for round in 0..ROUNDS {
            let rc = hashc::round_constant(round);
            let mut cubes: [Lc; STATE_WIDTH] = [Lc::zero(), Lc::zero(), Lc::zero()];
            for i in 0..STATE_WIDTH {
                let x = state[i].clone().plus_const(rc[i]);
                let sq = self.mul(x.clone(), x.clone(), "hc-square");
                let cube = self.mul(Lc::var(sq), x, "hc-cube");
                cubes[i] = Lc::var(cube);
            }
            // mix: out_i = cubes_i + sum(cubes)
            let sum = cubes[0]
                .clone()
                .plus(&cubes[1])
                .plus(&cubes[2]);
            for i in 0..STATE_WIDTH {
                state[i] = cubes[i].clone().plus(&sum);
            }
        }
        state
    }

    /// In-circuit hash statement: returns the output as a linear
    /// combination; the caller equates it with whatever digest it claims.
    pub fn hash_gadget(&mut self, domain: HcDomain, inputs: &[Lc]) -> Lc {
        let iv = hashc::capacity_iv(domain, inputs.len());
        let mut state = [Lc::zero(), Lc::zero(), Lc::constant(iv)];
        if inputs.is_empty() {
            return self.permute_gadget(state)[0].clone();
        }
        for chunk in inputs.chunks(RATE) {
            for (i, x) in chunk.iter().enumerate() {
                state[i] = state[i].clone().plus(x);
            }
            state = self.permute_gadget(state);
        }
        state[0].clone()
    }

    /// Constrains `output` to equal the hash of `inputs`.
    pub fn assert_hash_preimage(&mut self, output: Lc, domain: HcDomain, inputs: &[Lc]) {
        let h = self.hash_gadget(domain, inputs);
        self.assert_zero(h.minus(&output), "hash-preimage");
    }

    /// Folds a leaf to a root through pos-bit-controlled sibling selection;
    /// returns the computed root. Each pos bit must already be boolean.
    pub fn merkle_fold_gadget(&mut self, leaf: Lc, siblings: &[Var], pos_bits: &[Var]) -> Lc {
        assert_eq!(siblings.len(), pos_bits.len());
        let mut cur = leaf;
        for (sib, bit) in siblings.iter().zip(pos_bits) {
            // left = cur + bit*(sib - cur); right = cur + sib - left
            let delta = self.mul(
                Lc::var(*bit),
                Lc::var(*sib).minus(&cur),
                "merkle-mux",
            );
            let left = cur.clone().plus_var(delta);
            let right = cur.clone().plus_var(*sib).minus(&left);
            cur = self.hash_gadget(HcDomain::MerkleNode, &[left, right]);
        }
        cur
    }

    /// Constrains (root, leaf, path) to be a valid membership path.
    pub fn assert_merkle_path(&mut self, root: Lc, leaf: Lc, siblings: &[Var], pos_bits: &[Var]) {
        let folded = self.merkle_fold_gadget(leaf, siblings, pos_bits);
        self.assert_zero(folded.minus(&root), "merkle-root");
    }

    pub fn finish(self) -> ConstraintSystem {
        let var_phase = self.var_phase;
        let mut base_constraints = Vec::new();
        let mut candidate_constraints = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            let phase = [&c.a, &c.b, &c.s]
                .iter()
                .flat_map(|lc| lc.terms.iter())
                .map(|&(_, v)| var_phase[v])
                .max()
                .unwrap_or(Phase::Base);
            if phase == Phase::Base {
                base_constraints.push(i);
            } else {
                candidate_constraints.push(i);
            }
        }
        ConstraintSystem {
            num_vars: var_phase.len(),
            num_public: self.num_public,
            constraints: self.constraints,
            recipes: self.recipes,
            base_constraints,
            candidate_constraints,
        }
    }
}
