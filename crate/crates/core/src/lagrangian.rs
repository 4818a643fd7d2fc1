//! Augmented Lagrangian evaluation, residuals, and multiplier updates.
//!
//! Global AL: `f(x) + sum_c [mu_c phi_c + rho_c^2 phi_c^2]`; the local AL for
//! block `i` keeps only the terms that read the block and the constraints in
//! `phi_i`, with coupled variables frozen at `w_{-i}`. Inequality constraints
//! contribute through their slack-eliminated value `phi = max(psi,
//! -mu/(2 rho^2))`, so the gradient weight `mu + 2 rho^2 phi` vanishes
//! exactly where the constraint is inactive.

use thiserror::Error;

use crate::model::{BlockId, ConstraintKind, DecomposedProblem, Slot};

#[derive(Debug, Error, PartialEq)]
pub enum LagrangianError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coupling vector for block {block} must have length {expected}, got {got}")]
    MissingCouplingValue { block: BlockId, expected: usize, got: usize },
    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),
    #[error("multiplier state invalid: {0}")]
    BadState(String),
}

/// Per-constraint multipliers and penalties, stored once globally even when a
/// constraint belongs to several phi_i sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Geometric growth factor beta applied by `update_penalty`.
    pub penalty_growth: f64,
    pub rho_cap: f64,
}

impl MultiplierState {
    /// Zero multipliers, unit penalties, fixed schedule (beta = 1).
    pub fn new(num_constraints: usize) -> Self {
        Self {
            mu: vec![0.0; num_constraints],
            rho: vec![1.0; num_constraints],
            penalty_growth: 1.0,
            rho_cap: f64::INFINITY,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho.fill(rho);
        self
    }

    pub fn with_growth(mut self, beta: f64, cap: f64) -> Self {
        self.penalty_growth = beta;
        self.rho_cap = cap;
        self
    }

    pub fn validate(&self, num_constraints: usize) -> Result<(), LagrangianError> {
        if self.mu.len() != num_constraints || self.rho.len() != num_constraints {
            return Err(LagrangianError::BadState(format!(
                "mu/rho must have one entry per constraint ({num_constraints})"
            )));
        }
        if self.rho.iter().any(|&r| !(r > 0.0)) {
            return Err(LagrangianError::BadState("rho must be strictly positive".into()));
        }
        if !(self.penalty_growth >= 1.0) {
            return Err(LagrangianError::BadState("penalty growth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Primal residual C (per constraint) and dual residual D (per block), with
/// their infinity norms.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub primal: Vec<f64>,
    pub dual: Vec<Vec<f64>>,
    pub primal_inf_norm: f64,
    pub dual_inf_norm: f64,
}

impl Residuals {
    pub fn new(primal: Vec<f64>, dual: Vec<Vec<f64>>) -> Self {
        let primal_inf_norm = inf_norm(&primal);
        let dual_inf_norm = dual.iter().map(|d| inf_norm(d)).fold(0.0, join_norm);
        Self { primal, dual, primal_inf_norm, dual_inf_norm }
    }

    /// C entries grouped for one subproblem via the constraint assignment.
    pub fn primal_for_block<'a>(
        &'a self,
        problem: &'a DecomposedProblem,
        id: BlockId,
    ) -> Result<impl Iterator<Item = f64> + 'a, LagrangianError> {
        let idx = problem.constraints_of_block(id).map_err(|_| LagrangianError::UnknownBlock(id))?;
        Ok(idx.iter().map(|&c| self.primal[c]))
    }
}

/// Infinity norm that propagates NaN instead of silently dropping it.
pub fn inf_norm(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

fn join_norm(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Slack-eliminated constraint value used in AL evaluation and residuals.
#[inline]
pub(crate) fn effective_phi(kind: ConstraintKind, psi: f64, mu: f64, rho: f64) -> f64 {
    match kind {
        ConstraintKind::Equality => psi,
        ConstraintKind::Inequality => psi.max(-mu / (2.0 * rho * rho)),
    }
}

/// Objective value `f(x)` over a flat snapshot.
pub fn objective_value(problem: &DecomposedProblem, x: &[f64]) -> Result<f64, LagrangianError> {
    check_snapshot(problem, x)?;
    let mut z = vec![0.0; problem.max_scope_dim()];
    Ok(objective_value_unchecked(problem, x, &mut z))
}

fn objective_value_unchecked(problem: &DecomposedProblem, x: &[f64], z: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for (ti, term) in problem.terms().iter().enumerate() {
        let slots = problem.term_flat_slots(ti);
        for (dst, &src) in z.iter_mut().zip(slots) {
            *dst = x[src];
        }
        acc += term.function.eval(&z[..slots.len()]);
    }
    acc
}

/// Global augmented Lagrangian at a flat snapshot.
pub fn eval_global_al(
    problem: &DecomposedProblem,
    x: &[f64],
    state: &MultiplierState,
) -> Result<f64, LagrangianError> {
    check_snapshot(problem, x)?;
    state.validate(problem.num_constraints())?;
    let mut z = vec![0.0; problem.max_scope_dim()];
    let mut acc = objective_value_unchecked(problem, x, &mut z);
    for (ci, con) in problem.constraints().iter().enumerate() {
        let slots = problem.constraint_flat_slots(ci);
        for (dst, &src) in z.iter_mut().zip(slots) {
            *dst = x[src];
        }
        let psi = con.function.eval(&z[..slots.len()]);
        let (mu, rho) = (state.mu[ci], state.rho[ci]);
        let phi = effective_phi(con.kind, psi, mu, rho);
        acc += mu * phi + rho * rho * phi * phi;
    }
    Ok(acc)
}

/// Per-constraint primal residual C (slack-eliminated values).
pub fn primal_residual(
    problem: &DecomposedProblem,
    x: &[f64],
    state: &MultiplierState,
) -> Result<Vec<f64>, LagrangianError> {
    check_snapshot(problem, x)?;
    state.validate(problem.num_constraints())?;
    let mut z = vec![0.0; problem.max_scope_dim()];
    let mut out = Vec::with_capacity(problem.num_constraints());
    for (ci, con) in problem.constraints().iter().enumerate() {
        let slots = problem.constraint_flat_slots(ci);
        for (dst, &src) in z.iter_mut().zip(slots) {
            *dst = x[src];
        }
        let psi = con.function.eval(&z[..slots.len()]);
        out.push(effective_phi(con.kind, psi, state.mu[ci], state.rho[ci]));
    }
    Ok(out)
}

/// Per-block dual residual D = x_curr - x_prev.
pub fn dual_residual(
    problem: &DecomposedProblem,
    x_prev: &[f64],
    x_curr: &[f64],
) -> Result<Vec<Vec<f64>>, LagrangianError> {
    check_snapshot(problem, x_prev)?;
    check_snapshot(problem, x_curr)?;
    let mut out = Vec::with_capacity(problem.num_blocks());
    for b in problem.blocks() {
        let range = problem.block_range(b.id).expect("valid block");
        out.push(range.map(|j| x_curr[j] - x_prev[j]).collect());
    }
    Ok(out)
}

/// Multiplier ascent: `mu_c <- mu_c + 2 rho_c^2 C_c` for every constraint,
/// applied exactly once per constraint regardless of how many subproblems
/// share it.
pub fn update_multipliers(state: &MultiplierState, residuals: &Residuals) -> MultiplierState {
    let mut next = state.clone();
    for (c, &r) in residuals.primal.iter().enumerate() {
        next.mu[c] += 2.0 * state.rho[c] * state.rho[c] * r;
    }
    next
}

/// Geometric penalty schedule: `rho_c <- min(beta rho_c, cap)`.
pub fn update_penalty(state: &MultiplierState) -> MultiplierState {
    let mut next = state.clone();
    for r in &mut next.rho {
        *r = (*r * state.penalty_growth).min(state.rho_cap);
    }
    next
}

fn check_snapshot(problem: &DecomposedProblem, x: &[f64]) -> Result<(), LagrangianError> {
    if x.len() != problem.total_dim() {
        return Err(LagrangianError::DimensionMismatch { expected: problem.total_dim(), got: x.len() });
    }
    Ok(())
}

/// Reusable evaluator for one block's local AL, with precomputed input maps
/// and scratch buffers so solver iterations stay allocation-free.
pub struct LocalEvaluator<'p> {
    problem: &'p DecomposedProblem,
    block_index: usize,
    dim: usize,
    w_len: usize,
    z: Vec<f64>,
    gz: Vec<f64>,
}

impl<'p> LocalEvaluator<'p> {
    pub fn new(problem: &'p DecomposedProblem, id: BlockId) -> Result<Self, LagrangianError> {
        let block = problem.block(id).map_err(|_| LagrangianError::UnknownBlock(id))?;
        let scratch = problem.max_scope_dim();
        Ok(Self {
            problem,
            block_index: id - 1,
            dim: block.dim,
            w_len: problem.coupling_len(id - 1),
            z: vec![0.0; scratch],
            gz: vec![0.0; scratch],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, x_i: &[f64], w: &[f64]) -> Result<(), LagrangianError> {
        if x_i.len() != self.dim {
            return Err(LagrangianError::DimensionMismatch { expected: self.dim, got: x_i.len() });
        }
        if w.len() != self.w_len {
            return Err(LagrangianError::MissingCouplingValue {
                block: self.block_index + 1,
                expected: self.w_len,
                got: w.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn gather(z: &mut [f64], slots: &[Slot], x_i: &[f64], w: &[f64]) {
        for (dst, slot) in z.iter_mut().zip(slots) {
            *dst = match *slot {
                Slot::Own(e) => x_i[e],
                Slot::Coupled(p) => w[p],
            };
        }
    }

    /// Local AL value at (x_i, w_{-i}).
    pub fn value(&mut self, x_i: &[f64], w: &[f64], state: &MultiplierState) -> Result<f64, LagrangianError> {
        self.check(x_i, w)?;
        let mut acc = 0.0;
        for binding in self.problem.term_bindings(self.block_index) {
            let k = binding.slots.len();
            Self::gather(&mut self.z[..k], &binding.slots, x_i, w);
            acc += self.problem.terms()[binding.target].function.eval(&self.z[..k]);
        }
        for binding in self.problem.constraint_bindings(self.block_index) {
            let k = binding.slots.len();
            Self::gather(&mut self.z[..k], &binding.slots, x_i, w);
            let con = &self.problem.constraints()[binding.target];
            let psi = con.function.eval(&self.z[..k]);
            let (mu, rho) = (state.mu[binding.target], state.rho[binding.target]);
            let phi = effective_phi(con.kind, psi, mu, rho);
            acc += mu * phi + rho * rho * phi * phi;
        }
        Ok(acc)
    }

    /// Analytic gradient of the local AL with respect to x_i.
    pub fn gradient(
        &mut self,
        x_i: &[f64],
        w: &[f64],
        state: &MultiplierState,
        out: &mut [f64],
    ) -> Result<(), LagrangianError> {
        self.check(x_i, w)?;
        if out.len() != self.dim {
            return Err(LagrangianError::DimensionMismatch { expected: self.dim, got: out.len() });
        }
        out.fill(0.0);
        for binding in self.problem.term_bindings(self.block_index) {
            let k = binding.slots.len();
            Self::gather(&mut self.z[..k], &binding.slots, x_i, w);
            self.problem.terms()[binding.target].function.grad_into(&self.z[..k], &mut self.gz[..k]);
            for &(zpos, e) in &binding.own {
                out[e] += self.gz[zpos];
            }
        }
        for binding in self.problem.constraint_bindings(self.block_index) {
            let k = binding.slots.len();
            Self::gather(&mut self.z[..k], &binding.slots, x_i, w);
            let con = &self.problem.constraints()[binding.target];
            let psi = con.function.eval(&self.z[..k]);
            let (mu, rho) = (state.mu[binding.target], state.rho[binding.target]);
            let weight = mu + 2.0 * rho * rho * effective_phi(con.kind, psi, mu, rho);
            if weight == 0.0 {
                continue;
            }
            con.function.grad_into(&self.z[..k], &mut self.gz[..k]);
            for &(zpos, e) in &binding.own {
                out[e] += weight * self.gz[zpos];
            }
        }
        Ok(())
    }
}

/// Local AL value for block `id` at (x_i, w_{-i}).
pub fn eval_local_al(
    problem: &DecomposedProblem,
    id: BlockId,
    x_i: &[f64],
    w: &[f64],
    state: &MultiplierState,
) -> Result<f64, LagrangianError> {
    LocalEvaluator::new(problem, id)?.value(x_i, w, state)
}

/// Analytic local AL gradient for block `id` at (x_i, w_{-i}).
pub fn grad_local_al(
    problem: &DecomposedProblem,
    id: BlockId,
    x_i: &[f64],
    w: &[f64],
    state: &MultiplierState,
) -> Result<Vec<f64>, LagrangianError> {
    let mut ev = LocalEvaluator::new(problem, id)?;
    let mut out = vec![0.0; ev.dim()];
    ev.gradient(x_i, w, state, &mut out)?;
    Ok(out)
}
