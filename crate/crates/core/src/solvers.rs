//! The solver layer: pluggable minimizers for the per-block subproblem.
//!
//! `ProjectedGradient` handles any differentiable local AL over a box:
//! `x <- clamp(x - alpha * grad)` with Armijo backtracking, stopping when the
//! projected step at the initial step length drops below `tol`. Every
//! accepted step strictly decreases the local AL, so a solve never returns a
//! point worse than its warm start.
//!
//! `AnalyticLinear` is the closed-form minimizer for blocks whose local AL is
//! an unconstrained convex quadratic: zero objective, linear equality
//! constraints, unbounded box. It solves the normal equations in one step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lagrangian::{LagrangianError, LocalEvaluator, MultiplierState};
use crate::model::{BlockId, ConstraintKind, DecomposedProblem, ModelError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("objective or gradient produced a non-finite value")]
    NonFiniteValue,
    #[error("analytic solver does not apply to block {block}: {reason}")]
    NotApplicable { block: BlockId, reason: String },
    #[error("normal equations are singular for block {0}")]
    SingularNormal(BlockId),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    /// Sufficient-decrease constant in (0, 1).
    pub c: f64,
    /// Step shrink factor in (0, 1).
    pub shrink: f64,
    /// Initial trial step, also the probe step for the stationarity test.
    pub initial_step: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { c: 1e-4, shrink: 0.5, initial_step: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    ProjectedGradient,
    AnalyticLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverKind,
    /// Stationarity tolerance for the projected-gradient exit test.
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: ArmijoParams,
}

impl Default for SolverSpec {
    fn default() -> Self {
        // tol 1e-10 realizes "exact" block solves for the driver layer.
        Self { kind: SolverKind::ProjectedGradient, tol: 1e-10, max_iters: 100_000, armijo: ArmijoParams::default() }
    }
}

impl SolverSpec {
    pub fn analytic() -> Self {
        Self { kind: SolverKind::AnalyticLinear, ..Self::default() }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::BadSpec("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SolverError::BadSpec("max_iters must be at least 1".into()));
        }
        let a = &self.armijo;
        if !(a.c > 0.0 && a.c < 1.0) || !(a.shrink > 0.0 && a.shrink < 1.0) || !(a.initial_step > 0.0) {
            return Err(SolverError::BadSpec("armijo parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub x: Vec<f64>,
    pub iters_used: usize,
    /// Infinity norm of the projected gradient step at exit.
    pub stationarity: f64,
    pub status: SolveStatus,
}

/// Dispatches on the spec's solver kind.
pub fn solve_block(
    problem: &DecomposedProblem,
    id: BlockId,
    w: &[f64],
    state: &MultiplierState,
    warm_start: &[f64],
    spec: &SolverSpec,
) -> Result<BlockSolution, SolverError> {
    match spec.kind {
        SolverKind::ProjectedGradient => {
            solve_block_projected_gradient(problem, id, w, state, warm_start, spec)
        }
        SolverKind::AnalyticLinear => solve_block_analytic_linear(problem, id, w, state, spec),
    }
}

/// Projected gradient descent with Armijo backtracking over the block box.
pub fn solve_block_projected_gradient(
    problem: &DecomposedProblem,
    id: BlockId,
    w: &[f64],
    state: &MultiplierState,
    warm_start: &[f64],
    spec: &SolverSpec,
) -> Result<BlockSolution, SolverError> {
    spec.validate()?;
    let block = problem.block(id)?;
    let mut ev = LocalEvaluator::new(problem, id)?;
    let dim = ev.dim();
    if warm_start.len() != dim {
        return Err(LagrangianError::DimensionMismatch { expected: dim, got: warm_start.len() }.into());
    }
    let (lo, hi) = (&block.lower, &block.upper);

    let mut x: Vec<f64> = warm_start.iter().enumerate().map(|(j, &v)| v.clamp(lo[j], hi[j])).collect();
    let mut g = vec![0.0; dim];
    let mut trial = vec![0.0; dim];

    let mut value = ev.value(&x, w, state)?;
    if !value.is_finite() {
        return Err(SolverError::NonFiniteValue);
    }

    let a0 = spec.armijo.initial_step;
    // Backtracking restarts from twice the last accepted step (capped at
    // the initial step), so a well-scaled step is found in O(1) trials once
    // the local curvature is known. The stationarity probe always uses a0.
    let mut alpha_start = a0;
    for iter in 0..spec.max_iters {
        ev.gradient(&x, w, state, &mut g)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteValue);
        }

        let mut stationarity = 0.0f64;
        for j in 0..dim {
            let step = x[j] - (x[j] - a0 * g[j]).clamp(lo[j], hi[j]);
            stationarity = stationarity.max(step.abs());
        }
        if stationarity <= spec.tol {
            return Ok(BlockSolution { x, iters_used: iter, stationarity, status: SolveStatus::Converged });
        }

        let mut alpha = alpha_start;
        let accepted = loop {
            let mut moved = 0.0f64;
            let mut dir_dot = 0.0;
            for j in 0..dim {
                trial[j] = (x[j] - alpha * g[j]).clamp(lo[j], hi[j]);
                let d = trial[j] - x[j];
                dir_dot += g[j] * d;
                moved = moved.max(d.abs());
            }
            if moved == 0.0 {
                break None;
            }
            // once the directional decrease drops below the AL value's
            // float resolution, no step at this scale can make
            // representable progress
            if dir_dot.abs() <= 8.0 * f64::EPSILON * value.abs() {
                break None;
            }
            let f_trial = ev.value(&trial, w, state)?;
            if !f_trial.is_finite() {
                return Err(SolverError::NonFiniteValue);
            }
            if f_trial <= value + spec.armijo.c * dir_dot {
                break Some(f_trial);
            }
            alpha *= spec.armijo.shrink;
            if alpha < 1e-18 {
                break None;
            }
        };
        match accepted {
            Some(f_trial) => {
                value = f_trial;
                std::mem::swap(&mut x, &mut trial);
                alpha_start = (2.0 * alpha).min(a0);
            }
            None if alpha_start < a0 => {
                // the narrowed search hit the float-precision floor; a wide
                // restart can still make representable progress
                alpha_start = a0;
            }
            None => {
                // no representable descent even from the initial step
                return Ok(BlockSolution { x, iters_used: iter, stationarity, status: SolveStatus::MaxIters });
            }
        }
    }

    let mut stationarity = 0.0f64;
    ev.gradient(&x, w, state, &mut g)?;
    for j in 0..dim {
        let step = x[j] - (x[j] - a0 * g[j]).clamp(lo[j], hi[j]);
        stationarity = stationarity.max(step.abs());
    }
    Ok(BlockSolution { x, iters_used: spec.max_iters, stationarity, status: SolveStatus::MaxIters })
}

/// Exact minimizer for a block whose local AL is an unconstrained strictly
/// convex quadratic: no objective terms, linear equality constraints only,
/// unbounded box. Solves `sum_c 2 rho_c^2 a_c a_c^T x = -sum_c a_c (mu_c +
/// 2 rho_c^2 r_c)` where `a_c` are the block's coefficients and `r_c`
/// collects the frozen coupled part plus the constant.
pub fn solve_block_analytic_linear(
    problem: &DecomposedProblem,
    id: BlockId,
    w: &[f64],
    state: &MultiplierState,
    spec: &SolverSpec,
) -> Result<BlockSolution, SolverError> {
    let block = problem.block(id)?;
    let dim = block.dim;
    let not_applicable = |reason: &str| SolverError::NotApplicable { block: id, reason: reason.into() };

    if !problem.terms_of_block(id)?.is_empty() {
        return Err(not_applicable("block has objective terms"));
    }
    if block.lower.iter().any(|&l| l != f64::NEG_INFINITY) || block.upper.iter().any(|&u| u != f64::INFINITY) {
        return Err(not_applicable("block box must be unbounded"));
    }
    let expected_w = problem.coupling_elements(id)?.len();
    if w.len() != expected_w {
        return Err(LagrangianError::MissingCouplingValue { block: id, expected: expected_w, got: w.len() }.into());
    }

    let mut h = vec![vec![0.0f64; dim]; dim];
    let mut rhs = vec![0.0f64; dim];
    for binding in problem.constraint_bindings(id - 1) {
        let cidx = binding.target;
        let con = &problem.constraints()[cidx];
        if con.kind != ConstraintKind::Equality {
            return Err(not_applicable("inequality constraint in phi_i"));
        }
        let expr = con.function.as_expr().ok_or_else(|| not_applicable("constraint is a custom callback"))?;
        let scope_dim = binding.slots.len();
        let (coeffs, constant) =
            expr.as_linear(scope_dim).ok_or_else(|| not_applicable("constraint is nonlinear"))?;
        let mut a = vec![0.0f64; dim];
        let mut r = constant;
        for (zpos, slot) in binding.slots.iter().enumerate() {
            match *slot {
                crate::model::Slot::Own(e) => a[e] += coeffs[zpos],
                crate::model::Slot::Coupled(p) => r += coeffs[zpos] * w[p],
            }
        }
        let (mu, rho) = (state.mu[cidx], state.rho[cidx]);
        let scale = 2.0 * rho * rho;
        for i in 0..dim {
            for j in 0..dim {
                h[i][j] += scale * a[i] * a[j];
            }
            rhs[i] -= a[i] * (mu + scale * r);
        }
    }

    let x = solve_spd(&mut h, &mut rhs).ok_or(SolverError::SingularNormal(id))?;

    // report the projected-gradient stationarity measure at the solution
    let mut ev = LocalEvaluator::new(problem, id)?;
    let mut g = vec![0.0; dim];
    ev.gradient(&x, w, state, &mut g)?;
    let stationarity = g.iter().map(|v| (spec.armijo.initial_step * v).abs()).fold(0.0f64, f64::max);

    Ok(BlockSolution { x, iters_used: 1, stationarity, status: SolveStatus::Converged })
}

/// Cholesky solve for the tiny SPD normal systems of the analytic solver.
fn solve_spd(h: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = (0..n).map(|i| h[i][i].abs()).fold(0.0f64, f64::max).max(1.0);
    // in-place LL^T factorization
    for k in 0..n {
        for j in 0..k {
            h[k][k] -= h[k][j] * h[k][j];
        }
        if h[k][k] <= 1e-12 * scale {
            return None;
        }
        h[k][k] = h[k][k].sqrt();
        for i in (k + 1)..n {
            for j in 0..k {
                h[i][k] -= h[i][j] * h[k][j];
            }
            h[i][k] /= h[k][k];
        }
    }
    for i in 0..n {
        for j in 0..i {
            rhs[i] -= h[i][j] * rhs[j];
        }
        rhs[i] /= h[i][i];
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            rhs[i] -= h[j][i] * rhs[j];
        }
        rhs[i] /= h[i][i];
    }
    Some(rhs.to_vec())
}

/// Central finite differences, the independent gradient oracle.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, SolverError> {
    if !(h > 0.0) {
        return Err(SolverError::BadSpec("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(SolverError::NonFiniteValue);
        }
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}
