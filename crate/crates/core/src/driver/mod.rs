//! The three-loop scheme: outer multiplier updates, inner block sweeps, and
//! the solver layer underneath, plus the ALM baseline and the BCD reduction.
//!
//! One inner iteration executes the plan's stages in order, each block
//! solving its local AL against the freshest snapshot (blocks solved earlier
//! in the sweep contribute fresh values, the rest keep their previous-sweep
//! values). After the sweep the primal residual C is evaluated on the
//! complete post-sweep snapshot and the dual residual D against the
//! pre-sweep snapshot. The inner loop exits per the configured criterion;
//! the outer loop stops only when both `||C||_inf <= eps_pri` and
//! `||D||_inf <= eps_dual` hold, otherwise it updates the multipliers and
//! penalties and re-enters the inner loop warm.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordination::{es_sweep_plan, select_blocks, sequential_chain, SweepPlan};
use crate::lagrangian::{
    dual_residual, eval_global_al, inf_norm, objective_value, primal_residual, update_multipliers,
    update_penalty, LagrangianError, MultiplierState, Residuals,
};
use crate::model::{BlockId, DecomposedProblem, ModelError};
use crate::solvers::{solve_block, SolverError, SolverSpec};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("BCD requires an unconstrained problem")]
    ConstraintsPresent,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Inner-loop termination rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopCriterion {
    /// B1: sweep until `||D||_inf <= eps_dual`.
    ExactInner,
    /// B2: sweep until `||D||_inf <= max(eps_dual, initial_tol * decay^(k-1))`.
    DecayingTolerance { initial_tol: f64, decay: f64 },
    /// B3: at most `ceil(initial_cap * growth^(k-1))` sweeps per outer
    /// iteration, or earlier on the dual tolerance.
    GrowingSweepCap { initial_cap: usize, growth: f64 },
    /// B4: at most `max_sweeps` sweeps per outer iteration, or earlier on
    /// the dual tolerance. With `max_sweeps = 1` this is the direct
    /// multi-block ADMM configuration.
    FixedSweepCap { max_sweeps: usize },
}

impl StopCriterion {
    /// The hard sweep cap for outer iteration `k`, if the criterion has one.
    pub fn sweep_cap(&self, outer: usize) -> Option<usize> {
        match self {
            StopCriterion::GrowingSweepCap { initial_cap, growth } => {
                let cap = (*initial_cap as f64) * growth.powi(outer as i32 - 1);
                Some(cap.ceil().max(1.0) as usize)
            }
            StopCriterion::FixedSweepCap { max_sweeps } => Some(*max_sweeps),
            _ => None,
        }
    }

    /// The dual tolerance active at outer iteration `k`.
    pub fn dual_tolerance(&self, outer: usize, config: &DaldConfig) -> f64 {
        match self {
            StopCriterion::DecayingTolerance { initial_tol, decay } => {
                (initial_tol * decay.powi(outer as i32 - 1)).max(config.eps_dual)
            }
            _ => config.eps_dual,
        }
    }

    fn validate(&self) -> Result<(), DriverError> {
        match *self {
            StopCriterion::ExactInner => Ok(()),
            StopCriterion::DecayingTolerance { initial_tol, decay } => {
                if !(initial_tol > 0.0) || !(decay > 0.0 && decay < 1.0) {
                    return Err(DriverError::Config(
                        "decaying tolerance needs initial_tol > 0 and decay in (0, 1)".into(),
                    ));
                }
                Ok(())
            }
            StopCriterion::GrowingSweepCap { initial_cap, growth } => {
                if initial_cap == 0 || !(growth > 1.0) {
                    return Err(DriverError::Config(
                        "growing sweep cap needs initial_cap >= 1 and growth > 1".into(),
                    ));
                }
                Ok(())
            }
            StopCriterion::FixedSweepCap { max_sweeps } => {
                if max_sweeps == 0 {
                    return Err(DriverError::Config("fixed sweep cap must be at least 1".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaldConfig {
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub criterion: StopCriterion,
    pub max_outer: usize,
    /// Total sweep budget across all outer iterations.
    pub max_cumulative_inner: usize,
    /// Abort when `||x||_inf` or `||C||_inf` exceeds this (or goes NaN).
    pub divergence_norm: f64,
    pub record_snapshots: bool,
    /// Record the global AL before and after every block solve of a sweep.
    pub record_sweep_al: bool,
    /// Geometric penalty growth beta (1 keeps rho fixed).
    pub penalty_growth: f64,
    /// JSON represents an uncapped schedule as `null`.
    #[serde(with = "nullable_infinity")]
    pub rho_cap: f64,
    pub initial_rho: f64,
    /// Defaults to zeros, projected into the boxes.
    pub initial_x: Option<Vec<f64>>,
    /// Defaults to zeros.
    pub initial_multipliers: Option<Vec<f64>>,
}

impl Default for DaldConfig {
    fn default() -> Self {
        Self {
            eps_pri: 1e-3,
            eps_dual: 1e-3,
            criterion: StopCriterion::ExactInner,
            max_outer: 100_000,
            max_cumulative_inner: 10_000,
            divergence_norm: 1e8,
            record_snapshots: false,
            record_sweep_al: false,
            penalty_growth: 1.0,
            rho_cap: f64::INFINITY,
            initial_rho: 1.0,
            initial_x: None,
            initial_multipliers: None,
        }
    }
}

impl DaldConfig {
    pub fn with_criterion(mut self, criterion: StopCriterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_eps(mut self, eps_pri: f64, eps_dual: f64) -> Self {
        self.eps_pri = eps_pri;
        self.eps_dual = eps_dual;
        self
    }

    fn validate(&self, problem: &DecomposedProblem) -> Result<(), DriverError> {
        if !(self.eps_pri > 0.0) || !(self.eps_dual > 0.0) {
            return Err(DriverError::Config("eps_pri and eps_dual must be positive".into()));
        }
        self.criterion.validate()?;
        if self.max_outer == 0 || self.max_cumulative_inner == 0 {
            return Err(DriverError::Config("iteration limits must be at least 1".into()));
        }
        if !(self.divergence_norm > 0.0) {
            return Err(DriverError::Config("divergence_norm must be positive".into()));
        }
        if !(self.penalty_growth >= 1.0) || !(self.initial_rho > 0.0) || !(self.rho_cap >= self.initial_rho) {
            return Err(DriverError::Config("penalty schedule out of range".into()));
        }
        if let Some(x0) = &self.initial_x {
            if x0.len() != problem.total_dim() {
                return Err(DriverError::Config(format!(
                    "initial_x must have length {}",
                    problem.total_dim()
                )));
            }
        }
        if let Some(mu0) = &self.initial_multipliers {
            if mu0.len() != problem.num_constraints() {
                return Err(DriverError::Config(format!(
                    "initial_multipliers must have length {}",
                    problem.num_constraints()
                )));
            }
        }
        Ok(())
    }
}

/// B1-B4 inner-loop exit test.
pub fn inner_should_stop(
    criterion: &StopCriterion,
    outer: usize,
    sweep: usize,
    dual_inf_norm: f64,
    config: &DaldConfig,
) -> bool {
    let within_tol = dual_inf_norm <= criterion.dual_tolerance(outer, config);
    match criterion.sweep_cap(outer) {
        Some(cap) => sweep >= cap || within_tol,
        None => within_tol,
    }
}

/// Amended outer stopping rule: primal and dual residuals must both be
/// within tolerance.
pub fn outer_should_stop(primal_inf_norm: f64, dual_inf_norm: f64, config: &DaldConfig) -> bool {
    primal_inf_norm <= config.eps_pri && dual_inf_norm <= config.eps_dual
}

/// Round-trips a possibly-infinite float through JSON as `null`.
mod nullable_infinity {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() { Some(*value) } else { None }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    Diverged,
    MaxOuterReached,
    MaxInnerReached,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::Converged => "converged",
            RunStatus::Diverged => "diverged",
            RunStatus::MaxOuterReached => "max-outer",
            RunStatus::MaxInnerReached => "max-inner",
        };
        f.write_str(s)
    }
}

/// Global AL values around the block solves of one sweep, for descent checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAlRecord {
    pub at_start: f64,
    pub after_solve: Vec<f64>,
}

/// One row per sweep: the (k, v) indices, cumulative sweep count, objective,
/// AL value, and residual norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub sweep: usize,
    pub cumulative_inner: usize,
    pub objective: f64,
    pub al_value: f64,
    pub primal_inf: f64,
    pub dual_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_al: Option<SweepAlRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub outer_iters: usize,
    pub cumulative_inner: usize,
    pub objective: f64,
    pub al_value: f64,
    pub primal_inf: f64,
    pub dual_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// Plot-ready CSV with the stable header
    /// `k,v,cum_inner,objective,al_value,primal_inf,dual_inf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,v,cum_inner,objective,al_value,primal_inf,dual_inf")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.outer, r.sweep, r.cumulative_inner, r.objective, r.al_value, r.primal_inf, r.dual_inf
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

struct SweepOutcome {
    residuals: Residuals,
    objective: f64,
    al_value: f64,
    sweep_al: Option<SweepAlRecord>,
    solved: Vec<BlockId>,
}

/// Executes one sweep in place: stages in order, blocks within a stage in
/// ascending id (serialized; coupled same-stage blocks thereby see fresh
/// values instead of stale ones).
#[allow(clippy::too_many_arguments)]
fn sweep_once(
    problem: &DecomposedProblem,
    solver: &SolverSpec,
    state: &MultiplierState,
    stages: &[Vec<BlockId>],
    x: &mut [f64],
    x_prev: &mut Vec<f64>,
    wbuf: &mut Vec<f64>,
    record_sweep_al: bool,
) -> Result<SweepOutcome, DriverError> {
    x_prev.clear();
    x_prev.extend_from_slice(x);
    let mut sweep_al = if record_sweep_al {
        Some(SweepAlRecord { at_start: eval_global_al(problem, x, state)?, after_solve: Vec::new() })
    } else {
        None
    };
    let mut solved = Vec::new();
    for stage in stages {
        for &b in stage {
            problem.gather_coupling(b, x, wbuf)?;
            let range = problem.block_range(b)?;
            let sol = solve_block(problem, b, wbuf, state, &x[range.clone()], solver)?;
            x[range].copy_from_slice(&sol.x);
            solved.push(b);
            if let Some(rec) = &mut sweep_al {
                rec.after_solve.push(eval_global_al(problem, x, state)?);
            }
        }
    }
    let residuals = Residuals::new(primal_residual(problem, x, state)?, dual_residual(problem, x_prev, x)?);
    let objective = objective_value(problem, x)?;
    let al_value = eval_global_al(problem, x, state)?;
    Ok(SweepOutcome { residuals, objective, al_value, sweep_al, solved })
}

fn make_record(
    outer: usize,
    sweep: usize,
    cumulative_inner: usize,
    outcome: &mut SweepOutcome,
    snapshot: Option<Vec<f64>>,
) -> TraceRecord {
    TraceRecord {
        outer,
        sweep,
        cumulative_inner,
        objective: outcome.objective,
        al_value: outcome.al_value,
        primal_inf: outcome.residuals.primal_inf_norm,
        dual_inf: outcome.residuals.dual_inf_norm,
        snapshot,
        sweep_al: outcome.sweep_al.take(),
    }
}

fn summarize(
    status: RunStatus,
    records: Vec<TraceRecord>,
    x: Vec<f64>,
    state: &MultiplierState,
    outer_iters: usize,
    cumulative_inner: usize,
) -> RunTrace {
    let last = records.last();
    let summary = RunSummary {
        status,
        x,
        multipliers: state.mu.clone(),
        outer_iters,
        cumulative_inner,
        objective: last.map_or(f64::NAN, |r| r.objective),
        al_value: last.map_or(f64::NAN, |r| r.al_value),
        primal_inf: last.map_or(f64::NAN, |r| r.primal_inf),
        dual_inf: last.map_or(f64::NAN, |r| r.dual_inf),
    };
    RunTrace { records, summary, }
}

fn initial_snapshot(problem: &DecomposedProblem, config: &DaldConfig) -> Vec<f64> {
    let mut x = config.initial_x.clone().unwrap_or_else(|| vec![0.0; problem.total_dim()]);
    problem.project_into_boxes(&mut x);
    x
}

fn check_plan(problem: &DecomposedProblem, plan: &SweepPlan) -> Result<(), DriverError> {
    let n = problem.num_blocks();
    let mut seen = vec![false; n];
    for stage in &plan.stages {
        for &b in stage {
            if b == 0 || b > n || seen[b - 1] {
                return Err(DriverError::Config(format!(
                    "plan must stage each block of 1..={n} exactly once (bad node {b})"
                )));
            }
            seen[b - 1] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(DriverError::Config(format!("plan must stage each block of 1..={n} exactly once")));
    }
    Ok(())
}

/// Runs the full scheme on a decomposed problem.
pub fn run_dald(
    problem: &DecomposedProblem,
    plan: &SweepPlan,
    solver: &SolverSpec,
    config: &DaldConfig,
) -> Result<RunTrace, DriverError> {
    config.validate(problem)?;
    solver.validate()?;
    check_plan(problem, plan)?;
    let n = problem.num_blocks();
    let m = problem.num_constraints();

    let mut x = initial_snapshot(problem, config);
    let mut state = MultiplierState {
        mu: config.initial_multipliers.clone().unwrap_or_else(|| vec![0.0; m]),
        rho: vec![config.initial_rho; m],
        penalty_growth: config.penalty_growth,
        rho_cap: config.rho_cap,
    };
    state.validate(m)?;

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut records = Vec::new();
    let mut x_prev = Vec::with_capacity(x.len());
    let mut wbuf = Vec::new();
    let mut cum = 0usize;

    for k in 1..=config.max_outer {
        // Last-known per-block displacement since this multiplier update.
        // Under full-cycle coordination its maximum equals the sweep's
        // ||D||_inf; under partial/selective coordination it keeps blocks
        // that were skipped (or solved long ago) from certifying
        // convergence with trivially-zero dual residuals. Greedy selection
        // keys on the same values, so blocks not yet revisited since the
        // update (infinite score) are always served first; keying on stale
        // scores instead would let the selector starve whole blocks.
        let mut last_disp = vec![f64::INFINITY; n];
        let mut solved_mask = vec![false; n];
        let mut v = 0usize;
        let exit = loop {
            v += 1;
            cum += 1;
            let stages = select_blocks(plan, cum, &mut rng, &last_disp);
            let mut outcome =
                sweep_once(problem, solver, &state, &stages, &mut x, &mut x_prev, &mut wbuf, config.record_sweep_al)?;
            solved_mask.fill(false);
            for &b in &outcome.solved {
                let d = inf_norm(&outcome.residuals.dual[b - 1]);
                last_disp[b - 1] = d;
                solved_mask[b - 1] = true;
            }
            // A skipped block's certificate goes stale as soon as a coupled
            // block moves beyond the active tolerance. Under full-cycle
            // coordination no block is skipped and this is a no-op.
            let tol = config.criterion.dual_tolerance(k, config);
            for &b in &outcome.solved {
                if last_disp[b - 1] > tol {
                    for &j in problem.coupled_blocks(b).expect("valid block") {
                        if !solved_mask[j - 1] {
                            last_disp[j - 1] = f64::INFINITY;
                        }
                    }
                }
            }
            let snapshot = config.record_snapshots.then(|| x.clone());
            records.push(make_record(k, v, cum, &mut outcome, snapshot));

            let cinf = outcome.residuals.primal_inf_norm;
            if !(inf_norm(&x) <= config.divergence_norm) || !(cinf <= config.divergence_norm) {
                return Ok(summarize(RunStatus::Diverged, records, x, &state, k, cum));
            }
            let stop_dual = last_disp.iter().copied().fold(0.0f64, f64::max);
            if inner_should_stop(&config.criterion, k, v, stop_dual, config) {
                break outcome;
            }
            if cum >= config.max_cumulative_inner {
                return Ok(summarize(RunStatus::MaxInnerReached, records, x, &state, k, cum));
            }
        };

        if outer_should_stop(exit.residuals.primal_inf_norm, exit.residuals.dual_inf_norm, config) {
            return Ok(summarize(RunStatus::Converged, records, x, &state, k, cum));
        }
        if cum >= config.max_cumulative_inner {
            return Ok(summarize(RunStatus::MaxInnerReached, records, x, &state, k, cum));
        }
        state = update_penalty(&update_multipliers(&state, &exit.residuals));
    }
    let outer = config.max_outer;
    Ok(summarize(RunStatus::MaxOuterReached, records, x, &state, outer, cum))
}

/// The method-of-multipliers baseline: each outer iteration minimizes the
/// global AL jointly over all blocks (realized by collapsing the problem to
/// a single block and sweeping it to the dual tolerance), then updates the
/// multipliers. On single-block problems this is identical to `run_dald`
/// with the exact inner criterion, trace and all.
pub fn run_alm(
    problem: &DecomposedProblem,
    solver: &SolverSpec,
    config: &DaldConfig,
) -> Result<RunTrace, DriverError> {
    let merged = problem.merge_to_single_block();
    let plan = es_sweep_plan(&sequential_chain(1));
    let mut cfg = config.clone();
    cfg.criterion = StopCriterion::ExactInner;
    run_dald(&merged, &plan, solver, &cfg)
}

/// Cyclic block minimization of the bare objective. Requires an
/// unconstrained problem; stops when `||D||_inf <= eps_dual`.
pub fn run_bcd(
    problem: &DecomposedProblem,
    plan: &SweepPlan,
    solver: &SolverSpec,
    config: &DaldConfig,
) -> Result<RunTrace, DriverError> {
    if problem.num_constraints() > 0 {
        return Err(DriverError::ConstraintsPresent);
    }
    config.validate(problem)?;
    solver.validate()?;
    check_plan(problem, plan)?;
    let n = problem.num_blocks();
    let state = MultiplierState {
        mu: Vec::new(),
        rho: Vec::new(),
        penalty_growth: config.penalty_growth,
        rho_cap: config.rho_cap,
    };

    let mut x = initial_snapshot(problem, config);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut records = Vec::new();
    let mut x_prev = Vec::with_capacity(x.len());
    let mut wbuf = Vec::new();
    let mut cum = 0usize;

    let mut last_disp = vec![f64::INFINITY; n];
    let mut solved_mask = vec![false; n];
    let mut v = 0usize;
    loop {
        v += 1;
        cum += 1;
        let stages = select_blocks(plan, cum, &mut rng, &last_disp);
        let mut outcome =
            sweep_once(problem, solver, &state, &stages, &mut x, &mut x_prev, &mut wbuf, config.record_sweep_al)?;
        solved_mask.fill(false);
        for &b in &outcome.solved {
            let d = inf_norm(&outcome.residuals.dual[b - 1]);
            last_disp[b - 1] = d;
            solved_mask[b - 1] = true;
        }
        for &b in &outcome.solved {
            if last_disp[b - 1] > config.eps_dual {
                for &j in problem.coupled_blocks(b).expect("valid block") {
                    if !solved_mask[j - 1] {
                        last_disp[j - 1] = f64::INFINITY;
                    }
                }
            }
        }
        let snapshot = config.record_snapshots.then(|| x.clone());
        records.push(make_record(1, v, cum, &mut outcome, snapshot));

        if !(inf_norm(&x) <= config.divergence_norm) {
            return Ok(summarize(RunStatus::Diverged, records, x, &state, 1, cum));
        }
        let stop_dual = last_disp.iter().copied().fold(0.0f64, f64::max);
        if stop_dual <= config.eps_dual {
            return Ok(summarize(RunStatus::Converged, records, x, &state, 1, cum));
        }
        if cum >= config.max_cumulative_inner {
            return Ok(summarize(RunStatus::MaxInnerReached, records, x, &state, 1, cum));
        }
    }
}

#[cfg(test)]
mod tests;
