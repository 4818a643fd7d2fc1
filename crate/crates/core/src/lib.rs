// Validations are written as `!(x > 0.0)` so NaN parameters are rejected
// along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]

//! Distributed augmented Lagrangian decomposition (DALD) for block-structured
//! constrained optimization.
//!
//! The method runs three nested loops: an outer loop updating Lagrange
//! multipliers, an inner loop sweeping the blocks of a decomposed problem in
//! a coordinated sequence, and a solver layer minimizing each block's local
//! augmented Lagrangian. The standard variant sweeps until the dual residual
//! vanishes; the accelerated variants cap or relax the inner loop (criteria
//! B2-B4), with `B4, v_max = 1` recovering the direct multi-block ADMM.
//!
//! Modules:
//! - [`model`]: decomposed problems, coupling structure, slack elimination
//! - [`lagrangian`]: AL evaluation, residuals, multiplier/penalty updates
//! - [`coordination`]: hierarchical networks/matrices and sweep planning
//! - [`solvers`]: projected gradient and analytic per-block minimizers
//! - [`driver`]: the DALD/ALM/BCD drivers and run traces
//! - [`problems`]: built-in problems, the LNF generator, and its oracle

pub mod coordination;
pub mod driver;
pub mod lagrangian;
pub mod model;
pub mod problems;
pub mod solvers;

pub use coordination::{
    es_sweep_plan, matrix_from_network, network_from_matrix, select_blocks, sequential_chain,
    validate_stage_coupling, CoordinationError, CoordinationMode, HierarchicalMatrix,
    HierarchicalNetwork, SelectionPolicy, SweepPlan,
};
pub use driver::{
    inner_should_stop, outer_should_stop, run_alm, run_bcd, run_dald, DaldConfig, DriverError,
    RunStatus, RunSummary, RunTrace, StopCriterion, TraceRecord,
};
pub use lagrangian::{
    dual_residual, eval_global_al, eval_local_al, grad_local_al, inf_norm, objective_value,
    primal_residual, update_multipliers, update_penalty, LagrangianError, MultiplierState, Residuals,
};
pub use model::{
    build_problem, optimal_slack, Atom, BlockId, Constraint, ConstraintKind, DecomposedProblem,
    ExprFunction, Function, ModelError, ObjectiveTerm, ProblemFile, Scope, ScopeEntry, VariableBlock,
};
pub use problems::{
    admm_counterexample, lnf_generate, lnf_oracle, lnf_problem, toy_example, LnfInstance,
};
pub use solvers::{
    finite_difference_gradient, solve_block, solve_block_analytic_linear,
    solve_block_projected_gradient, BlockSolution, SolveStatus, SolverError, SolverKind, SolverSpec,
};
