use super::*;
use crate::coordination::{CoordinationMode, SelectionPolicy};
use crate::model::{Atom, Constraint, Function, ObjectiveTerm, ScopeEntry, VariableBlock};
use crate::problems::admm_counterexample;

fn chain_plan(n: usize) -> SweepPlan {
    es_sweep_plan(&sequential_chain(n))
}

fn b4(max_sweeps: usize) -> StopCriterion {
    StopCriterion::FixedSweepCap { max_sweeps }
}

/// min (x-1)^2 + (y-2)^2 + 0.5 x y split into two scalar blocks.
fn coupled_qp() -> DecomposedProblem {
    let blocks = vec![VariableBlock::new(1, 1), VariableBlock::new(2, 1)];
    let terms = vec![
        ObjectiveTerm::new(
            "fx",
            vec![ScopeEntry::new(1, vec![0])],
            Function::expr(
                vec![Atom::Bilinear { a: 0, b: 0, coef: 1.0 }, Atom::Linear { idx: 0, coef: -2.0 }],
                1.0,
            ),
        ),
        ObjectiveTerm::new(
            "fy",
            vec![ScopeEntry::new(2, vec![0])],
            Function::expr(
                vec![Atom::Bilinear { a: 0, b: 0, coef: 1.0 }, Atom::Linear { idx: 0, coef: -4.0 }],
                4.0,
            ),
        ),
        ObjectiveTerm::new(
            "cross",
            vec![ScopeEntry::new(1, vec![0]), ScopeEntry::new(2, vec![0])],
            Function::expr(vec![Atom::Bilinear { a: 0, b: 1, coef: 0.5 }], 0.0),
        ),
    ];
    DecomposedProblem::build(blocks, terms, vec![]).unwrap()
}

#[test]
fn inner_stop_b1_and_b4() {
    let config = DaldConfig::default();
    // B4 with cap 1 stops after one sweep no matter the dual residual
    assert!(inner_should_stop(&b4(1), 1, 1, 100.0, &config));
    assert!(!inner_should_stop(&b4(3), 1, 2, 100.0, &config));
    // B1 stops exactly on the dual tolerance
    assert!(inner_should_stop(&StopCriterion::ExactInner, 1, 1, 0.0, &config));
    assert!(!inner_should_stop(&StopCriterion::ExactInner, 1, 1, 2e-3, &config));
    assert!(inner_should_stop(&StopCriterion::ExactInner, 1, 1, 1e-3, &config));
}

#[test]
fn inner_stop_b2_schedule_decays_to_floor() {
    let config = DaldConfig::default(); // eps_dual = 1e-3
    let b2 = StopCriterion::DecayingTolerance { initial_tol: 1e-1, decay: 0.5 };
    // k = 1: tol 0.1; k = 4: tol 0.0125; k = 20: floored at eps_dual
    assert!(inner_should_stop(&b2, 1, 1, 0.09, &config));
    assert!(!inner_should_stop(&b2, 4, 1, 0.09, &config));
    assert!(inner_should_stop(&b2, 4, 1, 0.012, &config));
    assert!(!inner_should_stop(&b2, 20, 1, 2e-3, &config));
    assert!(inner_should_stop(&b2, 20, 1, 1e-3, &config));
}

#[test]
fn inner_stop_b3_cap_grows_geometrically() {
    let config = DaldConfig::default();
    let b3 = StopCriterion::GrowingSweepCap { initial_cap: 1, growth: 2.0 };
    assert_eq!(b3.sweep_cap(1), Some(1));
    assert_eq!(b3.sweep_cap(2), Some(2));
    assert_eq!(b3.sweep_cap(3), Some(4));
    // at k = 3 the loop runs to v = 4 when the tolerance is unmet
    assert!(!inner_should_stop(&b3, 3, 3, 1.0, &config));
    assert!(inner_should_stop(&b3, 3, 4, 1.0, &config));
}

#[test]
fn outer_stop_requires_both_residuals() {
    let config = DaldConfig::default();
    assert!(outer_should_stop(0.0, 0.0, &config));
    assert!(!outer_should_stop(1e-4, 1.0, &config));
    assert!(!outer_should_stop(1.0, 1e-4, &config));
    assert!(outer_should_stop(1e-3, 1e-3, &config));
}

#[test]
fn feasible_stationary_start_stops_immediately() {
    // The origin is feasible and minimizes the AL at mu = 0, so the first
    // sweep does not move, C = D = 0, and the run converges at (k, v) = (1, 1).
    let problem = admm_counterexample();
    let config = DaldConfig::default().with_criterion(b4(3));
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert_eq!(trace.summary.outer_iters, 1);
    assert_eq!(trace.summary.cumulative_inner, 1);
    assert_eq!(trace.summary.x, vec![0.0, 0.0, 0.0]);
    assert_eq!(trace.summary.multipliers, vec![0.0, 0.0, 0.0]);
}

#[test]
fn alm_matches_kkt_on_equality_qp() {
    // min (x-1)^2 + (y-2)^2 s.t. x + y = 1; the KKT system gives
    // (x, y, lambda) = (0, 1, 2).
    let blocks = vec![VariableBlock::new(1, 2)];
    let terms = vec![ObjectiveTerm::new(
        "f",
        vec![ScopeEntry::full(1, 2)],
        Function::expr(
            vec![
                Atom::Bilinear { a: 0, b: 0, coef: 1.0 },
                Atom::Linear { idx: 0, coef: -2.0 },
                Atom::Bilinear { a: 1, b: 1, coef: 1.0 },
                Atom::Linear { idx: 1, coef: -4.0 },
            ],
            5.0,
        ),
    )];
    let constraints =
        vec![Constraint::equality("c", vec![ScopeEntry::full(1, 2)], Function::linear(&[1.0, 1.0], -1.0))];
    let problem = DecomposedProblem::build(blocks, terms, constraints).unwrap();
    // tolerances sit above the solver's float-resolution movement floor
    let mut cfg = DaldConfig::default().with_eps(1e-7, 1e-7);
    cfg.max_cumulative_inner = 100_000;
    let trace = run_alm(&problem, &SolverSpec::default(), &cfg).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert!((trace.summary.x[0] - 0.0).abs() <= 1e-6, "{:?}", trace.summary.x);
    assert!((trace.summary.x[1] - 1.0).abs() <= 1e-6);
}

#[test]
fn alm_feasible_start_terminates_first_outer() {
    // min (x-1)^2 s.t. x - 1 = 0 from x0 = 1: the AL minimizer is feasible,
    // so the run stops during the first outer iteration.
    let blocks = vec![VariableBlock::new(1, 1)];
    let terms = vec![ObjectiveTerm::new(
        "f",
        vec![ScopeEntry::new(1, vec![0])],
        Function::expr(
            vec![Atom::Bilinear { a: 0, b: 0, coef: 1.0 }, Atom::Linear { idx: 0, coef: -2.0 }],
            1.0,
        ),
    )];
    let constraints =
        vec![Constraint::equality("c", vec![ScopeEntry::new(1, vec![0])], Function::linear(&[1.0], -1.0))];
    let problem = DecomposedProblem::build(blocks, terms, constraints).unwrap();
    let config = DaldConfig { initial_x: Some(vec![1.0]), ..DaldConfig::default() };
    let trace = run_alm(&problem, &SolverSpec::default(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert_eq!(trace.summary.outer_iters, 1);
    assert_eq!(trace.summary.x, vec![1.0]);
}

#[test]
fn bcd_separable_objective_converges_in_one_sweep() {
    // f = sum (x_i - i)^2 over three scalar blocks
    let blocks = (1..=3).map(|id| VariableBlock::new(id, 1)).collect();
    let terms = (1..=3)
        .map(|id| {
            let target = id as f64;
            ObjectiveTerm::new(
                format!("f{id}"),
                vec![ScopeEntry::new(id, vec![0])],
                Function::expr(
                    vec![
                        Atom::Bilinear { a: 0, b: 0, coef: 1.0 },
                        Atom::Linear { idx: 0, coef: -2.0 * target },
                    ],
                    target * target,
                ),
            )
        })
        .collect();
    let problem = DecomposedProblem::build(blocks, terms, vec![]).unwrap();
    let trace = run_bcd(&problem, &chain_plan(3), &SolverSpec::default(), &DaldConfig::default()).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    // blocks independent: one sweep to optimum, one to confirm
    assert!(trace.summary.cumulative_inner <= 2);
    for (i, v) in trace.summary.x.iter().enumerate() {
        assert!((v - (i as f64 + 1.0)).abs() <= 1e-8);
    }
}

#[test]
fn bcd_cross_term_matches_normal_equations() {
    // min x^2 + y^2 + 0.5 x y - 2x - 4y + 5; solving the 2x2 system
    // [2 .5; .5 2] (x y) = (2 4) gives (x, y) = (8/15, 28/15).
    let problem = coupled_qp();
    let mut config = DaldConfig::default().with_eps(1e-9, 1e-9);
    config.max_cumulative_inner = 100_000;
    let trace = run_bcd(&problem, &chain_plan(2), &SolverSpec::default(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert!((trace.summary.x[0] - 8.0 / 15.0).abs() <= 1e-6, "{:?}", trace.summary.x);
    assert!((trace.summary.x[1] - 28.0 / 15.0).abs() <= 1e-6);
}

#[test]
fn bcd_rejects_constrained_problems() {
    let problem = admm_counterexample();
    let err = run_bcd(&problem, &chain_plan(3), &SolverSpec::default(), &DaldConfig::default());
    assert!(matches!(err, Err(DriverError::ConstraintsPresent)));
}

#[test]
fn unconstrained_dald_trace_equals_bcd_trace() {
    let problem = coupled_qp();
    let mut config = DaldConfig::default().with_eps(1e-8, 1e-8);
    config.max_cumulative_inner = 100_000;
    config.record_sweep_al = true;
    let solver = SolverSpec::default();
    let plan = chain_plan(2);
    let dald = run_dald(&problem, &plan, &solver, &config).unwrap();
    let bcd = run_bcd(&problem, &plan, &solver, &config).unwrap();
    assert_eq!(dald, bcd);
}

#[test]
fn single_block_dald_trace_equals_alm_trace() {
    let blocks = vec![VariableBlock::new(1, 2).with_box(-5.0, 5.0)];
    let terms = vec![ObjectiveTerm::new(
        "f",
        vec![ScopeEntry::full(1, 2)],
        Function::expr(
            vec![
                Atom::Bilinear { a: 0, b: 0, coef: 1.0 },
                Atom::Bilinear { a: 1, b: 1, coef: 2.0 },
                Atom::Linear { idx: 0, coef: 1.0 },
            ],
            0.0,
        ),
    )];
    let constraints =
        vec![Constraint::equality("c", vec![ScopeEntry::full(1, 2)], Function::linear(&[1.0, -1.0], 0.5))];
    let problem = DecomposedProblem::build(blocks, terms, constraints).unwrap();
    let config = DaldConfig::default();
    let solver = SolverSpec::default();
    let dald = run_dald(&problem, &chain_plan(1), &solver, &config).unwrap();
    let alm = run_alm(&problem, &solver, &config).unwrap();
    assert_eq!(dald, alm);
}

#[test]
fn identical_inputs_give_bitwise_identical_traces() {
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(3)).with_eps(1e-3, 1e-5);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_cumulative_inner = 100_000;
    let solver = SolverSpec::analytic();
    let plan = chain_plan(3);
    let a = run_dald(&problem, &plan, &solver, &config).unwrap();
    let b = run_dald(&problem, &plan, &solver, &config).unwrap();
    assert_eq!(a, b);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.objective.to_bits(), rb.objective.to_bits());
        assert_eq!(ra.al_value.to_bits(), rb.al_value.to_bits());
        assert_eq!(ra.primal_inf.to_bits(), rb.primal_inf.to_bits());
        assert_eq!(ra.dual_inf.to_bits(), rb.dual_inf.to_bits());
    }
}

#[test]
fn partial_cycle_runs_are_deterministic_and_fair_to_all_blocks() {
    let problem = coupled_qp();
    let plan = chain_plan(2)
        .with_mode(CoordinationMode::PartialCycle { quota: 1 })
        .with_seed(99);
    let mut config = DaldConfig::default().with_eps(1e-8, 1e-8);
    config.max_cumulative_inner = 100_000;
    let a = run_bcd(&problem, &plan, &SolverSpec::default(), &config).unwrap();
    let b = run_bcd(&problem, &plan, &SolverSpec::default(), &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary.status, RunStatus::Converged);
    assert!((a.summary.x[0] - 8.0 / 15.0).abs() <= 1e-6);
    assert!((a.summary.x[1] - 28.0 / 15.0).abs() <= 1e-6);
}

#[test]
fn partial_cycle_inner_exit_waits_for_coverage() {
    // Quota 1 with a fresh multiplier state: the first sweep moves only one
    // block, whose displacement can be tiny, but the inner loop must not
    // declare convergence before every block has been touched.
    let problem = admm_counterexample();
    let plan = chain_plan(3)
        .with_mode(CoordinationMode::PartialCycle { quota: 1 })
        .with_policy(SelectionPolicy::Greedy)
        .with_seed(5);
    let mut config = DaldConfig::default().with_eps(1e-6, 1e-6);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_cumulative_inner = 50;
    let trace = run_dald(&problem, &plan, &SolverSpec::analytic(), &config).unwrap();
    // the run must have touched all three blocks before its first inner exit
    let first_records: Vec<_> = trace.records.iter().filter(|r| r.outer == 1).collect();
    assert!(first_records.len() >= 3, "inner loop exited after {} sweeps", first_records.len());
}

#[test]
fn greedy_partial_cycle_serves_every_block_after_multiplier_updates() {
    // Greedy selection must key on freshness since the last multiplier
    // update; a selector fed stale scores can starve blocks whose
    // constraint violations then never decrease.
    use crate::problems::{lnf_generate, lnf_oracle};
    let (problem, instance) = lnf_generate(6, 6, 2, 4).unwrap();
    let oracle = lnf_oracle(&instance).unwrap();
    let plan = chain_plan(4)
        .with_mode(CoordinationMode::PartialCycle { quota: 2 })
        .with_policy(SelectionPolicy::Greedy)
        .with_seed(11);
    let mut config = DaldConfig::default().with_criterion(b4(4));
    config.max_cumulative_inner = 100_000;
    let trace = run_dald(&problem, &plan, &SolverSpec::default(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    let gap = (trace.summary.objective - oracle.cost as f64).abs() / oracle.cost as f64;
    assert!(gap <= 1e-3, "objective gap {gap:.2e}");
}

#[test]
fn selective_repetitive_solves_repeated_blocks() {
    use std::collections::BTreeMap;
    let problem = coupled_qp();
    let plan = chain_plan(2)
        .with_mode(CoordinationMode::SelectiveRepetitive { repeats: BTreeMap::from([(1, 2)]) });
    let mut config = DaldConfig::default().with_eps(1e-8, 1e-8);
    config.max_cumulative_inner = 10_000;
    let trace = run_bcd(&problem, &plan, &SolverSpec::default(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert!((trace.summary.x[0] - 8.0 / 15.0).abs() <= 1e-6);
}

#[test]
fn sweep_al_recording_is_monotone_within_sweeps() {
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(4)).with_eps(1e-3, 1e-6);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.record_sweep_al = true;
    config.max_cumulative_inner = 500;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert!(!trace.records.is_empty());
    for r in &trace.records {
        let al = r.sweep_al.as_ref().expect("recording enabled");
        let mut prev = al.at_start;
        for &v in &al.after_solve {
            assert!(v <= prev + 1e-9, "AL rose within a sweep: {prev} -> {v}");
            prev = v;
        }
        assert_eq!(*al.after_solve.last().unwrap(), r.al_value);
    }
}

#[test]
fn snapshot_recording_captures_each_sweep() {
    let problem = coupled_qp();
    let config = DaldConfig { record_snapshots: true, ..DaldConfig::default() };
    let trace = run_bcd(&problem, &chain_plan(2), &SolverSpec::default(), &config).unwrap();
    for r in &trace.records {
        let snap = r.snapshot.as_ref().expect("snapshots enabled");
        assert_eq!(snap.len(), problem.total_dim());
    }
    assert_eq!(trace.records.last().unwrap().snapshot.as_deref(), Some(&trace.summary.x[..]));
}

#[test]
fn csv_schema_is_stable() {
    let problem = coupled_qp();
    let trace =
        run_bcd(&problem, &chain_plan(2), &SolverSpec::default(), &DaldConfig::default()).unwrap();
    let csv = trace.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,v,cum_inner,objective,al_value,primal_inf,dual_inf"));
    assert_eq!(csv.lines().count(), trace.records.len() + 1);
    for line in lines {
        assert_eq!(line.split(',').count(), 7);
    }
}

#[test]
fn config_validation_rejects_nonsense() {
    let problem = coupled_qp();
    let plan = chain_plan(2);
    let solver = SolverSpec::default();
    let bad_eps = DaldConfig { eps_pri: 0.0, ..DaldConfig::default() };
    assert!(matches!(run_dald(&problem, &plan, &solver, &bad_eps), Err(DriverError::Config(_))));
    let bad_crit =
        DaldConfig::default().with_criterion(StopCriterion::FixedSweepCap { max_sweeps: 0 });
    assert!(matches!(run_dald(&problem, &plan, &solver, &bad_crit), Err(DriverError::Config(_))));
    let bad_x = DaldConfig { initial_x: Some(vec![1.0]), ..DaldConfig::default() };
    assert!(matches!(run_dald(&problem, &plan, &solver, &bad_x), Err(DriverError::Config(_))));
    let bad_plan = SweepPlan { stages: vec![vec![1]], ..chain_plan(2) };
    assert!(matches!(
        run_dald(&problem, &bad_plan, &solver, &DaldConfig::default()),
        Err(DriverError::Config(_))
    ));
}

#[test]
fn divergence_guard_reports_diverged() {
    // runaway objective: f = -x^2 + x over an unbounded block; with the
    // solver iteration budget capped, each sweep moves a bounded amount and
    // the driver's divergence guard fires before anything overflows
    let blocks = vec![VariableBlock::new(1, 1)];
    let terms = vec![ObjectiveTerm::new(
        "f",
        vec![ScopeEntry::new(1, vec![0])],
        Function::expr(vec![Atom::Bilinear { a: 0, b: 0, coef: -1.0 }, Atom::Linear { idx: 0, coef: 1.0 }], 0.0),
    )];
    let problem = DecomposedProblem::build(blocks, terms, vec![]).unwrap();
    let config = DaldConfig {
        divergence_norm: 1e6,
        max_cumulative_inner: 100_000,
        ..DaldConfig::default()
    };
    let solver = SolverSpec { max_iters: 8, ..SolverSpec::default() };
    let trace = run_bcd(&problem, &chain_plan(1), &solver, &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Diverged);
}

#[test]
fn budget_guard_reports_max_inner() {
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(1));
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_cumulative_inner = 25;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::MaxInnerReached);
    assert_eq!(trace.summary.cumulative_inner, 25);
    assert_eq!(trace.records.len(), 25);
}

#[test]
fn max_outer_guard_reports_max_outer() {
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(1));
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_outer = 5;
    config.max_cumulative_inner = 1_000;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::MaxOuterReached);
    assert_eq!(trace.summary.outer_iters, 5);
}

#[test]
fn analytic_and_projected_gradient_drivers_agree() {
    // Same trajectory under both solver layers: a fixed sweep budget makes
    // the iteration counts match by construction, and the iterates must
    // agree to 1e-6; with a real dual tolerance the two runs should also
    // stop at the same (k, v) and the same point.
    let problem = admm_counterexample();
    let plan = chain_plan(3);
    let pg = SolverSpec::default(); // tol 1e-10
    let exact = SolverSpec::analytic();

    let mut budget = DaldConfig::default().with_criterion(b4(3)).with_eps(1e-3, 1e-300);
    budget.initial_x = Some(vec![1.0, 1.0, 1.0]);
    budget.max_cumulative_inner = 300;
    let a = run_dald(&problem, &plan, &exact, &budget).unwrap();
    let b = run_dald(&problem, &plan, &pg, &budget).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    let diff = a.summary.x.iter().zip(&b.summary.x).map(|(u, v)| (u - v).abs()).fold(0.0f64, f64::max);
    assert!(diff <= 1e-6, "solver layers disagree by {diff:.3e} after a fixed budget");

    let mut tol = DaldConfig::default().with_criterion(b4(3)).with_eps(1e-3, 1e-6);
    tol.initial_x = Some(vec![1.0, 1.0, 1.0]);
    tol.max_cumulative_inner = 200_000;
    tol.max_outer = 200_000;
    let a = run_dald(&problem, &plan, &exact, &tol).unwrap();
    let b = run_dald(&problem, &plan, &pg, &tol).unwrap();
    assert_eq!(a.summary.status, RunStatus::Converged);
    assert_eq!(
        (a.summary.outer_iters, a.summary.cumulative_inner),
        (b.summary.outer_iters, b.summary.cumulative_inner)
    );
    let diff = a.summary.x.iter().zip(&b.summary.x).map(|(u, v)| (u - v).abs()).fold(0.0f64, f64::max);
    assert!(diff <= 1e-6);
}

#[test]
fn exit_point_is_a_per_block_fixed_point() {
    // After a B1-converged run, re-solving any single block from the exit
    // point moves it by no more than eps_dual.
    use crate::solvers::solve_block;
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_eps(1e-3, 1e-6);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_cumulative_inner = 1_000_000;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    let x = &trace.summary.x;
    let state = crate::lagrangian::MultiplierState {
        mu: trace.summary.multipliers.clone(),
        rho: vec![1.0; 3],
        penalty_growth: 1.0,
        rho_cap: f64::INFINITY,
    };
    for id in 1..=3 {
        let w = problem.coupling_variables(id, x).unwrap();
        let range = problem.block_range(id).unwrap();
        let sol = solve_block(&problem, id, &w, &state, &x[range.clone()], &SolverSpec::analytic()).unwrap();
        let moved = sol.x.iter().zip(&x[range]).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(moved <= config.eps_dual, "block {id} moved {moved:.3e} on re-solve");
    }
}

#[test]
fn decaying_tolerance_and_growing_cap_also_converge() {
    let problem = admm_counterexample();
    let plan = chain_plan(3);
    let solver = SolverSpec::analytic();
    for criterion in [
        StopCriterion::DecayingTolerance { initial_tol: 1e-1, decay: 0.5 },
        StopCriterion::GrowingSweepCap { initial_cap: 1, growth: 2.0 },
    ] {
        let mut config = DaldConfig::default().with_criterion(criterion).with_eps(1e-3, 1e-6);
        config.initial_x = Some(vec![1.0, 1.0, 1.0]);
        config.max_cumulative_inner = 1_000_000;
        config.max_outer = 1_000_000;
        let trace = run_dald(&problem, &plan, &solver, &config).unwrap();
        assert_eq!(trace.summary.status, RunStatus::Converged, "{:?}", config.criterion);
        assert!(crate::lagrangian::inf_norm(&trace.summary.x) <= 1e-3);
    }
}

#[test]
fn growing_penalty_schedule_is_applied_between_outers() {
    // beta = 2 capped at 4: after two updates rho sits at the cap, and the
    // run still converges
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(4)).with_eps(1e-3, 1e-6);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.penalty_growth = 2.0;
    config.rho_cap = 4.0;
    config.max_cumulative_inner = 1_000_000;
    config.max_outer = 1_000_000;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert!(crate::lagrangian::inf_norm(&trace.summary.x) <= 1e-3);
}

#[test]
fn multiplier_step_equals_scaled_exit_residual() {
    // Identity check on the trace: after a converged run the final
    // multiplier step size is bounded by 2 rho^2 eps_pri.
    let problem = admm_counterexample();
    let mut config = DaldConfig::default().with_criterion(b4(3)).with_eps(1e-3, 1e-6);
    config.initial_x = Some(vec![1.0, 1.0, 1.0]);
    config.max_cumulative_inner = 1_000_000;
    config.max_outer = 1_000_000;
    let trace = run_dald(&problem, &chain_plan(3), &SolverSpec::analytic(), &config).unwrap();
    assert_eq!(trace.summary.status, RunStatus::Converged);
    assert!(2.0 * trace.summary.primal_inf <= 2.0 * config.eps_pri);
}
