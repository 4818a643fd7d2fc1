//! Experiment configuration: problem/plan sources, solver and driver
//! settings, resolved from a JSON config file with flag overrides. The
//! resolved config is embedded in every summary.json so a run can be
//! replayed bit-for-bit from its own output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dald_core::coordination::{
    es_sweep_plan, network_from_matrix, sequential_chain, CoordinationMode, HierarchicalMatrix,
    NetworkFile, SelectionPolicy, SweepPlan,
};
use dald_core::driver::DaldConfig;
use dald_core::model::{DecomposedProblem, ProblemFile};
use dald_core::problems::{admm_counterexample, lnf_generate, lnf_oracle, toy_example, LnfInstance};
use dald_core::solvers::SolverSpec;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProblemSource {
    /// `counterexample` or `toy`.
    Builtin { name: String },
    /// A problem-definition JSON file.
    File { path: PathBuf },
    /// A generated linear network flow instance.
    Lnf { rows: usize, cols: usize, parts: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PlanSource {
    /// Earliest-start plan of the full-information chain over all blocks.
    #[default]
    Chain,
    /// Hierarchical matrix as a JSON 2-D integer array, or a network as an
    /// edge-list object `{"nodes": n, "edges": [[child, parent], ...]}`.
    MatrixFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Dald,
    Alm,
    Bcd,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub plan: PlanSource,
    pub method: Method,
    pub solver: SolverSpec,
    pub dald: DaldConfig,
    /// Which blocks each sweep touches (full-cycle unless overridden).
    pub coordination: Option<CoordinationMode>,
    pub selection_policy: Option<SelectionPolicy>,
    /// Seed for randomized coordination modes.
    pub plan_seed: u64,
    /// Instance seeds for sweep runs over generated problems.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Builtin { name: "counterexample".into() },
            plan: PlanSource::default(),
            method: Method::default(),
            solver: SolverSpec::default(),
            dald: DaldConfig::default(),
            coordination: None,
            selection_policy: None,
            plan_seed: 0,
            seeds: vec![0],
            output_dir: PathBuf::from("."),
        }
    }
}

/// Flat usage/config error; anything that reaches `main` exits with code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl ExperimentConfig {
    /// Loads from a config JSON, or from a summary.json (which embeds the
    /// resolved config under a `config` key).
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError(format!("{} is not valid JSON: {e}", path.display())))?;
        let config_value = value.get("config").cloned().unwrap_or(value);
        let config: ExperimentConfig = serde_json::from_value(config_value)
            .map_err(|e| CliError(format!("{} is not a valid config: {e}", path.display())))?;
        Ok(config)
    }

    /// Builds the problem, plus the LNF instance when the source is a
    /// generator (so the oracle can be consulted). A seed override swaps
    /// the generator seed for sweep cells.
    pub fn build_problem_with_seed(
        &self,
        seed_override: Option<u64>,
    ) -> CliResult<(DecomposedProblem, Option<LnfInstance>)> {
        match &self.problem {
            ProblemSource::Builtin { name } => match name.as_str() {
                "counterexample" => Ok((admm_counterexample(), None)),
                "toy" => Ok((toy_example(), None)),
                other => Err(CliError(format!(
                    "unknown builtin problem {other:?} (expected \"counterexample\" or \"toy\")"
                ))),
            },
            ProblemSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
                let file = ProblemFile::from_json(&text)
                    .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
                Ok((file.into_problem()?, None))
            }
            ProblemSource::Lnf { rows, cols, parts, seed } => {
                let (problem, instance) =
                    lnf_generate(*rows, *cols, seed_override.unwrap_or(*seed), *parts)?;
                Ok((problem, Some(instance)))
            }
        }
    }

    pub fn build_plan(&self, problem: &DecomposedProblem) -> CliResult<SweepPlan> {
        let plan = match &self.plan {
            PlanSource::Chain => es_sweep_plan(&sequential_chain(problem.num_blocks())),
            PlanSource::MatrixFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
                let network = if let Ok(matrix) = serde_json::from_str::<HierarchicalMatrix>(&text) {
                    network_from_matrix(&matrix)?
                } else {
                    serde_json::from_str::<NetworkFile>(&text)
                        .map_err(|e| {
                            CliError(format!(
                                "{} is neither a matrix nor an edge list: {e}",
                                path.display()
                            ))
                        })?
                        .into_network()?
                };
                es_sweep_plan(&network)
            }
        };
        let mut plan = plan.with_seed(self.plan_seed);
        if let Some(mode) = &self.coordination {
            plan = plan.with_mode(mode.clone());
        }
        if let Some(policy) = self.selection_policy {
            plan = plan.with_policy(policy);
        }
        Ok(plan)
    }

    /// Output directory resolved against `DALD_OUT_DIR` when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            return self.output_dir.clone();
        }
        match std::env::var_os("DALD_OUT_DIR") {
            Some(root) => PathBuf::from(root).join(&self.output_dir),
            None => self.output_dir.clone(),
        }
    }
}

/// Oracle comparison recorded in summaries of generator-backed runs.
pub fn oracle_stats(instance: &LnfInstance, objective: f64) -> Option<(f64, f64)> {
    let oracle = lnf_oracle(instance).ok()?;
    let cost = oracle.cost as f64;
    let gap = if cost != 0.0 { (objective - cost).abs() / cost.abs() } else { objective.abs() };
    Some((cost, gap))
}
