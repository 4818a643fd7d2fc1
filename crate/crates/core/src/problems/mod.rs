//! Built-in problems and oracles: the four-block toy model, the three-block
//! ADMM counterexample, and the random linear network flow generator with an
//! exact min-cost-flow oracle.

mod counterexample;
mod lnf;
mod mcmf;
mod toy;

pub use counterexample::{admm_counterexample, CounterexampleInstance, COUNTEREXAMPLE_MATRIX};
pub use lnf::{
    lnf_generate, lnf_generate_with, lnf_problem, LnfArc, LnfError, LnfInstance, LnfNode, LnfParams,
    NodeRole, RoleLayout,
};
pub use mcmf::{lnf_oracle, LnfFlow};
pub use toy::toy_example;
