//! Random linear network flow instances on grid graphs.
//!
//! Nodes sit on a rows x cols grid with directed arcs both ways between
//! 4-neighbours. Sources and sinks line opposite sides, supplies are drawn
//! from Poisson(50) and balanced to zero, arc bounds are [0, 50], and costs
//! are integers in 1..=5. The grid is split into contiguous equal parts;
//! each arc belongs to the subproblem owning its tail node, so node-balance
//! constraints couple subproblems exactly where an arc crosses the cut.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Constraint, DecomposedProblem, Function, ObjectiveTerm, ScopeEntry, VariableBlock};
use crate::problems::mcmf::lnf_oracle;

#[derive(Debug, Error, PartialEq)]
pub enum LnfError {
    #[error("grid must be at least 2x2, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("cannot split a {rows}x{cols} grid into {parts} contiguous equal parts")]
    BadPartition { rows: usize, cols: usize, parts: usize },
    #[error("failed to draw a balanced feasible instance after {attempts} attempts")]
    InfeasibleBalance { attempts: usize },
    #[error("instance is infeasible: capacity cuts block the required supply")]
    Infeasible,
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Source,
    Sink,
    Transshipment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnfNode {
    pub role: NodeRole,
    pub supply: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnfArc {
    pub tail: usize,
    pub head: usize,
    pub lower: i64,
    pub upper: i64,
    pub cost: i64,
}

/// A generated (or hand-built) instance; serializable so runs are replayable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnfInstance {
    pub rows: usize,
    pub cols: usize,
    pub nodes: Vec<LnfNode>,
    pub arcs: Vec<LnfArc>,
    /// 1-based subproblem id per node.
    pub partition: Vec<usize>,
    pub n_partitions: usize,
    pub seed: u64,
}

/// Which grid nodes become sources and sinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RoleLayout {
    /// Every other row of the left column is a source, mirrored sinks on the
    /// right column. Keeps total supply well under the column cut capacity.
    #[default]
    AlternatingSides,
    /// The whole left column sources, the whole right column sinks. Total
    /// supply then rides close to the cut capacity, so more draws are
    /// rejected as infeasible.
    FullSides,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnfParams {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub n_partitions: usize,
    pub supply_mean: f64,
    pub cost_min: i64,
    pub cost_max: i64,
    pub capacity: i64,
    pub layout: RoleLayout,
    pub max_attempts: usize,
}

impl LnfParams {
    pub fn new(rows: usize, cols: usize, seed: u64, n_partitions: usize) -> Self {
        Self {
            rows,
            cols,
            seed,
            n_partitions,
            supply_mean: 50.0,
            cost_min: 1,
            cost_max: 5,
            capacity: 50,
            layout: RoleLayout::default(),
            max_attempts: 100,
        }
    }
}

/// Generates a feasible instance and its decomposed problem with the
/// standard parameters (Poisson(50) supplies, costs 1..=5, bounds [0, 50]).
pub fn lnf_generate(
    rows: usize,
    cols: usize,
    seed: u64,
    n_partitions: usize,
) -> Result<(DecomposedProblem, LnfInstance), LnfError> {
    lnf_generate_with(LnfParams::new(rows, cols, seed, n_partitions))
}

pub fn lnf_generate_with(params: LnfParams) -> Result<(DecomposedProblem, LnfInstance), LnfError> {
    let (rows, cols) = (params.rows, params.cols);
    if rows < 2 || cols < 2 {
        return Err(LnfError::GridTooSmall { rows, cols });
    }
    let partition = partition_nodes(rows, cols, params.n_partitions)?;

    for attempt in 0..params.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(attempt as u64);
        let Some(instance) = draw_instance(&params, &partition, &mut rng) else { continue };
        if lnf_oracle(&instance).is_err() {
            continue;
        }
        let problem = lnf_problem(&instance)?;
        return Ok((problem, instance));
    }
    Err(LnfError::InfeasibleBalance { attempts: params.max_attempts })
}

fn draw_instance(params: &LnfParams, partition: &[usize], rng: &mut ChaCha8Rng) -> Option<LnfInstance> {
    let (rows, cols) = (params.rows, params.cols);
    let id = |r: usize, c: usize| r * cols + c;

    let mut arcs = Vec::new();
    let mut push_pair = |rng: &mut ChaCha8Rng, u: usize, v: usize| {
        for (tail, head) in [(u, v), (v, u)] {
            arcs.push(LnfArc {
                tail,
                head,
                lower: 0,
                upper: params.capacity,
                cost: rng.random_range(params.cost_min..=params.cost_max),
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                push_pair(rng, id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                push_pair(rng, id(r, c), id(r + 1, c));
            }
        }
    }

    let mut nodes = vec![LnfNode { role: NodeRole::Transshipment, supply: 0 }; rows * cols];
    let stride = match params.layout {
        RoleLayout::AlternatingSides => 2,
        RoleLayout::FullSides => 1,
    };
    let poisson = Poisson::new(params.supply_mean).expect("positive mean");
    let draw = |rng: &mut ChaCha8Rng| -> i64 { (poisson.sample(rng) as i64).max(1) };
    let mut sinks = Vec::new();
    for r in (0..rows).step_by(stride) {
        let s = id(r, 0);
        nodes[s] = LnfNode { role: NodeRole::Source, supply: draw(rng) };
        let t = id(r, cols - 1);
        nodes[t] = LnfNode { role: NodeRole::Sink, supply: -draw(rng) };
        sinks.push(t);
    }

    // Rebalance by absorbing the imbalance into the largest-magnitude sink;
    // if that would flip its sign the draw is rejected.
    let imbalance: i64 = nodes.iter().map(|n| n.supply).sum();
    let &big = sinks.iter().min_by_key(|&&t| nodes[t].supply)?;
    if nodes[big].supply - imbalance >= 0 {
        return None;
    }
    nodes[big].supply -= imbalance;
    debug_assert_eq!(nodes.iter().map(|n| n.supply).sum::<i64>(), 0);

    Some(LnfInstance {
        rows,
        cols,
        nodes,
        arcs,
        partition: partition.to_vec(),
        n_partitions: params.n_partitions,
        seed: params.seed,
    })
}

/// Contiguous equal parts: 1 (whole grid), 2 (left/right halves), or
/// 4 (quadrants).
fn partition_nodes(rows: usize, cols: usize, parts: usize) -> Result<Vec<usize>, LnfError> {
    let bad = || LnfError::BadPartition { rows, cols, parts };
    if parts == 0 || (rows * cols) % parts != 0 {
        return Err(bad());
    }
    let mut out = vec![0usize; rows * cols];
    match parts {
        1 => out.fill(1),
        2 => {
            if cols % 2 != 0 {
                return Err(bad());
            }
            for r in 0..rows {
                for c in 0..cols {
                    out[r * cols + c] = if c < cols / 2 { 1 } else { 2 };
                }
            }
        }
        4 => {
            if rows % 2 != 0 || cols % 2 != 0 {
                return Err(bad());
            }
            for r in 0..rows {
                for c in 0..cols {
                    let quadrant = if r < rows / 2 { 0 } else { 2 } + if c < cols / 2 { 0 } else { 1 };
                    out[r * cols + c] = quadrant + 1;
                }
            }
        }
        _ => return Err(bad()),
    }
    Ok(out)
}

/// Builds the decomposed problem: one block per partition owning the arcs
/// whose tail lies inside it, a linear cost term per block, and one
/// node-balance equality per node.
pub fn lnf_problem(instance: &LnfInstance) -> Result<DecomposedProblem, LnfError> {
    let nparts = instance.n_partitions;
    let nodes = instance.nodes.len();
    if nparts == 0 {
        return Err(LnfError::MalformedInstance("n_partitions must be positive".into()));
    }
    if instance.partition.len() != nodes {
        return Err(LnfError::MalformedInstance("partition must assign every node".into()));
    }
    if instance.partition.iter().any(|&p| p == 0 || p > nparts) {
        return Err(LnfError::MalformedInstance("partition ids must lie in 1..=n_partitions".into()));
    }
    if instance.arcs.iter().any(|a| a.tail >= nodes || a.head >= nodes) {
        return Err(LnfError::MalformedInstance("arc endpoint outside the node range".into()));
    }
    // arc -> (block, element) placement in tail-partition order
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); nparts];
    let mut placement = vec![(0usize, 0usize); instance.arcs.len()];
    for (ai, arc) in instance.arcs.iter().enumerate() {
        let p = instance.partition[arc.tail];
        placement[ai] = (p, owned[p - 1].len());
        owned[p - 1].push(ai);
    }

    let mut blocks = Vec::new();
    let mut terms = Vec::new();
    for p in 1..=nparts {
        let arcs = &owned[p - 1];
        if arcs.is_empty() {
            return Err(LnfError::BadPartition {
                rows: instance.rows,
                cols: instance.cols,
                parts: nparts,
            });
        }
        let dim = arcs.len();
        let labels = arcs
            .iter()
            .map(|&ai| format!("t_{}_{}", instance.arcs[ai].tail, instance.arcs[ai].head))
            .collect();
        let lower = arcs.iter().map(|&ai| instance.arcs[ai].lower as f64).collect();
        let upper = arcs.iter().map(|&ai| instance.arcs[ai].upper as f64).collect();
        blocks.push(VariableBlock::new(p, dim).with_bounds(lower, upper).with_labels(labels));
        let costs: Vec<f64> = arcs.iter().map(|&ai| instance.arcs[ai].cost as f64).collect();
        terms.push(ObjectiveTerm::new(
            format!("cost_p{p}"),
            vec![ScopeEntry::full(p, dim)],
            Function::linear(&costs, 0.0),
        ));
    }

    let mut constraints = Vec::new();
    for (node, data) in instance.nodes.iter().enumerate() {
        // (block, element, +/-1) for every incident arc
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (ai, arc) in instance.arcs.iter().enumerate() {
            let (p, e) = placement[ai];
            if arc.tail == node {
                entries.push((p, e, 1.0));
            } else if arc.head == node {
                entries.push((p, e, -1.0));
            }
        }
        entries.sort_by_key(|&(p, e, _)| (p, e));
        let mut scope: Vec<ScopeEntry> = Vec::new();
        let mut coeffs = Vec::new();
        for &(p, e, coef) in &entries {
            coeffs.push(coef);
            match scope.last_mut() {
                Some(last) if last.block == p => last.elems.push(e),
                _ => scope.push(ScopeEntry::new(p, vec![e])),
            }
        }
        constraints.push(Constraint::equality(
            format!("node{node}"),
            scope,
            Function::linear(&coeffs, -(data.supply as f64)),
        ));
    }

    DecomposedProblem::build(blocks, terms, constraints)
        .map_err(|_| LnfError::BadPartition { rows: instance.rows, cols: instance.cols, parts: nparts })
}

impl LnfInstance {
    pub fn total_supply(&self) -> i64 {
        self.nodes.iter().map(|n| n.supply.max(0)).sum()
    }

    /// Graphviz rendering with partition-coloured nodes.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        const COLORS: [&str; 8] =
            ["lightblue", "lightyellow", "lightpink", "lightgreen", "orange", "cyan", "gray", "violet"];
        let mut out = String::from("digraph lnf {\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let shape = match node.role {
                NodeRole::Source => "doublecircle",
                NodeRole::Sink => "square",
                NodeRole::Transshipment => "circle",
            };
            let color = COLORS[(self.partition[i] - 1) % COLORS.len()];
            writeln!(
                out,
                "  n{i} [label=\"{i}\\ns={}\" shape={shape} style=filled fillcolor={color}];",
                node.supply
            )
            .unwrap();
        }
        for arc in &self.arcs {
            writeln!(out, "  n{} -> n{} [label=\"{}\"];", arc.tail, arc.head, arc.cost).unwrap();
        }
        out.push_str("}\n");
        out
    }
}
