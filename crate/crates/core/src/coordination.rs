//! Subproblem solving sequences: hierarchical networks and matrices, sweep
//! planning via the earliest-start rule, and the coordination modes.
//!
//! Edges point child -> parent: information flows from lower-level nodes to
//! higher ones, children are solved before their parents, and the unique
//! root is the last subproblem solved.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BlockId, DecomposedProblem};

#[derive(Debug, Error, PartialEq)]
pub enum CoordinationError {
    #[error("node {0} outside 1..=n")]
    UnknownNode(BlockId),
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(BlockId, BlockId),
    #[error("hierarchical matrix must be square and non-empty")]
    NotSquare,
    #[error("off-diagonal entries must be 0 or 1 (found {value} at ({row}, {col}))")]
    BadOffDiagonal { row: usize, col: usize, value: u32 },
    #[error("diagonal entry of node {node} is {diag} but its out-degree is {out_degree}")]
    DiagonalMismatch { node: BlockId, diag: u32, out_degree: u32 },
    #[error("the descendant pattern contains a cycle")]
    CyclicPattern,
    #[error("expected exactly one root, found {0}")]
    MultipleRoots(usize),
}

/// A DAG of subproblems with derived earliest-start levels.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalNetwork {
    n: usize,
    /// (child, parent) pairs, sorted.
    edges: Vec<(BlockId, BlockId)>,
    /// 1-based level per node; nodes without predecessors sit at level 1.
    levels: Vec<usize>,
}

impl HierarchicalNetwork {
    pub fn new(n: usize, mut edges: Vec<(BlockId, BlockId)>) -> Result<Self, CoordinationError> {
        if n == 0 {
            return Err(CoordinationError::MultipleRoots(0));
        }
        edges.sort_unstable();
        edges.dedup();
        for &(c, p) in &edges {
            if c == 0 || c > n {
                return Err(CoordinationError::UnknownNode(c));
            }
            if p == 0 || p > n {
                return Err(CoordinationError::UnknownNode(p));
            }
            if c == p {
                return Err(CoordinationError::SelfLoop(c, p));
            }
        }
        let levels = es_levels(n, &edges)?;
        let roots = (1..=n).filter(|&v| !edges.iter().any(|&(c, _)| c == v)).count();
        if roots != 1 {
            return Err(CoordinationError::MultipleRoots(roots));
        }
        Ok(Self { n, edges, levels })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(BlockId, BlockId)] {
        &self.edges
    }

    /// Earliest-start level of a node (1-based).
    pub fn level_of(&self, node: BlockId) -> Result<usize, CoordinationError> {
        if node == 0 || node > self.n {
            return Err(CoordinationError::UnknownNode(node));
        }
        Ok(self.levels[node - 1])
    }

    /// The unique node with no outgoing edge: the last subproblem solved.
    pub fn root(&self) -> BlockId {
        (1..=self.n).find(|&v| !self.edges.iter().any(|&(c, _)| c == v)).expect("validated single root")
    }

    pub fn level_count(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(1)
    }
}

/// Earliest-start leveling: level(v) = 1 + max level over predecessors
/// (children feeding v); detects cycles.
fn es_levels(n: usize, edges: &[(BlockId, BlockId)]) -> Result<Vec<usize>, CoordinationError> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(c, p) in edges {
        indeg[p - 1] += 1;
        out[c - 1].push(p - 1);
    }
    let mut levels = vec![0usize; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    for &v in &queue {
        levels[v] = 1;
    }
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &p in &out[v] {
            levels[p] = levels[p].max(levels[v] + 1);
            indeg[p] -= 1;
            if indeg[p] == 0 {
                queue.push(p);
            }
        }
    }
    if seen != n {
        return Err(CoordinationError::CyclicPattern);
    }
    Ok(levels)
}

/// n x n integer encoding of a hierarchical network: off-diagonal
/// `a[i][j] = 1` iff node i is a direct descendant of node j, diagonal
/// `a[i][i]` = out-degree of node i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HierarchicalMatrix {
    pub entries: Vec<Vec<u32>>,
}

impl HierarchicalMatrix {
    pub fn n(&self) -> usize {
        self.entries.len()
    }
}

/// Encodes a network per the descendant/out-degree convention.
pub fn matrix_from_network(net: &HierarchicalNetwork) -> HierarchicalMatrix {
    let n = net.node_count();
    let mut entries = vec![vec![0u32; n]; n];
    for &(c, p) in net.edges() {
        entries[c - 1][p - 1] = 1;
        entries[c - 1][c - 1] += 1;
    }
    HierarchicalMatrix { entries }
}

/// Decodes a matrix back into a network, validating every invariant.
pub fn network_from_matrix(matrix: &HierarchicalMatrix) -> Result<HierarchicalNetwork, CoordinationError> {
    let n = matrix.n();
    if n == 0 || matrix.entries.iter().any(|row| row.len() != n) {
        return Err(CoordinationError::NotSquare);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        let mut out_degree = 0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = matrix.entries[i][j];
            if v > 1 {
                return Err(CoordinationError::BadOffDiagonal { row: i + 1, col: j + 1, value: v });
            }
            if v == 1 {
                out_degree += 1;
                edges.push((i + 1, j + 1));
            }
        }
        if matrix.entries[i][i] != out_degree {
            return Err(CoordinationError::DiagonalMismatch {
                node: i + 1,
                diag: matrix.entries[i][i],
                out_degree,
            });
        }
    }
    HierarchicalNetwork::new(n, edges)
}

/// The default sequential sequence "1 -> 2 -> ... -> n": every earlier node
/// feeds every later one, so each block sees all fresh upstream values.
pub fn sequential_chain(n: usize) -> HierarchicalNetwork {
    let mut edges = Vec::new();
    for c in 1..=n {
        for p in (c + 1)..=n {
            edges.push((c, p));
        }
    }
    HierarchicalNetwork::new(n, edges).expect("chain is a valid network")
}

/// Which blocks each sweep touches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CoordinationMode {
    /// Every block exactly once per sweep.
    FullCycle,
    /// A subset of `quota` blocks per sweep.
    PartialCycle { quota: usize },
    /// Blocks repeated per the multiset counts; missing entries default to
    /// one, an explicit zero skips the block.
    SelectiveRepetitive { repeats: BTreeMap<BlockId, usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    #[default]
    Random,
    /// Largest last-seen dual residual first, ties by ascending id.
    Greedy,
}

/// An ordered staging of blocks for one sweep. Stages execute in order;
/// blocks inside a stage have no edges between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub stages: Vec<Vec<BlockId>>,
    pub mode: CoordinationMode,
    pub policy: SelectionPolicy,
    pub seed: u64,
}

impl SweepPlan {
    pub fn with_mode(mut self, mode: CoordinationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_policy(mut self, policy: SelectionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn node_count(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }
}

/// Earliest-start plan: stage(v) = 1 + max stage of its predecessors, so
/// every node runs as early as its inputs allow.
pub fn es_sweep_plan(net: &HierarchicalNetwork) -> SweepPlan {
    let mut stages = vec![Vec::new(); net.level_count()];
    for v in 1..=net.node_count() {
        stages[net.level_of(v).expect("valid node") - 1].push(v);
    }
    SweepPlan { stages, mode: CoordinationMode::FullCycle, policy: SelectionPolicy::Random, seed: 0 }
}

/// Stage list for one sweep under the plan's coordination mode.
///
/// `block_scores` holds each block's last dual-residual infinity norm
/// (indexed by id - 1) and drives the greedy policy. Under the random policy
/// every block is selected with equal probability, so over S sweeps each
/// block's expected selection count is S * quota / n.
pub fn select_blocks<R: Rng>(
    plan: &SweepPlan,
    _sweep_index: usize,
    rng: &mut R,
    block_scores: &[f64],
) -> Vec<Vec<BlockId>> {
    match &plan.mode {
        CoordinationMode::FullCycle => plan.stages.clone(),
        CoordinationMode::PartialCycle { quota } => {
            let ids: Vec<BlockId> = plan.stages.iter().flatten().copied().collect();
            let q = (*quota).clamp(1, ids.len());
            let chosen: Vec<BlockId> = match plan.policy {
                SelectionPolicy::Random => {
                    rand::seq::index::sample(rng, ids.len(), q).iter().map(|k| ids[k]).collect()
                }
                SelectionPolicy::Greedy => {
                    let mut ranked = ids.clone();
                    ranked.sort_by(|&a, &b| {
                        let sa = block_scores.get(a - 1).copied().unwrap_or(f64::INFINITY);
                        let sb = block_scores.get(b - 1).copied().unwrap_or(f64::INFINITY);
                        sb.partial_cmp(&sa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
                    });
                    ranked.truncate(q);
                    ranked
                }
            };
            filter_stages(&plan.stages, |b| chosen.contains(&b), 1)
        }
        CoordinationMode::SelectiveRepetitive { repeats } => {
            let mut stages = Vec::new();
            for stage in &plan.stages {
                let mut expanded = Vec::new();
                for &b in stage {
                    let count = repeats.get(&b).copied().unwrap_or(1);
                    expanded.extend(std::iter::repeat_n(b, count));
                }
                if !expanded.is_empty() {
                    stages.push(expanded);
                }
            }
            stages
        }
    }
}

fn filter_stages(
    stages: &[Vec<BlockId>],
    keep: impl Fn(BlockId) -> bool,
    copies: usize,
) -> Vec<Vec<BlockId>> {
    let mut out = Vec::new();
    for stage in stages {
        let mut s = Vec::new();
        for &b in stage {
            if keep(b) {
                s.extend(std::iter::repeat_n(b, copies));
            }
        }
        if !s.is_empty() {
            out.push(s);
        }
    }
    out
}

/// A coupled pair placed in the same stage. Such plans are still executed,
/// but serially within the stage (ascending id) instead of in parallel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingWarning {
    pub stage: usize,
    pub block_a: BlockId,
    pub block_b: BlockId,
}

impl std::fmt::Display for CouplingWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stage {}: blocks {} and {} are coupled and will be solved serially",
            self.stage, self.block_a, self.block_b
        )
    }
}

/// Flags coupled subproblems sharing a stage.
pub fn validate_stage_coupling(problem: &DecomposedProblem, plan: &SweepPlan) -> Vec<CouplingWarning> {
    let mut warnings = Vec::new();
    for (s, stage) in plan.stages.iter().enumerate() {
        for (ai, &a) in stage.iter().enumerate() {
            for &b in &stage[ai + 1..] {
                let coupled = problem.coupled_blocks(a).map(|r| r.contains(&b)).unwrap_or(false);
                if coupled {
                    warnings.push(CouplingWarning { stage: s + 1, block_a: a.min(b), block_b: a.max(b) });
                }
            }
        }
    }
    warnings
}

/// Edge-list JSON format for networks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: usize,
    pub edges: Vec<(BlockId, BlockId)>,
}

impl NetworkFile {
    pub fn from_network(net: &HierarchicalNetwork) -> Self {
        Self { nodes: net.node_count(), edges: net.edges().to_vec() }
    }

    pub fn into_network(self) -> Result<HierarchicalNetwork, CoordinationError> {
        HierarchicalNetwork::new(self.nodes, self.edges)
    }
}
