//! Block-decomposed constrained problems.
//!
//! A [`DecomposedProblem`] holds `n` variable blocks, objective terms, and
//! shared constraints, each scoped to the block elements it reads. Building
//! the problem derives the coupling structure: which blocks are coupled,
//! which constraints each block owns a copy of, and the canonical ordering of
//! the coupling sub-vector each block needs from its neighbours.

mod file;
mod function;

pub use file::ProblemFile;
pub use function::{Atom, ExprFunction, Function, SmoothFn};

use std::collections::BTreeSet;

use thiserror::Error;

/// 1-based block identifier.
pub type BlockId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate block id {0}")]
    DuplicateBlockId(BlockId),
    #[error("block ids must be 1..=n with no gaps (missing {0})")]
    NonContiguousBlockIds(BlockId),
    #[error("{owner}: scope is empty")]
    EmptyScope { owner: String },
    #[error("{owner}: scope references unknown block {block}")]
    DanglingBlockRef { owner: String, block: BlockId },
    #[error("{owner}: malformed scope ({detail})")]
    BadScope { owner: String, detail: String },
    #[error("block {0}: lower bound exceeds upper bound at element {1}")]
    BadBounds(BlockId, usize),
    #[error("block {block}: {detail}")]
    BadBlock { block: BlockId, detail: String },
    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("penalty must be strictly positive, got {0}")]
    NonpositivePenalty(f64),
    #[error("{owner}: cannot be expressed in the problem file format ({detail})")]
    NotSerializable { owner: String, detail: String },
}

/// One variable block `x_i` with its box-shaped local set.
#[derive(Debug, Clone)]
pub struct VariableBlock {
    pub id: BlockId,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub labels: Vec<String>,
}

impl VariableBlock {
    /// Unbounded block with auto-generated labels.
    pub fn new(id: BlockId, dim: usize) -> Self {
        Self {
            id,
            dim,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            labels: (0..dim).map(|j| format!("x{id}_{j}")).collect(),
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Same scalar interval for every element.
    pub fn with_box(self, lo: f64, hi: f64) -> Self {
        let d = self.dim;
        self.with_bounds(vec![lo; d], vec![hi; d])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }
}

/// The elements of one block that a term or constraint reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeEntry {
    pub block: BlockId,
    /// Strictly ascending element indices within the block.
    pub elems: Vec<usize>,
}

impl ScopeEntry {
    pub fn new(block: BlockId, elems: Vec<usize>) -> Self {
        Self { block, elems }
    }

    pub fn full(block: BlockId, dim: usize) -> Self {
        Self { block, elems: (0..dim).collect() }
    }
}

/// Scope entries in ascending block order. The scoped sub-vector passed to a
/// function is the concatenation of the selected elements in this order.
pub type Scope = Vec<ScopeEntry>;

#[derive(Debug, Clone)]
pub struct ObjectiveTerm {
    pub id: String,
    pub scope: Scope,
    pub function: Function,
}

impl ObjectiveTerm {
    pub fn new(id: impl Into<String>, scope: Scope, function: Function) -> Self {
        Self { id: id.into(), scope, function }
    }

    /// True for single-block terms (a local objective f_i); multi-block terms
    /// are pieces of the coupling objective f_0.
    pub fn is_local(&self) -> bool {
        self.scope.len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    Equality,
    /// `psi(x) <= 0`, handled internally by slack elimination.
    Inequality,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub scope: Scope,
    pub function: Function,
}

impl Constraint {
    pub fn equality(id: impl Into<String>, scope: Scope, function: Function) -> Self {
        Self { id: id.into(), kind: ConstraintKind::Equality, scope, function }
    }

    pub fn inequality(id: impl Into<String>, scope: Scope, function: Function) -> Self {
        Self { id: id.into(), kind: ConstraintKind::Inequality, scope, function }
    }
}

/// Where one slot of a scoped sub-vector comes from when a block evaluates a
/// shared function: its own variables or the coupling vector `w_{-i}`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Slot {
    Own(usize),
    Coupled(usize),
}

/// Precomputed input map for evaluating one function from block `i`'s view.
#[derive(Debug, Clone)]
pub(crate) struct Binding {
    /// Index into `terms` or `constraints`.
    pub target: usize,
    pub slots: Vec<Slot>,
    /// (position in the scoped sub-vector, element of x_i) pairs, for
    /// scattering partial gradients back onto the block.
    pub own: Vec<(usize, usize)>,
}

/// A constrained problem decomposed into `n` subproblems, with all coupling
/// metadata derived and validated.
#[derive(Debug, Clone)]
pub struct DecomposedProblem {
    blocks: Vec<VariableBlock>,
    terms: Vec<ObjectiveTerm>,
    constraints: Vec<Constraint>,

    offsets: Vec<usize>,
    total_dim: usize,
    /// Per block (0-based): 1-based ids of coupled blocks.
    coupling_map: Vec<BTreeSet<BlockId>>,
    /// Per block: indices of constraints whose scope contains the block.
    constraint_assignment: Vec<Vec<usize>>,
    /// Per block: indices of terms whose scope contains the block.
    term_assignment: Vec<Vec<usize>>,
    /// Per block: canonical (block id, element) order of the coupling
    /// sub-vector x_{-i} (ascending block id, then element index).
    coupling_layout: Vec<Vec<(BlockId, usize)>>,
    /// Same entries as `coupling_layout`, as indices into the flat snapshot.
    coupling_flat: Vec<Vec<usize>>,
    term_bindings: Vec<Vec<Binding>>,
    constraint_bindings: Vec<Vec<Binding>>,
    /// Per term/constraint: flat snapshot index of every scoped element.
    term_flat: Vec<Vec<usize>>,
    constraint_flat: Vec<Vec<usize>>,
    max_scope_dim: usize,
}

/// Builds and validates a [`DecomposedProblem`].
pub fn build_problem(
    blocks: Vec<VariableBlock>,
    terms: Vec<ObjectiveTerm>,
    constraints: Vec<Constraint>,
) -> Result<DecomposedProblem, ModelError> {
    DecomposedProblem::build(blocks, terms, constraints)
}

impl DecomposedProblem {
    pub fn build(
        mut blocks: Vec<VariableBlock>,
        terms: Vec<ObjectiveTerm>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        blocks.sort_by_key(|b| b.id);
        let n = blocks.len();
        for (i, b) in blocks.iter().enumerate() {
            if b.id == i {
                return Err(ModelError::DuplicateBlockId(b.id));
            }
            if b.id != i + 1 {
                return Err(ModelError::NonContiguousBlockIds(i + 1));
            }
            if b.dim == 0 {
                return Err(ModelError::BadBlock { block: b.id, detail: "dim must be positive".into() });
            }
            if b.lower.len() != b.dim || b.upper.len() != b.dim || b.labels.len() != b.dim {
                return Err(ModelError::BadBlock {
                    block: b.id,
                    detail: "lower/upper/labels length must equal dim".into(),
                });
            }
            for j in 0..b.dim {
                if !(b.lower[j] <= b.upper[j]) {
                    return Err(ModelError::BadBounds(b.id, j));
                }
            }
        }

        let mut offsets = Vec::with_capacity(n);
        let mut total_dim = 0;
        for b in &blocks {
            offsets.push(total_dim);
            total_dim += b.dim;
        }

        let check_scope = |owner: &str, scope: &Scope, function: &Function| -> Result<usize, ModelError> {
            if scope.is_empty() {
                return Err(ModelError::EmptyScope { owner: owner.to_string() });
            }
            let mut dim = 0;
            let mut prev_block = 0;
            for entry in scope {
                if entry.block == 0 || entry.block > n {
                    return Err(ModelError::DanglingBlockRef { owner: owner.to_string(), block: entry.block });
                }
                if entry.block <= prev_block {
                    return Err(ModelError::BadScope {
                        owner: owner.to_string(),
                        detail: "blocks must be strictly ascending".into(),
                    });
                }
                prev_block = entry.block;
                if entry.elems.is_empty() {
                    return Err(ModelError::EmptyScope { owner: owner.to_string() });
                }
                let bdim = blocks[entry.block - 1].dim;
                let mut prev = None;
                for &e in &entry.elems {
                    if e >= bdim {
                        return Err(ModelError::BadScope {
                            owner: owner.to_string(),
                            detail: format!("element {e} out of range for block {}", entry.block),
                        });
                    }
                    if prev.is_some_and(|p| e <= p) {
                        return Err(ModelError::BadScope {
                            owner: owner.to_string(),
                            detail: "elements must be strictly ascending".into(),
                        });
                    }
                    prev = Some(e);
                }
                dim += entry.elems.len();
            }
            if let Some(m) = function.max_atom_index() {
                if m >= dim {
                    return Err(ModelError::BadScope {
                        owner: owner.to_string(),
                        detail: format!("atom index {m} outside scoped sub-vector of length {dim}"),
                    });
                }
            }
            Ok(dim)
        };

        let mut max_scope_dim = 0;
        for t in &terms {
            max_scope_dim = max_scope_dim.max(check_scope(&format!("term {}", t.id), &t.scope, &t.function)?);
        }
        for c in &constraints {
            max_scope_dim =
                max_scope_dim.max(check_scope(&format!("constraint {}", c.id), &c.scope, &c.function)?);
        }

        let mut coupling_map: Vec<BTreeSet<BlockId>> = vec![BTreeSet::new(); n];
        let mut term_assignment: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut constraint_assignment: Vec<Vec<usize>> = vec![Vec::new(); n];
        let couple = |map: &mut Vec<BTreeSet<BlockId>>, scope: &Scope| {
            for a in scope {
                for b in scope {
                    if a.block != b.block {
                        map[a.block - 1].insert(b.block);
                    }
                }
            }
        };
        for (ti, t) in terms.iter().enumerate() {
            for entry in &t.scope {
                term_assignment[entry.block - 1].push(ti);
            }
            couple(&mut coupling_map, &t.scope);
        }
        for (ci, c) in constraints.iter().enumerate() {
            for entry in &c.scope {
                constraint_assignment[entry.block - 1].push(ci);
            }
            couple(&mut coupling_map, &c.scope);
        }

        // Canonical coupling layout: every foreign element read by a term or
        // constraint shared with the block, ascending (block, element).
        let mut coupling_layout: Vec<Vec<(BlockId, usize)>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut set: BTreeSet<(BlockId, usize)> = BTreeSet::new();
            let mut visit = |scope: &Scope| {
                for entry in scope {
                    if entry.block != i + 1 {
                        for &e in &entry.elems {
                            set.insert((entry.block, e));
                        }
                    }
                }
            };
            for &ti in &term_assignment[i] {
                visit(&terms[ti].scope);
            }
            for &ci in &constraint_assignment[i] {
                visit(&constraints[ci].scope);
            }
            coupling_layout.push(set.into_iter().collect());
        }
        let coupling_flat: Vec<Vec<usize>> = coupling_layout
            .iter()
            .map(|layout| layout.iter().map(|&(b, e)| offsets[b - 1] + e).collect())
            .collect();

        let bind = |i: usize, scope: &Scope| -> Binding {
            let layout = &coupling_layout[i];
            let mut slots = Vec::new();
            let mut own = Vec::new();
            for entry in scope {
                for &e in &entry.elems {
                    if entry.block == i + 1 {
                        own.push((slots.len(), e));
                        slots.push(Slot::Own(e));
                    } else {
                        let pos = layout.binary_search(&(entry.block, e)).expect("layout covers scope");
                        slots.push(Slot::Coupled(pos));
                    }
                }
            }
            Binding { target: 0, slots, own }
        };

        let mut term_bindings: Vec<Vec<Binding>> = vec![Vec::new(); n];
        let mut constraint_bindings: Vec<Vec<Binding>> = vec![Vec::new(); n];
        for i in 0..n {
            for &ti in &term_assignment[i] {
                let mut b = bind(i, &terms[ti].scope);
                b.target = ti;
                term_bindings[i].push(b);
            }
            for &ci in &constraint_assignment[i] {
                let mut b = bind(i, &constraints[ci].scope);
                b.target = ci;
                constraint_bindings[i].push(b);
            }
        }

        let flatten = |scope: &Scope| -> Vec<usize> {
            scope
                .iter()
                .flat_map(|entry| entry.elems.iter().map(|&e| offsets[entry.block - 1] + e))
                .collect()
        };
        let term_flat = terms.iter().map(|t| flatten(&t.scope)).collect();
        let constraint_flat = constraints.iter().map(|c| flatten(&c.scope)).collect();

        Ok(Self {
            blocks,
            terms,
            constraints,
            offsets,
            total_dim,
            coupling_map,
            constraint_assignment,
            term_assignment,
            coupling_layout,
            coupling_flat,
            term_bindings,
            constraint_bindings,
            term_flat,
            constraint_flat,
            max_scope_dim,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn terms(&self) -> &[ObjectiveTerm] {
        &self.terms
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn block(&self, id: BlockId) -> Result<&VariableBlock, ModelError> {
        self.check_block(id)?;
        Ok(&self.blocks[id - 1])
    }

    /// Range of a block's elements within a flat snapshot vector.
    pub fn block_range(&self, id: BlockId) -> Result<std::ops::Range<usize>, ModelError> {
        self.check_block(id)?;
        let start = self.offsets[id - 1];
        Ok(start..start + self.blocks[id - 1].dim)
    }

    /// The coupling set R_i (1-based ids of blocks coupled to `id`).
    pub fn coupled_blocks(&self, id: BlockId) -> Result<&BTreeSet<BlockId>, ModelError> {
        self.check_block(id)?;
        Ok(&self.coupling_map[id - 1])
    }

    /// Indices of the constraints assigned to block `id` (phi_i).
    pub fn constraints_of_block(&self, id: BlockId) -> Result<&[usize], ModelError> {
        self.check_block(id)?;
        Ok(&self.constraint_assignment[id - 1])
    }

    /// Indices of the objective terms that read block `id`.
    pub fn terms_of_block(&self, id: BlockId) -> Result<&[usize], ModelError> {
        self.check_block(id)?;
        Ok(&self.term_assignment[id - 1])
    }

    /// Canonical (block, element) order of the coupling sub-vector x_{-i}.
    pub fn coupling_elements(&self, id: BlockId) -> Result<&[(BlockId, usize)], ModelError> {
        self.check_block(id)?;
        Ok(&self.coupling_layout[id - 1])
    }

    /// Gathers x_{-i} from a flat snapshot in the canonical order.
    pub fn coupling_variables(&self, id: BlockId, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_block(id)?;
        if x.len() != self.total_dim {
            return Err(ModelError::DimensionMismatch { expected: self.total_dim, got: x.len() });
        }
        Ok(self.coupling_flat[id - 1].iter().map(|&j| x[j]).collect())
    }

    /// As `coupling_variables`, writing into a reusable buffer.
    pub fn gather_coupling(&self, id: BlockId, x: &[f64], out: &mut Vec<f64>) -> Result<(), ModelError> {
        self.check_block(id)?;
        if x.len() != self.total_dim {
            return Err(ModelError::DimensionMismatch { expected: self.total_dim, got: x.len() });
        }
        out.clear();
        out.extend(self.coupling_flat[id - 1].iter().map(|&j| x[j]));
        Ok(())
    }

    /// Clamps a flat snapshot into the blockwise boxes.
    pub fn project_into_boxes(&self, x: &mut [f64]) {
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            for j in 0..b.dim {
                x[off + j] = x[off + j].clamp(b.lower[j], b.upper[j]);
            }
        }
    }

    /// Collapses all blocks into a single block, preserving element order and
    /// every term and constraint. Evaluations on the merged problem are
    /// arithmetically identical to the original.
    pub fn merge_to_single_block(&self) -> DecomposedProblem {
        if self.num_blocks() == 1 {
            return self.clone();
        }
        let mut lower = Vec::with_capacity(self.total_dim);
        let mut upper = Vec::with_capacity(self.total_dim);
        let mut labels = Vec::with_capacity(self.total_dim);
        for b in &self.blocks {
            lower.extend_from_slice(&b.lower);
            upper.extend_from_slice(&b.upper);
            labels.extend(b.labels.iter().cloned());
        }
        let block = VariableBlock::new(1, self.total_dim)
            .with_bounds(lower, upper)
            .with_labels(labels);
        let remap = |flat: &[usize]| -> Scope { vec![ScopeEntry::new(1, flat.to_vec())] };
        let terms = self
            .terms
            .iter()
            .zip(&self.term_flat)
            .map(|(t, flat)| ObjectiveTerm::new(t.id.clone(), remap(flat), t.function.clone()))
            .collect();
        let constraints = self
            .constraints
            .iter()
            .zip(&self.constraint_flat)
            .map(|(c, flat)| Constraint { id: c.id.clone(), kind: c.kind, scope: remap(flat), function: c.function.clone() })
            .collect();
        DecomposedProblem::build(vec![block], terms, constraints)
            .expect("merged problem is structurally valid")
    }

    pub(crate) fn term_bindings(&self, block_index: usize) -> &[Binding] {
        &self.term_bindings[block_index]
    }

    pub(crate) fn constraint_bindings(&self, block_index: usize) -> &[Binding] {
        &self.constraint_bindings[block_index]
    }

    pub(crate) fn term_flat_slots(&self, term: usize) -> &[usize] {
        &self.term_flat[term]
    }

    pub(crate) fn constraint_flat_slots(&self, constraint: usize) -> &[usize] {
        &self.constraint_flat[constraint]
    }

    pub(crate) fn coupling_len(&self, block_index: usize) -> usize {
        self.coupling_layout[block_index].len()
    }

    pub(crate) fn max_scope_dim(&self) -> usize {
        self.max_scope_dim
    }

    fn check_block(&self, id: BlockId) -> Result<(), ModelError> {
        if id == 0 || id > self.blocks.len() {
            return Err(ModelError::UnknownBlock(id));
        }
        Ok(())
    }
}

/// Closed-form joint minimization of the slack in an inequality constraint.
///
/// For `psi(x) <= 0` the constraint enters the augmented Lagrangian as
/// `phi = psi + s` with `s = e^2 >= 0` minimizing
/// `mu*(psi+s) + rho^2*(psi+s)^2`. Returns `(s*, phi)` where
/// `s* = max(0, -(psi + mu/(2 rho^2)))` and `phi = psi + s*`.
pub fn optimal_slack(psi: f64, mu: f64, rho: f64) -> Result<(f64, f64), ModelError> {
    if !(rho > 0.0) {
        return Err(ModelError::NonpositivePenalty(rho));
    }
    let threshold = -mu / (2.0 * rho * rho);
    if psi >= threshold {
        Ok((0.0, psi))
    } else {
        Ok((threshold - psi, threshold))
    }
}
