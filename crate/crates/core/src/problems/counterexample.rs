//! The classic three-block problem on which the direct multi-block ADMM
//! extension fails to converge: `min 0` subject to
//! `A1 x1 + A2 x2 + A3 x3 = 0` with scalar blocks. The matrix is
//! nonsingular, so the origin is the only feasible point and any convergent
//! run must land there.

use crate::model::{Constraint, DecomposedProblem, Function, ScopeEntry, VariableBlock};

/// Columns A1, A2, A3 as a row-major 3x3 matrix.
pub const COUNTEREXAMPLE_MATRIX: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 1.0, 2.0], [1.0, 2.0, 2.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleInstance {
    pub matrix: [[f64; 3]; 3],
}

impl Default for CounterexampleInstance {
    fn default() -> Self {
        Self { matrix: COUNTEREXAMPLE_MATRIX }
    }
}

impl CounterexampleInstance {
    /// Three unbounded scalar blocks, zero objective, one equality per row.
    /// Every constraint scopes all three blocks, so each block is coupled to
    /// both others.
    pub fn problem(&self) -> DecomposedProblem {
        let blocks = (1..=3)
            .map(|id| VariableBlock::new(id, 1).with_labels(vec![format!("x{id}")]))
            .collect();
        let scope = || {
            vec![
                ScopeEntry::new(1, vec![0]),
                ScopeEntry::new(2, vec![0]),
                ScopeEntry::new(3, vec![0]),
            ]
        };
        let constraints = (0..3)
            .map(|r| Constraint::equality(format!("row{}", r + 1), scope(), Function::linear(&self.matrix[r], 0.0)))
            .collect();
        DecomposedProblem::build(blocks, vec![], constraints).expect("counterexample is well-formed")
    }
}

pub fn admm_counterexample() -> DecomposedProblem {
    CounterexampleInstance::default().problem()
}
