//! The four-block worked example used throughout the docs and tests:
//!
//! ```text
//! min  5 v1 + 2 v2 + v3 + 3 v4 + v5 v7 + v6 v8
//! s.t. v1 + v5 v6 - 7 = 0
//!      v2 + v5 + v7 - 10 = 0
//!      v5 v6 + exp(v7) - 12 = 0
//!      1 <= v_i <= 7
//! ```
//!
//! with blocks x1 = (v1, v5), x2 = (v2, v7), x3 = (v3, v6), x4 = (v4, v8).
//! The bilinear terms and the exponential make it nonconvex; it exercises
//! the model mechanics, not global optimality.

use crate::model::{Atom, Constraint, DecomposedProblem, Function, ObjectiveTerm, ScopeEntry, VariableBlock};

pub fn toy_example() -> DecomposedProblem {
    let labels = [["v1", "v5"], ["v2", "v7"], ["v3", "v6"], ["v4", "v8"]];
    let blocks = (1..=4)
        .map(|id| {
            VariableBlock::new(id, 2)
                .with_box(1.0, 7.0)
                .with_labels(labels[id - 1].iter().map(|s| s.to_string()).collect())
        })
        .collect();

    let local_coef = [5.0, 2.0, 1.0, 3.0];
    let mut terms: Vec<ObjectiveTerm> = (1..=4)
        .map(|id| {
            ObjectiveTerm::new(
                format!("f{id}"),
                vec![ScopeEntry::new(id, vec![0])],
                Function::linear(&[local_coef[id - 1]], 0.0),
            )
        })
        .collect();
    // coupling objective f0 = v5 v7 + v6 v8
    terms.push(ObjectiveTerm::new(
        "v5v7",
        vec![ScopeEntry::new(1, vec![1]), ScopeEntry::new(2, vec![1])],
        Function::expr(vec![Atom::Bilinear { a: 0, b: 1, coef: 1.0 }], 0.0),
    ));
    terms.push(ObjectiveTerm::new(
        "v6v8",
        vec![ScopeEntry::new(3, vec![1]), ScopeEntry::new(4, vec![1])],
        Function::expr(vec![Atom::Bilinear { a: 0, b: 1, coef: 1.0 }], 0.0),
    ));

    let constraints = vec![
        // v1 + v5 v6 - 7 = 0, scoped sub-vector (v1, v5, v6)
        Constraint::equality(
            "c1",
            vec![ScopeEntry::new(1, vec![0, 1]), ScopeEntry::new(3, vec![1])],
            Function::expr(
                vec![Atom::Linear { idx: 0, coef: 1.0 }, Atom::Bilinear { a: 1, b: 2, coef: 1.0 }],
                -7.0,
            ),
        ),
        // v2 + v5 + v7 - 10 = 0, scoped sub-vector (v5, v2, v7)
        Constraint::equality(
            "c2",
            vec![ScopeEntry::new(1, vec![1]), ScopeEntry::new(2, vec![0, 1])],
            Function::linear(&[1.0, 1.0, 1.0], -10.0),
        ),
        // v5 v6 + exp(v7) - 12 = 0, scoped sub-vector (v5, v7, v6)
        Constraint::equality(
            "c3",
            vec![ScopeEntry::new(1, vec![1]), ScopeEntry::new(2, vec![1]), ScopeEntry::new(3, vec![1])],
            Function::expr(
                vec![Atom::Bilinear { a: 0, b: 2, coef: 1.0 }, Atom::Exp { idx: 1, coef: 1.0 }],
                -12.0,
            ),
        ),
    ];

    DecomposedProblem::build(blocks, terms, constraints).expect("toy example is well-formed")
}
