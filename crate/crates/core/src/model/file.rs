//! JSON problem-definition format.
//!
//! Structured coefficients only: linear, quadratic, and bilinear objective
//! terms, and constraints given as linear coefficients plus an optional
//! constant, bilinear pairs, and named nonlinear builtins (`exp`). Problems
//! built from custom callbacks cannot be serialized.

use serde::{Deserialize, Serialize};

use super::{
    Atom, Constraint, ConstraintKind, DecomposedProblem, ExprFunction, Function, ModelError,
    ObjectiveTerm, ScopeEntry, VariableBlock,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlockDef {
    pub id: usize,
    pub dim: usize,
    /// Omitted means unbounded below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    /// Omitted means unbounded above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScopeEntryDef {
    pub block: usize,
    pub elems: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinearTermDef {
    #[serde(default)]
    pub id: String,
    pub scope: Vec<ScopeEntryDef>,
    /// One coefficient per scoped element.
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadraticTermDef {
    #[serde(default)]
    pub id: String,
    pub scope: Vec<ScopeEntryDef>,
    /// `[a, b, coef]` triples meaning `coef * z[a] * z[b]`.
    pub pairs: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BilinearTermDef {
    #[serde(default)]
    pub id: String,
    pub scope: Vec<ScopeEntryDef>,
    pub pairs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BuiltinDef {
    /// Builtin name; `exp` is the only member of the vocabulary.
    #[serde(rename = "fn")]
    pub name: String,
    pub arg: usize,
    #[serde(default = "one")]
    pub coef: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstraintDef {
    #[serde(default)]
    pub id: String,
    pub kind: ConstraintKind,
    pub scope: Vec<ScopeEntryDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub builtins: Vec<BuiltinDef>,
    #[serde(default)]
    pub constant: f64,
}

/// Serializable problem definition.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct ProblemFile {
    pub blocks: Vec<BlockDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear_terms: Vec<LinearTermDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratic_terms: Vec<QuadraticTermDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bilinear_terms: Vec<BilinearTermDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintDef>,
}

fn scope_from_defs(defs: &[ScopeEntryDef]) -> Vec<ScopeEntry> {
    defs.iter().map(|d| ScopeEntry::new(d.block, d.elems.clone())).collect()
}

fn scope_to_defs(scope: &[ScopeEntry]) -> Vec<ScopeEntryDef> {
    scope.iter().map(|s| ScopeEntryDef { block: s.block, elems: s.elems.clone() }).collect()
}

fn linear_atoms(coeffs: &[f64]) -> Vec<Atom> {
    coeffs.iter().enumerate().map(|(idx, &coef)| Atom::Linear { idx, coef }).collect()
}

impl ProblemFile {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn into_problem(self) -> Result<DecomposedProblem, ModelError> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut vb = VariableBlock::new(b.id, b.dim);
                if let Some(lower) = &b.lower {
                    vb.lower = lower.clone();
                }
                if let Some(upper) = &b.upper {
                    vb.upper = upper.clone();
                }
                if let Some(labels) = &b.labels {
                    vb.labels = labels.clone();
                }
                vb
            })
            .collect();

        let mut terms = Vec::new();
        for t in &self.linear_terms {
            terms.push(ObjectiveTerm::new(
                t.id.clone(),
                scope_from_defs(&t.scope),
                Function::Expr(ExprFunction::new(linear_atoms(&t.coeffs), t.constant)),
            ));
        }
        for t in &self.quadratic_terms {
            let mut atoms: Vec<Atom> =
                t.pairs.iter().map(|&(a, b, coef)| Atom::Bilinear { a, b, coef }).collect();
            if let Some(coeffs) = &t.coeffs {
                atoms.extend(linear_atoms(coeffs));
            }
            terms.push(ObjectiveTerm::new(
                t.id.clone(),
                scope_from_defs(&t.scope),
                Function::Expr(ExprFunction::new(atoms, t.constant)),
            ));
        }
        for t in &self.bilinear_terms {
            let atoms = t.pairs.iter().map(|&(a, b, coef)| Atom::Bilinear { a, b, coef }).collect();
            terms.push(ObjectiveTerm::new(
                t.id.clone(),
                scope_from_defs(&t.scope),
                Function::Expr(ExprFunction::new(atoms, 0.0)),
            ));
        }

        let mut constraints = Vec::new();
        for c in &self.constraints {
            let mut atoms = Vec::new();
            if let Some(coeffs) = &c.coeffs {
                atoms.extend(linear_atoms(coeffs));
            }
            atoms.extend(c.pairs.iter().map(|&(a, b, coef)| Atom::Bilinear { a, b, coef }));
            for b in &c.builtins {
                if b.name != "exp" {
                    return Err(ModelError::NotSerializable {
                        owner: format!("constraint {}", c.id),
                        detail: format!("unknown builtin {}", b.name),
                    });
                }
                atoms.push(Atom::Exp { idx: b.arg, coef: b.coef });
            }
            constraints.push(Constraint {
                id: c.id.clone(),
                kind: c.kind,
                scope: scope_from_defs(&c.scope),
                function: Function::Expr(ExprFunction::new(atoms, c.constant)),
            });
        }

        DecomposedProblem::build(blocks, terms, constraints)
    }

    pub fn from_problem(problem: &DecomposedProblem) -> Result<Self, ModelError> {
        let blocks = problem
            .blocks()
            .iter()
            .map(|b| BlockDef {
                id: b.id,
                dim: b.dim,
                lower: if b.lower.iter().all(|v| *v == f64::NEG_INFINITY) { None } else { Some(b.lower.clone()) },
                upper: if b.upper.iter().all(|v| *v == f64::INFINITY) { None } else { Some(b.upper.clone()) },
                labels: Some(b.labels.clone()),
            })
            .collect();

        let mut file = ProblemFile { blocks, ..Default::default() };

        for t in problem.terms() {
            let scope_dim: usize = t.scope.iter().map(|s| s.elems.len()).sum();
            let expr = t.function.as_expr().ok_or_else(|| ModelError::NotSerializable {
                owner: format!("term {}", t.id),
                detail: "custom callback".into(),
            })?;
            let scope = scope_to_defs(&t.scope);
            if let Some((coeffs, constant)) = expr.as_linear(scope_dim) {
                file.linear_terms.push(LinearTermDef { id: t.id.clone(), scope, coeffs, constant });
                continue;
            }
            let mut pairs = Vec::new();
            let mut coeffs = vec![0.0; scope_dim];
            let mut any_linear = false;
            for atom in &expr.atoms {
                match *atom {
                    Atom::Linear { idx, coef } => {
                        coeffs[idx] += coef;
                        any_linear = true;
                    }
                    Atom::Bilinear { a, b, coef } => pairs.push((a, b, coef)),
                    Atom::Exp { .. } => {
                        return Err(ModelError::NotSerializable {
                            owner: format!("term {}", t.id),
                            detail: "exp builtin is only supported in constraints".into(),
                        })
                    }
                }
            }
            if any_linear || expr.constant != 0.0 {
                file.quadratic_terms.push(QuadraticTermDef {
                    id: t.id.clone(),
                    scope,
                    pairs,
                    coeffs: any_linear.then_some(coeffs),
                    constant: expr.constant,
                });
            } else {
                file.bilinear_terms.push(BilinearTermDef { id: t.id.clone(), scope, pairs });
            }
        }

        for c in problem.constraints() {
            let scope_dim: usize = c.scope.iter().map(|s| s.elems.len()).sum();
            let expr = c.function.as_expr().ok_or_else(|| ModelError::NotSerializable {
                owner: format!("constraint {}", c.id),
                detail: "custom callback".into(),
            })?;
            let mut coeffs = vec![0.0; scope_dim];
            let mut any_linear = false;
            let mut pairs = Vec::new();
            let mut builtins = Vec::new();
            for atom in &expr.atoms {
                match *atom {
                    Atom::Linear { idx, coef } => {
                        coeffs[idx] += coef;
                        any_linear = true;
                    }
                    Atom::Bilinear { a, b, coef } => pairs.push((a, b, coef)),
                    Atom::Exp { idx, coef } => {
                        builtins.push(BuiltinDef { name: "exp".into(), arg: idx, coef })
                    }
                }
            }
            file.constraints.push(ConstraintDef {
                id: c.id.clone(),
                kind: c.kind,
                scope: scope_to_defs(&c.scope),
                coeffs: any_linear.then_some(coeffs),
                pairs,
                builtins,
                constant: expr.constant,
            });
        }

        Ok(file)
    }
}
