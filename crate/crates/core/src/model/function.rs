//! Objective-term and constraint functions over scoped sub-vectors.
//!
//! Generator-produced problems use structured expressions ([`ExprFunction`])
//! so they can be serialized and inspected (the analytic block solver needs
//! linear coefficients). Arbitrary callbacks are supported through
//! [`SmoothFn`] for problems built in code.

use std::sync::Arc;

/// A differentiable scalar function of a scoped sub-vector `z`.
pub trait SmoothFn: Send + Sync {
    fn eval(&self, z: &[f64]) -> f64;
    /// Writes the full gradient into `out` (same length as `z`).
    fn grad(&self, z: &[f64], out: &mut [f64]);
}

/// One additive piece of a structured expression. Indices refer to positions
/// in the scoped sub-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Atom {
    /// `coef * z[idx]`
    Linear { idx: usize, coef: f64 },
    /// `coef * z[a] * z[b]` (with `a == b` this is a quadratic term)
    Bilinear { a: usize, b: usize, coef: f64 },
    /// `coef * exp(z[idx])`
    Exp { idx: usize, coef: f64 },
}

impl Atom {
    pub(crate) fn max_index(&self) -> usize {
        match *self {
            Atom::Linear { idx, .. } | Atom::Exp { idx, .. } => idx,
            Atom::Bilinear { a, b, .. } => a.max(b),
        }
    }
}

/// A sum of atoms plus a constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExprFunction {
    pub atoms: Vec<Atom>,
    pub constant: f64,
}

impl ExprFunction {
    pub fn new(atoms: Vec<Atom>, constant: f64) -> Self {
        Self { atoms, constant }
    }

    /// Dense linear coefficients over a scoped sub-vector of length `dim`,
    /// or `None` if any atom is nonlinear.
    pub fn as_linear(&self, dim: usize) -> Option<(Vec<f64>, f64)> {
        let mut coeffs = vec![0.0; dim];
        for atom in &self.atoms {
            match *atom {
                Atom::Linear { idx, coef } => coeffs[idx] += coef,
                _ => return None,
            }
        }
        Some((coeffs, self.constant))
    }
}

impl SmoothFn for ExprFunction {
    fn eval(&self, z: &[f64]) -> f64 {
        let mut acc = self.constant;
        for atom in &self.atoms {
            acc += match *atom {
                Atom::Linear { idx, coef } => coef * z[idx],
                Atom::Bilinear { a, b, coef } => coef * z[a] * z[b],
                Atom::Exp { idx, coef } => coef * z[idx].exp(),
            };
        }
        acc
    }

    fn grad(&self, z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for atom in &self.atoms {
            match *atom {
                Atom::Linear { idx, coef } => out[idx] += coef,
                Atom::Bilinear { a, b, coef } => {
                    out[a] += coef * z[b];
                    out[b] += coef * z[a];
                }
                Atom::Exp { idx, coef } => out[idx] += coef * z[idx].exp(),
            }
        }
    }
}

struct ClosureFn<E, G> {
    eval: E,
    grad: G,
}

impl<E, G> SmoothFn for ClosureFn<E, G>
where
    E: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, z: &[f64]) -> f64 {
        (self.eval)(z)
    }
    fn grad(&self, z: &[f64], out: &mut [f64]) {
        (self.grad)(z, out)
    }
}

/// The function attached to an objective term or constraint.
#[derive(Clone)]
pub enum Function {
    Expr(ExprFunction),
    Custom(Arc<dyn SmoothFn>),
}

impl Function {
    pub fn expr(atoms: Vec<Atom>, constant: f64) -> Self {
        Function::Expr(ExprFunction::new(atoms, constant))
    }

    /// `coeffs . z + constant`; zero coefficients are kept so the structure
    /// round-trips through the file format unchanged.
    pub fn linear(coeffs: &[f64], constant: f64) -> Self {
        let atoms = coeffs
            .iter()
            .enumerate()
            .map(|(idx, &coef)| Atom::Linear { idx, coef })
            .collect();
        Function::Expr(ExprFunction::new(atoms, constant))
    }

    pub fn custom<E, G>(eval: E, grad: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Function::Custom(Arc::new(ClosureFn { eval, grad }))
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Function::Expr(e) => e.eval(z),
            Function::Custom(f) => f.eval(z),
        }
    }

    pub fn grad_into(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Function::Expr(e) => e.grad(z, out),
            Function::Custom(f) => {
                out.fill(0.0);
                f.grad(z, out);
            }
        }
    }

    pub fn as_expr(&self) -> Option<&ExprFunction> {
        match self {
            Function::Expr(e) => Some(e),
            Function::Custom(_) => None,
        }
    }

    pub(crate) fn max_atom_index(&self) -> Option<usize> {
        match self {
            Function::Expr(e) => e.atoms.iter().map(Atom::max_index).max(),
            Function::Custom(_) => None,
        }
    }
}

impl std::fmt::Debug for Function {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Function::Expr(e) => f.debug_tuple("Expr").field(e).finish(),
            Function::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_eval_and_grad() {
        // 2*z0 + z0*z1 + 3*exp(z2) - 1
        let f = ExprFunction::new(
            vec![
                Atom::Linear { idx: 0, coef: 2.0 },
                Atom::Bilinear { a: 0, b: 1, coef: 1.0 },
                Atom::Exp { idx: 2, coef: 3.0 },
            ],
            -1.0,
        );
        let z = [1.0, 2.0, 0.0];
        assert_eq!(f.eval(&z), 2.0 + 2.0 + 3.0 - 1.0);
        let mut g = [0.0; 3];
        f.grad(&z, &mut g);
        assert_eq!(g, [4.0, 1.0, 3.0]);
    }

    #[test]
    fn quadratic_atom_gradient_doubles() {
        let f = ExprFunction::new(vec![Atom::Bilinear { a: 0, b: 0, coef: 1.0 }], 0.0);
        let mut g = [0.0];
        f.grad(&[3.0], &mut g);
        assert_eq!(g[0], 6.0);
    }

    #[test]
    fn as_linear_rejects_nonlinear() {
        let f = ExprFunction::new(vec![Atom::Bilinear { a: 0, b: 1, coef: 1.0 }], 0.0);
        assert!(f.as_linear(2).is_none());
        let g = ExprFunction::new(vec![Atom::Linear { idx: 1, coef: 4.0 }], 2.0);
        assert_eq!(g.as_linear(3), Some((vec![0.0, 4.0, 0.0], 2.0)));
    }
}
