//! The non-parametric minimizer of the per-sample generator objective
//! `f(x) = ½‖x − a‖² − (λ/2)·D̃(x)` with anchor `a = Ḡ(z)`.
//!
//! Stationarity gives `x* = a + (λ/2)∇D̃(x*)`; replacing `x*` by `a` on the
//! right is one Langevin step from the anchor and is off by `O(λ²)`.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::{DiscriminatorModel, ShadowGenerator};

/// Largest step size for which the one-step formula is checked.
pub const MAX_LAMBDA: f64 = 0.1;

/// A scalar field with an input gradient.
pub trait InputGradient {
    fn input_dim(&self) -> usize;
    /// `(D̃(x), ∇x D̃(x))`.
    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl InputGradient for DiscriminatorModel {
    fn input_dim(&self) -> usize {
        DiscriminatorModel::input_dim(self)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.logit_input_grad(x)
    }
}

/// `D̃(x) = w·x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub w: Vec<f64>,
    pub c: f64,
}

impl InputGradient for LinearField {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.w.len() {
            return Err(Error::contract("input width differs from the field's"));
        }
        let v = self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.c;
        Ok((v, self.w.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcOptions {
    /// Gradient-descent step on `f`; 1 turns descent into the fixed-point
    /// map `x ← a + (λ/2)∇D̃(x)`.
    pub step: f64,
    /// Stop when `‖∇f(x)‖ < tol`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            step: 1.0,
            tol: 1e-12,
            max_iters: 100_000,
        }
    }
}

/// Result for one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcPoint {
    pub x_star: Vec<f64>,
    pub iterations: usize,
    /// `‖x* − (a + (λ/2)∇D̃(x*))‖`.
    pub residual: f64,
    /// `‖x* − (a + (λ/2)∇D̃(a))‖`.
    pub one_step_error: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn langevin_step<F: InputGradient + ?Sized>(field: &F, anchor: &[f64], at: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (_, g) = field.value_and_grad(at)?;
    Ok(anchor.iter().zip(&g).map(|(a, g)| a + 0.5 * lambda * g).collect())
}

/// Minimizes `f` by gradient descent from `x = a`.
pub fn minimize_mcmc_objective<F: InputGradient + ?Sized>(
    field: &F,
    anchor: &[f64],
    lambda: f64,
    opts: McmcOptions,
) -> Result<McmcPoint> {
    if anchor.len() != field.input_dim() {
        return Err(Error::contract("anchor width differs from the field's input width"));
    }
    if !(0.0..=MAX_LAMBDA).contains(&lambda) {
        return Err(Error::contract(format!("lambda {lambda} outside [0, {MAX_LAMBDA}]")));
    }
    if !(opts.step > 0.0) {
        return Err(Error::contract("descent step must be positive"));
    }
    let mut x = anchor.to_vec();
    for it in 0..=opts.max_iters {
        let (_, g) = field.value_and_grad(&x)?;
        // ∇f(x) = (x − a) − (λ/2)∇D̃(x)
        let grad: Vec<f64> = x
            .iter()
            .zip(anchor)
            .zip(&g)
            .map(|((x, a), g)| x - a - 0.5 * lambda * g)
            .collect();
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("MCMC objective gradient".into()));
        }
        if gnorm < opts.tol {
            let target = langevin_step(field, anchor, &x, lambda)?;
            let one_step = langevin_step(field, anchor, anchor, lambda)?;
            return Ok(McmcPoint {
                residual: dist(&x, &target),
                one_step_error: dist(&x, &one_step),
                x_star: x,
                iterations: it,
            });
        }
        x.iter_mut().zip(&grad).for_each(|(x, g)| *x -= opts.step * g);
    }
    Err(Error::Convergence(format!(
        "MCMC objective not minimized within {} iterations",
        opts.max_iters
    )))
}

/// Runs [`minimize_mcmc_objective`] at every anchor `Ḡ(z)` of the batch.
pub fn mcmc_fixed_point_check(
    d: &DiscriminatorModel,
    shadow: &ShadowGenerator,
    z: &Tensor,
    lambda: f64,
) -> Result<Vec<McmcPoint>> {
    let anchors = shadow.model().generate(z)?;
    anchors
        .rows()
        .map(|a| minimize_mcmc_objective(d, a, lambda, McmcOptions::default()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_has_closed_form() {
        let f = LinearField {
            w: vec![3.0, -4.0],
            c: 1.0,
        };
        let a = [0.5, 2.0];
        let p = minimize_mcmc_objective(&f, &a, 0.1, McmcOptions::default()).unwrap();
        assert_eq!(p.x_star, vec![0.5 + 0.05 * 3.0, 2.0 - 0.05 * 4.0]);
        assert_eq!(p.residual, 0.0);
        assert_eq!(p.one_step_error, 0.0);
    }

    #[test]
    fn zero_lambda_returns_anchor() {
        let f = LinearField {
            w: vec![1.0, 1.0, 1.0],
            c: 0.0,
        };
        let a = [1.0, -2.0, 3.0];
        let p = minimize_mcmc_objective(&f, &a, 0.0, McmcOptions::default()).unwrap();
        assert_eq!(p.x_star, a.to_vec());
        assert_eq!(p.iterations, 0);
    }

    #[test]
    fn small_step_descent_also_converges() {
        let f = LinearField { w: vec![2.0], c: 0.0 };
        let opts = McmcOptions {
            step: 0.5,
            ..McmcOptions::default()
        };
        let p = minimize_mcmc_objective(&f, &[1.0], 0.1, opts).unwrap();
        assert!((p.x_star[0] - 1.1).abs() < 1e-11);
        assert!(p.residual < 1e-11);
    }

    #[test]
    fn rejects_large_lambda_and_exhausted_budget() {
        let f = LinearField { w: vec![1.0], c: 0.0 };
        assert!(minimize_mcmc_objective(&f, &[0.0], 0.2, McmcOptions::default()).is_err());
        let opts = McmcOptions {
            step: 1e-3,
            tol: 1e-14,
            max_iters: 3,
        };
        assert!(matches!(
            minimize_mcmc_objective(&f, &[0.0], 0.1, opts),
            Err(Error::Convergence(_))
        ));
    }
}
