//! Spectral normalization by power iteration.
//!
//! For a weight `W` of shape `[rows, cols]` the state `u` lives in
//! `R^rows`. One iteration is `v ← Wᵀu/‖Wᵀu‖, u ← Wv/‖Wv‖`, and the
//! estimate of the top singular value is `σ̂ = ‖Wᵀu‖ = uᵀWv`.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Smallest σ̂ used as a divisor.
pub const SIGMA_FLOOR: f64 = 1e-12;

const UNIT_TOLERANCE: f64 = 1e-6;

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Wᵀu` for row-major `w` of shape `[rows, cols]`.
fn wt_times(w: &[f64], rows: usize, cols: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (r, &ur) in u.iter().enumerate().take(rows) {
        for (o, &wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += wv * ur;
        }
    }
    out
}

/// `Wv`.
fn w_times(w: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
    w.chunks(cols)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn check_state(weight: &Tensor, u: &[f64]) -> Result<(usize, usize)> {
    let (rows, cols) = weight.dims2()?;
    if u.len() != rows {
        return Err(Error::contract(format!(
            "spectral state of length {} for a {rows}x{cols} weight",
            u.len()
        )));
    }
    let n = norm(u);
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::contract(format!("spectral state has norm {n}, expected 1")));
    }
    Ok((rows, cols))
}

/// Runs `n_iters` power iterations and returns the updated `u`.
///
/// If `W` annihilates the current direction (e.g. a zero matrix) the state
/// is left unchanged so it stays unit-norm.
pub fn power_iteration(weight: &Tensor, u: &[f64], n_iters: usize) -> Result<Vec<f64>> {
    let (rows, cols) = check_state(weight, u)?;
    let w = weight.data();
    let mut u = u.to_vec();
    for _ in 0..n_iters {
        let mut v = wt_times(w, rows, cols, &u);
        let nv = norm(&v);
        if nv < SIGMA_FLOOR {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let mut next = w_times(w, cols, &v);
        let nu = norm(&next);
        if nu < SIGMA_FLOOR {
            break;
        }
        next.iter_mut().for_each(|x| *x /= nu);
        u = next;
    }
    Ok(u)
}

/// `(σ̂, v)` with `σ̂ = ‖Wᵀu‖` and `v = Wᵀu/σ̂` (zero when σ̂ underflows).
pub fn sigma_estimate(weight: &Tensor, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (rows, cols) = check_state(weight, u)?;
    let mut v = wt_times(weight.data(), rows, cols, u);
    let sigma = norm(&v);
    if sigma < SIGMA_FLOOR {
        return Ok((sigma, vec![0.0; cols]));
    }
    v.iter_mut().for_each(|x| *x /= sigma);
    Ok((sigma, v))
}

/// Result of [`spectral_normalize`].
#[derive(Debug, Clone)]
pub struct SpectralNormalized {
    pub weight: Tensor,
    pub u: Vec<f64>,
    /// The estimate actually divided by (already floored).
    pub sigma: f64,
}

/// Returns `W / σ̂` after `n_power_iters` iterations, with σ̂ floored at
/// [`SIGMA_FLOOR`].
pub fn spectral_normalize(weight: &Tensor, u: &[f64], n_power_iters: usize) -> Result<SpectralNormalized> {
    if n_power_iters == 0 {
        return Err(Error::contract(
            "spectral normalization needs at least one power iteration",
        ));
    }
    let u = power_iteration(weight, u, n_power_iters)?;
    let (sigma, _) = sigma_estimate(weight, &u)?;
    let sigma = sigma.max(SIGMA_FLOOR);
    Ok(SpectralNormalized {
        weight: weight.map(|x| x / sigma),
        u,
        sigma,
    })
}
