use rayon::prelude::*;

use super::{EnergyModel, ExampleSampler};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Default variance floor added under the square root.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Sampled mean gradient and diagonal Fisher Information of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherStats {
    /// `m_i = mean_s ∇θ_i D(x_s)`.
    pub mean_grad: Vec<f64>,
    /// `mean_s (∇θ_i D(x_s) − m_i)²`.
    pub diag_info: Vec<f64>,
    pub n_samples: usize,
    pub epsilon: f64,
    pub model_id: String,
    /// Seed of the estimation sample set, when drawn by
    /// [`fisher_stats_estimate`].
    pub seed: Option<u64>,
}

impl FisherStats {
    pub fn len(&self) -> usize {
        self.mean_grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_grad.is_empty()
    }

    /// Errors unless `model` is the model these statistics came from.
    pub fn check_model<M: EnergyModel + ?Sized>(&self, model: &M) -> Result<()> {
        if model.param_count() != self.len() {
            return Err(Error::contract(format!(
                "statistics have {} coordinates, model has {} parameters",
                self.len(),
                model.param_count()
            )));
        }
        let id = model.model_id();
        if id != self.model_id {
            return Err(Error::contract(format!(
                "statistics belong to model {}, not {id}",
                self.model_id
            )));
        }
        Ok(())
    }
}

/// An example's whitened Fisher Score.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialFisherVector {
    pub values: Vec<f64>,
    pub source_id: String,
    pub model_id: String,
}

fn check_input<M: EnergyModel + ?Sized>(model: &M, x: &Tensor) -> Result<()> {
    let (_, cols) = x.dims2()?;
    if cols != model.input_dim() {
        return Err(Error::contract(format!(
            "examples have {cols} features, model expects {}",
            model.input_dim()
        )));
    }
    Ok(())
}

/// `∇θ D` at every row of `x`, in row order (evaluated in parallel).
pub fn sample_gradients<M: EnergyModel + ?Sized>(model: &M, x: &Tensor) -> Result<Vec<Vec<f64>>> {
    check_input(model, x)?;
    let rows: Vec<&[f64]> = x.rows().collect();
    rows.par_iter().map(|r| model.param_grad(r)).collect()
}

/// The estimation set [`fisher_stats_estimate`] uses for `seed`.
pub fn estimation_samples<S: ExampleSampler + ?Sized>(sampler: &S, n: usize, seed: u64) -> Result<Tensor> {
    sampler.sample_examples(n, &mut SeededRng::from_seed(seed))
}

/// Mean and biased variance of the gradients at the rows of `samples`.
pub fn fisher_stats_from_samples<M: EnergyModel + ?Sized>(
    model: &M,
    samples: &Tensor,
    epsilon: f64,
) -> Result<FisherStats> {
    let (n, _) = samples.dims2()?;
    if n < 2 {
        return Err(Error::contract(format!("need at least 2 samples, got {n}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::contract(format!("epsilon {epsilon} must be finite and >= 0")));
    }
    let grads = sample_gradients(model, samples)?;
    let p = model.param_count();
    let mut mean = vec![0.0; p];
    for g in &grads {
        mean.iter_mut().zip(g).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for g in &grads {
        for ((s, v), m) in var.iter_mut().zip(g).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    if !mean.iter().chain(&var).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Fisher statistics".into()));
    }
    Ok(FisherStats {
        mean_grad: mean,
        diag_info: var,
        n_samples: n,
        epsilon,
        model_id: model.model_id(),
        seed: None,
    })
}

/// Statistics over `n_samples` fresh draws from `sampler`; the same set
/// defines both the mean and the variance.
pub fn fisher_stats_estimate<M: EnergyModel + ?Sized, S: ExampleSampler + ?Sized>(
    model: &M,
    sampler: &S,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<FisherStats> {
    if n_samples < 2 {
        return Err(Error::contract(format!("need at least 2 samples, got {n_samples}")));
    }
    let samples = estimation_samples(sampler, n_samples, seed)?;
    let mut stats = fisher_stats_from_samples(model, &samples, epsilon)?;
    stats.seed = Some(seed);
    Ok(stats)
}

/// `U_x = ∇θ D(x;θ) − m`.
pub fn fisher_score<M: EnergyModel + ?Sized>(model: &M, stats: &FisherStats, x: &[f64]) -> Result<Vec<f64>> {
    stats.check_model(model)?;
    score_unchecked(model, stats, x)
}

fn score_unchecked<M: EnergyModel + ?Sized>(model: &M, stats: &FisherStats, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::contract(format!(
            "example has {} features, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    let g = model.param_grad(x)?;
    Ok(g.iter().zip(&stats.mean_grad).map(|(g, m)| g - m).collect())
}

/// `V_i = U_i / √(diag_i + ε)`; a zero denominator (only possible with
/// `ε = 0`) maps the coordinate to 0.
pub fn afv_normalize(u: &[f64], stats: &FisherStats) -> Result<Vec<f64>> {
    if u.len() != stats.len() {
        return Err(Error::contract(format!(
            "score of length {} for statistics of length {}",
            u.len(),
            stats.len()
        )));
    }
    Ok(u.iter()
        .zip(&stats.diag_info)
        .map(|(u, d)| {
            let s = (d + stats.epsilon).sqrt();
            if s > 0.0 {
                u / s
            } else {
                0.0
            }
        })
        .collect())
}

pub fn extract_afv<M: EnergyModel + ?Sized>(
    model: &M,
    stats: &FisherStats,
    x: &[f64],
    source_id: impl Into<String>,
) -> Result<AdversarialFisherVector> {
    let u = fisher_score(model, stats, x)?;
    Ok(AdversarialFisherVector {
        values: afv_normalize(&u, stats)?,
        source_id: source_id.into(),
        model_id: stats.model_id.clone(),
    })
}

/// AFVs for every row of `x` (in parallel); ids are the row indices.
pub fn extract_afvs<M: EnergyModel + ?Sized>(
    model: &M,
    stats: &FisherStats,
    x: &Tensor,
) -> Result<Vec<AdversarialFisherVector>> {
    stats.check_model(model)?;
    check_input(model, x)?;
    let rows: Vec<&[f64]> = x.rows().collect();
    rows.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let u = score_unchecked(model, stats, r)?;
            let values = afv_normalize(&u, stats)?;
            if !values.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("AFV of example {i}")));
            }
            Ok(AdversarialFisherVector {
                values,
                source_id: i.to_string(),
                model_id: stats.model_id.clone(),
            })
        })
        .collect()
}
