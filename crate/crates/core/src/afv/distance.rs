use super::stats::{afv_normalize, sample_gradients, FisherStats};
use super::EnergyModel;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `‖a − b‖²`: the Fisher Distance of two examples given their AFVs.
pub fn fisher_distance_squared(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `‖a − b‖`: the Euclidean distance between AFVs.
pub fn fisher_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(fisher_distance_squared(a, b)?.sqrt())
}

/// Coordinate-wise mean of equal-length vectors.
pub fn mean_vector<V: AsRef<[f64]>>(rows: &[V]) -> Result<Vec<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::contract("cannot average an empty set"))?
        .as_ref();
    let mut mean = vec![0.0; first.len()];
    for r in rows {
        let r = r.as_ref();
        check_lengths(&mean, r)?;
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    Ok(mean)
}

fn whitened_mean_score<M: EnergyModel + ?Sized>(model: &M, stats: &FisherStats, x: &Tensor) -> Result<Vec<f64>> {
    let (n, _) = x.dims2()?;
    if n == 0 {
        return Err(Error::contract("example set is empty"));
    }
    let grads = sample_gradients(model, x)?;
    let mean = mean_vector(&grads)?;
    let u: Vec<f64> = mean.iter().zip(&stats.mean_grad).map(|(g, m)| g - m).collect();
    afv_normalize(&u, stats)
}

/// Squared whitened distance between the mean Fisher Scores of two sets.
/// For singletons this equals [`fisher_distance_squared`] of their AFVs
/// exactly.
pub fn set_fisher_distance<M: EnergyModel + ?Sized>(
    model: &M,
    stats: &FisherStats,
    x: &Tensor,
    y: &Tensor,
) -> Result<f64> {
    stats.check_model(model)?;
    let a = whitened_mean_score(model, stats, x)?;
    let b = whitened_mean_score(model, stats, y)?;
    fisher_distance_squared(&a, &b)
}

/// Set distance from precomputed AFVs: `‖mean(X) − mean(Y)‖²`.
pub fn set_distance_of_afvs<V: AsRef<[f64]>>(x: &[V], y: &[V]) -> Result<f64> {
    fisher_distance_squared(&mean_vector(x)?, &mean_vector(y)?)
}

/// `exp(−λ·distance)`.
pub fn fisher_similarity(distance: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::contract(format!("temperature {temperature} must be > 0")));
    }
    if !(distance >= 0.0) {
        return Err(Error::contract(format!("distance {distance} must be >= 0")));
    }
    Ok((-temperature * distance).exp())
}

pub fn set_fisher_similarity<M: EnergyModel + ?Sized>(
    model: &M,
    stats: &FisherStats,
    x: &Tensor,
    y: &Tensor,
    temperature: f64,
) -> Result<f64> {
    fisher_similarity(set_fisher_distance(model, stats, x, y)?, temperature)
}
