//! In-memory datasets and the synthetic generators.
//!
//! Generative formulas (all noise is isotropic Gaussian with std `noise`):
//!
//! * `two-moons`: label 0 on the upper half-circle `(cos t, sin t)`,
//!   label 1 on the lower one `(1 − cos t, 0.5 − sin t)`, `t ~ U[0, π]`.
//!   The first `⌈n/2⌉` draws are label 0.
//! * `rings`: label `r` on the circle of radius `r + 1`, `r ∈ {0, 1}`,
//!   angle `~ U[0, 2π)`.
//! * `gaussian-mixture-k`: component `j` centred at
//!   `2·(cos 2πj/k, sin 2πj/k)` with std `noise`; component sizes differ by
//!   at most one (the first `n mod k` components get the extra point).
//! * `checkerboard`: uniform over the 8 cells of a 4×4 board on `[−2, 2]²`
//!   whose row+column index is even; label is the cell's row (0..4).
//!
//! Rows are shuffled with the same seed after generation.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    features: Vec<f64>,
    labels: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, dim: usize, features: Vec<f64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("dataset dimension must be positive"));
        }
        if !features.len().is_multiple_of(dim) {
            return Err(Error::contract(format!(
                "{} feature values is not a multiple of dimension {dim}",
                features.len()
            )));
        }
        let count = features.len() / dim;
        if let Some(l) = &labels {
            if l.len() != count {
                return Err(Error::contract(format!("{} labels for {count} rows", l.len())));
            }
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], labels: Option<Vec<u32>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::contract("dataset needs at least one row"))?;
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::contract("ragged dataset rows"));
            }
            features.extend_from_slice(r);
        }
        Dataset::new(name, dim, features, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.dim)
    }

    /// Rows at `indices` as a `[indices.len(), dim]` matrix.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::contract(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Tensor::matrix(indices.len(), self.dim, data)
    }

    /// The first `min(n, len)` rows.
    pub fn head(&self, n: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.batch(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.batch(indices)?.into_data();
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset::new(self.name.clone(), self.dim, features, labels)
    }

    /// Deterministic shuffled split: the first `round(train_fraction·n)`
    /// shuffled rows train, the rest validate.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let (train, val) = split_indices(self.len(), train_fraction, seed)?;
        Ok((self.subset(&train)?, self.subset(&val)?))
    }

    pub fn n_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m as usize + 1)
    }
}

/// Shuffles `0..n` with `seed` and cuts it at `round(train_fraction·n)`,
/// keeping at least one index on each side when `n ≥ 2`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::contract("train fraction must be in [0, 1]"));
    }
    let mut perm = SeededRng::from_seed(seed).permutation(n);
    let cut = (train_fraction * n as f64).round() as usize;
    let cut = cut.clamp(1, n.saturating_sub(1).max(1)).min(n);
    let val = perm.split_off(cut);
    Ok((perm, val))
}

/// Which synthetic distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    TwoMoons,
    Rings,
    GaussianMixture(usize),
    Checkerboard,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::TwoMoons => write!(f, "two-moons"),
            DatasetKind::Rings => write!(f, "rings"),
            DatasetKind::GaussianMixture(k) => write!(f, "gaussian-mixture-{k}"),
            DatasetKind::Checkerboard => write!(f, "checkerboard"),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moons" => Ok(DatasetKind::TwoMoons),
            "rings" => Ok(DatasetKind::Rings),
            "checkerboard" => Ok(DatasetKind::Checkerboard),
            _ => s
                .strip_prefix("gaussian-mixture-")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(DatasetKind::GaussianMixture)
                .ok_or_else(|| {
                    Error::contract(format!(
                        "unknown dataset kind `{s}` (expected two-moons, rings, \
                         gaussian-mixture-<k>, checkerboard)"
                    ))
                }),
        }
    }
}

/// Draws `n` labelled points of `kind`. See the module docs for formulas.
pub fn gen_dataset(kind: DatasetKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::contract("dataset size must be at least 1"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::contract(format!("noise {noise} must be finite and >= 0")));
    }
    let mut rng = SeededRng::from_seed(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let pi = std::f64::consts::PI;
    match kind {
        DatasetKind::TwoMoons => {
            let upper = n.div_ceil(2);
            for i in 0..n {
                let t = rng.uniform_range(0.0, pi);
                let (x, y, l) = if i < upper {
                    (t.cos(), t.sin(), 0)
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin(), 1)
                };
                rows.push(vec![x + noise * rng.normal(), y + noise * rng.normal()]);
                labels.push(l);
            }
        }
        DatasetKind::Rings => {
            for i in 0..n {
                let l = (i % 2) as u32;
                let r = f64::from(l) + 1.0;
                let a = rng.uniform_range(0.0, 2.0 * pi);
                rows.push(vec![
                    r * a.cos() + noise * rng.normal(),
                    r * a.sin() + noise * rng.normal(),
                ]);
                labels.push(l);
            }
        }
        DatasetKind::GaussianMixture(k) => {
            for j in 0..k {
                let count = n / k + usize::from(j < n % k);
                let angle = 2.0 * pi * j as f64 / k as f64;
                let (cx, cy) = (2.0 * angle.cos(), 2.0 * angle.sin());
                for _ in 0..count {
                    rows.push(vec![cx + noise * rng.normal(), cy + noise * rng.normal()]);
                    labels.push(j as u32);
                }
            }
        }
        DatasetKind::Checkerboard => {
            let cells: Vec<(usize, usize)> = (0..4)
                .flat_map(|r| (0..4).map(move |c| (r, c)))
                .filter(|(r, c)| (r + c) % 2 == 0)
                .collect();
            for _ in 0..n {
                let (r, c) = cells[rng.index(cells.len())];
                let x = -2.0 + c as f64 + rng.uniform();
                let y = -2.0 + r as f64 + rng.uniform();
                rows.push(vec![x + noise * rng.normal(), y + noise * rng.normal()]);
                labels.push(r as u32);
            }
        }
    }
    let perm = rng.permutation(n);
    let rows: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<u32> = perm.iter().map(|&i| labels[i]).collect();
    Dataset::from_rows(kind.to_string(), &rows, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_is_balanced() {
        let d = gen_dataset(DatasetKind::GaussianMixture(3), 300, 0.3, 1).unwrap();
        let labels = d.labels().unwrap();
        for c in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 100);
        }
        assert_eq!(d.n_classes(), 3);
    }

    #[test]
    fn same_seed_same_data() {
        for kind in ["two-moons", "rings", "gaussian-mixture-4", "checkerboard"] {
            let k: DatasetKind = kind.parse().unwrap();
            assert_eq!(gen_dataset(k, 57, 0.1, 5).unwrap(), gen_dataset(k, 57, 0.1, 5).unwrap());
            assert_ne!(gen_dataset(k, 57, 0.1, 5).unwrap(), gen_dataset(k, 57, 0.1, 6).unwrap());
        }
    }

    #[test]
    fn noiseless_moons_lie_on_half_circles() {
        let d = gen_dataset(DatasetKind::TwoMoons, 200, 0.0, 2).unwrap();
        for (row, &l) in d.rows().zip(d.labels().unwrap()) {
            let (x, y) = (row[0], row[1]);
            if l == 0 {
                assert!((x * x + y * y - 1.0).abs() < 1e-12);
                assert!(y >= 0.0);
            } else {
                let (dx, dy) = (x - 1.0, y - 0.5);
                assert!((dx * dx + dy * dy - 1.0).abs() < 1e-12);
                assert!(dy <= 0.0);
            }
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!("spirals".parse::<DatasetKind>().is_err());
        assert!("gaussian-mixture-0".parse::<DatasetKind>().is_err());
        assert_eq!(
            "gaussian-mixture-12".parse::<DatasetKind>().unwrap(),
            DatasetKind::GaussianMixture(12)
        );
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = gen_dataset(DatasetKind::TwoMoons, 100, 0.05, 3).unwrap();
        let (a, b) = d.split(0.8, 9).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert_eq!(d.split(0.8, 9).unwrap().0, a);
        for r in b.rows() {
            assert!(!a.rows().any(|q| q == r));
        }
    }

    #[test]
    fn checkerboard_points_are_on_even_cells() {
        let d = gen_dataset(DatasetKind::Checkerboard, 500, 0.0, 4).unwrap();
        for (row, &l) in d.rows().zip(d.labels().unwrap()) {
            let c = (row[0] + 2.0).floor() as i64;
            let r = (row[1] + 2.0).floor() as i64;
            assert_eq!((r + c) % 2, 0);
            assert_eq!(r as u32, l);
        }
    }
}
