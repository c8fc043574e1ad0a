//! One-vs-rest linear SVM with squared hinge loss.
//!
//! For class `c` with targets `y ∈ {−1, +1}` the objective is
//! `½‖w_c‖² + C·Σ_i max(0, 1 − y_i(w_c·x_i + b_c))²` (bias unregularized).
//! It is minimized by full-batch gradient descent from zero; a step that
//! would increase the objective is retried at half the size, so the
//! objective never increases.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 500,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    /// `[classes][dim]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub c: f64,
    /// Objective of each class's problem after every epoch.
    pub objective_trace: Vec<Vec<f64>>,
}

impl LinearSvmModel {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * dot(w, w);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let m = (1.0 - yi * (dot(w, xi) + b)).max(0.0);
            m * m
        })
        .sum();
    reg + c * loss
}

fn gradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let m = 1.0 - yi * (dot(w, xi) + b);
        if m > 0.0 {
            let k = -2.0 * c * m * yi;
            gw.iter_mut().zip(xi).for_each(|(g, v)| *g += k * v);
            gb += k;
        }
    }
    (gw, gb)
}

/// Halvings tried before an epoch is declared stalled.
const MAX_HALVINGS: usize = 60;

fn train_binary(x: &[Vec<f64>], y: &[f64], p: &SvmParams) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = x[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut f = objective(&w, b, x, y, p.c);
    let mut lr = p.lr;
    let mut trace = Vec::with_capacity(p.epochs);
    for _ in 0..p.epochs {
        let (gw, gb) = gradient(&w, b, x, y, p.c);
        let mut step = lr;
        for _ in 0..MAX_HALVINGS {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let nb = b - step * gb;
            let nf = objective(&nw, nb, x, y, p.c);
            if nf <= f {
                w = nw;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
        }
        lr = step;
        trace.push(f);
    }
    (w, b, trace)
}

fn check_features(features: &[Vec<f64>]) -> Result<usize> {
    let dim = features
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::contract("no training examples"))?;
    for (i, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::contract(format!(
                "example {i} has {} features, expected {dim}",
                f.len()
            )));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("features of example {i}")));
        }
    }
    Ok(dim)
}

/// One-vs-rest training over classes `0..=max(labels)`.
pub fn l2svm_train(features: &[Vec<f64>], labels: &[u32], params: &SvmParams) -> Result<LinearSvmModel> {
    check_features(features)?;
    if labels.len() != features.len() {
        return Err(Error::contract("label count differs from example count"));
    }
    if !(params.c > 0.0 && params.lr > 0.0) {
        return Err(Error::contract("C and the learning rate must be positive"));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let distinct = {
        let mut seen = vec![false; n_classes];
        labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::contract("need examples from at least two classes"));
    }
    let mut weights = Vec::with_capacity(n_classes);
    let mut bias = Vec::with_capacity(n_classes);
    let mut objective_trace = Vec::with_capacity(n_classes);
    for c in 0..n_classes as u32 {
        let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let (w, b, t) = train_binary(features, &y, params);
        weights.push(w);
        bias.push(b);
        objective_trace.push(t);
    }
    Ok(LinearSvmModel {
        weights,
        bias,
        c: params.c,
        objective_trace,
    })
}

/// Highest-scoring class per example; ties go to the lowest index.
pub fn l2svm_predict(model: &LinearSvmModel, features: &[Vec<f64>]) -> Result<Vec<u32>> {
    features
        .iter()
        .map(|x| {
            if x.len() != model.dim() {
                return Err(Error::contract(format!(
                    "example has {} features, model expects {}",
                    x.len(),
                    model.dim()
                )));
            }
            let s = model.scores(x);
            let mut best = 0;
            for (i, &v) in s.iter().enumerate() {
                if v > s[best] {
                    best = i;
                }
            }
            Ok(best as u32)
        })
        .collect()
}

pub fn accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::contract("accuracy needs equal, non-empty label lists"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![0, 1];
        let p = SvmParams {
            lr: 0.1,
            ..SvmParams::default()
        };
        let m = l2svm_train(&x, &y, &p).unwrap();
        assert_eq!(l2svm_predict(&m, &x).unwrap(), y);
        // Both examples fall short of the margin at the optimum w = 4C/(1+4C)·(1, 0).
        let f = *m.objective_trace[0].last().unwrap();
        let opt = objective(&[0.8, 0.0], 0.0, &x, &[1.0, -1.0], 1.0);
        assert!((f - opt).abs() < 1e-9, "{f} vs {opt}");
    }

    #[test]
    fn margin_loss_vanishes_with_large_c_on_separable_data() {
        let x = vec![vec![2.0], vec![1.0], vec![-1.0], vec![-3.0]];
        let y = vec![1, 1, 0, 0];
        let p = SvmParams {
            c: 1e4,
            lr: 1e-3,
            epochs: 2000,
        };
        let m = l2svm_train(&x, &y, &p).unwrap();
        let yy: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let hinge: f64 = x
            .iter()
            .zip(&yy)
            .map(|(xi, yi)| (1.0 - yi * (dot(&m.weights[1], xi) + m.bias[1])).max(0.0).powi(2))
            .sum();
        assert!(hinge < 1e-3, "{hinge}");
        assert_eq!(accuracy(&l2svm_predict(&m, &x).unwrap(), &y).unwrap(), 1.0);
    }

    #[test]
    fn objective_never_increases() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<u32> = (0..40).map(|i| (i % 3) as u32).collect();
        let p = SvmParams {
            lr: 5.0,
            epochs: 100,
            c: 10.0,
        };
        let m = l2svm_train(&x, &y, &p).unwrap();
        for t in &m.objective_trace {
            assert!(t.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_features_predict_majority() {
        let x = vec![vec![0.0; 3]; 10];
        let y = vec![0, 1, 1, 1, 1, 1, 1, 2, 2, 0];
        let m = l2svm_train(&x, &y, &SvmParams::default()).unwrap();
        let acc = accuracy(&l2svm_predict(&m, &x).unwrap(), &y).unwrap();
        assert_eq!(acc, 0.6);
    }

    #[test]
    fn ties_go_to_lowest_index_and_dims_are_checked() {
        let m = LinearSvmModel {
            weights: vec![vec![1.0], vec![1.0], vec![0.0]],
            bias: vec![0.0, 0.0, 0.5],
            c: 1.0,
            objective_trace: vec![],
        };
        assert_eq!(l2svm_predict(&m, &[vec![2.0]]).unwrap(), vec![0]);
        assert_eq!(l2svm_predict(&m, &[vec![0.1]]).unwrap(), vec![2]);
        assert!(l2svm_predict(&m, &[vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(l2svm_train(&x, &[1, 1], &SvmParams::default()).is_err());
    }
}
