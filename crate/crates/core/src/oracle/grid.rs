use crate::afv::{EnergyModel, ExampleSampler};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Monomial exponents of total degree `1..=degree` in `dim` variables,
/// ordered by degree, then lexicographically descending in the first
/// variable: for `dim = 2, degree = 2` that is `x, y, x², xy, y²`.
pub fn monomials(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(dim, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 1..=degree as u32 {
        rec(dim, d, &mut Vec::new(), &mut out);
    }
    out
}

/// `φ(x)` for the given monomials.
pub fn poly_features(x: &[f64], exps: &[Vec<u32>]) -> Vec<f64> {
    exps.iter()
        .map(|e| x.iter().zip(e).map(|(v, &k)| v.powi(k as i32)).product())
        .collect()
}

/// `n × n` evenly spaced points covering `[lo, hi]²`, row-major in `y`.
pub fn grid_2d(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n)
        .flat_map(|i| (0..n).map(move |j| vec![lo + j as f64 * step, lo + i as f64 * step]))
        .collect()
}

/// A log-linear model `p(x) ∝ exp(θ·φ(x))` on a finite set of points, with
/// polynomial features φ. Everything is computed by exact enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEbm {
    domain: Vec<Vec<f64>>,
    exps: Vec<Vec<u32>>,
    theta: Vec<f64>,
    features: Vec<Vec<f64>>,
    probs: Vec<f64>,
    log_z: f64,
}

impl GridEbm {
    pub fn new(domain: Vec<Vec<f64>>, degree: usize, theta: Vec<f64>) -> Result<Self> {
        let dim = domain
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::contract("grid domain is empty"))?;
        if dim == 0 || degree == 0 {
            return Err(Error::contract("grid needs dimension and degree >= 1"));
        }
        for (i, p) in domain.iter().enumerate() {
            if p.len() != dim || !p.iter().all(|v| v.is_finite()) {
                return Err(Error::contract(format!("domain point {i} is malformed")));
            }
            if domain[..i].contains(p) {
                return Err(Error::contract(format!("domain point {i} is a duplicate")));
            }
        }
        let exps = monomials(dim, degree);
        if theta.len() != exps.len() {
            return Err(Error::contract(format!(
                "theta has {} entries, {} features expected",
                theta.len(),
                exps.len()
            )));
        }
        let features: Vec<Vec<f64>> = domain.iter().map(|x| poly_features(x, &exps)).collect();
        let logits: Vec<f64> = features
            .iter()
            .map(|f| f.iter().zip(&theta).map(|(a, b)| a * b).sum())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::contract("grid energies are not finite"));
        }
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(GridEbm {
            domain,
            exps,
            theta,
            features,
            probs,
            log_z: max + total.ln(),
        })
    }

    pub fn domain(&self) -> &[Vec<f64>] {
        &self.domain
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_features(&self) -> usize {
        self.exps.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `log Σ_x exp(θ·φ(x))`.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        poly_features(x, &self.exps)
    }

    pub fn index_of(&self, x: &[f64]) -> Result<usize> {
        self.domain
            .iter()
            .position(|p| p.as_slice() == x)
            .ok_or_else(|| Error::contract(format!("{x:?} is not a domain point")))
    }

    /// `E_p φ = Σ_y p(y)φ(y)`.
    pub fn mean_features(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_features()];
        for (p, f) in self.probs.iter().zip(&self.features) {
            m.iter_mut().zip(f).for_each(|(m, v)| *m += p * v);
        }
        m
    }

    /// `U_x = φ(x) − E_p φ`; `x` must be a domain point.
    pub fn fisher_score_exact(&self, x: &[f64]) -> Result<Vec<f64>> {
        let i = self.index_of(x)?;
        let m = self.mean_features();
        Ok(self.features[i].iter().zip(&m).map(|(f, m)| f - m).collect())
    }

    /// Full Fisher Information `Σ_x p(x) U_x U_xᵀ`, row-major.
    pub fn fisher_information_exact(&self) -> Vec<f64> {
        let k = self.n_features();
        let m = self.mean_features();
        let mut info = vec![0.0; k * k];
        for (p, f) in self.probs.iter().zip(&self.features) {
            let u: Vec<f64> = f.iter().zip(&m).map(|(f, m)| f - m).collect();
            for i in 0..k {
                for j in 0..k {
                    info[i * k + j] += p * u[i] * u[j];
                }
            }
        }
        info
    }

    pub fn fisher_information_diag_exact(&self) -> Vec<f64> {
        let k = self.n_features();
        let full = self.fisher_information_exact();
        (0..k).map(|i| full[i * k + i]).collect()
    }

    /// Domain indices of `n` i.i.d. draws by inverse CDF.
    pub fn sample_indices(&self, n: usize, rng: &mut SeededRng) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let last = self.probs.len() - 1;
        (0..n)
            .map(|_| {
                let u = rng.uniform() * acc;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }

    /// `n` exact samples as an `[n, dim]` batch; deterministic in `seed`.
    pub fn sample_exact(&self, n: usize, seed: u64) -> Result<Tensor> {
        self.sample_examples(n, &mut SeededRng::from_seed(seed))
    }
}

/// `D(x;θ) = θ·φ(x)`, so `∇θ D = φ(x)`.
impl EnergyModel for GridEbm {
    fn param_count(&self) -> usize {
        self.n_features()
    }

    fn input_dim(&self) -> usize {
        self.domain[0].len()
    }

    fn param_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::contract("example width differs from the grid's"));
        }
        Ok(self.features(x))
    }

    fn model_id(&self) -> String {
        let theta: Vec<String> = self.theta.iter().map(|t| format!("{t:?}")).collect();
        format!("grid:{}:{}", self.domain.len(), theta.join(","))
    }
}

impl ExampleSampler for GridEbm {
    fn sample_examples(&self, n: usize, rng: &mut SeededRng) -> Result<Tensor> {
        if n == 0 {
            return Err(Error::contract("sample count must be at least 1"));
        }
        let dim = self.input_dim();
        let mut data = Vec::with_capacity(n * dim);
        for i in self.sample_indices(n, rng) {
            data.extend_from_slice(&self.domain[i]);
        }
        Tensor::matrix(n, dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(theta: f64) -> GridEbm {
        GridEbm::new(vec![vec![0.0], vec![1.0]], 1, vec![theta]).unwrap()
    }

    #[test]
    fn monomial_counts_and_order() {
        assert_eq!(monomials(2, 3).len(), 9);
        assert_eq!(monomials(1, 3), vec![vec![1], vec![2], vec![3]]);
        assert_eq!(
            monomials(2, 2),
            vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(
            poly_features(&[2.0, 3.0], &monomials(2, 2)),
            vec![2.0, 3.0, 4.0, 6.0, 9.0]
        );
    }

    #[test]
    fn uniform_two_point_scores() {
        let e = two_point(0.0);
        assert_eq!(e.probabilities(), &[0.5, 0.5]);
        assert_eq!(e.fisher_score_exact(&[0.0]).unwrap(), vec![-0.5]);
        assert_eq!(e.fisher_score_exact(&[1.0]).unwrap(), vec![0.5]);
        assert!(e.fisher_score_exact(&[0.5]).is_err());
        assert!((e.log_partition() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_three_gives_quarter_three_quarters() {
        let e = two_point(3f64.ln());
        let p = e.probabilities();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn expected_exact_score_is_zero_and_info_is_score_covariance() {
        let dom = grid_2d(8, -1.0, 1.0);
        let theta: Vec<f64> = (0..9).map(|i| 0.3 * ((i as f64) - 4.0) / 4.0).collect();
        let e = GridEbm::new(dom.clone(), 3, theta).unwrap();
        let mut expect = vec![0.0; 9];
        let mut cov = vec![0.0; 81];
        for (x, p) in dom.iter().zip(e.probabilities()) {
            let u = e.fisher_score_exact(x).unwrap();
            expect.iter_mut().zip(&u).for_each(|(s, v)| *s += p * v);
            for i in 0..9 {
                for j in 0..9 {
                    cov[i * 9 + j] += p * u[i] * u[j];
                }
            }
        }
        assert!(expect.iter().all(|v| v.abs() < 1e-14), "{expect:?}");
        for (a, b) in cov.iter().zip(e.fisher_information_exact()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sampler_frequency_support_and_determinism() {
        let e = two_point(3f64.ln());
        let s = e.sample_exact(100_000, 1).unwrap();
        let ones = s.data().iter().filter(|&&v| v == 1.0).count() as f64 / 1e5;
        assert!((ones - 0.75).abs() < 0.01, "{ones}");
        let one = e.sample_exact(1, 2).unwrap();
        assert!(e.index_of(one.data()).is_ok());
        assert_eq!(e.sample_exact(50, 3).unwrap(), e.sample_exact(50, 3).unwrap());
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(GridEbm::new(vec![], 1, vec![]).is_err());
        assert!(GridEbm::new(vec![vec![0.0], vec![0.0]], 1, vec![1.0]).is_err());
        assert!(GridEbm::new(vec![vec![0.0], vec![1.0]], 1, vec![1.0, 2.0]).is_err());
    }
}
