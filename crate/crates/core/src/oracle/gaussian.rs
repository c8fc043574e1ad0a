use crate::afv::{EnergyModel, ExampleSampler};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// `N(μ, σ)` on the real line, parameterized by `(μ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    mu: f64,
    sigma: f64,
}

impl GaussianModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::contract(format!("invalid Gaussian N({mu}, {sigma})")));
        }
        Ok(GaussianModel { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `∇(μ,σ) log N(x; μ, σ) = ((x−μ)/σ², ((x−μ)² − σ²)/σ³)`.
    pub fn fisher_score_exact(&self, x: f64) -> [f64; 2] {
        let d = x - self.mu;
        let s2 = self.sigma * self.sigma;
        [d / s2, (d * d - s2) / (s2 * self.sigma)]
    }

    /// `(1/σ², 2/σ²)`.
    pub fn fisher_information_exact(&self) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        [1.0 / s2, 2.0 / s2]
    }

    pub fn density(&self, x: f64) -> f64 {
        let d = (x - self.mu) / self.sigma;
        (-0.5 * d * d).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Negative energy `−(x−μ)²/(2σ²)`; its parameter gradient minus the
/// model mean is the exact score, since `∇ log Z = (0, 1/σ)`.
impl EnergyModel for GaussianModel {
    fn param_count(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn param_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let [x] = x else {
            return Err(Error::contract("Gaussian examples are scalars"));
        };
        let d = x - self.mu;
        let s2 = self.sigma * self.sigma;
        Ok(vec![d / s2, d * d / (s2 * self.sigma)])
    }

    fn model_id(&self) -> String {
        format!("gaussian:{:?}:{:?}", self.mu, self.sigma)
    }
}

impl ExampleSampler for GaussianModel {
    fn sample_examples(&self, n: usize, rng: &mut SeededRng) -> Result<Tensor> {
        let data = (0..n).map(|_| self.mu + self.sigma * rng.normal()).collect();
        Tensor::matrix(n, 1, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        let g = GaussianModel::new(0.0, 1.0).unwrap();
        assert_eq!(g.fisher_score_exact(1.0), [1.0, 0.0]);
        assert_eq!(g.fisher_information_exact(), [1.0, 2.0]);
        let g = GaussianModel::new(3.0, 2.0).unwrap();
        assert_eq!(g.fisher_score_exact(3.0), [0.0, -0.5]);
        assert_eq!(g.fisher_information_exact(), [0.25, 0.5]);
        assert!(GaussianModel::new(0.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_points_have_equal_density_and_opposite_mean_scores() {
        let g = GaussianModel::new(0.7, 1.5).unwrap();
        let (a, b) = (g.mu() + 1.0, g.mu() - 1.0);
        assert_eq!(g.density(a), g.density(b));
        let (sa, sb) = (g.fisher_score_exact(a), g.fisher_score_exact(b));
        let s2 = 1.5 * 1.5;
        assert!((sa[0] - 1.0 / s2).abs() < 1e-15);
        assert!((sb[0] + 1.0 / s2).abs() < 1e-15);
        assert_eq!(sa[0], -sb[0]);
        assert_eq!(sa[1], sb[1]);
    }

    #[test]
    fn energy_gradient_minus_mean_is_the_score() {
        let g = GaussianModel::new(-1.0, 0.5).unwrap();
        let mean_sigma_grad = 1.0 / g.sigma();
        for x in [-2.0, -1.0, 0.3] {
            let pg = g.param_grad(&[x]).unwrap();
            let exact = g.fisher_score_exact(x);
            assert!((pg[0] - exact[0]).abs() < 1e-12);
            assert!((pg[1] - mean_sigma_grad - exact[1]).abs() < 1e-12);
        }
    }
}
