//! Fisher Scores, the diagonal Fisher Information and Adversarial Fisher
//! Vectors, with distances and similarities between examples and sets.
//!
//! For a model with negative energy `D(x;θ)`:
//!
//! * `U_x = ∇θ D(x;θ) − m` where `m` is the mean gradient over samples from
//!   the model (generator samples for a GAN, exact samples for an oracle);
//! * `diag(I)_i` is the per-coordinate (biased) variance of those sample
//!   gradients, so the samples' own scores have zero mean;
//! * `V_x = U_x / √(diag(I) + ε)`, and the Fisher Distance between two
//!   examples is `‖V_x − V_y‖²`.

mod distance;
mod stats;

pub use distance::{
    fisher_distance, fisher_distance_squared, fisher_similarity, mean_vector, set_distance_of_afvs,
    set_fisher_distance, set_fisher_similarity,
};
pub use stats::{
    afv_normalize, estimation_samples, extract_afv, extract_afvs, fisher_score, fisher_stats_estimate,
    fisher_stats_from_samples, sample_gradients, AdversarialFisherVector, FisherStats, DEFAULT_EPSILON,
};

use crate::autodiff::Tensor;
use crate::error::Result;
use crate::models::{DiscriminatorModel, GeneratorModel};
use crate::rng::SeededRng;

/// A parametric negative energy whose parameter gradient defines scores.
pub trait EnergyModel: Sync {
    fn param_count(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `∇θ D(x;θ)`.
    fn param_grad(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Identifies the exact parameter values; statistics and vectors carry
    /// it so that values from different models are never mixed.
    fn model_id(&self) -> String;
}

/// Draws examples from the model distribution (approximately, for a GAN).
pub trait ExampleSampler {
    /// `n` examples as an `[n, dim]` batch.
    fn sample_examples(&self, n: usize, rng: &mut SeededRng) -> Result<Tensor>;
}

impl EnergyModel for DiscriminatorModel {
    fn param_count(&self) -> usize {
        DiscriminatorModel::param_count(self)
    }

    fn input_dim(&self) -> usize {
        DiscriminatorModel::input_dim(self)
    }

    /// Gradient of the logit.
    fn param_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logit_param_grad(x)?.into_values())
    }

    fn model_id(&self) -> String {
        self.fingerprint()
    }
}

impl ExampleSampler for GeneratorModel {
    fn sample_examples(&self, n: usize, rng: &mut SeededRng) -> Result<Tensor> {
        let z = self.sample_latent(n, rng)?;
        self.generate(&z)
    }
}

#[cfg(test)]
mod tests;
