use super::mlp::{apply_layers, param_leaves, MlpSpec, MlpTrace};
use crate::autodiff::{NodeId, ParamVector, Tape, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Maps latent vectors `z ∈ R^latent_dim` to examples.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    spec: MlpSpec,
    params: ParamVector,
}

impl GeneratorModel {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.check_params(&params)?;
        Ok(GeneratorModel { spec, params })
    }

    pub fn init(spec: MlpSpec, rng: &mut SeededRng) -> Self {
        let params = spec.init_params(rng);
        GeneratorModel { spec, params }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<NodeId> {
        param_leaves(tape, &self.params, trainable)
    }

    pub fn apply(&self, tape: &mut Tape, params: &[NodeId], z: NodeId) -> Result<MlpTrace> {
        let weights: Vec<NodeId> = params.iter().step_by(2).copied().collect();
        let biases: Vec<NodeId> = params.iter().skip(1).step_by(2).copied().collect();
        apply_layers(tape, &self.spec, &weights, &biases, z)
    }

    /// `G(z)` for a batch `[n, latent_dim]`.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        let (_, cols) = z.dims2()?;
        if cols != self.latent_dim() {
            return Err(Error::contract(format!(
                "latent batch has {cols} columns, generator expects {}",
                self.latent_dim()
            )));
        }
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let input = tape.constant(z.clone());
        let trace = self.apply(&mut tape, &params, input)?;
        Ok(tape.value(trace.output()).clone())
    }

    /// `n` draws of `z ~ N(0, I)` as a `[n, latent_dim]` batch.
    pub fn sample_latent(&self, n: usize, rng: &mut SeededRng) -> Result<Tensor> {
        Tensor::matrix(n, self.latent_dim(), rng.normal_vec(n * self.latent_dim()))
    }
}

/// Polyak-averaged copy Ḡ of the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowGenerator {
    model: GeneratorModel,
    tau: f64,
}

impl ShadowGenerator {
    pub fn new(model: GeneratorModel, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::contract(format!("Polyak decay {tau} outside [0, 1]")));
        }
        Ok(ShadowGenerator { model, tau })
    }

    pub fn model(&self) -> &GeneratorModel {
        &self.model
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn params(&self) -> &ParamVector {
        self.model.params()
    }

    /// `shadow ← τ·shadow + (1−τ)·live`, elementwise.
    pub fn polyak_update(&mut self, live: &GeneratorModel) -> Result<()> {
        if live.spec() != self.model.spec() || !live.params().same_layout(self.model.params()) {
            return Err(Error::contract("shadow and live generator layouts differ"));
        }
        let tau = self.tau;
        for (s, &l) in self
            .model
            .params_mut()
            .values_mut()
            .iter_mut()
            .zip(live.params().values())
        {
            *s = tau * *s + (1.0 - tau) * l;
        }
        Ok(())
    }
}
