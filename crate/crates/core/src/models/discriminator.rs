use sha2::{Digest, Sha256};

use super::mlp::{apply_layers, param_leaves, MlpSpec, MlpTrace};
use super::spectral::{self, norm, SIGMA_FLOOR};
use crate::autodiff::{flatten_grads, NodeId, ParamVector, Tape, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// The discriminator: an MLP whose logit is the negative energy.
///
/// With spectral normalization on, every weight matrix `W` enters the
/// network as `W / σ̂(W)` where `σ̂(W) = uᵀWv` for the stored left vector
/// `u` and `v = Wᵀu/‖Wᵀu‖`. σ̂ is differentiated with `u, v` held fixed,
/// which equals the exact derivative of `‖Wᵀu‖` at fixed `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    spec: MlpSpec,
    params: ParamVector,
    spectral: Vec<Vec<f64>>,
    spectral_enabled: bool,
}

/// Parameter nodes of a discriminator on a tape.
#[derive(Debug, Clone)]
pub struct DiscBinding {
    /// Raw parameter leaves in layout order.
    pub params: Vec<NodeId>,
    /// Weights as used by the layers (after spectral normalization).
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
}

/// Output of [`DiscriminatorModel::forward`].
#[derive(Debug)]
pub struct DiscForward {
    /// Head outputs (sigmoid probabilities for the default head).
    pub outputs: Vec<f64>,
    pub logits: Vec<f64>,
    pub tape: Tape,
    pub binding: DiscBinding,
    pub trace: MlpTrace,
}

impl DiscriminatorModel {
    pub fn new(spec: MlpSpec, params: ParamVector, spectral: Vec<Vec<f64>>, spectral_enabled: bool) -> Result<Self> {
        spec.check_params(&params)?;
        if spectral.len() != spec.n_layers() {
            return Err(Error::contract(format!(
                "{} spectral states for {} layers",
                spectral.len(),
                spec.n_layers()
            )));
        }
        for (l, u) in spectral.iter().enumerate() {
            if u.len() != spec.widths()[l] || (norm(u) - 1.0).abs() > 1e-6 {
                return Err(Error::contract(format!(
                    "spectral state {l} must be a unit vector of length {}",
                    spec.widths()[l]
                )));
            }
        }
        Ok(DiscriminatorModel {
            spec,
            params,
            spectral,
            spectral_enabled,
        })
    }

    /// Fresh Glorot weights and random unit spectral vectors.
    pub fn init(spec: MlpSpec, spectral_enabled: bool, rng: &mut SeededRng) -> Self {
        let params = spec.init_params(rng);
        let spectral = spec.widths()[..spec.n_layers()]
            .iter()
            .map(|&rows| {
                let mut u = rng.normal_vec(rows);
                let n = norm(&u);
                u.iter_mut().for_each(|x| *x /= n);
                u
            })
            .collect();
        DiscriminatorModel {
            spec,
            params,
            spectral,
            spectral_enabled,
        }
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

    pub fn spectral_states(&self) -> &[Vec<f64>] {
        &self.spectral
    }

    pub fn spectral_enabled(&self) -> bool {
        self.spectral_enabled
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn weight(&self, layer: usize) -> Tensor {
        self.params
            .tensor(&format!("layer{layer}.weight"))
            .expect("validated layout")
    }

    /// Advances every spectral state by `n` power iterations.
    pub fn power_iterate(&mut self, n: usize) -> Result<()> {
        if !self.spectral_enabled {
            return Ok(());
        }
        for l in 0..self.spec.n_layers() {
            let w = self.weight(l);
            self.spectral[l] = spectral::power_iteration(&w, &self.spectral[l], n)?;
        }
        Ok(())
    }

    /// Weight of `layer` as the network uses it.
    pub fn effective_weight(&self, layer: usize) -> Result<Tensor> {
        let w = self.weight(layer);
        if !self.spectral_enabled {
            return Ok(w);
        }
        let (sigma, _) = spectral::sigma_estimate(&w, &self.spectral[layer])?;
        let sigma = sigma.max(SIGMA_FLOOR);
        Ok(w.map(|x| x / sigma))
    }

    /// Places the parameters on `tape`. With `trainable = false` they are
    /// constants and receive no gradient.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<DiscBinding> {
        let params = param_leaves(tape, &self.params, trainable);
        let mut weights = Vec::with_capacity(self.spec.n_layers());
        let mut biases = Vec::with_capacity(self.spec.n_layers());
        for l in 0..self.spec.n_layers() {
            let w = params[2 * l];
            biases.push(params[2 * l + 1]);
            if !self.spectral_enabled {
                weights.push(w);
                continue;
            }
            let u = &self.spectral[l];
            let (sigma, v) = spectral::sigma_estimate(tape.value(w), u)?;
            if sigma < SIGMA_FLOOR {
                weights.push(tape.scale(w, 1.0 / SIGMA_FLOOR)?);
                continue;
            }
            let u_row = tape.constant(Tensor::matrix(1, u.len(), u.clone())?);
            let v_col = tape.constant(Tensor::matrix(v.len(), 1, v)?);
            let uw = tape.matmul(u_row, w)?;
            let s = tape.matmul(uw, v_col)?;
            weights.push(tape.div_scalar(w, s)?);
        }
        Ok(DiscBinding {
            params,
            weights,
            biases,
        })
    }

    pub fn apply(&self, tape: &mut Tape, binding: &DiscBinding, x: NodeId) -> Result<MlpTrace> {
        apply_layers(tape, &self.spec, &binding.weights, &binding.biases, x)
    }

    /// Runs a batch `[n, input_dim]`; the input is a differentiable leaf so
    /// the returned tape supports gradients w.r.t. parameters and inputs.
    pub fn forward(&self, x: &Tensor) -> Result<DiscForward> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape, true)?;
        let input = tape.leaf(x.clone());
        let trace = self.apply(&mut tape, &binding, input)?;
        let outputs = tape.value(trace.output()).data().to_vec();
        let logits = tape.value(trace.logit()).data().to_vec();
        Ok(DiscForward {
            outputs,
            logits,
            tape,
            binding,
            trace,
        })
    }

    pub fn outputs(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.outputs)
    }

    /// ∇θ of the logit at one example, flattened in layout order.
    pub fn logit_param_grad(&self, x: &[f64]) -> Result<ParamVector> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape, true)?;
        let input = tape.constant(self.example(x)?);
        let trace = self.apply(&mut tape, &binding, input)?;
        let s = tape.sum(trace.logit())?;
        let grads = tape.backward(s)?;
        flatten_grads(&grads, &binding.params, self.params.layout())
    }

    /// The logit and ∇x of the logit at one example.
    pub fn logit_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape, false)?;
        let input = tape.leaf(self.example(x)?);
        let trace = self.apply(&mut tape, &binding, input)?;
        let s = tape.sum(trace.logit())?;
        let grads = tape.backward(s)?;
        let value = tape.value(s).item()?;
        Ok((value, grads.wrt(input)?.data().to_vec()))
    }

    fn example(&self, x: &[f64]) -> Result<Tensor> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "example has {} features, discriminator expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Tensor::matrix(1, x.len(), x.to_vec())
    }

    /// Builds ∇x(logit) for every row of the batch in `trace` as an explicit
    /// graph (the backward chain written out with tape primitives), so its
    /// norm can be differentiated w.r.t. the parameters.
    pub fn input_gradient_graph(&self, tape: &mut Tape, binding: &DiscBinding, trace: &MlpTrace) -> Result<NodeId> {
        let (n, _) = tape.value(trace.logit()).dims2()?;
        let mut g = tape.constant(Tensor::ones(&[n, 1]));
        for l in (0..self.spec.n_layers()).rev() {
            let wt = tape.transpose(binding.weights[l])?;
            let gh = tape.matmul(g, wt)?;
            if l == 0 {
                return Ok(gh);
            }
            let deriv = self.spec.hidden_activations()[l - 1].derivative(tape, trace.pre[l - 1], trace.post[l - 1])?;
            g = tape.mul(gh, deriv)?;
        }
        unreachable!("an MLP has at least one layer")
    }

    /// Post-activation outputs of each hidden layer, as `[n, width]` tensors.
    pub fn hidden_activations(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape, false)?;
        let input = tape.constant(x.clone());
        let trace = self.apply(&mut tape, &binding, input)?;
        Ok(trace.post[..self.spec.n_hidden()]
            .iter()
            .map(|&id| tape.value(id).clone())
            .collect())
    }

    /// Short content hash of everything the discriminator's outputs depend
    /// on; AFVs and Fisher statistics carry it to prevent mixing models.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.spec.to_string().as_bytes());
        h.update([self.spectral_enabled as u8]);
        for v in self.params.values() {
            h.update(v.to_le_bytes());
        }
        for u in &self.spectral {
            for v in u {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
