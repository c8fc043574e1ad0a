use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::autodiff::{NodeId, ParamLayout, ParamVector, Tape, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x <= 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => crate::autodiff::sigmoid(x),
        }
    }

    pub(crate) fn apply(self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }

    /// d(activation)/d(pre) as a node, built from differentiable primitives
    /// so the result can itself be differentiated.
    pub(crate) fn derivative(self, tape: &mut Tape, pre: NodeId, post: NodeId) -> Result<NodeId> {
        match self {
            Activation::Identity => {
                let shape = tape.value(pre).shape().to_vec();
                Ok(tape.constant(Tensor::ones(&shape)))
            }
            Activation::Relu => tape.relu_mask(pre),
            Activation::Tanh => {
                let sq = tape.square(post)?;
                let neg = tape.scale(sq, -1.0)?;
                tape.add_scalar(neg, 1.0)
            }
            Activation::Sigmoid => {
                let neg = tape.scale(post, -1.0)?;
                let one_minus = tape.add_scalar(neg, 1.0)?;
                tape.mul(post, one_minus)
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::format(format!("unknown activation `{other}`"))),
        }
    }
}

/// Layer widths (input first, output last) and activations of a
/// fully-connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    hidden: Vec<Activation>,
    output: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Vec<Activation>, output: Activation) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::contract(format!(
                "an MLP needs input, at least one hidden layer and output; got widths {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::contract(format!("zero width in {widths:?}")));
        }
        if hidden.len() != widths.len() - 2 {
            return Err(Error::contract(format!(
                "{} hidden activations for {} hidden layers",
                hidden.len(),
                widths.len() - 2
            )));
        }
        Ok(MlpSpec { widths, hidden, output })
    }

    /// Same activation on every hidden layer.
    pub fn uniform(widths: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let n = widths.len().saturating_sub(2);
        Self::new(widths, vec![hidden; n], output)
    }

    /// `latent → hidden… (ReLU) → data_dim` with a linear head.
    pub fn generator(latent_dim: usize, hidden: &[usize], data_dim: usize) -> Result<Self> {
        let widths = std::iter::once(latent_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(data_dim))
            .collect();
        Self::uniform(widths, Activation::Relu, Activation::Identity)
    }

    /// `data_dim → hidden… (ReLU) → 1` with a sigmoid head.
    pub fn discriminator(data_dim: usize, hidden: &[usize]) -> Result<Self> {
        let widths = std::iter::once(data_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        Self::uniform(widths, Activation::Relu, Activation::Sigmoid)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden_activations(&self) -> &[Activation] {
        &self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden[layer]
        }
    }

    /// `layer{i}.weight` (`[fan_in, fan_out]`) then `layer{i}.bias`, per layer.
    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.widths.windows(2).enumerate().flat_map(|(i, w)| {
            [
                (format!("layer{i}.weight"), vec![w[0], w[1]]),
                (format!("layer{i}.bias"), vec![w[1]]),
            ]
        }))
    }

    /// Glorot-uniform weights in ±√(6/(fan_in+fan_out)), zero biases.
    pub fn init_params(&self, rng: &mut SeededRng) -> ParamVector {
        let layout = Arc::new(self.layout());
        let mut values = Vec::with_capacity(layout.len());
        for w in self.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                values.push(rng.uniform_range(-limit, limit));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::new(layout, values).expect("layout length")
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout().as_ref() != &self.layout() {
            return Err(Error::contract(format!("parameter layout does not match MLP {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for MlpSpec {
    /// `2-64-64-1/relu,relu/sigmoid`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let hidden: Vec<&str> = self.hidden.iter().map(|a| a.name()).collect();
        write!(f, "{}/{}/{}", widths.join("-"), hidden.join(","), self.output.name())
    }
}

impl FromStr for MlpSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        let [widths, hidden, output] = parts[..] else {
            return Err(Error::format(format!("bad MLP descriptor `{s}`")));
        };
        let widths = widths
            .split('-')
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|_| Error::format(format!("bad width `{w}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let hidden = hidden
            .split(',')
            .filter(|h| !h.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Activation>>>()?;
        MlpSpec::new(widths, hidden, output.parse()?)
    }
}

/// Node ids produced by running an MLP on a tape. `pre[i]`/`post[i]` are
/// the pre- and post-activation outputs of layer `i`; the last layer's
/// `pre` is the logit.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub input: NodeId,
    pub pre: Vec<NodeId>,
    pub post: Vec<NodeId>,
}

impl MlpTrace {
    pub fn logit(&self) -> NodeId {
        *self.pre.last().expect("at least one layer")
    }

    pub fn output(&self) -> NodeId {
        *self.post.last().expect("at least one layer")
    }
}

pub(crate) fn apply_layers(
    tape: &mut Tape,
    spec: &MlpSpec,
    weights: &[NodeId],
    biases: &[NodeId],
    x: NodeId,
) -> Result<MlpTrace> {
    let (_, cols) = tape.value(x).dims2()?;
    if cols != spec.input_dim() {
        return Err(Error::contract(format!(
            "input has {cols} columns, network expects {}",
            spec.input_dim()
        )));
    }
    let mut pre = Vec::with_capacity(spec.n_layers());
    let mut post = Vec::with_capacity(spec.n_layers());
    let mut h = x;
    for layer in 0..spec.n_layers() {
        let a = tape.matmul(h, weights[layer])?;
        let a = tape.add_bias(a, biases[layer])?;
        h = spec.activation(layer).apply(tape, a)?;
        pre.push(a);
        post.push(h);
    }
    Ok(MlpTrace { input: x, pre, post })
}

/// One leaf per layout entry, in layout order.
pub(crate) fn param_leaves(tape: &mut Tape, params: &ParamVector, trainable: bool) -> Vec<NodeId> {
    params
        .unflatten()
        .into_iter()
        .map(|t| if trainable { tape.leaf(t) } else { tape.constant(t) })
        .collect()
}
