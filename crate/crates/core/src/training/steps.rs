//! One discriminator step and one generator step.
//!
//! Discriminator loss (sigmoid outputs `D`, logit `D̃`):
//! `½·mean (D(x)−1)² + ½·mean D(G(z))² + (ρ·λ_gp/2)·mean ‖∇x D̃(x)‖²`,
//! the penalty taken on the real batch and skipped when `ρ = 0`.
//!
//! Generator loss: `mean (D(G(z))−1)² + γ·mean ‖G(z) − a(z)‖²` with anchor
//! `a(z) = Ḡ(z) − λε` (ε only when noise is enabled). The locality term is
//! not built when `γ = 0`.

use super::adam::{adam_update, AdamState};
use super::config::TrainConfig;
use crate::autodiff::{flatten_grads, NodeId, ParamVector, Tape, Tensor};
use crate::error::{Error, Result};
use crate::models::{DiscBinding, DiscriminatorModel, GeneratorModel, MlpTrace, ShadowGenerator};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DStepStats {
    /// Total loss including the penalty.
    pub loss: f64,
    /// `mean ‖∇x D̃‖²` on the real batch (0 when the penalty is off).
    pub penalty: f64,
    pub mean_real: f64,
    pub mean_fake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStepStats {
    pub loss: f64,
    /// `mean ‖G(z) − Ḡ(z)‖²` after both the G and the Polyak update.
    pub delta_g: f64,
    pub mean_fake: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `½·mean (r−1)² + ½·mean f²` on sigmoid outputs.
pub fn lsgan_d_loss(real: &[f64], fake: &[f64]) -> f64 {
    let r = real.iter().map(|d| (d - 1.0) * (d - 1.0)).sum::<f64>() / real.len() as f64;
    let f = fake.iter().map(|d| d * d).sum::<f64>() / fake.len() as f64;
    0.5 * r + 0.5 * f
}

/// `mean (f−1)²` on sigmoid outputs.
pub fn lsgan_g_loss(fake: &[f64]) -> f64 {
    fake.iter().map(|d| (d - 1.0) * (d - 1.0)).sum::<f64>() / fake.len() as f64
}

/// `mean_rows ‖∇x D̃‖²` as a graph node over the batch in `trace`.
pub fn gradient_penalty_node(
    d: &DiscriminatorModel,
    tape: &mut Tape,
    binding: &DiscBinding,
    trace: &MlpTrace,
) -> Result<NodeId> {
    let (n, _) = tape.value(trace.input).dims2()?;
    let gx = d.input_gradient_graph(tape, binding, trace)?;
    let sq = tape.square(gx)?;
    let s = tape.sum(sq)?;
    let n = tape.constant(Tensor::scalar(n as f64));
    tape.div_scalar(s, n)
}

/// `mean_rows ‖∇x D̃(x)‖²` for a batch.
pub fn gradient_penalty(d: &DiscriminatorModel, x: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let b = d.bind(&mut tape, false)?;
    let input = tape.constant(x.clone());
    let trace = d.apply(&mut tape, &b, input)?;
    let p = gradient_penalty_node(d, &mut tape, &b, &trace)?;
    tape.value(p).item()
}

fn check_batch(x: &Tensor, dim: usize, what: &str) -> Result<usize> {
    let (n, cols) = x.dims2()?;
    if n == 0 {
        return Err(Error::contract(format!("{what} batch is empty")));
    }
    if cols != dim {
        return Err(Error::contract(format!(
            "{what} batch has {cols} columns, expected {dim}"
        )));
    }
    Ok(n)
}

/// Discriminator loss and its parameter gradient for fixed real and fake
/// batches. Does not touch the spectral states.
pub fn d_loss_and_grad(
    d: &DiscriminatorModel,
    real: &Tensor,
    fake: &Tensor,
    cfg: &TrainConfig,
) -> Result<(DStepStats, ParamVector)> {
    check_batch(real, d.input_dim(), "real")?;
    check_batch(fake, d.input_dim(), "fake")?;
    let mut tape = Tape::new();
    let b = d.bind(&mut tape, true)?;
    let xr = tape.constant(real.clone());
    let xf = tape.constant(fake.clone());
    let tr = d.apply(&mut tape, &b, xr)?;
    let tf = d.apply(&mut tape, &b, xf)?;

    let r = tape.add_scalar(tr.output(), -1.0)?;
    let r = tape.square(r)?;
    let r = tape.mean(r)?;
    let f = tape.square(tf.output())?;
    let f = tape.mean(f)?;
    let sum = tape.add(r, f)?;
    let mut loss = tape.scale(sum, 0.5)?;

    let mut penalty = 0.0;
    if cfg.gp_rho > 0.0 {
        let p = gradient_penalty_node(d, &mut tape, &b, &tr)?;
        penalty = tape.value(p).item()?;
        let weighted = tape.scale(p, cfg.gp_rho * cfg.gp_lambda / 2.0)?;
        loss = tape.add(loss, weighted)?;
    }
    let stats = DStepStats {
        loss: tape.value(loss).item()?,
        penalty,
        mean_real: mean(tape.value(tr.output()).data()),
        mean_fake: mean(tape.value(tf.output()).data()),
    };
    let grads = tape.backward(loss)?;
    let grad = flatten_grads(&grads, &b.params, d.params().layout())?;
    Ok((stats, grad))
}

/// One discriminator update: a power iteration on every spectral state,
/// fresh `z` for a fake batch the size of `real`, then one Adam step.
#[allow(clippy::too_many_arguments)]
pub fn d_step(
    d: &mut DiscriminatorModel,
    g: &GeneratorModel,
    real: &Tensor,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    latent: &mut SeededRng,
    iteration: u64,
) -> Result<DStepStats> {
    let n = check_batch(real, d.input_dim(), "real")?;
    d.power_iterate(1)?;
    let z = g.sample_latent(n, latent)?;
    let fake = g.generate(&z)?;
    let (stats, grad) = d_loss_and_grad(d, real, &fake, cfg)?;
    if !stats.loss.is_finite() || !grad.values().iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            iteration,
            phase: "discriminator",
            loss: stats.loss,
            mean_real: stats.mean_real,
            mean_fake: stats.mean_fake,
        });
    }
    adam_update(d.params_mut(), &grad, adam, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2)?;
    Ok(stats)
}

/// Generator loss, mean `D(G(z))` and the parameter gradient for fixed `z`
/// and optional noise `eps` (same shape as `G(z)`).
pub fn g_loss_and_grad(
    g: &GeneratorModel,
    shadow: &ShadowGenerator,
    d: &DiscriminatorModel,
    z: &Tensor,
    eps: Option<&Tensor>,
    cfg: &TrainConfig,
) -> Result<(f64, f64, ParamVector)> {
    let n = check_batch(z, g.latent_dim(), "latent")?;
    if g.data_dim() != d.input_dim() {
        return Err(Error::contract(
            "generator output width differs from discriminator input",
        ));
    }
    let mut tape = Tape::new();
    let gp = g.bind(&mut tape, true);
    let zin = tape.constant(z.clone());
    let gen = g.apply(&mut tape, &gp, zin)?.output();
    let db = d.bind(&mut tape, false)?;
    let out = d.apply(&mut tape, &db, gen)?.output();
    let mean_fake = mean(tape.value(out).data());

    let a = tape.add_scalar(out, -1.0)?;
    let a = tape.square(a)?;
    let mut loss = tape.mean(a)?;
    if cfg.gamma > 0.0 {
        let mut anchor = shadow.model().generate(z)?;
        if let Some(e) = eps {
            if e.shape() != anchor.shape() {
                return Err(Error::contract("noise shape differs from generated batch"));
            }
            let lambda = cfg.mcmc_lambda;
            anchor = anchor.zip_map(e, |a, e| a - lambda * e);
        }
        let anchor = tape.constant(anchor);
        let diff = tape.sub(gen, anchor)?;
        let sq = tape.square(diff)?;
        let s = tape.sum(sq)?;
        let local = tape.scale(s, cfg.gamma / n as f64)?;
        loss = tape.add(loss, local)?;
    }
    let value = tape.value(loss).item()?;
    let grads = tape.backward(loss)?;
    let grad = flatten_grads(&grads, &gp, g.params().layout())?;
    Ok((value, mean_fake, grad))
}

/// `mean_rows ‖G(z) − Ḡ(z)‖²`.
pub fn delta_g(g: &GeneratorModel, shadow: &ShadowGenerator, z: &Tensor) -> Result<f64> {
    let (n, _) = z.dims2()?;
    let a = g.generate(z)?;
    let b = shadow.model().generate(z)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n as f64)
}

/// One generator update followed by the Polyak update of Ḡ.
#[allow(clippy::too_many_arguments)]
pub fn g_step(
    g: &mut GeneratorModel,
    shadow: &mut ShadowGenerator,
    d: &DiscriminatorModel,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    latent: &mut SeededRng,
    noise: &mut SeededRng,
    iteration: u64,
) -> Result<GStepStats> {
    let z = g.sample_latent(cfg.batch_size, latent)?;
    let eps = if cfg.noise_enabled {
        let n = cfg.batch_size * g.data_dim();
        Some(Tensor::matrix(cfg.batch_size, g.data_dim(), noise.normal_vec(n))?)
    } else {
        None
    };
    let (loss, mean_fake, grad) = g_loss_and_grad(g, shadow, d, &z, eps.as_ref(), cfg)?;
    if !loss.is_finite() || !grad.values().iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            iteration,
            phase: "generator",
            loss,
            mean_real: f64::NAN,
            mean_fake,
        });
    }
    adam_update(g.params_mut(), &grad, adam, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2)?;
    shadow.polyak_update(g)?;
    let delta_g = delta_g(g, shadow, &z)?;
    if !delta_g.is_finite() {
        return Err(Error::Diverged {
            iteration,
            phase: "generator",
            loss: delta_g,
            mean_real: f64::NAN,
            mean_fake,
        });
    }
    Ok(GStepStats {
        loss,
        delta_g,
        mean_fake,
    })
}
