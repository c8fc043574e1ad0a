use std::sync::Arc;

use crate::autodiff::{ParamLayout, ParamVector};
use crate::error::{Error, Result};

/// Smallest divisor in the Adam step.
pub const ADAM_FLOOR: f64 = 1e-8;

/// Adam moments for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub step: u64,
}

impl AdamState {
    pub fn new(layout: Arc<ParamLayout>) -> Self {
        AdamState {
            m: ParamVector::zeros(layout.clone()),
            v: ParamVector::zeros(layout),
            step: 0,
        }
    }
}

/// One bias-corrected Adam step:
/// `θ ← θ − lr · m̂ / max(√v̂, 1e-8)`.
pub fn adam_update(
    params: &mut ParamVector,
    grad: &ParamVector,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
) -> Result<()> {
    if !params.same_layout(grad) || !params.same_layout(&state.m) || !params.same_layout(&state.v) {
        return Err(Error::contract("Adam parameter, gradient and moment layouts differ"));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let m = state.m.values_mut();
    let v = state.v.values_mut();
    for (((p, &g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grad.values())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / v_hat.sqrt().max(ADAM_FLOOR);
    }
    Ok(())
}
