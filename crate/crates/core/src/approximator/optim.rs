use super::{GradientAccumulator, ParameterVector};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment buffers plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterVector) -> Self {
        Self {
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam descent step: `θ ← θ − lr · m̂ / (√v̂ + ε)`.
pub fn adam_step(
    params: &mut ParameterVector,
    grads: &GradientAccumulator,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    grads.check_matches(params)?;
    if state.m.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Domain(format!("learning rate must be positive, got {lr}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, &g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads.values())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// Rescales `grads` to `max_norm` when their L2 norm exceeds it. Returns the
/// pre-clip norm.
pub fn clip_global_norm(grads: &mut GradientAccumulator, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm && max_norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
