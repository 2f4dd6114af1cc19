use crate::approximator::{Action, GradientAccumulator, Mlp, ParameterVector, Policy};
use crate::error::{Error, Result};
use crate::objective::{JointAdvantage, ProbabilityRatio, LOG_RATIO_CLAMP};
use crate::trust_region::{resolve, TrustRegionSpec};

/// One timestep of the update buffer with every agent's data kept together.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub old_log_probs: Vec<f64>,
    /// Joint advantage, possibly normalised. Constant during differentiation.
    pub advantage: f64,
    pub state: Vec<f64>,
    pub old_value: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    pub loss: f64,
    pub mean_objective: f64,
    pub mean_entropy: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub grads: GradientAccumulator,
}

#[derive(Debug, Clone)]
pub struct CriticLoss {
    pub loss: f64,
    pub grads: GradientAccumulator,
}

fn non_finite(what: &'static str, detail: String) -> Error {
    Error::NonFinite {
        what,
        update: 0,
        detail,
    }
}

/// Negated mean surrogate over agents and timesteps minus `beta` times the
/// mean entropy. The per-sample surrogate is resolved from the stored
/// advantage, so penalty weights carry no gradient.
pub fn actor_loss(
    policy: &Policy,
    params: &ParameterVector,
    batch: &[&Sample],
    spec: &TrustRegionSpec,
    beta: f64,
) -> Result<ActorLoss> {
    let count: usize = batch.iter().map(|s| s.actions.len()).sum();
    if count == 0 {
        return Err(Error::Shape("actor minibatch is empty".into()));
    }
    let m = count as f64;
    let mut grads = GradientAccumulator::zeros_like(params);
    let mut objective = 0.0;
    let mut entropy = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;

    for sample in batch {
        let n = sample.actions.len();
        if sample.observations.len() != n || sample.old_log_probs.len() != n {
            return Err(Error::Shape(
                "sample observations, actions and old log-probs differ in agent count".into(),
            ));
        }
        let surrogate = resolve(spec, JointAdvantage::new(sample.advantage)?)?;
        for i in 0..n {
            let tape = policy.forward(params, &sample.observations[i])?;
            let logp = policy.log_prob(&tape, &sample.actions[i])?;
            let old = sample.old_log_probs[i];
            let r = ProbabilityRatio::from_log_probs(logp, old)?;
            let eval = surrogate.eval(r);
            objective += eval.objective;
            entropy += tape.distribution().entropy();
            min_ratio = min_ratio.min(r.value());
            max_ratio = max_ratio.max(r.value());
            // d r / d logp = r, except where the clamp holds r constant
            let d_logp = if (logp - old).abs() < LOG_RATIO_CLAMP {
                eval.ratio_gradient * r.value()
            } else {
                0.0
            };
            policy.backward(params, &tape, &sample.actions[i], -d_logp / m, -beta / m, &mut grads)?;
        }
    }

    let mean_objective = objective / m;
    let mean_entropy = entropy / m;
    let loss = -mean_objective - beta * mean_entropy;
    if !loss.is_finite() {
        return Err(non_finite(
            "actor loss",
            format!("objective {mean_objective}, entropy {mean_entropy}, ratios [{min_ratio}, {max_ratio}]"),
        ));
    }
    if !grads.is_finite() {
        return Err(non_finite("actor gradient", format!("loss {loss}")));
    }
    Ok(ActorLoss {
        loss,
        mean_objective,
        mean_entropy,
        min_ratio,
        max_ratio,
        grads,
    })
}

/// `value_coeff · mean(max((V − R)², (V_old + clip(V − V_old, ±ε) − R)²))`.
pub fn critic_loss(
    critic: &Mlp,
    params: &ParameterVector,
    batch: &[&Sample],
    value_clip_eps: f64,
    value_coeff: f64,
) -> Result<CriticLoss> {
    if batch.is_empty() {
        return Err(Error::Shape("critic minibatch is empty".into()));
    }
    let m = batch.len() as f64;
    let mut grads = GradientAccumulator::zeros_like(params);
    let mut total = 0.0;
    for sample in batch {
        let (out, tape) = critic.forward(params, &sample.state)?;
        let v = out[0];
        let target = sample.value_target;
        let delta = v - sample.old_value;
        let clipped = sample.old_value + delta.clamp(-value_clip_eps, value_clip_eps);
        let plain_sq = (v - target).powi(2);
        let clipped_sq = (clipped - target).powi(2);
        let d_v = if plain_sq >= clipped_sq {
            total += plain_sq;
            2.0 * (v - target)
        } else {
            total += clipped_sq;
            if delta.abs() < value_clip_eps {
                2.0 * (clipped - target)
            } else {
                0.0
            }
        };
        critic.backward(params, &tape, &[value_coeff * d_v / m], &mut grads)?;
    }
    let loss = value_coeff * total / m;
    if !loss.is_finite() {
        return Err(non_finite("critic loss", format!("sum of squares {total}")));
    }
    if !grads.is_finite() {
        return Err(non_finite("critic gradient", format!("loss {loss}")));
    }
    Ok(CriticLoss { loss, grads })
}
