use serde::{Deserialize, Serialize};

use crate::approximator::Categorical;
use crate::error::{Error, Result};
use crate::objective::{JointAdvantage, ProbabilityRatio};
use crate::trust_region::{resolve, TrustRegionSpec};

/// Single-state bandit protocol: one action receives a fixed advantage and
/// the logits follow plain gradient ascent on the resolved surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub steps: usize,
    pub lr: f64,
    pub advantage: f64,
    /// Gradient steps taken against one frozen `π_old` before it is refreshed.
    pub steps_per_update: usize,
    pub actions: usize,
    pub target_action: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.05,
            advantage: -3.0,
            steps_per_update: 10,
            actions: 4,
            target_action: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub spec: TrustRegionSpec,
    pub config: ProbeConfig,
    /// Target-action probability before the first step and after each step.
    pub probabilities: Vec<f64>,
    pub final_probability: f64,
    pub min_probability: f64,
}

pub fn collapse_probe(spec: &TrustRegionSpec, config: &ProbeConfig) -> Result<ProbeResult> {
    spec.validate()?;
    if config.actions < 2 || config.target_action >= config.actions {
        return Err(Error::InvalidInput(format!(
            "probe needs at least 2 actions and a target below {}, got target {}",
            config.actions, config.target_action
        )));
    }
    if config.steps_per_update == 0 || !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidInput(
            "probe needs steps_per_update > 0 and a positive learning rate".into(),
        ));
    }
    let surrogate = resolve(spec, JointAdvantage::new(config.advantage)?)?;
    let a = config.target_action;
    let mut logits = vec![0.0; config.actions];
    let mut dist = Categorical::from_logits(&logits)?;
    let mut old_logp = dist.log_prob(a)?;
    let mut probabilities = Vec::with_capacity(config.steps + 1);
    probabilities.push(dist.log_prob(a)?.exp());

    for step in 0..config.steps {
        if step % config.steps_per_update == 0 {
            old_logp = dist.log_prob(a)?;
        }
        let r = ProbabilityRatio::from_log_probs(dist.log_prob(a)?, old_logp)?;
        let eval = surrogate.eval(r);
        let scale = eval.ratio_gradient * r.value();
        for (l, g) in logits.iter_mut().zip(dist.grad_log_prob(a)?) {
            *l += config.lr * scale * g;
        }
        dist = Categorical::from_logits(&logits)?;
        probabilities.push(dist.log_prob(a)?.exp());
    }

    let final_probability = *probabilities.last().unwrap_or(&0.0);
    let min_probability = probabilities.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProbeResult {
        spec: *spec,
        config: config.clone(),
        probabilities,
        final_probability,
        min_probability,
    })
}
