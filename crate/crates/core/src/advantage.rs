//! Generalised advantage estimation over a single rollout.

use crate::approximator::Action;
use crate::error::{Error, Result};

/// One environment instance's trajectory.
///
/// Indexed `[t]` for shared quantities and `[t][agent]` for per-agent ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub observations: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<Action>>,
    pub old_log_probs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    /// `V(s_T)` for the state following the last stored step.
    pub bootstrap_value: f64,
    pub states: Vec<Vec<f64>>,
}

impl RolloutBatch {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_agents(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        let lens = [
            ("observations", self.observations.len()),
            ("actions", self.actions.len()),
            ("old_log_probs", self.old_log_probs.len()),
            ("dones", self.dones.len()),
            ("values", self.values.len()),
            ("states", self.states.len()),
        ];
        for (name, len) in lens {
            if len != t {
                return Err(Error::Shape(format!(
                    "{name} has length {len}, rewards has {t}"
                )));
            }
        }
        check_finite_series(&self.rewards, &self.values, self.bootstrap_value)?;
        if self.old_log_probs.iter().flatten().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("non-finite old log-probability".into()));
        }
        Ok(())
    }
}

/// Per-timestep advantages and value targets, `returns = advantages + values`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn check_finite_series(rewards: &[f64], values: &[f64], bootstrap: f64) -> Result<()> {
    if rewards.iter().chain(values).any(|x| !x.is_finite()) || !bootstrap.is_finite() {
        return Err(Error::InvalidInput("non-finite reward or value in rollout".into()));
    }
    Ok(())
}

pub fn compute_gae(batch: &RolloutBatch, gamma: f64, lambda: f64) -> Result<AdvantageSet> {
    batch.validate()?;
    gae(
        &batch.rewards,
        &batch.values,
        batch.bootstrap_value,
        &batch.dones,
        gamma,
        lambda,
    )
}

/// Backward recursion `Â_t = δ_t + γλ(1 − done_t) Â_{t+1}` with
/// `δ_t = r_t + γ(1 − done_t) V_{t+1} − V_t`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<AdvantageSet> {
    if !(gamma > 0.0 && gamma <= 1.0) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "need gamma in (0, 1] and lambda in [0, 1], got {gamma}, {lambda}"
        )));
    }
    let t_len = rewards.len();
    if values.len() != t_len || dones.len() != t_len {
        return Err(Error::Shape("rewards, values and dones differ in length".into()));
    }
    check_finite_series(rewards, values, bootstrap_value)?;

    let mut advantages = vec![0.0; t_len];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..t_len).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(AdvantageSet { advantages, returns })
}

/// Zero-mean, unit-std advantages (population std, `1e-8` in the
/// denominator). Returns are left untouched.
pub fn normalize_advantages(adv: &AdvantageSet, enabled: bool) -> AdvantageSet {
    if !enabled {
        return adv.clone();
    }
    AdvantageSet {
        advantages: normalized(&adv.advantages),
        returns: adv.returns.clone(),
    }
}

pub(crate) fn normalized(xs: &[f64]) -> Vec<f64> {
    if xs.len() < 2 {
        return xs.to_vec();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    xs.iter().map(|x| (x - mean) / (std + 1e-8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let s = gae(&[1.0], &[0.0], 0.0, &[true], 0.99, 0.95).unwrap();
        assert_eq!(s.advantages, vec![1.0]);
        assert_eq!(s.returns, vec![1.0]);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let rewards = [0.5, -1.0, 2.0, 0.0];
        let values = [0.1, 0.4, -0.3, 0.2];
        let dones = [false, true, false, false];
        let boot = 0.7;
        let gamma = 0.9;
        let s = gae(&rewards, &values, boot, &dones, gamma, 0.0).unwrap();
        for t in 0..4 {
            let next = if t + 1 < 4 { values[t + 1] } else { boot };
            let live = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + gamma * live * next - values[t];
            assert_eq!(s.advantages[t], delta);
        }
    }

    #[test]
    fn returns_identity_is_exact() {
        let s = gae(&[1.0, 2.0, 3.0], &[0.3, 0.1, 0.2], 0.5, &[false; 3], 0.99, 0.95).unwrap();
        for t in 0..3 {
            assert_eq!(s.returns[t], s.advantages[t] + [0.3, 0.1, 0.2][t]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gae(&[f64::NAN], &[0.0], 0.0, &[false], 0.99, 0.95).is_err());
        assert!(gae(&[1.0], &[0.0], f64::INFINITY, &[false], 0.99, 0.95).is_err());
        assert!(gae(&[1.0], &[0.0, 1.0], 0.0, &[false], 0.99, 0.95).is_err());
        assert!(gae(&[1.0], &[0.0], 0.0, &[false], 0.0, 0.95).is_err());
        assert!(gae(&[1.0], &[0.0], 0.0, &[false], 0.99, 1.5).is_err());
    }

    #[test]
    fn batch_validation() {
        let batch = RolloutBatch {
            rewards: vec![1.0, 0.0],
            values: vec![0.0],
            ..Default::default()
        };
        assert!(matches!(compute_gae(&batch, 0.99, 0.95), Err(Error::Shape(_))));
    }

    #[test]
    fn normalization_examples() {
        let set = |a: Vec<f64>| AdvantageSet {
            returns: a.clone(),
            advantages: a,
        };
        let n = normalize_advantages(&set(vec![1.0, -1.0]), true);
        assert!((n.advantages[0] - 1.0).abs() < 1e-7);
        assert!((n.advantages[1] + 1.0).abs() < 1e-7);
        let n = normalize_advantages(&set(vec![5.0, 5.0, 5.0]), true);
        assert_eq!(n.advantages, vec![0.0; 3]);
        assert_eq!(n.returns, vec![5.0; 3]);
        let s = set(vec![3.0, 1.0]);
        assert_eq!(normalize_advantages(&s, false), s);
    }
}
