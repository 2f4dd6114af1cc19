use serde::{Deserialize, Serialize};

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::trust_region::TrustRegionSpec;

/// Everything that determines one training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub trust_region: TrustRegionSpec,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub env: EnvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coeff: f64,
    pub value_clip_eps: f64,
    pub num_minibatches: usize,
    pub num_epochs: usize,
    pub rollout_length: usize,
    /// Parallel environment instances per update, stepped in index order.
    pub update_batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub value_coeff: f64,
    pub advantage_normalization: bool,
    pub agent_id: bool,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Environment steps summed over all instances.
    pub total_timesteps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            entropy_coeff: 1e-2,
            value_clip_eps: 0.2,
            num_minibatches: 2,
            num_epochs: 4,
            rollout_length: 128,
            update_batch_size: 2,
            gamma: 0.99,
            gae_lambda: 0.95,
            max_grad_norm: 0.5,
            value_coeff: 0.5,
            advantage_normalization: true,
            agent_id: true,
            hidden: vec![64, 64],
            seed: 0,
            total_timesteps: 128 * 2 * 300,
            eval_interval: 10,
            eval_episodes: 32,
        }
    }
}

fn check(ok: bool, key: &str, constraint: &str, value: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be {constraint}, got {value}")))
    }
}

impl TrainerConfig {
    pub fn steps_per_update(&self) -> usize {
        self.rollout_length * self.update_batch_size
    }

    pub fn num_updates(&self) -> usize {
        self.total_timesteps / self.steps_per_update().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        check(positive(self.actor_lr), "trainer.actor_lr", "positive", self.actor_lr)?;
        check(positive(self.critic_lr), "trainer.critic_lr", "positive", self.critic_lr)?;
        check(
            self.entropy_coeff >= 0.0 && self.entropy_coeff.is_finite(),
            "trainer.entropy_coeff",
            "non-negative",
            self.entropy_coeff,
        )?;
        check(positive(self.value_clip_eps), "trainer.value_clip_eps", "positive", self.value_clip_eps)?;
        check(self.num_minibatches > 0, "trainer.num_minibatches", "positive", self.num_minibatches)?;
        check(self.num_epochs > 0, "trainer.num_epochs", "positive", self.num_epochs)?;
        check(self.rollout_length > 0, "trainer.rollout_length", "positive", self.rollout_length)?;
        check(self.update_batch_size > 0, "trainer.update_batch_size", "positive", self.update_batch_size)?;
        check(
            self.gamma > 0.0 && self.gamma <= 1.0,
            "trainer.gamma",
            "in (0, 1]",
            self.gamma,
        )?;
        check(
            (0.0..=1.0).contains(&self.gae_lambda),
            "trainer.gae_lambda",
            "in [0, 1]",
            self.gae_lambda,
        )?;
        check(positive(self.max_grad_norm), "trainer.max_grad_norm", "positive", self.max_grad_norm)?;
        check(positive(self.value_coeff), "trainer.value_coeff", "positive", self.value_coeff)?;
        check(
            self.hidden.iter().all(|&h| h > 0),
            "trainer.hidden",
            "a list of positive widths",
            format!("{:?}", self.hidden),
        )?;
        check(
            self.num_minibatches <= self.steps_per_update(),
            "trainer.num_minibatches",
            "at most rollout_length * update_batch_size",
            self.num_minibatches,
        )?;
        check(
            self.total_timesteps >= self.steps_per_update(),
            "trainer.total_timesteps",
            "at least rollout_length * update_batch_size",
            self.total_timesteps,
        )?;
        check(self.eval_interval > 0, "trainer.eval_interval", "positive", self.eval_interval)?;
        check(self.eval_episodes > 0, "trainer.eval_episodes", "positive", self.eval_episodes)
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.trust_region
            .validate()
            .map_err(|e| Error::Config(format!("trust_region: {e}")))?;
        self.trainer.validate()?;
        match self.env {
            EnvConfig::MatrixGame { agents, actions } => {
                check(agents >= 2, "env.agents", "at least 2", agents)?;
                check(actions >= 2, "env.actions", "at least 2", actions)
            }
            EnvConfig::Forage => Ok(()),
        }
    }

    /// Canonical JSON form: field order is fixed by the type definitions.
    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.trainer.rollout_length, 128);
        assert_eq!(c.trainer.update_batch_size, 2);
        assert_eq!(c.trainer.num_updates(), 300);
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = TrainConfig::default();
        c.trainer.actor_lr = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("trainer.actor_lr"), "{msg}");

        let c = TrainConfig {
            trust_region: TrustRegionSpec::Mars { b_lower: 1.5, b_upper: 1.25 },
            ..TrainConfig::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("b_lower"), "{msg}");
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"trainer": {"actor_lr": 0.001, "warmup": 3}}"#;
        let err = serde_json::from_str::<TrainConfig>(text).unwrap_err().to_string();
        assert!(err.contains("warmup"), "{err}");
        let text = r#"{"trust_region": {"variant": "mars", "b_lower": 0.5, "eps": 0.2}}"#;
        assert!(serde_json::from_str::<TrainConfig>(text).is_err());
    }

    #[test]
    fn omitted_bounds_take_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"trust_region": {"variant": "mars"}}"#).unwrap();
        assert_eq!(c.trust_region, TrustRegionSpec::Mars { b_lower: 0.8, b_upper: 1.25 });
        let back: TrainConfig = serde_json::from_str(&c.to_canonical_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
