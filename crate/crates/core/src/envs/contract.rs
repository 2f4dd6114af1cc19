use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvStep, Environment};

/// Outcome of [`env_contract_check`]. An empty `violations` list means the
/// environment honoured its contract over the sampled steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub steps: usize,
    pub episodes: usize,
    pub min_reward: f64,
    pub max_reward: f64,
    pub violations: Vec<String>,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn rollout(
    env: &mut dyn Environment,
    seed: u64,
    steps: usize,
    report: &mut ContractReport,
) -> Vec<EnvStep> {
    let spec = env.spec();
    let actions = match spec.action_space {
        ActionSpace::Categorical(n) => n,
        ActionSpace::Continuous { .. } => {
            report
                .violations
                .push("contract check only drives categorical action spaces".into());
            return Vec::new();
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(steps + 1);
    let mut current = env.reset(seed);
    trace.push(current.clone());
    let mut episode_len = 0;
    for _ in 0..steps {
        let joint: Vec<usize> = (0..spec.num_agents).map(|_| rng.random_range(0..actions)).collect();
        match env.step(&joint) {
            Ok(next) => current = next,
            Err(e) => {
                report.violations.push(format!("step failed: {e}"));
                return trace;
            }
        }
        episode_len += 1;
        trace.push(current.clone());
        if current.done {
            report.episodes += 1;
            episode_len = 0;
            current = env.reset(rng.random());
            trace.push(current.clone());
        } else if episode_len >= spec.max_episode_len {
            report.violations.push(format!(
                "episode exceeded max length {}",
                spec.max_episode_len
            ));
            return trace;
        }
    }
    trace
}

/// Drives `env` with seeded random joint actions for `steps` steps and checks
/// determinism, dimension constancy, reward finiteness and bounds, and
/// termination within the declared episode length. Never panics on a
/// misbehaving environment; problems are listed in the report.
pub fn env_contract_check(env: &mut dyn Environment, seed: u64, steps: usize) -> ContractReport {
    let spec = env.spec();
    let (lo, hi) = env.reward_range();
    let mut report = ContractReport {
        steps,
        min_reward: f64::INFINITY,
        max_reward: f64::NEG_INFINITY,
        ..Default::default()
    };

    let first_a = env.reset(seed);
    let first_b = env.reset(seed);
    if first_a != first_b {
        report.violations.push("two resets with one seed differ".into());
    }

    let trace = rollout(env, seed, steps, &mut report);
    let mut replay_report = ContractReport::default();
    let replay = rollout(env, seed, steps, &mut replay_report);
    if trace != replay {
        report
            .violations
            .push("identical seed and actions produced different trajectories".into());
    }

    for s in &trace {
        if s.observations.len() != spec.num_agents {
            report.violations.push(format!(
                "t={}: {} observations for {} agents",
                s.t,
                s.observations.len(),
                spec.num_agents
            ));
        }
        if s.observations.iter().any(|o| o.len() != spec.obs_dim) {
            report.violations.push(format!("t={}: observation dimension changed", s.t));
        }
        if s.state.len() != spec.state_dim {
            report.violations.push(format!("t={}: state dimension changed", s.t));
        }
        if !s.reward.is_finite() {
            report.violations.push(format!("t={}: non-finite reward", s.t));
            continue;
        }
        if s.t > 0 {
            report.min_reward = report.min_reward.min(s.reward);
            report.max_reward = report.max_reward.max(s.reward);
            if s.reward < lo - 1e-12 || s.reward > hi + 1e-12 {
                report.violations.push(format!(
                    "t={}: reward {} outside [{lo}, {hi}]",
                    s.t, s.reward
                ));
            }
        }
        if s.t > spec.max_episode_len {
            report.violations.push(format!("t={} beyond max episode length", s.t));
        }
    }
    report
}
