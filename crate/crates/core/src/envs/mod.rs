//! Tiny cooperative environments behind one interface.

mod contract;
mod forage;
mod matrix;

pub use contract::{env_contract_check, ContractReport};
pub use forage::{Forage, FORAGE_EPISODE_LEN, FORAGE_STEP_PENALTY};
pub use matrix::MatrixGame;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Categorical(usize),
    Continuous { dim: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_agents: usize,
    pub action_space: ActionSpace,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub max_episode_len: usize,
}

/// Observation of the world after a reset or a joint step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observations: Vec<Vec<f64>>,
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub t: usize,
}

pub trait Environment {
    fn spec(&self) -> EnvSpec;

    fn reset(&mut self, seed: u64) -> EnvStep;

    /// Advances one joint step. Stepping a finished episode is an error.
    fn step(&mut self, joint_action: &[usize]) -> Result<EnvStep>;

    /// Inclusive bounds on the per-step shared reward.
    fn reward_range(&self) -> (f64, f64);
}

/// Environment selection as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    MatrixGame { agents: usize, actions: usize },
    Forage,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::MatrixGame { agents: 2, actions: 2 }
    }
}

impl EnvConfig {
    pub fn build(&self, agent_id: bool) -> Result<Box<dyn Environment + Send>> {
        match *self {
            EnvConfig::MatrixGame { agents, actions } => {
                Ok(Box::new(MatrixGame::new(agents, actions, agent_id)?))
            }
            EnvConfig::Forage => Ok(Box::new(Forage::new(agent_id))),
        }
    }

    pub fn task_id(&self) -> String {
        match self {
            EnvConfig::MatrixGame { agents, actions } => format!("matrix_{agents}x{actions}"),
            EnvConfig::Forage => "forage".into(),
        }
    }
}

pub(crate) fn check_joint_action(joint_action: &[usize], agents: usize, actions: usize) -> Result<()> {
    if joint_action.len() != agents {
        return Err(Error::Env(format!(
            "expected {agents} actions, got {}",
            joint_action.len()
        )));
    }
    if let Some(a) = joint_action.iter().find(|&&a| a >= actions) {
        return Err(Error::Env(format!(
            "action {a} out of range for {actions} actions"
        )));
    }
    Ok(())
}

pub(crate) fn one_hot(index: usize, len: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| if i == index { 1.0 } else { 0.0 })
}

/// FNV-1a over the bit patterns of an observation vector.
pub fn observation_hash(obs: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in obs {
        for byte in v.to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub timestep: usize,
    pub state: Vec<f64>,
    pub obs_hashes: Vec<String>,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub done: bool,
}

impl TrajectoryRecord {
    /// `step` is the observation the actions were taken from.
    pub fn new(step: &EnvStep, actions: &[usize], next: &EnvStep) -> Self {
        Self {
            timestep: step.t,
            state: step.state.clone(),
            obs_hashes: step
                .observations
                .iter()
                .map(|o| format!("{:016x}", observation_hash(o)))
                .collect(),
            actions: actions.to_vec(),
            reward: next.reward,
            done: next.done,
        }
    }
}

pub fn write_trajectory_jsonl<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory_jsonl(text: &str) -> Result<Vec<TrajectoryRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_dump_round_trip() {
        let mut env = Forage::new(true);
        let first = env.reset(3);
        let next = env.step(&[0, 4]).unwrap();
        let rec = TrajectoryRecord::new(&first, &[0, 4], &next);
        let mut buf = Vec::new();
        write_trajectory_jsonl(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_trajectory_jsonl(&text).unwrap(), vec![rec.clone(), rec]);
    }

    #[test]
    fn env_config_builds() {
        let env = EnvConfig::default().build(true).unwrap();
        assert_eq!(env.spec().num_agents, 2);
        let env = EnvConfig::Forage.build(true).unwrap();
        assert_eq!(env.spec().obs_dim, 77);
        assert!(EnvConfig::MatrixGame { agents: 1, actions: 2 }.build(true).is_err());
    }
}
