use super::{check_joint_action, one_hot, ActionSpace, EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};

/// One-shot coordination game: reward 1 when every agent picks a different
/// action, 0 otherwise.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    agents: usize,
    actions: usize,
    agent_id: bool,
    finished: bool,
}

impl MatrixGame {
    pub fn new(agents: usize, actions: usize, agent_id: bool) -> Result<Self> {
        if agents < 2 || actions < 2 {
            return Err(Error::Env(format!(
                "matrix game needs at least 2 agents and 2 actions, got {agents}, {actions}"
            )));
        }
        Ok(Self {
            agents,
            actions,
            agent_id,
            finished: false,
        })
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.agents)
            .map(|i| {
                let mut o = vec![1.0];
                if self.agent_id {
                    o.extend(one_hot(i, self.agents));
                }
                o
            })
            .collect()
    }

    fn obs_dim(&self) -> usize {
        1 + if self.agent_id { self.agents } else { 0 }
    }
}

impl Environment for MatrixGame {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: self.agents,
            action_space: ActionSpace::Categorical(self.actions),
            obs_dim: self.obs_dim(),
            state_dim: 1,
            max_episode_len: 1,
        }
    }

    fn reset(&mut self, _seed: u64) -> EnvStep {
        self.finished = false;
        EnvStep {
            observations: self.observations(),
            state: vec![0.0],
            reward: 0.0,
            done: false,
            t: 0,
        }
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<EnvStep> {
        if self.finished {
            return Err(Error::Env("episode finished; call reset".into()));
        }
        check_joint_action(joint_action, self.agents, self.actions)?;
        let mut seen = vec![false; self.actions];
        let distinct = joint_action
            .iter()
            .all(|&a| !std::mem::replace(&mut seen[a], true));
        self.finished = true;
        Ok(EnvStep {
            observations: self.observations(),
            state: vec![0.0],
            reward: if distinct { 1.0 } else { 0.0 },
            done: true,
            t: 1,
        })
    }

    fn reward_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_and_colliding() {
        let mut g = MatrixGame::new(2, 2, true).unwrap();
        g.reset(0);
        let s = g.step(&[0, 1]).unwrap();
        assert_eq!((s.reward, s.done), (1.0, true));
        g.reset(0);
        let s = g.step(&[1, 1]).unwrap();
        assert_eq!((s.reward, s.done), (0.0, true));
    }

    #[test]
    fn uniform_play_expected_return_by_enumeration() {
        let mut g = MatrixGame::new(3, 3, true).unwrap();
        let mut total = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    g.reset(0);
                    total += g.step(&[a, b, c]).unwrap().reward;
                }
            }
        }
        assert_eq!(total, 6.0);
        assert!((total / 27.0 - 0.2222).abs() < 1e-4);
    }

    #[test]
    fn observations_carry_agent_id() {
        let mut g = MatrixGame::new(2, 2, true).unwrap();
        let s = g.reset(0);
        assert_eq!(s.observations, vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]]);
        assert_eq!(s.state, vec![0.0]);
        let mut g = MatrixGame::new(2, 2, false).unwrap();
        assert_eq!(g.reset(0).observations[0], vec![1.0]);
    }

    #[test]
    fn errors() {
        let mut g = MatrixGame::new(2, 2, true).unwrap();
        g.reset(0);
        assert!(g.step(&[0, 2]).is_err());
        assert!(g.step(&[0]).is_err());
        g.step(&[0, 1]).unwrap();
        assert!(g.step(&[0, 1]).is_err());
    }
}
