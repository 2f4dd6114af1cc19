//! Two-agent dot-collection gridworld on a walled 7×7 board.
//!
//! Actions are `0 Up, 1 Down, 2 Left, 3 Right, 4 Eat`. Eating on a dot cell
//! yields +1.0 shared evenly between every agent eating that dot in the same
//! step; the team pays 0.025 per step. Dots reappear on their original cells
//! once all are eaten. Agents may share a cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_joint_action, one_hot, ActionSpace, EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};

pub const FORAGE_EPISODE_LEN: usize = 64;
pub const FORAGE_STEP_PENALTY: f64 = 0.025;
const SIZE: usize = 7;
const VIEW: usize = 5;
const AGENTS: usize = 2;
const ACTIONS: usize = 5;
const EAT: usize = 4;

/// `#` wall, `o` dot, `A`/`B` agent starts.
const TEMPLATES: [[&str; SIZE]; 4] = [
    [
        "#######", "#o   o#", "# # # #", "#  AB #", "# # # #", "#o   o#", "#######",
    ],
    [
        "#######", "#o# #o#", "# # # #", "#  AB #", "# # # #", "#o# #o#", "#######",
    ],
    [
        "#######", "#o   o#", "### ###", "#  AB #", "### ###", "#o   o#", "#######",
    ],
    [
        "#######", "#o#  o#", "# # ###", "#  AB #", "### # #", "#o  #o#", "#######",
    ],
];

#[derive(Debug, Clone)]
struct Layout {
    walls: [[bool; SIZE]; SIZE],
    dots: Vec<(usize, usize)>,
    starts: [(usize, usize); AGENTS],
}

fn parse_template(rows: &[&str; SIZE]) -> Layout {
    let mut walls = [[false; SIZE]; SIZE];
    let mut dots = Vec::new();
    let mut starts = [(0, 0); AGENTS];
    for (r, row) in rows.iter().enumerate() {
        for (c, ch) in row.chars().enumerate() {
            match ch {
                '#' => walls[r][c] = true,
                'o' => dots.push((r, c)),
                'A' => starts[0] = (r, c),
                'B' => starts[1] = (r, c),
                _ => {}
            }
        }
    }
    Layout { walls, dots, starts }
}

#[derive(Debug, Clone)]
pub struct Forage {
    agent_id: bool,
    layout: Layout,
    template: usize,
    dots_present: Vec<bool>,
    positions: [(usize, usize); AGENTS],
    t: usize,
    dots_eaten: usize,
}

impl Forage {
    pub fn new(agent_id: bool) -> Self {
        let layout = parse_template(&TEMPLATES[0]);
        let n = layout.dots.len();
        Self {
            agent_id,
            positions: layout.starts,
            layout,
            template: 0,
            dots_present: vec![true; n],
            t: 0,
            dots_eaten: 0,
        }
    }

    pub fn template(&self) -> usize {
        self.template
    }

    pub fn positions(&self) -> [(usize, usize); AGENTS] {
        self.positions
    }

    /// Dots eaten since the last reset, counting respawned ones again.
    pub fn dots_eaten(&self) -> usize {
        self.dots_eaten
    }

    fn dot_at(&self, cell: (usize, usize)) -> Option<usize> {
        self.layout
            .dots
            .iter()
            .zip(&self.dots_present)
            .position(|(&d, &present)| present && d == cell)
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let (r0, c0) = self.positions[agent];
        let half = (VIEW / 2) as isize;
        let mut obs = Vec::with_capacity(VIEW * VIEW * 3 + AGENTS);
        for dr in -half..=half {
            for dc in -half..=half {
                let r = r0 as isize + dr;
                let c = c0 as isize + dc;
                let inside = (0..SIZE as isize).contains(&r) && (0..SIZE as isize).contains(&c);
                if !inside {
                    obs.extend([1.0, 0.0, 0.0]);
                    continue;
                }
                let cell = (r as usize, c as usize);
                let wall = self.layout.walls[cell.0][cell.1];
                let dot = self.dot_at(cell).is_some();
                let other = (0..AGENTS).any(|j| j != agent && self.positions[j] == cell);
                obs.extend([wall, dot, other].map(|b| f64::from(u8::from(b))));
            }
        }
        if self.agent_id {
            obs.extend(one_hot(agent, AGENTS));
        }
        obs
    }

    fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(SIZE * SIZE * (2 + AGENTS) + 1);
        for r in 0..SIZE {
            for c in 0..SIZE {
                s.push(f64::from(u8::from(self.layout.walls[r][c])));
                s.push(f64::from(u8::from(self.dot_at((r, c)).is_some())));
                for a in 0..AGENTS {
                    s.push(f64::from(u8::from(self.positions[a] == (r, c))));
                }
            }
        }
        s.push(self.t as f64 / FORAGE_EPISODE_LEN as f64);
        s
    }

    fn snapshot(&self, reward: f64) -> EnvStep {
        EnvStep {
            observations: (0..AGENTS).map(|i| self.observe(i)).collect(),
            state: self.state(),
            reward,
            done: self.t >= FORAGE_EPISODE_LEN,
            t: self.t,
        }
    }
}

impl Environment for Forage {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: AGENTS,
            action_space: ActionSpace::Categorical(ACTIONS),
            obs_dim: VIEW * VIEW * 3 + if self.agent_id { AGENTS } else { 0 },
            state_dim: SIZE * SIZE * (2 + AGENTS) + 1,
            max_episode_len: FORAGE_EPISODE_LEN,
        }
    }

    fn reset(&mut self, seed: u64) -> EnvStep {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.template = rng.random_range(0..TEMPLATES.len());
        self.layout = parse_template(&TEMPLATES[self.template]);
        self.dots_present = vec![true; self.layout.dots.len()];
        self.positions = self.layout.starts;
        self.t = 0;
        self.dots_eaten = 0;
        self.snapshot(0.0)
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<EnvStep> {
        if self.t >= FORAGE_EPISODE_LEN {
            return Err(Error::Env("episode finished; call reset".into()));
        }
        check_joint_action(joint_action, AGENTS, ACTIONS)?;

        let mut reward = -FORAGE_STEP_PENALTY;
        let mut eaters = vec![0usize; self.layout.dots.len()];
        for (agent, &a) in joint_action.iter().enumerate() {
            if a == EAT {
                if let Some(d) = self.dot_at(self.positions[agent]) {
                    eaters[d] += 1;
                }
            }
        }
        for (d, &count) in eaters.iter().enumerate() {
            if count > 0 {
                // each eater's share is 1/count; the team total is 1.0
                let share = 1.0 / count as f64;
                reward += (0..count).map(|_| share).sum::<f64>();
                self.dots_present[d] = false;
                self.dots_eaten += 1;
            }
        }

        for (agent, &a) in joint_action.iter().enumerate() {
            let (r, c) = self.positions[agent];
            let target = match a {
                0 => (r - 1, c),
                1 => (r + 1, c),
                2 => (r, c - 1),
                3 => (r, c + 1),
                _ => (r, c),
            };
            // the border is walled, so neighbours of interior cells are in range
            if !self.layout.walls[target.0][target.1] {
                self.positions[agent] = target;
            }
        }

        if self.dots_present.iter().all(|&p| !p) {
            self.dots_present.iter_mut().for_each(|p| *p = true);
        }
        self.t += 1;
        Ok(self.snapshot(reward))
    }

    fn reward_range(&self) -> (f64, f64) {
        // every agent can finish a different dot in the same step
        (-FORAGE_STEP_PENALTY, AGENTS as f64 - FORAGE_STEP_PENALTY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn env_on_template(t: usize) -> Forage {
        let mut env = Forage::new(true);
        for seed in 0.. {
            env.reset(seed);
            if env.template() == t {
                return env;
            }
        }
        unreachable!()
    }

    #[test]
    fn templates_are_walled_with_four_dots() {
        for rows in &TEMPLATES {
            let l = parse_template(rows);
            assert_eq!(l.dots.len(), 4);
            for i in 0..SIZE {
                assert!(l.walls[0][i] && l.walls[SIZE - 1][i] && l.walls[i][0] && l.walls[i][SIZE - 1]);
            }
            for &(r, c) in &l.starts {
                assert!(!l.walls[r][c]);
            }
        }
    }

    #[test]
    fn every_template_is_connected() {
        for rows in &TEMPLATES {
            let l = parse_template(rows);
            let mut seen = [[false; SIZE]; SIZE];
            let mut stack = vec![l.starts[0]];
            while let Some((r, c)) = stack.pop() {
                if l.walls[r][c] || seen[r][c] {
                    continue;
                }
                seen[r][c] = true;
                stack.extend([(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]);
            }
            assert!(l.dots.iter().all(|&(r, c)| seen[r][c]));
            assert!(seen[l.starts[1].0][l.starts[1].1]);
        }
    }

    #[test]
    fn wall_bump_is_a_no_op() {
        let mut env = env_on_template(2);
        // row 2 of template 2 is wall above (3,4)
        let before = env.positions();
        let s = env.step(&[4, 0]).unwrap();
        assert_eq!(env.positions()[1], before[1]);
        assert!(close(s.reward, -0.025));
    }

    #[test]
    fn shared_dot_splits_reward() {
        let mut env = env_on_template(0);
        env.positions = [(1, 1), (1, 1)];
        let s = env.step(&[EAT, EAT]).unwrap();
        assert!(close(s.reward, 1.0 - 0.025));
        assert_eq!(env.dots_eaten(), 1);
    }

    #[test]
    fn distinct_dots_in_one_step() {
        let mut env = env_on_template(0);
        env.positions = [(1, 1), (5, 5)];
        let s = env.step(&[EAT, EAT]).unwrap();
        assert!(close(s.reward, 2.0 - 0.025));
    }

    #[test]
    fn idle_episode_returns_penalty_only() {
        let mut env = Forage::new(true);
        let mut s = env.reset(11);
        let mut ret = 0.0;
        let mut steps = 0;
        while !s.done {
            s = env.step(&[EAT, EAT]).unwrap();
            ret += s.reward;
            steps += 1;
        }
        assert_eq!(steps, 64);
        assert!(close(ret, -1.6));
        assert!(env.step(&[0, 0]).is_err());
    }

    #[test]
    fn dots_respawn_after_all_eaten() {
        let mut env = env_on_template(0);
        let dots = env.layout.dots.clone();
        for (i, &d) in dots.iter().enumerate() {
            env.positions = [d, (3, 3)];
            env.step(&[EAT, 4]).unwrap();
            if i + 1 < dots.len() {
                assert!(!env.dots_present[i]);
            }
        }
        assert!(env.dots_present.iter().all(|&p| p));
        assert_eq!(env.dots_eaten(), 4);
    }

    #[test]
    fn observation_layout() {
        let mut env = Forage::new(true);
        let s = env.reset(0);
        assert_eq!(s.observations[0].len(), 77);
        assert_eq!(&s.observations[0][75..], &[1.0, 0.0]);
        assert_eq!(&s.observations[1][75..], &[0.0, 1.0]);
        // the other agent is directly to the right of agent 0: view cell (2,3)
        let idx = (2 * VIEW + 3) * 3 + 2;
        assert_eq!(s.observations[0][idx], 1.0);
        assert_eq!(s.state.len(), env.spec().state_dim);
    }

    #[test]
    fn out_of_range_action() {
        let mut env = Forage::new(true);
        env.reset(0);
        assert!(env.step(&[5, 0]).is_err());
    }
}
