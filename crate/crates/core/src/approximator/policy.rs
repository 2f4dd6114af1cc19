use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Categorical, DiagGaussian, GradientAccumulator, Mlp, MlpTape, ParameterVector, PolicyDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    Categorical { actions: usize },
    /// The network emits `dim` means followed by `dim` log-stds.
    Gaussian { dim: usize },
}

impl HeadKind {
    fn output_dim(self) -> usize {
        match self {
            HeadKind::Categorical { actions } => actions,
            HeadKind::Gaussian { dim } => 2 * dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }
}

/// MLP torso followed by a distribution head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    net: Mlp,
    head: HeadKind,
}

#[derive(Debug, Clone)]
pub struct PolicyTape {
    mlp: MlpTape,
    dist: PolicyDistribution,
}

impl PolicyTape {
    pub fn distribution(&self) -> &PolicyDistribution {
        &self.dist
    }
}

impl Policy {
    pub fn new(obs_dim: usize, hidden: &[usize], head: HeadKind) -> Self {
        Self {
            net: Mlp::new(obs_dim, hidden, head.output_dim()),
            head,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, output_gain: f64) -> ParameterVector {
        self.net.init(rng, 2f64.sqrt(), output_gain)
    }

    pub fn forward(&self, params: &ParameterVector, obs: &[f64]) -> Result<PolicyTape> {
        let (out, mlp) = self.net.forward(params, obs)?;
        let dist = match self.head {
            HeadKind::Categorical { .. } => PolicyDistribution::Categorical(Categorical::from_logits(&out)?),
            HeadKind::Gaussian { dim } => {
                PolicyDistribution::Gaussian(DiagGaussian::new(&out[..dim], &out[dim..])?)
            }
        };
        Ok(PolicyTape { mlp, dist })
    }

    pub fn log_prob(&self, tape: &PolicyTape, action: &Action) -> Result<f64> {
        match (&tape.dist, action) {
            (PolicyDistribution::Categorical(c), Action::Discrete(a)) => c.log_prob(*a),
            (PolicyDistribution::Gaussian(g), Action::Continuous(a)) => g.log_prob(a),
            _ => Err(Error::Shape("action kind does not match policy head".into())),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, tape: &PolicyTape, rng: &mut R) -> Result<Action> {
        match &tape.dist {
            PolicyDistribution::Categorical(c) => Ok(Action::Discrete(c.sample(rng.random::<f64>()))),
            PolicyDistribution::Gaussian(g) => {
                let noise: Vec<f64> = (0..g.dim()).map(|_| rng.sample(StandardNormal)).collect();
                g.sample(&noise).map(Action::Continuous)
            }
        }
    }

    /// Accumulates `w_log_prob · ∇ log π(action) + w_entropy · ∇ H` into `grads`.
    pub fn backward(
        &self,
        params: &ParameterVector,
        tape: &PolicyTape,
        action: &Action,
        w_log_prob: f64,
        w_entropy: f64,
        grads: &mut GradientAccumulator,
    ) -> Result<()> {
        let d_out = match (&tape.dist, action) {
            (PolicyDistribution::Categorical(c), Action::Discrete(a)) => {
                let gl = c.grad_log_prob(*a)?;
                let gh = c.grad_entropy();
                gl.iter().zip(&gh).map(|(l, h)| w_log_prob * l + w_entropy * h).collect::<Vec<_>>()
            }
            (PolicyDistribution::Gaussian(g), Action::Continuous(a)) => {
                let (dm, ds) = g.grad_log_prob(a)?;
                let gh = g.grad_entropy();
                dm.iter()
                    .map(|d| w_log_prob * d)
                    .chain(ds.iter().zip(&gh).map(|(d, h)| w_log_prob * d + w_entropy * h))
                    .collect()
            }
            _ => return Err(Error::Shape("action kind does not match policy head".into())),
        };
        self.net.backward(params, &tape.mlp, &d_out, grads)?;
        Ok(())
    }
}
