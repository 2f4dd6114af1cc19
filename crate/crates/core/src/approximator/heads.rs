use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Softmax distribution over a finite action set, held in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::Shape(format!(
                "categorical head needs at least 2 logits, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("non-finite logit".into()));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(Self {
            log_probs: logits.iter().map(|l| l - lse).collect(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.log_probs.len()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, action: usize) -> Result<f64> {
        self.log_probs.get(action).copied().ok_or_else(|| {
            Error::Shape(format!(
                "action {action} out of range for {} actions",
                self.log_probs.len()
            ))
        })
    }

    pub fn entropy(&self) -> f64 {
        let h: f64 = self
            .log_probs
            .iter()
            .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { -l.exp() * l })
            .sum();
        h.max(0.0)
    }

    /// Inverse-CDF sample from a uniform variate in `[0, 1)`.
    pub fn sample(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        for (i, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if uniform < acc {
                return i;
            }
        }
        // rounding left the tail short of 1; take the last action with mass
        self.log_probs
            .iter()
            .rposition(|l| l.exp() > 0.0)
            .unwrap_or(self.log_probs.len() - 1)
    }

    /// `∂ log p(action) / ∂ logits = onehot(action) − p`.
    pub fn grad_log_prob(&self, action: usize) -> Result<Vec<f64>> {
        self.log_prob(action)?;
        Ok(self
            .log_probs
            .iter()
            .enumerate()
            .map(|(i, l)| f64::from(u8::from(i == action)) - l.exp())
            .collect())
    }

    /// `∂H / ∂logits_j = −p_j (log p_j + H)`.
    pub fn grad_entropy(&self) -> Vec<f64> {
        let h = self.entropy();
        self.log_probs
            .iter()
            .map(|&l| {
                let p = l.exp();
                if p == 0.0 {
                    0.0
                } else {
                    -p * (l + h)
                }
            })
            .collect()
    }
}

/// Diagonal Gaussian with log-std clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_std: Vec<f64>,
    /// Whether each raw log-std was inside the clamp range.
    active: Vec<bool>,
}

impl DiagGaussian {
    pub fn new(mean: &[f64], log_std: &[f64]) -> Result<Self> {
        if mean.len() != log_std.len() || mean.is_empty() {
            return Err(Error::Shape(format!(
                "mean and log_std lengths differ or are empty ({} vs {})",
                mean.len(),
                log_std.len()
            )));
        }
        if mean.iter().chain(log_std).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Gaussian parameter".into()));
        }
        let active = log_std
            .iter()
            .map(|&s| (LOG_STD_MIN..=LOG_STD_MAX).contains(&s))
            .collect();
        Ok(Self {
            mean: mean.to_vec(),
            log_std: log_std
                .iter()
                .map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX))
                .collect(),
            active,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.dim() {
            return Err(Error::Shape(format!(
                "action has length {}, distribution has {}",
                action.len(),
                self.dim()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("non-finite action".into()));
        }
        Ok(())
    }

    pub fn log_prob(&self, action: &[f64]) -> Result<f64> {
        self.check_action(action)?;
        let half_log_two_pi = 0.5 * (2.0 * PI).ln();
        Ok(action
            .iter()
            .zip(&self.mean)
            .zip(&self.log_std)
            .map(|((a, m), s)| {
                let z = (a - m) / s.exp();
                -0.5 * z * z - s - half_log_two_pi
            })
            .sum())
    }

    pub fn entropy(&self) -> f64 {
        let c = 0.5 * (2.0 * PI * E).ln();
        self.log_std.iter().map(|s| s + c).sum()
    }

    /// `mean + std · noise` for standard-normal `noise`.
    pub fn sample(&self, noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.dim() {
            return Err(Error::Shape("noise length differs from dimension".into()));
        }
        Ok(self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(noise)
            .map(|((m, s), n)| m + s.exp() * n)
            .collect())
    }

    /// Gradients of `log p(action)` with respect to the raw `(mean, log_std)`.
    pub fn grad_log_prob(&self, action: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_action(action)?;
        let mut d_mean = Vec::with_capacity(self.dim());
        let mut d_log_std = Vec::with_capacity(self.dim());
        for (((a, m), s), &on) in action.iter().zip(&self.mean).zip(&self.log_std).zip(&self.active) {
            let var = (2.0 * s).exp();
            d_mean.push((a - m) / var);
            d_log_std.push(if on { (a - m) * (a - m) / var - 1.0 } else { 0.0 });
        }
        Ok((d_mean, d_log_std))
    }

    /// Gradient of the entropy with respect to the raw log-std.
    pub fn grad_entropy(&self) -> Vec<f64> {
        self.active.iter().map(|&on| f64::from(u8::from(on))).collect()
    }
}

/// Per-observation action distribution produced by a policy head.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyDistribution {
    Categorical(Categorical),
    Gaussian(DiagGaussian),
}

impl PolicyDistribution {
    pub fn entropy(&self) -> f64 {
        match self {
            PolicyDistribution::Categorical(c) => c.entropy(),
            PolicyDistribution::Gaussian(g) => g.entropy(),
        }
    }
}
