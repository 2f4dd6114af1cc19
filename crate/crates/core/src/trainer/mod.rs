//! Centralised-critic training loop with a parameter-shared actor.

mod config;
mod loss;
mod probe;
mod run;

pub use config::{TrainConfig, TrainerConfig};
pub use loss::{actor_loss, critic_loss, ActorLoss, CriticLoss, Sample};
pub use probe::{collapse_probe, ProbeConfig, ProbeResult};
pub use run::{run_training, run_training_with};

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::approximator::{Checkpoint, ParameterVector};
use crate::error::Result;

/// Column order of `diagnostics.csv`.
pub const DIAGNOSTICS_COLUMNS: [&str; 12] = [
    "update",
    "env_steps",
    "mean_episode_return",
    "actor_loss",
    "critic_loss",
    "entropy",
    "min_ratio",
    "max_ratio",
    "mean_abs_adv",
    "actor_grad_norm",
    "critic_grad_norm",
    "eval_return",
];

/// Telemetry for one update. Losses, entropy and gradient norms are means
/// over every minibatch step of the update; ratio extremes cover every
/// agent-timestep seen by the actor loss. `mean_abs_adv` is taken before
/// normalisation. Empty optional fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub update: usize,
    pub env_steps: usize,
    pub mean_episode_return: Option<f64>,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_abs_adv: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub eval_return: Option<f64>,
}

pub fn write_diagnostics_csv<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(DIAGNOSTICS_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics_csv<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let records = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub update: usize,
    pub env_steps: usize,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub updates: usize,
    pub env_steps: usize,
    pub final_eval_return: f64,
    /// Mean over the last 20% of evaluation points (at least one).
    pub mean_last_20pct_eval_return: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub eval_curve: Vec<EvalPoint>,
}

impl RunSummary {
    fn new(config: &TrainConfig, diagnostics: &[DiagnosticsRecord], eval_curve: Vec<EvalPoint>) -> Self {
        let n = eval_curve.len();
        let tail = n.div_ceil(5).max(1).min(n);
        let tail_mean = if n == 0 {
            f64::NAN
        } else {
            eval_curve[n - tail..].iter().map(|p| p.mean_return).sum::<f64>() / tail as f64
        };
        Self {
            task: config.env.task_id(),
            algorithm: config.trust_region.variant().name().to_string(),
            seed: config.trainer.seed,
            updates: diagnostics.len(),
            env_steps: diagnostics.last().map_or(0, |d| d.env_steps),
            final_eval_return: eval_curve.last().map_or(f64::NAN, |p| p.mean_return),
            mean_last_20pct_eval_return: tail_mean,
            min_ratio: diagnostics.iter().map(|d| d.min_ratio).fold(f64::INFINITY, f64::min),
            max_ratio: diagnostics.iter().map(|d| d.max_ratio).fold(0.0, f64::max),
            eval_curve,
        }
    }
}

pub const CONFIG_FILE: &str = "config.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ACTOR_CHECKPOINT_FILE: &str = "actor.ckpt.json";
pub const CRITIC_CHECKPOINT_FILE: &str = "critic.ckpt.json";

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config: TrainConfig,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub actor: ParameterVector,
    pub critic: ParameterVector,
    pub summary: RunSummary,
}

impl RunArtifact {
    /// Writes config snapshot, diagnostics, checkpoints and summary into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), self.config.to_canonical_json()?)?;
        write_diagnostics_csv(fs::File::create(dir.join(DIAGNOSTICS_FILE))?, &self.diagnostics)?;
        self.actor.to_checkpoint().save(&dir.join(ACTOR_CHECKPOINT_FILE))?;
        self.critic.to_checkpoint().save(&dir.join(CRITIC_CHECKPOINT_FILE))?;
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        let diagnostics = read_diagnostics_csv(fs::File::open(dir.join(DIAGNOSTICS_FILE))?)?;
        let actor = Checkpoint::load(&dir.join(ACTOR_CHECKPOINT_FILE))?.into_parameters()?;
        let critic = Checkpoint::load(&dir.join(CRITIC_CHECKPOINT_FILE))?.into_parameters()?;
        let summary = load_summary(dir)?;
        Ok(Self {
            config,
            diagnostics,
            actor,
            critic,
            summary,
        })
    }
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> TrainConfig {
        let mut c = TrainConfig::default();
        c.trainer.rollout_length = 8;
        c.trainer.total_timesteps = 8 * 2 * 3;
        c.trainer.eval_interval = 2;
        c.trainer.eval_episodes = 4;
        c.trainer.hidden = vec![8];
        c
    }

    #[test]
    fn csv_header_matches_column_list() {
        let art = run_training(&tiny_config()).unwrap();
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &art.diagnostics).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), DIAGNOSTICS_COLUMNS.join(","));
        assert_eq!(read_diagnostics_csv(text.as_bytes()).unwrap(), art.diagnostics);
    }

    #[test]
    fn artifact_round_trip() {
        let art = run_training(&tiny_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        art.write(dir.path()).unwrap();
        assert_eq!(RunArtifact::load(dir.path()).unwrap(), art);
        assert_eq!(art.summary.eval_curve.len(), 2);
        assert_eq!(art.summary.updates, 3);
    }
}
