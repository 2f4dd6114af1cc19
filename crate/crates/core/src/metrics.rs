//! Aggregate statistics across seeds and tasks.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 2000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// `(x − min)/(max − min)` clamped to `[0, 1]`.
pub fn minmax_normalize(scores: &[f64], task_min: f64, task_max: f64) -> Result<Vec<f64>> {
    if !(task_max > task_min) || !task_min.is_finite() || !task_max.is_finite() {
        return Err(Error::Domain(format!(
            "degenerate normalisation range [{task_min}, {task_max}]"
        )));
    }
    let span = task_max - task_min;
    Ok(scores
        .iter()
        .map(|x| ((x - task_min) / span).clamp(0.0, 1.0))
        .collect())
}

/// Interquartile mean. A quarter of the total mass is trimmed from each end;
/// a boundary element that straddles the cut contributes its covered
/// fraction.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "IQM needs at least 4 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("IQM over non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let (lo, hi) = (0.25 * n, 0.75 * n);
    let mut sum = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let i = i as f64;
        let w = (hi.min(i + 1.0) - lo.max(i)).max(0.0);
        sum += w * x;
    }
    Ok(sum / (hi - lo))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Percentile bootstrap, resampling each stratum independently with
/// replacement and recomputing `statistic` over the resampled strata.
pub fn bootstrap_ci<F>(
    strata: &[Vec<f64>],
    statistic: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[Vec<f64>]) -> Result<f64>,
{
    if resamples < 1000 {
        return Err(Error::InvalidInput(format!(
            "need at least 1000 resamples, got {resamples}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    if strata.is_empty() || strata.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("bootstrap over an empty stratum".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    let mut resampled: Vec<Vec<f64>> = strata.iter().map(|s| vec![0.0; s.len()]).collect();
    for _ in 0..resamples {
        for (dst, src) in resampled.iter_mut().zip(strata) {
            for slot in dst.iter_mut() {
                *slot = src[rng.random_range(0..src.len())];
            }
        }
        draws.push(statistic(&resampled)?);
    }
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&draws, tail), quantile(&draws, 1.0 - tail)))
}

/// Mean over all pairs of `[x > y] + ½[x = y]`.
pub fn probability_of_improvement(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("probability of improvement needs two non-empty sets".into()));
    }
    let mut wins = 0.0;
    for a in x {
        for b in y {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (x.len() * y.len()) as f64)
}

/// Evaluation curve of one (task, algorithm, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    /// `(environment steps, evaluation return)`.
    pub points: Vec<(usize, f64)>,
}

impl RunSeries {
    pub fn new(task: String, algorithm: String, seed: u64, points: Vec<(usize, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(format!("{task}/{algorithm}/{seed}: empty series")));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput(format!(
                "{task}/{algorithm}/{seed}: steps must be strictly increasing"
            )));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::InvalidInput(format!("{task}/{algorithm}/{seed}: non-finite return")));
        }
        Ok(Self { task, algorithm, seed, points })
    }

    pub fn final_return(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }

    /// Mean of the last 20% of points (at least one).
    pub fn mean_last_20pct(&self) -> f64 {
        let n = self.points.len();
        let k = n.div_ceil(5).max(1);
        self.points[n - k..].iter().map(|p| p.1).sum::<f64>() / k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Final,
    Last20Pct,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 2] = [ScoreKind::Final, ScoreKind::Last20Pct];

    fn of(self, s: &RunSeries) -> f64 {
        match self {
            ScoreKind::Final => s.final_return(),
            ScoreKind::Last20Pct => s.mean_last_20pct(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmScore {
    pub score: ScoreKind,
    pub algorithm: String,
    pub runs: usize,
    pub iqm: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementEntry {
    pub score: ScoreKind,
    pub x: String,
    pub y: String,
    pub probability: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRange {
    pub score: ScoreKind,
    pub task: String,
    pub min: f64,
    pub max: f64,
}

/// Per-algorithm IQMs of normalised scores and, with two or more
/// algorithms, the full ordered-pair probability-of-improvement matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub task_ranges: Vec<TaskRange>,
    pub scores: Vec<AlgorithmScore>,
    pub improvement: Option<Vec<ImprovementEntry>>,
}

/// `[task][algorithm] -> normalised scores`, both in sorted order.
type Grouped = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

fn group(series: &[RunSeries], kind: ScoreKind) -> Result<(Grouped, Vec<TaskRange>)> {
    let mut raw: Grouped = BTreeMap::new();
    for s in series {
        raw.entry(s.task.clone())
            .or_default()
            .entry(s.algorithm.clone())
            .or_default()
            .push(kind.of(s));
    }
    let mut ranges = Vec::new();
    let mut out = Grouped::new();
    for (task, algos) in raw {
        let all = algos.values().flatten();
        let min = all.clone().copied().fold(f64::INFINITY, f64::min);
        let max = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let mut norm = BTreeMap::new();
        for (algo, scores) in algos {
            let n = minmax_normalize(&scores, min, max)
                .map_err(|e| Error::InvalidInput(format!("task {task}: {e}")))?;
            norm.insert(algo, n);
        }
        ranges.push(TaskRange { score: kind, task: task.clone(), min, max });
        out.insert(task, norm);
    }
    Ok((out, ranges))
}

fn pooled_iqm(strata: &[Vec<f64>]) -> Result<f64> {
    let all: Vec<f64> = strata.iter().flatten().copied().collect();
    iqm(&all)
}

/// Strata for one algorithm: one vector per task that algorithm ran on.
fn strata_for(grouped: &Grouped, algo: &str) -> Vec<Vec<f64>> {
    grouped.values().filter_map(|m| m.get(algo).cloned()).collect()
}

pub fn aggregate(series: &[RunSeries], resamples: usize, level: f64, seed: u64) -> Result<AggregateReport> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no runs to aggregate".into()));
    }
    let mut task_ranges = Vec::new();
    let mut scores = Vec::new();
    let mut improvement = Vec::new();
    for kind in ScoreKind::ALL {
        let (grouped, ranges) = group(series, kind)?;
        task_ranges.extend(ranges);
        let algorithms: Vec<String> = {
            let mut a: Vec<String> = grouped.values().flat_map(|m| m.keys().cloned()).collect();
            a.sort();
            a.dedup();
            a
        };
        for algo in &algorithms {
            let strata = strata_for(&grouped, algo);
            let point = pooled_iqm(&strata)?;
            let (lo, hi) = bootstrap_ci(&strata, pooled_iqm, resamples, level, seed)?;
            scores.push(AlgorithmScore {
                score: kind,
                algorithm: algo.clone(),
                runs: strata.iter().map(Vec::len).sum(),
                iqm: point,
                ci_lower: lo,
                ci_upper: hi,
            });
        }
        if algorithms.len() < 2 {
            continue;
        }
        for x in &algorithms {
            for y in &algorithms {
                // tasks both algorithms ran on; stratum = x scores then y scores
                let shared: Vec<(Vec<f64>, Vec<f64>)> = grouped
                    .values()
                    .filter_map(|m| Some((m.get(x)?.clone(), m.get(y)?.clone())))
                    .collect();
                if shared.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "algorithms {x} and {y} share no task"
                    )));
                }
                let strata: Vec<Vec<f64>> = shared
                    .iter()
                    .flat_map(|(a, b)| [a.clone(), b.clone()])
                    .collect();
                let stat = |s: &[Vec<f64>]| -> Result<f64> {
                    let mut total = 0.0;
                    for pair in s.chunks(2) {
                        total += probability_of_improvement(&pair[0], &pair[1])?;
                    }
                    Ok(total / (s.len() / 2) as f64)
                };
                let point = stat(&strata)?;
                let (lo, hi) = bootstrap_ci(&strata, stat, resamples, level, seed)?;
                improvement.push(ImprovementEntry {
                    score: kind,
                    x: x.clone(),
                    y: y.clone(),
                    probability: point,
                    ci_lower: lo,
                    ci_upper: hi,
                });
            }
        }
    }
    Ok(AggregateReport {
        resamples,
        level,
        seed,
        task_ranges,
        scores,
        improvement: if improvement.is_empty() { None } else { Some(improvement) },
    })
}

impl AggregateReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per IQM entry, columns `score,algorithm,runs,iqm,ci_lower,ci_upper`.
    pub fn write_scores_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.scores {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per ordered pair, columns `score,x,y,probability,ci_lower,ci_upper`.
    pub fn write_improvement_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in self.improvement.iter().flatten() {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<AlgorithmScore>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_improvement_csv<R: Read>(input: R) -> Result<Vec<ImprovementEntry>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean evaluation curve with a bootstrap band, per (task, algorithm), over
/// the step values every seed reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub task: String,
    pub algorithm: String,
    pub env_steps: usize,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

pub fn curve_bands(series: &[RunSeries], resamples: usize, level: f64, seed: u64) -> Result<Vec<CurvePoint>> {
    let mut groups: BTreeMap<(String, String), Vec<&RunSeries>> = BTreeMap::new();
    for s in series {
        groups.entry((s.task.clone(), s.algorithm.clone())).or_default().push(s);
    }
    let mean = |s: &[Vec<f64>]| -> Result<f64> { Ok(s[0].iter().sum::<f64>() / s[0].len() as f64) };
    let mut out = Vec::new();
    for ((task, algorithm), runs) in groups {
        let steps: Vec<usize> = runs[0]
            .points
            .iter()
            .map(|p| p.0)
            .filter(|st| runs.iter().all(|r| r.points.iter().any(|p| p.0 == *st)))
            .collect();
        for st in steps {
            let ys: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.points.iter().find(|p| p.0 == st).map(|p| p.1))
                .collect();
            let strata = [ys];
            let m = mean(&strata)?;
            let (lo, hi) = bootstrap_ci(&strata, mean, resamples, level, seed)?;
            out.push(CurvePoint {
                task: task.clone(),
                algorithm: algorithm.clone(),
                env_steps: st,
                mean: m,
                ci_lower: lo,
                ci_upper: hi,
            });
        }
    }
    Ok(out)
}

pub fn write_curves_csv<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
