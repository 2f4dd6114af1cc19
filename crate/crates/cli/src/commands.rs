use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use mars_core::metrics::{aggregate, curve_bands, write_curves_csv, RunSeries, DEFAULT_LEVEL};
use mars_core::objective::{log_grid, JointAdvantage, ProbabilityRatio};
use mars_core::trainer::{
    collapse_probe, load_summary, run_training, ProbeConfig, ProbeResult, TrainConfig, SUMMARY_FILE,
};
use mars_core::trust_region::resolve;
use mars_core::verify::{run_suite, run_suite_with, Hooks, Suite};
use mars_core::{TrustRegionSpec, Variant};
use serde::Serialize;

use crate::manifest::{load_config, RunManifest};
use crate::{AnalyzeArgs, Cli, Failure, ProbeArgs, ReportArgs, TrainArgs, VerifyArgs};

type Outcome = Result<(), Failure>;

pub const PROBE_FILE: &str = "probe.json";

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_range(text: &str) -> anyhow::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if let [lo, hi, count] = parts.as_slice() {
        Ok((
            lo.parse().context("range lo")?,
            hi.parse().context("range hi")?,
            count.parse().context("range count")?,
        ))
    } else {
        bail!("--range expects lo,hi,count, got `{text}`")
    }
}

/// Specs to analyse: the config's trust region, or the named variant's
/// defaults, or every variant.
fn specs_for(cli: &Cli, variant: &str) -> anyhow::Result<Vec<TrustRegionSpec>> {
    if let Some(path) = &cli.config {
        return Ok(vec![load_config(path)?.trust_region]);
    }
    if variant == "all" {
        return Ok(Variant::ALL.iter().map(|v| v.default_spec()).collect());
    }
    Ok(vec![variant.parse::<Variant>()?.default_spec()])
}

#[derive(Serialize)]
struct CurveRow {
    r: f64,
    objective: f64,
    ratio_gradient: f64,
}

pub fn analyze(cli: &Cli, args: &AnalyzeArgs) -> Outcome {
    let (lo, hi, count) = parse_range(&args.range)?;
    let grid = log_grid(lo, hi, count)?;
    let adv = JointAdvantage::new(args.adv)?;
    fs::create_dir_all(&cli.out)?;
    for spec in specs_for(cli, &args.variant)? {
        let sur = resolve(&spec, adv)?;
        let rows: Vec<CurveRow> = grid
            .iter()
            .map(|&r| {
                let e = sur.eval(ProbabilityRatio::new(r)?);
                Ok(CurveRow {
                    r,
                    objective: e.objective,
                    ratio_gradient: e.ratio_gradient,
                })
            })
            .collect::<mars_core::Result<_>>()?;
        let path = cli.out.join(format!("curve_{}.csv", spec.variant()));
        write_csv(&path, &rows)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn corrupted_penalty(r: ProbabilityRatio) -> f64 {
    let r = r.value();
    (r - 1.0).powi(2) / r.sqrt()
}

pub fn verify(cli: &Cli, args: &VerifyArgs) -> Outcome {
    let suite: Suite = args.suite.parse()?;
    let seed = cli.seed.unwrap_or(0);
    let report = match args.inject_fault.as_deref() {
        None => run_suite(suite, seed),
        Some("penalty") => run_suite_with(suite, seed, &Hooks { mars_penalty: corrupted_penalty }),
        Some(other) => return Err(anyhow!("unknown fault `{other}`, expected `penalty`").into()),
    };
    let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    println!("{json}");
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join("verify.json"), &json)?;
    if report.passed {
        Ok(())
    } else {
        let names: Vec<String> = report.failures().map(|c| format!("{}/{}", c.suite, c.name)).collect();
        Err(Failure::Check(names.join(", ")))
    }
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("--seeds expects a..b, got `{text}`"))?;
    let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
    if b <= a {
        bail!("--seeds range `{text}` is empty");
    }
    Ok((a..b).collect())
}

fn train_one(cli: &Cli, config: &TrainConfig, dir: &Path) -> Outcome {
    let art = run_training(config)?;
    art.write(dir)?;
    RunManifest::new(cli.config.as_deref(), config, dir)?.write(dir)?;
    let s = &art.summary;
    println!(
        "{} {} seed {}: {} updates, final eval {:.4}, last-20% eval {:.4}, min ratio {:.4} -> {}",
        s.task,
        s.algorithm,
        s.seed,
        s.updates,
        s.final_eval_return,
        s.mean_last_20pct_eval_return,
        s.min_ratio,
        dir.display()
    );
    Ok(())
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Outcome {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("train needs --config <file>"))?;
    let mut config = load_config(path)?;
    match &args.seeds {
        None => {
            if let Some(seed) = cli.seed {
                config.trainer.seed = seed;
            }
            train_one(cli, &config, &cli.out)
        }
        Some(range) => {
            for seed in parse_seeds(range)? {
                config.trainer.seed = seed;
                train_one(cli, &config, &cli.out.join(format!("seed_{seed}")))?;
            }
            Ok(())
        }
    }
}

enum Found {
    Run(PathBuf),
    Probe(PathBuf),
}

fn collect(dir: &Path, depth: usize, out: &mut Vec<Found>) -> anyhow::Result<()> {
    if dir.join(SUMMARY_FILE).is_file() {
        out.push(Found::Run(dir.to_path_buf()));
        return Ok(());
    }
    if dir.join(PROBE_FILE).is_file() {
        out.push(Found::Probe(dir.to_path_buf()));
        return Ok(());
    }
    if depth == 0 || !dir.is_dir() {
        bail!("{} is not a run or probe directory", dir.display());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    let before = out.len();
    for c in children {
        // nested directories without artifacts are skipped, not errors
        let _ = collect(&c, depth - 1, out);
    }
    if out.len() == before {
        bail!("no run or probe artifacts under {}", dir.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeRow {
    variant: String,
    final_probability: f64,
    min_probability: f64,
    steps: usize,
    steps_per_update: usize,
    advantage: f64,
}

pub fn report(cli: &Cli, args: &ReportArgs) -> Outcome {
    let mut found = Vec::new();
    for d in &args.dirs {
        collect(d, 2, &mut found)?;
    }
    let mut series = Vec::new();
    let mut probes = Vec::new();
    for f in found {
        match f {
            Found::Run(dir) => {
                RunManifest::load_checked(&dir)?;
                let s = load_summary(&dir).with_context(|| format!("reading {}", dir.display()))?;
                let points = s.eval_curve.iter().map(|p| (p.env_steps, p.mean_return)).collect();
                series.push(
                    RunSeries::new(s.task, s.algorithm, s.seed, points)
                        .with_context(|| format!("run {}", dir.display()))?,
                );
            }
            Found::Probe(dir) => {
                let text = fs::read_to_string(dir.join(PROBE_FILE))?;
                let p: ProbeResult = serde_json::from_str(&text)
                    .with_context(|| format!("malformed probe artifact {}", dir.display()))?;
                probes.push(p);
            }
        }
    }
    fs::create_dir_all(&cli.out)?;
    let seed = cli.seed.unwrap_or(0);
    if !series.is_empty() {
        let rep = aggregate(&series, args.resamples, DEFAULT_LEVEL, seed)?;
        fs::write(cli.out.join("aggregate.json"), rep.to_json()?)?;
        rep.write_scores_csv(fs::File::create(cli.out.join("scores.csv"))?)?;
        if rep.improvement.is_some() {
            rep.write_improvement_csv(fs::File::create(cli.out.join("improvement.csv"))?)?;
        }
        let curves = curve_bands(&series, args.resamples, DEFAULT_LEVEL, seed)?;
        write_curves_csv(fs::File::create(cli.out.join("curves.csv"))?, &curves)?;
        for s in &rep.scores {
            println!(
                "{:?} {}: IQM {:.4} [{:.4}, {:.4}] over {} runs",
                s.score, s.algorithm, s.iqm, s.ci_lower, s.ci_upper, s.runs
            );
        }
    }
    if !probes.is_empty() {
        let rows: Vec<ProbeRow> = probes
            .iter()
            .map(|p| ProbeRow {
                variant: p.spec.variant().to_string(),
                final_probability: p.final_probability,
                min_probability: p.min_probability,
                steps: p.config.steps,
                steps_per_update: p.config.steps_per_update,
                advantage: p.config.advantage,
            })
            .collect();
        write_csv(&cli.out.join("probe_comparison.csv"), &rows)?;
        for r in &rows {
            println!("probe {}: final probability {:.6e}", r.variant, r.final_probability);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeStep {
    step: usize,
    probability: f64,
}

pub fn probe(cli: &Cli, args: &ProbeArgs) -> Outcome {
    let spec = match &cli.config {
        Some(path) => load_config(path)?.trust_region,
        None => args.variant.parse::<Variant>()?.default_spec(),
    };
    let config = ProbeConfig {
        steps: args.steps,
        lr: args.lr,
        advantage: args.adv,
        steps_per_update: args.steps_per_update,
        ..ProbeConfig::default()
    };
    let result = collapse_probe(&spec, &config)?;
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join(PROBE_FILE), serde_json::to_string_pretty(&result).map_err(anyhow::Error::from)?)?;
    let rows: Vec<ProbeStep> = result
        .probabilities
        .iter()
        .enumerate()
        .map(|(step, &probability)| ProbeStep { step, probability })
        .collect();
    write_csv(&cli.out.join("probe.csv"), &rows)?;
    println!(
        "{}: final probability {:.6e}, min {:.6e}",
        spec.variant(),
        result.final_probability,
        result.min_probability
    );
    Ok(())
}
