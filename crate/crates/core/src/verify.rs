//! Executable checks of the surrogate and calibration properties, grouped
//! into suites and reported as data.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{
    geometric_symmetrize, log_grid, mars_penalty, mars_stationary_point, mars_surrogate,
    truncation_region, JointAdvantage, PenaltyWeight, ProbabilityRatio, Surrogate,
};
use crate::trust_region::{
    alpha_for_additive_epsilon, alpha_for_target, resolve, select_target, TrustRegionSpec,
    Variant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Propositions,
    Gradients,
    Symmetry,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Propositions => "propositions",
            Suite::Gradients => "gradients",
            Suite::Symmetry => "symmetry",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "propositions" => Ok(Suite::Propositions),
            "gradients" => Ok(Suite::Gradients),
            "symmetry" => Ok(Suite::Symmetry),
            "all" => Ok(Suite::All),
            _ => Err(Error::Config(format!(
                "unknown suite `{s}`, expected propositions, gradients, symmetry or all"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Functions the checks evaluate. Swapping one out lets a harness confirm
/// that a corrupted implementation is caught.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub mars_penalty: fn(ProbabilityRatio) -> f64,
}

impl Default for Hooks {
    fn default() -> Self {
        Self { mars_penalty }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> VerifyReport {
    run_suite_with(suite, seed, &Hooks::default())
}

pub fn run_suite_with(suite: Suite, seed: u64, hooks: &Hooks) -> VerifyReport {
    let mut checks = Vec::new();
    if suite.includes(Suite::Symmetry) {
        checks.extend(symmetry_checks(hooks));
    }
    if suite.includes(Suite::Propositions) {
        checks.extend(proposition_checks(seed));
    }
    if suite.includes(Suite::Gradients) {
        checks.extend(gradient_checks(seed));
    }
    VerifyReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn check(suite: Suite, name: &str, passed: bool, observed: String, expected: String) -> Check {
    Check {
        suite,
        name: name.into(),
        passed,
        observed,
        expected,
    }
}

fn failed(suite: Suite, name: &str, e: Error) -> Check {
    check(suite, name, false, format!("error: {e}"), "no error".into())
}

fn ratio(v: f64) -> ProbabilityRatio {
    ProbabilityRatio::new(v).expect("grid points are positive")
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn symmetry_checks(hooks: &Hooks) -> Vec<Check> {
    let s = Suite::Symmetry;
    let grid = match log_grid(1e-4, 1e4, 1000) {
        Ok(g) => g,
        Err(e) => return vec![failed(s, "grid", e)],
    };
    let penalty = hooks.mars_penalty;

    let mut worst = (0.0, 1.0);
    for &r in &grid {
        let e = rel_err(penalty(ratio(r)), penalty(ratio(r).inverse()));
        if e > worst.0 {
            worst = (e, r);
        }
    }
    let inversion = check(
        s,
        "inversion_symmetry",
        worst.0 < 1e-9,
        format!("max relative error {:.3e} at r={:.6e}", worst.0, worst.1),
        "< 1e-9".into(),
    );

    let mut worst = (0.0, 1.0);
    for &r in &grid {
        match geometric_symmetrize(|x| (x - 1.0).powi(2), ratio(r)) {
            Ok(g) => {
                let e = rel_err(g, penalty(ratio(r)));
                if e > worst.0 || e.is_nan() {
                    worst = (e, r);
                }
            }
            Err(e) => return vec![inversion, failed(s, "geometric_symmetrization", e)],
        }
    }
    let geometric = check(
        s,
        "geometric_symmetrization",
        worst.0 < 1e-12,
        format!("max relative error {:.3e} at r={:.6e}", worst.0, worst.1),
        "< 1e-12".into(),
    );
    vec![inversion, geometric]
}

fn proposition_checks(seed: u64) -> Vec<Check> {
    let s = Suite::Propositions;
    let mut out = Vec::new();

    // barrier: objective keeps falling toward r = 0, gradient explodes
    let adv = JointAdvantage::new(-10.0).unwrap();
    let alpha = PenaltyWeight::new(1.0).unwrap();
    let objs: Vec<f64> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&r| mars_surrogate(ratio(r), adv, alpha).objective)
        .collect();
    let grad = mars_surrogate(ratio(1e-6), adv, alpha).ratio_gradient;
    out.push(check(
        s,
        "barrier_objective_decreasing",
        objs[0] > objs[1] && objs[1] > objs[2],
        format!("{objs:?}"),
        "strictly decreasing".into(),
    ));
    out.push(check(
        s,
        "barrier_gradient_diverges",
        grad > 1e11,
        format!("{grad:.6e}"),
        "> 1e11".into(),
    ));

    // the quadratic penalty pays only a finite price for extinction
    let eps = 0.2;
    let coeff = adv.value().abs() / (2.0 * eps);
    let quad = Surrogate::quadratic(adv, coeff).unwrap();
    let at = quad.eval(ratio(1e-9)).objective;
    let limit = -coeff;
    out.push(check(
        s,
        "quadratic_extinction_cost_finite",
        (at - limit).abs() < 1e-6,
        format!("objective {at:.12} vs limit {limit}"),
        "within 1e-6".into(),
    ));

    out.push(no_truncation(seed));
    out.extend(clip_truncation());
    out.push(calibration_stationarity(seed));
    out.push(additive_recovery(seed));
    out.push(symmetric_bounds());
    out
}

fn no_truncation(seed: u64) -> Check {
    let s = Suite::Propositions;
    let name = "barrier_no_truncation";
    let grid = log_grid(1e-4, 1e4, 10_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let a = rng.random_range(-5.0..5.0);
        let w = rng.random_range(0.05..5.0);
        let adv = JointAdvantage::new(a).unwrap();
        let alpha = PenaltyWeight::new(w).unwrap();
        let sur = Surrogate::barrier(adv, alpha);
        let grads: Vec<f64> = grid.iter().map(|&r| sur.eval(ratio(r)).ratio_gradient).collect();
        let changes: Vec<usize> = (0..grads.len() - 1)
            .filter(|&i| grads[i].signum() != grads[i + 1].signum())
            .collect();
        let runs = match truncation_region(&sur, &grid) {
            Ok(r) => r,
            Err(e) => return failed(s, name, e),
        };
        let root = match mars_stationary_point(adv, alpha) {
            Ok(r) => r,
            Err(e) => return failed(s, name, e),
        };
        let bracketed = match (root, changes.as_slice()) {
            (Some(r), [i]) => grid[*i] <= r && r <= grid[i + 1],
            (Some(r), []) => r < grid[0] || r > grid[grid.len() - 1],
            (None, []) => true,
            _ => false,
        };
        if changes.len() > 1 || runs.iter().any(|run| run.len() > 1) || !bracketed {
            return check(
                s,
                name,
                false,
                format!("A={a}, alpha={w}: {} sign changes, root {root:?}", changes.len()),
                "at most one sign change, at sqrt(alpha/(alpha-A))".into(),
            );
        }
    }
    check(s, name, true, "100 pairs consistent".into(), "at most one sign change".into())
}

fn clip_truncation() -> Vec<Check> {
    let s = Suite::Propositions;
    let grid: Vec<f64> = (0..296).map(|i| 0.05 + 0.01 * i as f64).collect();
    let mut out = Vec::new();
    for (a, name) in [(1.0, "clip_truncates_above"), (-1.0, "clip_truncates_below")] {
        let sur = Surrogate::clipped(JointAdvantage::new(a).unwrap(), 0.2, 0.2).unwrap();
        let clipped_side = |r: f64| if a > 0.0 { r > 1.0 + 0.2 } else { r < 1.0 - 0.2 };
        let mut bad = None;
        for &r in &grid {
            let g = sur.eval(ratio(r)).ratio_gradient;
            if clipped_side(r) != (g == 0.0) {
                bad = Some((r, g));
                break;
            }
        }
        out.push(check(
            s,
            name,
            bad.is_none(),
            bad.map_or("zero exactly on the clipped side".into(), |(r, g)| {
                format!("gradient {g} at r={r}")
            }),
            "zero gradient iff r is past the clip bound on the improving side".into(),
        ));
    }
    out
}

fn target_specs() -> Vec<TrustRegionSpec> {
    Variant::ALL
        .iter()
        .filter(|v| v.has_target())
        .map(|v| v.default_spec())
        .collect()
}

fn calibration_stationarity(seed: u64) -> Check {
    let s = Suite::Propositions;
    let name = "calibration_stationarity";
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst = (0.0, String::new());
    for spec in target_specs() {
        for _ in 0..200 {
            let mut a = 0.0;
            while a == 0.0 {
                a = rng.random_range(-5.0..5.0);
            }
            let adv = JointAdvantage::new(a).unwrap();
            let res = select_target(adv, &spec)
                .and_then(|t| Ok((t, resolve(&spec, adv)?)));
            let (target, sur) = match res {
                Ok(v) => v,
                Err(e) => return failed(s, name, e),
            };
            let g = sur.eval(ratio(target)).ratio_gradient.abs();
            if g > worst.0 {
                worst = (g, format!("{} A={a}", spec.variant()));
            }
        }
    }
    check(
        s,
        name,
        worst.0 < 1e-9,
        format!("max |gradient at target| {:.3e} ({})", worst.0, worst.1),
        "< 1e-9".into(),
    )
}

fn additive_recovery(seed: u64) -> Check {
    let s = Suite::Propositions;
    let name = "additive_epsilon_recovery";
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    for _ in 0..200 {
        let a = rng.random_range(-5.0..5.0);
        let eps = rng.random_range(0.01..0.99);
        let adv = JointAdvantage::new(a).unwrap();
        let target = if a >= 0.0 { 1.0 + eps } else { 1.0 - eps };
        match (alpha_for_additive_epsilon(adv, eps), alpha_for_target(adv, target)) {
            (Ok(x), Ok(y)) if x.value().to_bits() == y.value().to_bits() => {}
            (x, y) => {
                return check(s, name, false, format!("A={a}, eps={eps}: {x:?} vs {y:?}"), "bit-identical".into())
            }
        }
    }
    check(s, name, true, "200 pairs bit-identical".into(), "bit-identical".into())
}

fn symmetric_bounds() -> Check {
    let s = Suite::Propositions;
    let mut bad = Vec::new();
    for b in [1.05, 1.1, 1.25, 1.5, 1.9] {
        let m = TrustRegionSpec::MarsMultiplicativeSymmetric { b }.target_bounds().unwrap();
        let a = TrustRegionSpec::MarsAdditiveSymmetric { b }.target_bounds().unwrap();
        // one rounding step in 1/b may leave the product an ulp off 1
        if (m.0 * m.1 - 1.0).abs() > f64::EPSILON || a.0 + a.1 != 2.0 {
            bad.push(b);
        }
    }
    check(
        s,
        "symmetric_bounds",
        bad.is_empty(),
        format!("violations at b={bad:?}"),
        "lower*upper = 1, lower+upper = 2".into(),
    )
}

fn gradient_checks(seed: u64) -> Vec<Check> {
    let s = Suite::Gradients;
    let mut out = Vec::new();
    for v in Variant::ALL {
        let spec = v.default_spec();
        let mut worst = (0.0f64, String::new());
        for k in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(k));
            let a = rng.random_range(-5.0..5.0);
            let sur = match resolve(&spec, JointAdvantage::new(a).unwrap()) {
                Ok(x) => x,
                Err(e) => {
                    out.push(failed(s, v.name(), e));
                    break;
                }
            };
            for _ in 0..50 {
                let r = rng.random_range(0.05f64.ln()..20f64.ln()).exp();
                if sur.kinks().iter().any(|k| (r - k).abs() < 1e-4) {
                    continue;
                }
                let h = 1e-6 * r.max(1.0);
                let fd = (sur.eval(ratio(r + h)).objective - sur.eval(ratio(r - h)).objective) / (2.0 * h);
                let g = sur.eval(ratio(r)).ratio_gradient;
                let e = (fd - g).abs() / g.abs().max(1.0);
                if e > worst.0 {
                    worst = (e, format!("A={a:.4}, r={r:.6}"));
                }
            }
        }
        out.push(check(
            s,
            &format!("ratio_gradient_{}", v.name()),
            worst.0 < 1e-5,
            format!("max relative error {:.3e} {}", worst.0, worst.1),
            "< 1e-5".into(),
        ));
    }
    out
}
