//! Scalar probability-ratio surrogates.
//!
//! Every surrogate here is a value to be **maximised** as a function of the
//! probability ratio `r = π_new(a|h) / π_old(a|h)`, weighted by a joint
//! advantage. Each evaluation returns the objective together with its exact
//! derivative with respect to `r`.
//!
//! Three families are covered:
//!
//! * clipped (`min(r·A, clip(r, lo, hi)·A)`), with independent bounds,
//! * quadratic penalty (`r·A − c·(r − 1)²`),
//! * geometric barrier (`r·A − α·(r + 1/r − 2)`).

use crate::error::{ensure_finite, Error, Result};

/// Log-ratios are clamped to `[-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP]` before
/// exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 40.0;

/// Absolute gradient tolerance used by [`truncation_region`].
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Ratio of current to old action probability. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProbabilityRatio(f64);

impl ProbabilityRatio {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "probability ratio must be positive and finite, got {value}"
            )))
        }
    }

    /// `exp(logp_new − logp_old)` with the log-difference clamped.
    pub fn from_log_probs(logp_new: f64, logp_old: f64) -> Result<Self> {
        ensure_finite("logp_new", logp_new)?;
        ensure_finite("logp_old", logp_old)?;
        let log_ratio = (logp_new - logp_old).clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
        Ok(Self(log_ratio.exp()))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn inverse(self) -> Self {
        Self(1.0 / self.0)
    }
}

/// Centralised advantage shared by all agents at a timestep.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct JointAdvantage(f64);

impl JointAdvantage {
    pub fn new(value: f64) -> Result<Self> {
        ensure_finite("advantage", value).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Non-negative barrier strength `α`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PenaltyWeight(f64);

impl PenaltyWeight {
    pub const ZERO: PenaltyWeight = PenaltyWeight(0.0);

    pub fn new(alpha: f64) -> Result<Self> {
        ensure_finite("penalty weight", alpha)?;
        if alpha < 0.0 {
            return Err(Error::Domain(format!(
                "penalty weight must be non-negative, got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Objective value and `d objective / d r` at one ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateEval {
    pub objective: f64,
    pub ratio_gradient: f64,
}

/// `r + 1/r − 2`, evaluated as `(r − 1)² / r` to avoid cancellation near 1.
pub fn mars_penalty(r: ProbabilityRatio) -> f64 {
    let r = r.value();
    let d = r - 1.0;
    d * d / r
}

/// `1 − 1/r²`, evaluated as `(r − 1)(r + 1) / r²`.
pub fn mars_penalty_grad(r: ProbabilityRatio) -> f64 {
    let r = r.value();
    (r - 1.0) * (r + 1.0) / (r * r)
}

/// `(r − 1)²`, the additive quadratic penalty.
pub fn quadratic_penalty(r: ProbabilityRatio) -> f64 {
    let d = r.value() - 1.0;
    d * d
}

pub fn mars_surrogate(
    r: ProbabilityRatio,
    adv: JointAdvantage,
    alpha: PenaltyWeight,
) -> SurrogateEval {
    let (a, w) = (adv.value(), alpha.value());
    SurrogateEval {
        objective: r.value() * a - w * mars_penalty(r),
        ratio_gradient: a - w * mars_penalty_grad(r),
    }
}

/// The unique positive root of the barrier surrogate's ratio-gradient,
/// `sqrt(α / (α − A))`, or `None` when `α ≤ A`.
pub fn mars_stationary_point(adv: JointAdvantage, alpha: PenaltyWeight) -> Result<Option<f64>> {
    let (a, w) = (adv.value(), alpha.value());
    if w <= 0.0 {
        return Err(Error::Domain(format!(
            "stationary point requires a strictly positive penalty weight, got {w}"
        )));
    }
    let gap = w - a;
    if gap > 0.0 {
        Ok(Some((w / gap).sqrt()))
    } else {
        Ok(None)
    }
}

fn check_clip_bounds(eps_lower: f64, eps_upper: f64) -> Result<()> {
    ensure_finite("eps_lower", eps_lower)?;
    ensure_finite("eps_upper", eps_upper)?;
    if !(eps_lower > 0.0 && eps_lower < 1.0 && eps_upper > 0.0) {
        return Err(Error::Domain(format!(
            "clip bounds need 0 < 1-eps_lower < 1 < 1+eps_upper, got eps_lower={eps_lower}, eps_upper={eps_upper}"
        )));
    }
    Ok(())
}

fn clipped_eval(r: f64, a: f64, eps_lower: f64, eps_upper: f64) -> SurrogateEval {
    let (lo, hi) = (1.0 - eps_lower, 1.0 + eps_upper);
    let objective = (r * a).min(r.clamp(lo, hi) * a);
    // Kinks at lo/hi take the interior value.
    let inside = (lo..=hi).contains(&r);
    let non_improving = a.signum() * (r - 1.0) < 0.0;
    let ratio_gradient = if inside || non_improving { a } else { 0.0 };
    SurrogateEval {
        objective,
        ratio_gradient,
    }
}

/// Clipped surrogate with independent lower/upper bounds. Symmetric clipping
/// is `eps_lower == eps_upper`.
pub fn mappo_surrogate(
    r: ProbabilityRatio,
    adv: JointAdvantage,
    eps_lower: f64,
    eps_upper: f64,
) -> Result<SurrogateEval> {
    check_clip_bounds(eps_lower, eps_upper)?;
    Ok(clipped_eval(r.value(), adv.value(), eps_lower, eps_upper))
}

fn check_coeff(coeff: f64) -> Result<()> {
    ensure_finite("quadratic coefficient", coeff)?;
    if coeff < 0.0 {
        return Err(Error::Domain(format!(
            "quadratic coefficient must be non-negative, got {coeff}"
        )));
    }
    Ok(())
}

fn quadratic_eval(r: f64, a: f64, coeff: f64) -> SurrogateEval {
    let d = r - 1.0;
    SurrogateEval {
        objective: r * a - coeff * d * d,
        ratio_gradient: a - 2.0 * coeff * d,
    }
}

/// Quadratic-penalty surrogate `r·A − coeff·(r − 1)²`.
pub fn maspo_surrogate(
    r: ProbabilityRatio,
    adv: JointAdvantage,
    coeff: f64,
) -> Result<SurrogateEval> {
    check_coeff(coeff)?;
    Ok(quadratic_eval(r.value(), adv.value(), coeff))
}

/// `sqrt(base(r) · base(1/r))`.
///
/// Applied to `(r − 1)²` this reproduces [`mars_penalty`].
pub fn geometric_symmetrize<F>(base_penalty: F, r: ProbabilityRatio) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let forward = base_penalty(r.value());
    let backward = base_penalty(r.inverse().value());
    for (at, v) in [(r.value(), forward), (r.inverse().value(), backward)] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!(
                "base penalty must be non-negative, got {v} at r={at}"
            )));
        }
    }
    // sqrt(x)·sqrt(y) keeps the product from overflowing on wide grids.
    Ok(forward.sqrt() * backward.sqrt())
}

/// A per-sample surrogate with every coefficient bound, as a function of `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surrogate {
    Clipped {
        advantage: JointAdvantage,
        eps_lower: f64,
        eps_upper: f64,
    },
    Quadratic {
        advantage: JointAdvantage,
        coeff: f64,
    },
    Barrier {
        advantage: JointAdvantage,
        alpha: PenaltyWeight,
    },
}

impl Surrogate {
    pub fn clipped(advantage: JointAdvantage, eps_lower: f64, eps_upper: f64) -> Result<Self> {
        check_clip_bounds(eps_lower, eps_upper)?;
        Ok(Surrogate::Clipped {
            advantage,
            eps_lower,
            eps_upper,
        })
    }

    pub fn quadratic(advantage: JointAdvantage, coeff: f64) -> Result<Self> {
        check_coeff(coeff)?;
        Ok(Surrogate::Quadratic { advantage, coeff })
    }

    pub fn barrier(advantage: JointAdvantage, alpha: PenaltyWeight) -> Self {
        Surrogate::Barrier { advantage, alpha }
    }

    pub fn advantage(&self) -> JointAdvantage {
        match *self {
            Surrogate::Clipped { advantage, .. }
            | Surrogate::Quadratic { advantage, .. }
            | Surrogate::Barrier { advantage, .. } => advantage,
        }
    }

    pub fn eval(&self, r: ProbabilityRatio) -> SurrogateEval {
        match *self {
            Surrogate::Clipped {
                advantage,
                eps_lower,
                eps_upper,
            } => clipped_eval(r.value(), advantage.value(), eps_lower, eps_upper),
            Surrogate::Quadratic { advantage, coeff } => {
                quadratic_eval(r.value(), advantage.value(), coeff)
            }
            Surrogate::Barrier { advantage, alpha } => mars_surrogate(r, advantage, alpha),
        }
    }

    /// Ratio values where the objective is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Surrogate::Clipped {
                eps_lower,
                eps_upper,
                ..
            } => vec![1.0 - eps_lower, 1.0 + eps_upper],
            _ => Vec::new(),
        }
    }
}

/// Inclusive run of grid indices `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridRun {
    pub start: usize,
    pub end: usize,
}

impl GridRun {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal runs of consecutive grid points where `|d objective/d r|` is
/// below [`TRUNCATION_TOLERANCE`].
pub fn truncation_region(surrogate: &Surrogate, grid: &[f64]) -> Result<Vec<GridRun>> {
    truncation_region_with_tolerance(surrogate, grid, TRUNCATION_TOLERANCE)
}

pub fn truncation_region_with_tolerance(
    surrogate: &Surrogate,
    grid: &[f64],
    tolerance: f64,
) -> Result<Vec<GridRun>> {
    if grid.len() < 2 {
        return Err(Error::Domain(format!(
            "grid needs at least 2 points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &r) in grid.iter().enumerate() {
        let g = surrogate.eval(ProbabilityRatio::new(r)?).ratio_gradient;
        match (g.abs() < tolerance, open) {
            (true, None) => open = Some(i),
            (false, Some(start)) => {
                runs.push(GridRun { start, end: i - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        runs.push(GridRun {
            start,
            end: grid.len() - 1,
        });
    }
    Ok(runs)
}

/// `count` log-spaced points on `[lo, hi]`, inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::Domain(format!(
            "log grid needs 0 < lo < hi and count >= 2, got ({lo}, {hi}, {count})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> ProbabilityRatio {
        ProbabilityRatio::new(v).unwrap()
    }

    fn a(v: f64) -> JointAdvantage {
        JointAdvantage::new(v).unwrap()
    }

    fn w(v: f64) -> PenaltyWeight {
        PenaltyWeight::new(v).unwrap()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn penalty_values() {
        assert_eq!(mars_penalty(r(1.0)), 0.0);
        assert!(close(mars_penalty(r(2.0)), 0.5, 1e-15));
        assert!(close(mars_penalty(r(0.5)), 0.5, 1e-15));
        assert!(close(mars_penalty(r(0.1)), 8.1, 1e-12));
    }

    #[test]
    fn penalty_gradient_values() {
        assert_eq!(mars_penalty_grad(r(1.0)), 0.0);
        assert!(close(mars_penalty_grad(r(0.5)), -3.0, 1e-15));
        assert!(close(mars_penalty_grad(r(2.0)), 0.75, 1e-15));
    }

    #[test]
    fn non_positive_ratio_rejected() {
        assert!(matches!(ProbabilityRatio::new(0.0), Err(Error::Domain(_))));
        assert!(matches!(ProbabilityRatio::new(-1.0), Err(Error::Domain(_))));
        assert!(ProbabilityRatio::new(f64::NAN).is_err());
        assert!(JointAdvantage::new(f64::INFINITY).is_err());
        assert!(PenaltyWeight::new(-0.1).is_err());
        assert!(PenaltyWeight::new(f64::NAN).is_err());
    }

    #[test]
    fn log_ratio_is_clamped() {
        let big = ProbabilityRatio::from_log_probs(0.0, -1000.0).unwrap();
        assert_eq!(big.value(), 40f64.exp());
        let small = ProbabilityRatio::from_log_probs(-1000.0, 0.0).unwrap();
        assert_eq!(small.value(), (-40f64).exp());
        assert!(ProbabilityRatio::from_log_probs(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn barrier_surrogate_examples() {
        let e = mars_surrogate(r(1.0), a(1.0), w(2.7778));
        assert_eq!(e.objective, 1.0);
        assert_eq!(e.ratio_gradient, 1.0);

        let alpha = 1.0 / (1.0 - 1.25f64.powi(-2));
        let e = mars_surrogate(r(1.25), a(1.0), w(alpha));
        assert!(e.ratio_gradient.abs() < 1e-6);
        // rounded weight from the worked example
        let e = mars_surrogate(r(1.25), a(1.0), w(2.777778));
        assert!(e.ratio_gradient.abs() < 1e-6);

        let e = mars_surrogate(r(1e-6), a(-1.0), w(1.0));
        assert!(close(e.ratio_gradient, 1e12, 1e12 * 1e-9));
    }

    #[test]
    fn stationary_point_examples() {
        let p = mars_stationary_point(a(1.0), w(2.777778)).unwrap().unwrap();
        assert!(close(p, 1.25, 1e-6));
        assert_eq!(mars_stationary_point(a(0.0), w(1.0)).unwrap(), Some(1.0));
        assert_eq!(mars_stationary_point(a(2.0), w(1.0)).unwrap(), None);
        assert_eq!(mars_stationary_point(a(1.0), w(1.0)).unwrap(), None);
        assert!(mars_stationary_point(a(1.0), PenaltyWeight::ZERO).is_err());
    }

    #[test]
    fn clipped_examples() {
        let e = mappo_surrogate(r(1.3), a(1.0), 0.2, 0.2).unwrap();
        assert!(close(e.objective, 1.2, 1e-15));
        assert_eq!(e.ratio_gradient, 0.0);

        let e = mappo_surrogate(r(1.3), a(-1.0), 0.2, 0.2).unwrap();
        assert!(close(e.objective, -1.3, 1e-15));
        assert_eq!(e.ratio_gradient, -1.0);

        let e = mappo_surrogate(r(0.7), a(-1.0), 0.2, 0.2).unwrap();
        assert!(close(e.objective, -0.8, 1e-15));
        assert_eq!(e.ratio_gradient, 0.0);

        let e = mappo_surrogate(r(1.1), a(1.0), 0.2, 0.2).unwrap();
        assert!(close(e.objective, 1.1, 1e-15));
        assert_eq!(e.ratio_gradient, 1.0);
    }

    #[test]
    fn clipped_kink_takes_interior_branch() {
        let e = mappo_surrogate(r(1.2), a(1.0), 0.2, 0.2).unwrap();
        assert_eq!(e.ratio_gradient, 1.0);
        let e = mappo_surrogate(r(0.8), a(-1.0), 0.2, 0.2).unwrap();
        assert_eq!(e.ratio_gradient, -1.0);
    }

    #[test]
    fn clipped_bounds_validated() {
        for (lo, hi) in [(0.0, 0.2), (1.0, 0.2), (0.2, 0.0), (0.2, -1.0), (f64::NAN, 0.2)] {
            assert!(matches!(
                mappo_surrogate(r(1.0), a(1.0), lo, hi),
                Err(Error::Domain(_)) | Err(Error::InvalidInput(_))
            ));
        }
        // wide upper bounds are allowed
        assert!(mappo_surrogate(r(1.0), a(1.0), 0.9, 9.0).is_ok());
    }

    #[test]
    fn quadratic_examples() {
        let e = maspo_surrogate(r(1.0), a(1.0), 2.5).unwrap();
        assert_eq!((e.objective, e.ratio_gradient), (1.0, 1.0));
        let e = maspo_surrogate(r(1.2), a(1.0), 2.5).unwrap();
        assert!(close(e.objective, 1.1, 1e-14));
        assert!(e.ratio_gradient.abs() < 1e-14);
        let e = maspo_surrogate(r(1e-12), a(-1.0), 2.5).unwrap();
        assert!(close(e.objective, -2.5, 1e-10));
        assert!(maspo_surrogate(r(1.0), a(1.0), -0.1).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        let sq = |x: f64| (x - 1.0) * (x - 1.0);
        assert!(close(geometric_symmetrize(sq, r(2.0)).unwrap(), 0.5, 1e-15));
        assert_eq!(geometric_symmetrize(sq, r(1.0)).unwrap(), 0.0);
        assert!(close(geometric_symmetrize(sq, r(0.1)).unwrap(), 8.1, 1e-12));
        let bad = |x: f64| x - 1.0;
        assert!(matches!(
            geometric_symmetrize(bad, r(2.0)),
            Err(Error::Domain(_))
        ));
    }

    fn step_grid() -> Vec<f64> {
        (0..=295).map(|i| 0.05 + 0.01 * i as f64).collect()
    }

    #[test]
    fn truncation_clipped_has_one_upper_interval() {
        let grid = step_grid();
        let s = Surrogate::clipped(a(1.0), 0.2, 0.2).unwrap();
        let runs = truncation_region(&s, &grid).unwrap();
        assert_eq!(runs.len(), 1);
        let run = runs[0];
        assert_eq!(run.end, grid.len() - 1);
        assert!(grid[run.start] > 1.2);
        assert!(grid[run.start - 1] <= 1.2 + 1e-12);
    }

    #[test]
    fn truncation_barrier_has_no_interval() {
        let grid = step_grid();
        let alpha = 1.0 / (1.0 - 1.25f64.powi(-2));
        let s = Surrogate::barrier(a(1.0), w(alpha));
        let runs = truncation_region(&s, &grid).unwrap();
        assert!(runs.iter().all(|run| run.len() <= 1));
    }

    #[test]
    fn truncation_quadratic_at_most_one_point() {
        let grid = step_grid();
        let s = Surrogate::quadratic(a(1.0), 2.5).unwrap();
        let runs = truncation_region(&s, &grid).unwrap();
        assert!(runs.len() <= 1);
        if let Some(run) = runs.first() {
            assert_eq!(run.len(), 1);
            assert!((grid[run.start] - 1.2).abs() < 0.006);
        }
    }

    #[test]
    fn truncation_grid_validation() {
        let s = Surrogate::barrier(a(1.0), w(1.0));
        assert!(truncation_region(&s, &[1.0]).is_err());
        assert!(truncation_region(&s, &[1.0, 1.0]).is_err());
        assert!(truncation_region(&s, &[2.0, 1.0]).is_err());
        assert!(truncation_region(&s, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e4, 1000).unwrap();
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[999], 1e4);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_grid(1.0, 1.0, 10).is_err());
    }
}
