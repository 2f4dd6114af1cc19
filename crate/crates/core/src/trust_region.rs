//! Trust-region parameterisations and per-sample coefficient calibration.
//!
//! A [`TrustRegionSpec`] names one of seven ratio objectives and carries its
//! boundary parameters. [`resolve`] binds the spec and a sample's advantage
//! into a concrete [`Surrogate`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::objective::{mars_penalty_grad, JointAdvantage, PenaltyWeight, ProbabilityRatio, Surrogate};

pub const DEFAULT_CLIP_EPS: f64 = 0.2;
pub const DEFAULT_B_LOWER: f64 = 0.8;
pub const DEFAULT_B_UPPER: f64 = 1.25;
pub const DEFAULT_SYMMETRIC_B: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mappo,
    MappoAsymmetric,
    Maspo,
    MaspoAsymmetric,
    Mars,
    MarsMultiplicativeSymmetric,
    MarsAdditiveSymmetric,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Mappo,
        Variant::MappoAsymmetric,
        Variant::Maspo,
        Variant::MaspoAsymmetric,
        Variant::Mars,
        Variant::MarsMultiplicativeSymmetric,
        Variant::MarsAdditiveSymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mappo => "mappo",
            Variant::MappoAsymmetric => "mappo_asymmetric",
            Variant::Maspo => "maspo",
            Variant::MaspoAsymmetric => "maspo_asymmetric",
            Variant::Mars => "mars",
            Variant::MarsMultiplicativeSymmetric => "mars_multiplicative_symmetric",
            Variant::MarsAdditiveSymmetric => "mars_additive_symmetric",
        }
    }

    /// True for variants with a sign-dependent target ratio.
    pub fn has_target(self) -> bool {
        matches!(
            self,
            Variant::MaspoAsymmetric
                | Variant::Mars
                | Variant::MarsMultiplicativeSymmetric
                | Variant::MarsAdditiveSymmetric
        )
    }

    /// The spec with default boundary parameters.
    pub fn default_spec(self) -> TrustRegionSpec {
        match self {
            Variant::Mappo => TrustRegionSpec::Mappo { eps: DEFAULT_CLIP_EPS },
            Variant::MappoAsymmetric => TrustRegionSpec::MappoAsymmetric {
                eps_lower: DEFAULT_CLIP_EPS,
                eps_upper: DEFAULT_CLIP_EPS,
            },
            Variant::Maspo => TrustRegionSpec::Maspo { eps: DEFAULT_CLIP_EPS },
            Variant::MaspoAsymmetric => TrustRegionSpec::MaspoAsymmetric {
                eps_lower: DEFAULT_CLIP_EPS,
                eps_upper: DEFAULT_CLIP_EPS,
            },
            Variant::Mars => TrustRegionSpec::Mars {
                b_lower: DEFAULT_B_LOWER,
                b_upper: DEFAULT_B_UPPER,
            },
            Variant::MarsMultiplicativeSymmetric => {
                TrustRegionSpec::MarsMultiplicativeSymmetric { b: DEFAULT_SYMMETRIC_B }
            }
            Variant::MarsAdditiveSymmetric => {
                TrustRegionSpec::MarsAdditiveSymmetric { b: DEFAULT_SYMMETRIC_B }
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Active objective variant plus its boundary parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrustRegionSpec {
    Mappo {
        #[serde(default = "clip_eps")]
        eps: f64,
    },
    MappoAsymmetric {
        #[serde(default = "clip_eps")]
        eps_lower: f64,
        #[serde(default = "clip_eps")]
        eps_upper: f64,
    },
    Maspo {
        #[serde(default = "clip_eps")]
        eps: f64,
    },
    MaspoAsymmetric {
        #[serde(default = "clip_eps")]
        eps_lower: f64,
        #[serde(default = "clip_eps")]
        eps_upper: f64,
    },
    Mars {
        #[serde(default = "b_lower")]
        b_lower: f64,
        #[serde(default = "b_upper")]
        b_upper: f64,
    },
    MarsMultiplicativeSymmetric {
        #[serde(default = "symmetric_b")]
        b: f64,
    },
    MarsAdditiveSymmetric {
        #[serde(default = "symmetric_b")]
        b: f64,
    },
}

fn clip_eps() -> f64 {
    DEFAULT_CLIP_EPS
}

fn b_lower() -> f64 {
    DEFAULT_B_LOWER
}

fn b_upper() -> f64 {
    DEFAULT_B_UPPER
}

fn symmetric_b() -> f64 {
    DEFAULT_SYMMETRIC_B
}

impl Default for TrustRegionSpec {
    fn default() -> Self {
        Variant::Mars.default_spec()
    }
}

fn invariant(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

impl TrustRegionSpec {
    pub fn variant(&self) -> Variant {
        match self {
            TrustRegionSpec::Mappo { .. } => Variant::Mappo,
            TrustRegionSpec::MappoAsymmetric { .. } => Variant::MappoAsymmetric,
            TrustRegionSpec::Maspo { .. } => Variant::Maspo,
            TrustRegionSpec::MaspoAsymmetric { .. } => Variant::MaspoAsymmetric,
            TrustRegionSpec::Mars { .. } => Variant::Mars,
            TrustRegionSpec::MarsMultiplicativeSymmetric { .. } => {
                Variant::MarsMultiplicativeSymmetric
            }
            TrustRegionSpec::MarsAdditiveSymmetric { .. } => Variant::MarsAdditiveSymmetric,
        }
    }

    /// Checks the per-variant parameter invariants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrustRegionSpec::Mappo { eps } | TrustRegionSpec::Maspo { eps } => {
                ensure_finite("eps", eps)?;
                invariant(eps > 0.0 && eps < 1.0, || {
                    format!("eps must satisfy 0 < eps < 1, got {eps}")
                })
            }
            TrustRegionSpec::MappoAsymmetric { eps_lower, eps_upper }
            | TrustRegionSpec::MaspoAsymmetric { eps_lower, eps_upper } => {
                ensure_finite("eps_lower", eps_lower)?;
                ensure_finite("eps_upper", eps_upper)?;
                invariant(eps_lower > 0.0 && eps_lower < 1.0, || {
                    format!("eps_lower must satisfy 0 < eps_lower < 1, got {eps_lower}")
                })?;
                invariant(eps_upper > 0.0, || {
                    format!("eps_upper must be positive, got {eps_upper}")
                })
            }
            TrustRegionSpec::Mars { b_lower, b_upper } => {
                ensure_finite("b_lower", b_lower)?;
                ensure_finite("b_upper", b_upper)?;
                invariant(b_lower > 0.0 && b_lower < 1.0, || {
                    format!("b_lower must satisfy 0 < b_lower < 1, got {b_lower}")
                })?;
                invariant(b_upper > 1.0, || {
                    format!("b_upper must be greater than 1, got {b_upper}")
                })
            }
            TrustRegionSpec::MarsMultiplicativeSymmetric { b } => {
                ensure_finite("b", b)?;
                invariant(b > 1.0, || format!("b must be greater than 1, got {b}"))
            }
            TrustRegionSpec::MarsAdditiveSymmetric { b } => {
                ensure_finite("b", b)?;
                invariant(b > 1.0 && b < 2.0, || {
                    format!("b must satisfy 1 < b < 2, got {b}")
                })
            }
        }
    }

    /// `(lower, upper)` target ratios, for variants that have them.
    pub fn target_bounds(&self) -> Result<(f64, f64)> {
        match *self {
            TrustRegionSpec::Mars { b_lower, b_upper } => Ok((b_lower, b_upper)),
            TrustRegionSpec::MarsMultiplicativeSymmetric { b } => Ok((1.0 / b, b)),
            TrustRegionSpec::MarsAdditiveSymmetric { b } => Ok((2.0 - b, b)),
            TrustRegionSpec::MaspoAsymmetric { eps_lower, eps_upper } => {
                Ok((1.0 - eps_lower, 1.0 + eps_upper))
            }
            _ => Err(Error::UnsupportedVariant(format!(
                "{} has no target ratio",
                self.variant()
            ))),
        }
    }
}

/// Upper target for `A ≥ 0`, lower target for `A < 0`.
pub fn select_target(adv: JointAdvantage, spec: &TrustRegionSpec) -> Result<f64> {
    let (lower, upper) = spec.target_bounds()?;
    Ok(if adv.value() >= 0.0 { upper } else { lower })
}

/// Penalty weight making `target` the stationary point of the barrier
/// surrogate: `A / (1 − target⁻²)`. Zero advantage gives exactly zero.
pub fn alpha_for_target(adv: JointAdvantage, target: f64) -> Result<PenaltyWeight> {
    ensure_finite("target", target)?;
    if target <= 0.0 || target == 1.0 {
        return Err(Error::Domain(format!(
            "target ratio must be positive and different from 1, got {target}"
        )));
    }
    let a = adv.value();
    if a == 0.0 {
        return Ok(PenaltyWeight::ZERO);
    }
    let alpha = a / mars_penalty_grad(ProbabilityRatio::new(target)?);
    if alpha < 0.0 {
        return Err(Error::Domain(format!(
            "target {target} lies on the wrong side of 1 for advantage {a}"
        )));
    }
    PenaltyWeight::new(alpha)
}

/// `alpha_for_target` with the additive target `1 + sign(A)·ε`.
pub fn alpha_for_additive_epsilon(adv: JointAdvantage, eps: f64) -> Result<PenaltyWeight> {
    ensure_finite("eps", eps)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must satisfy 0 < eps < 1, got {eps}")));
    }
    let target = if adv.value() >= 0.0 { 1.0 + eps } else { 1.0 - eps };
    alpha_for_target(adv, target)
}

/// Binds a spec and one sample's advantage into a concrete surrogate.
pub fn resolve(spec: &TrustRegionSpec, adv: JointAdvantage) -> Result<Surrogate> {
    let a = adv.value();
    match *spec {
        TrustRegionSpec::Mappo { eps } => Surrogate::clipped(adv, eps, eps),
        TrustRegionSpec::MappoAsymmetric { eps_lower, eps_upper } => {
            Surrogate::clipped(adv, eps_lower, eps_upper)
        }
        TrustRegionSpec::Maspo { eps } => Surrogate::quadratic(adv, a.abs() / (2.0 * eps)),
        TrustRegionSpec::MaspoAsymmetric { .. } => {
            let coeff = if a == 0.0 {
                0.0
            } else {
                a / (2.0 * (select_target(adv, spec)? - 1.0))
            };
            Surrogate::quadratic(adv, coeff)
        }
        TrustRegionSpec::Mars { .. }
        | TrustRegionSpec::MarsMultiplicativeSymmetric { .. }
        | TrustRegionSpec::MarsAdditiveSymmetric { .. } => {
            let alpha = alpha_for_target(adv, select_target(adv, spec)?)?;
            Ok(Surrogate::barrier(adv, alpha))
        }
    }
}
