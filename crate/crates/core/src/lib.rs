//! Trust-region surrogates for cooperative multi-agent policy optimisation,
//! with a small training stack to exercise them.

pub mod advantage;
pub mod approximator;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod trainer;
pub mod trust_region;
pub mod verify;

pub use error::{Error, Result};
pub use objective::{JointAdvantage, PenaltyWeight, ProbabilityRatio, Surrogate, SurrogateEval};
pub use trust_region::{TrustRegionSpec, Variant};
