//! Synthetic outcome streams with a ground-truth burst log.

mod engine;
mod profile;
mod scenario;

pub use engine::{error_prob_per_cycle, simulate, surge_t1_overlay, BurstTruth, GroundTruthLog, TraceSample};
pub use profile::{generate_arrivals, rate_profile_at, ProfileKind, RateProfile};
pub use scenario::{Injection, QubitParams, Scenario};
