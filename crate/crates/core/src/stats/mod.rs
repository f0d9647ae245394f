//! Rates, averaged event traces, recovery times and surge histories.
//!
//! All times are acquisition time (cycles · t_cycle). Errors on counts are
//! Poisson, `√N / T`.

mod averaging;
mod rates;
mod surge;

pub use averaging::{
    average_events, bootstrap_recovery_time, extract_recovery_time, fit_exponential_tail, AveragedTrace,
    RecoveryCriterion, RecoveryEstimate, Window,
};
pub use rates::{
    class_matches, compare_scenarios, cumulative_sum, denormalize_rate, estimate_rate, normalize_rate,
    rate_vs_threshold, RateCurve, Reduction,
};
pub use surge::{regime_sequence, surge_history, RateBin, Regime, SurgeHistory};
