//! Two-pass burst detection.
//!
//! Outcomes become per-qubit error flags, flags become a simultaneous-error
//! count `n[k]`, and every run of `n >= 1` reaching `n_th` becomes a
//! candidate. Candidates are scored with a zero-mean stepped-exponential
//! matched filter; the peak score sets the alignment origin and, against a
//! threshold fitted on the score distribution, decides keep or reject. An
//! optional second pass with a 2 ms template singles out kept events with
//! unusually long recovery.

mod candidates;
mod flags;
mod pipeline;
mod template;
mod threshold;

pub use candidates::{baseline_before, mark_candidates, tail_for_tau, BASELINE_CYCLES, MAX_TAIL_CYCLES};
pub use flags::{compute_error_flags, count_simultaneous, error_counts};
pub use pipeline::{
    classify, detect, detect_chunked, detect_with_fit, second_pass_long_recovery, CountSource, Detection,
    DetectorConfig, SecondPass, TauSetting, BASELINE_DISCARD, LONG_RECOVERY_TAU_S, MIN_SECOND_PASS_SCORE,
};
pub use template::{make_template, matched_filter, score_and_align, TemplateSpec};
pub use threshold::{
    best_split, default_tau_grid, fit_threshold, log_histogram, optimize_tau, separation_score, Histogram, Split,
    ThresholdFit, ThresholdPolicy,
};
