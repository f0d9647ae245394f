use serde::{Deserialize, Serialize};

use crate::types::{Classification, EventRecord, RateEstimate};
use crate::{Error, Result};

/// True when `c` belongs to the requested class. `Kept` also matches
/// `KeptLongRecovery`, since long-recovery events are kept events.
pub fn class_matches(class: Classification, c: Classification) -> bool {
    match class {
        Classification::Kept => c.is_kept(),
        other => c == other,
    }
}

/// Step curve `(time_s, count)` of events of `class`.
///
/// Starts at `(0, 0)`, rises by one at each matching event and ends at the
/// acquisition end `total_cycles · t_cycle_s`.
pub fn cumulative_sum(events: &[EventRecord], class: Classification, total_cycles: usize, t_cycle_s: f64) -> Vec<(f64, u64)> {
    let mut out = vec![(0.0, 0)];
    let mut count = 0u64;
    for e in events.iter().filter(|e| class_matches(class, e.classification)) {
        count += 1;
        out.push((e.t0_cycle as f64 * t_cycle_s, count));
    }
    out.push((total_cycles as f64 * t_cycle_s, count));
    out
}

/// Poisson rate estimate: `N / T ± √N / T`.
pub fn estimate_rate(n_events: u64, duration_s: f64) -> Result<RateEstimate> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration_s}")));
    }
    Ok(RateEstimate {
        n_events,
        duration: duration_s,
        rate: n_events as f64 / duration_s,
        stderr: (n_events as f64).sqrt() / duration_s,
    })
}

/// Event rates as a function of the detection threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub n_th: Vec<u32>,
    pub rates: Vec<RateEstimate>,
}

/// For each `n_th`, the rate of events with `peak_n >= n_th`.
pub fn rate_vs_threshold(events: &[EventRecord], n_th_range: &[u32], duration_s: f64) -> Result<RateCurve> {
    let rates = n_th_range
        .iter()
        .map(|&k| estimate_rate(events.iter().filter(|e| e.peak_n >= k).count() as u64, duration_s))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurve {
        n_th: n_th_range.to_vec(),
        rates,
    })
}

/// Rate per cm² per minute.
pub fn normalize_rate(rate: &RateEstimate, area_cm2: f64) -> Result<f64> {
    check_area(area_cm2)?;
    Ok(rate.rate * 60.0 / area_cm2)
}

/// Inverse of [`normalize_rate`]: events per second for a normalized value.
pub fn denormalize_rate(per_cm2_min: f64, area_cm2: f64) -> Result<f64> {
    check_area(area_cm2)?;
    Ok(per_cm2_min * area_cm2 / 60.0)
}

fn check_area(area_cm2: f64) -> Result<()> {
    if !(area_cm2 > 0.0) || !area_cm2.is_finite() {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area_cm2}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    /// `1 - b/a`; negative when `b` is larger.
    pub value: f64,
    pub error: f64,
}

/// Fractional reduction of `b` relative to `a`, with first-order
/// propagation of both standard errors added in quadrature.
pub fn compare_scenarios(a: &RateEstimate, b: &RateEstimate) -> Result<Reduction> {
    if !(a.rate > 0.0) {
        return Err(Error::InvalidArgument("baseline rate must be positive".into()));
    }
    let ratio = b.rate / a.rate;
    let rel_a = a.stderr / a.rate;
    let rel_b = if b.rate > 0.0 { b.stderr / b.rate } else { 0.0 };
    let error = if b.rate > 0.0 {
        ratio * (rel_a * rel_a + rel_b * rel_b).sqrt()
    } else {
        b.stderr / a.rate
    };
    Ok(Reduction {
        value: 1.0 - ratio,
        error,
    })
}
