use serde::{Deserialize, Serialize};

use super::rates::estimate_rate;
use crate::types::{EventRecord, RateEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBin {
    pub t_start: f64,
    pub t_end: f64,
    pub estimate: RateEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeHistory {
    pub bins: Vec<RateBin>,
    /// Mean T1 per bin, µs, when a ground-truth schedule is supplied.
    pub t1_overlay: Option<Vec<f64>>,
}

impl SurgeHistory {
    pub fn with_t1_overlay(mut self, t1_us: Vec<f64>) -> Result<Self> {
        if t1_us.len() != self.bins.len() {
            return Err(Error::InvalidArgument(format!(
                "overlay has {} bins, history has {}",
                t1_us.len(),
                self.bins.len()
            )));
        }
        self.t1_overlay = Some(t1_us);
        Ok(self)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.estimate.rate).collect()
    }
}

/// Bins event times into consecutive intervals of `bin_width_s` covering the
/// acquisition; a shorter final bin holds any remainder.
pub fn surge_history(events: &[EventRecord], t_cycle_s: f64, total_cycles: usize, bin_width_s: f64) -> Result<SurgeHistory> {
    if !(bin_width_s > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width must be positive, got {bin_width_s}")));
    }
    let total = total_cycles as f64 * t_cycle_s;
    let n_bins = ((total / bin_width_s) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    for e in events {
        let b = ((e.t0_cycle as f64 * t_cycle_s) / bin_width_s) as usize;
        counts[b.min(n_bins - 1)] += 1;
    }
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let t_start = i as f64 * bin_width_s;
            let t_end = ((i + 1) as f64 * bin_width_s).min(total);
            Ok(RateBin {
                t_start,
                t_end,
                estimate: estimate_rate(c, (t_end - t_start).max(f64::MIN_POSITIVE))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurgeHistory { bins, t1_overlay: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Baseline,
    Elevated,
    Suppressed,
}

/// Labels each bin relative to `reference_rate` with hysteresis: a bin at or
/// above `factor · reference` is elevated, at or below `reference / factor`
/// suppressed, and anything in between keeps the previous label. Returns the
/// sequence of distinct regimes visited.
pub fn regime_sequence(rates: &[f64], reference_rate: f64, factor: f64) -> Vec<Regime> {
    let mut seq = vec![Regime::Baseline];
    let mut cur = Regime::Baseline;
    for &r in rates {
        if r >= factor * reference_rate {
            cur = Regime::Elevated;
        } else if r <= reference_rate / factor {
            cur = Regime::Suppressed;
        }
        if *seq.last().unwrap() != cur {
            seq.push(cur);
        }
    }
    seq
}
