//! Two-cluster analysis of matched-filter peak values.
//!
//! Every split between consecutive distinct peaks is scored with the
//! minimum-error criterion for a two-Gaussian mixture
//!
//! ```text
//! J = P1 ln s1² + P2 ln s2² - 2 (P1 ln P1 + P2 ln P2)
//! ```
//!
//! which, unlike a between-class variance ratio, still finds a few hundred
//! bursts among millions of baseline coincidences. Peaks are used on their
//! own scale: noise peaks can be zero or negative.
//!
//! The separation score of the chosen split is the depth of the valley
//! around the threshold: one minus the number of peaks within `±h` of it,
//! plus one, over the densest `2h` window inside either cluster, with `h`
//! half the larger cluster spread. A split through the tail of a single
//! cluster has no valley and scores near 0; well-separated clusters score
//! near 1. A split that does not beat the one-cluster fit scores 0.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cluster variances are floored at this fraction of the total spread, squared,
/// so a cluster made of tied values cannot dominate the criterion.
const VARIANCE_FLOOR_FRACTION: f64 = 0.01;

/// How the keep/reject threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Fit once on the candidates at `n_th = 3`, then reuse for every `n_th >= 3`.
    #[default]
    MinFalsePositiveAtNth3,
}

impl ThresholdPolicy {
    /// Event threshold at which the fit is made.
    pub fn fit_n_th(self) -> u32 {
        match self {
            Self::MinFalsePositiveAtNth3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub separation_score: f64,
    /// Template decay constant the peaks were computed with, when known.
    pub tau_cycles: Option<f64>,
    pub histogram: Histogram,
}

/// Best two-cluster split of a set of peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    /// Midpoint between the largest lower-cluster peak and the smallest upper-cluster peak.
    pub threshold: f64,
    pub score: f64,
    pub n_lower: usize,
    /// Empty gap between the clusters over their pooled spread.
    pub gap_ratio: f64,
}

/// Exhaustive scan over all splits between distinct peak values.
pub fn best_split(peaks: &[f64]) -> Result<Split> {
    if peaks.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 peaks, got {}", peaks.len())));
    }
    if let Some(bad) = peaks.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("peak value {bad}")));
    }
    let mut x = peaks.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if x[0] == x[x.len() - 1] {
        return Err(Error::Degenerate("all peak values are identical".into()));
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    // centred prefix sums keep the variances accurate for millions of samples
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        let d = x[i] - mean;
        s1[i + 1] = s1[i] + d;
        s2[i + 1] = s2[i] + d * d;
    }
    let total_var = s2[n] / n as f64;
    let floor = (VARIANCE_FLOOR_FRACTION * VARIANCE_FLOOR_FRACTION * total_var).max(1e-24);
    let var_of = |lo: usize, hi: usize| -> f64 {
        let m = (hi - lo) as f64;
        let a = s1[hi] - s1[lo];
        let b = s2[hi] - s2[lo];
        (b / m - (a / m) * (a / m)).max(floor)
    };
    let mut best: Option<(f64, usize)> = None;
    for i in 1..n {
        if x[i - 1] == x[i] {
            continue;
        }
        let p1 = i as f64 / n as f64;
        let p2 = 1.0 - p1;
        let j = p1 * var_of(0, i).ln() + p2 * var_of(i, n).ln() - 2.0 * (p1 * p1.ln() + p2 * p2.ln());
        if best.is_none_or(|(bj, _)| j < bj) {
            best = Some((j, i));
        }
    }
    let (j_best, k) = best.expect("at least two distinct values");
    let threshold = 0.5 * (x[k - 1] + x[k]);
    let (v1, v2) = (var_of(0, k), var_of(k, n));
    let gap_ratio = (x[k] - x[k - 1]) / (0.5 * (v1 + v2)).sqrt();
    let score = if j_best < total_var.max(floor).ln() {
        valley_score(&x, k, threshold, 0.5 * v1.max(v2).sqrt())
    } else {
        0.0
    };
    Ok(Split {
        threshold,
        score,
        n_lower: k,
        gap_ratio,
    })
}

/// `1 - (count(|x - t| <= h) + 1) / min(densest 2h window in x[..k], in x[k..])`, clamped.
fn valley_score(x: &[f64], k: usize, t: f64, h: f64) -> f64 {
    let in_gap = x.partition_point(|&v| v <= t + h) - x.partition_point(|&v| v < t - h);
    let densest = |c: &[f64]| -> usize {
        let mut j = 0;
        let mut best = 0;
        for i in 0..c.len() {
            while j < c.len() && c[j] <= c[i] + 2.0 * h {
                j += 1;
            }
            best = best.max(j - i);
        }
        best
    };
    let peak = densest(&x[..k]).min(densest(&x[k..])) as f64;
    // one extra count in the gap keeps a split-off handful of outliers from scoring 1
    (1.0 - (in_gap + 1) as f64 / peak).clamp(0.0, 1.0)
}

/// Separation score of the best split.
pub fn separation_score(peaks: &[f64]) -> Result<f64> {
    best_split(peaks).map(|s| s.score)
}

/// Log-spaced histogram over the positive peaks, `ceil(sqrt(#peaks))` bins.
/// Diagnostic only.
pub fn log_histogram(peaks: &[f64]) -> Histogram {
    let pos: Vec<f64> = peaks.iter().cloned().filter(|p| *p > 0.0 && p.is_finite()).collect();
    if pos.is_empty() {
        return Histogram {
            edges: Vec::new(),
            counts: Vec::new(),
        };
    }
    let bins = (peaks.len() as f64).sqrt().ceil().max(1.0) as usize;
    let lo = pos.iter().cloned().fold(f64::INFINITY, f64::min).ln();
    let hi = pos.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ln();
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| (lo + width * i as f64).exp()).collect();
    let mut counts = vec![0u64; bins];
    for p in pos {
        let b = (((p.ln() - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// Fits the keep/reject threshold on a set of peak values.
pub fn fit_threshold(peaks: &[f64], _policy: ThresholdPolicy) -> Result<ThresholdFit> {
    let split = best_split(peaks)?;
    Ok(ThresholdFit {
        threshold: split.threshold,
        separation_score: split.score,
        tau_cycles: None,
        histogram: log_histogram(peaks),
    })
}

/// Default decay-constant grid: 16 log-spaced points from 1 to 1000 cycles.
pub fn default_tau_grid() -> Vec<f64> {
    (0..16).map(|i| 10f64.powf(3.0 * i as f64 / 15.0)).collect()
}

/// Picks the decay constant whose peaks separate best; equal scores are
/// decided by the wider gap, then by the earlier grid point.
///
/// `scan` pairs each grid value with the candidate peaks computed at it.
pub fn optimize_tau(scan: &[(f64, Vec<f64>)]) -> Result<(f64, f64)> {
    if scan.is_empty() {
        return Err(Error::InvalidArgument("empty tau grid".into()));
    }
    let mut best: Option<(f64, Split)> = None;
    let mut last_err = None;
    for (tau, peaks) in scan {
        match best_split(peaks) {
            Ok(s) => {
                let better = best.is_none_or(|(_, b)| {
                    s.score > b.score || (s.score == b.score && s.gap_ratio > b.gap_ratio)
                });
                if better {
                    best = Some((*tau, s));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.map(|(t, s)| (t, s.score))
        .ok_or_else(|| last_err.unwrap_or_else(|| Error::Degenerate("no usable tau".into())))
}
