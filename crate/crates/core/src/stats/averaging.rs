use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{domain, CounterRng};
use crate::types::EventRecord;
use crate::{Error, Result};

/// Mean simultaneous-error count around aligned events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedTrace {
    /// Seconds relative to `t0`, spaced by one cycle.
    pub t_rel: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub n_events: usize,
    /// Mean of the pre-event part of the trace.
    pub baseline: f64,
    pub t_rec: Option<f64>,
}

impl AveragedTrace {
    /// Index of `t_rel == 0`.
    pub fn origin(&self) -> usize {
        self.t_rel.iter().position(|&t| t >= 0.0).unwrap_or(0)
    }
}

/// Cycles kept before and after `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub pre: usize,
    pub post: usize,
}

fn usable(e: &EventRecord, len: usize, w: Window) -> bool {
    e.t0_cycle >= w.pre && e.t0_cycle + w.post <= len
}

/// Averages `n` over windows `[t0 - pre, t0 + post)` of every event whose
/// window fits inside the trace.
pub fn average_events(events: &[EventRecord], n: &[u16], window: Window, t_cycle_s: f64) -> Result<AveragedTrace> {
    let picked: Vec<usize> = events
        .iter()
        .filter(|e| usable(e, n.len(), window))
        .map(|e| e.t0_cycle)
        .collect();
    average_weighted(&picked, None, n, window, t_cycle_s)
}

fn average_weighted(t0s: &[usize], weights: Option<&[u32]>, n: &[u16], w: Window, t_cycle_s: f64) -> Result<AveragedTrace> {
    if w.pre == 0 || w.post == 0 {
        return Err(Error::InvalidArgument("window needs at least one cycle on each side".into()));
    }
    let len = w.pre + w.post;
    // integer sums keep the result independent of event order
    let mut sums = vec![0u64; len];
    let mut total = 0u64;
    for (i, &t0) in t0s.iter().enumerate() {
        let wt = weights.map_or(1, |ws| ws[i]) as u64;
        if wt == 0 {
            continue;
        }
        total += wt;
        for (s, &v) in sums.iter_mut().zip(&n[t0 - w.pre..t0 + w.post]) {
            *s += wt * v as u64;
        }
    }
    if total == 0 {
        return Err(Error::NoUsableEvents);
    }
    let mean_n: Vec<f64> = sums.iter().map(|&s| s as f64 / total as f64).collect();
    let baseline = sums[..w.pre].iter().sum::<u64>() as f64 / (total as f64 * w.pre as f64);
    Ok(AveragedTrace {
        t_rel: (0..len).map(|i| (i as f64 - w.pre as f64) * t_cycle_s).collect(),
        mean_n,
        n_events: total as usize,
        baseline,
        t_rec: None,
    })
}

/// "Returned to baseline" means staying within `baseline + tol_fraction ·
/// (peak - baseline)` for `consecutive` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCriterion {
    pub tol_fraction: f64,
    pub consecutive: usize,
}

impl Default for RecoveryCriterion {
    fn default() -> Self {
        Self {
            tol_fraction: 0.1,
            consecutive: 20,
        }
    }
}

/// Earliest time after the peak at which the trace settles back to baseline:
/// the interpolated crossing of `baseline + tol · height` that starts a run
/// of `consecutive` settled samples.
pub fn extract_recovery_time(trace: &AveragedTrace, criterion: RecoveryCriterion) -> Result<f64> {
    let origin = trace.origin();
    let (peak_i, peak) = trace.mean_n[origin..]
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i + origin, v) } else { acc });
    let height = peak - trace.baseline;
    if !(height > 1e-12 * trace.baseline.abs().max(1.0)) {
        return Err(Error::NoPeak);
    }
    let limit = trace.baseline + criterion.tol_fraction * height;
    let w = criterion.consecutive.max(1);
    let mut run = 0;
    for i in peak_i + 1..trace.mean_n.len() {
        if trace.mean_n[i] <= limit {
            run += 1;
            if run == w {
                // linear interpolation of the crossing between the settled sample and the one before it
                let j = i + 1 - w;
                let (v0, v1) = (trace.mean_n[j - 1], trace.mean_n[j]);
                let frac = if v0 > v1 { ((v0 - limit) / (v0 - v1)).clamp(0.0, 1.0) } else { 1.0 };
                return Ok(trace.t_rel[j - 1] + frac * (trace.t_rel[j] - trace.t_rel[j - 1]));
            }
        } else {
            run = 0;
        }
    }
    Err(Error::Unrecovered)
}

/// Log-linear least-squares fit of `mean_n - baseline ≈ A e^{-t/τ}` over
/// `t_rel ∈ [from_s, to_s]`, using only samples above baseline.
/// Returns `(A, τ)`.
pub fn fit_exponential_tail(trace: &AveragedTrace, from_s: f64, to_s: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = trace
        .t_rel
        .iter()
        .zip(&trace.mean_n)
        .filter(|(&t, &v)| t >= from_s && t <= to_s && v > trace.baseline)
        .map(|(&t, &v)| (t, (v - trace.baseline).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("fewer than two samples above baseline".into()));
    }
    let k = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt) * (p.0 - mt)));
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Degenerate("tail is not decaying".into()));
    }
    Ok(((my - slope * mt).exp(), -1.0 / slope))
}

/// Recovery time with a bootstrap standard deviation over resampled events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEstimate {
    pub t_rec: f64,
    pub stderr: f64,
    /// Resamples whose trace recovered; the others are left out of `stderr`.
    pub resamples_used: usize,
}

pub fn bootstrap_recovery_time(
    events: &[EventRecord],
    n: &[u16],
    window: Window,
    t_cycle_s: f64,
    criterion: RecoveryCriterion,
    resamples: usize,
    seed: u64,
) -> Result<RecoveryEstimate> {
    let t0s: Vec<usize> = events
        .iter()
        .filter(|e| usable(e, n.len(), window))
        .map(|e| e.t0_cycle)
        .collect();
    let t_rec = extract_recovery_time(&average_weighted(&t0s, None, n, window, t_cycle_s)?, criterion)?;
    let mut rng = CounterRng::new(seed).stream(0, domain::BOOTSTRAP);
    let mut weights = vec![0u32; t0s.len()];
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..t0s.len() {
            weights[rng.random_range(0..t0s.len())] += 1;
        }
        let trace = average_weighted(&t0s, Some(&weights), n, window, t_cycle_s)?;
        if let Ok(t) = extract_recovery_time(&trace, criterion) {
            draws.push(t);
        }
    }
    let k = draws.len() as f64;
    let stderr = if draws.len() > 1 {
        let m = draws.iter().sum::<f64>() / k;
        (draws.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RecoveryEstimate {
        t_rec,
        stderr,
        resamples_used: draws.len(),
    })
}
