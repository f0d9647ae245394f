use std::borrow::Cow;

use super::candidates::{mark_candidates, tail_for_tau, BASELINE_CYCLES};
use super::flags::error_counts;
use super::template::TemplateSpec;
use super::threshold::{default_tau_grid, fit_threshold, optimize_tau, ThresholdFit, ThresholdPolicy};
use crate::types::{BitMatrix, Classification, EventRecord, OutcomeSeries};
use crate::{Error, Result};

/// Decay constant of the second-pass template, seconds.
pub const LONG_RECOVERY_TAU_S: f64 = 2e-3;

/// Events whose pre-window baseline exceeds this are dropped in the second pass.
pub const BASELINE_DISCARD: f64 = 1.5;

/// Second-pass relabelling needs at least this separation score, so an
/// all-typical set is not split in two.
pub const MIN_SECOND_PASS_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum TauSetting {
    Fixed(f64),
    /// Scan the grid and keep the best-separating value.
    Auto(Vec<f64>),
}

impl TauSetting {
    pub fn auto() -> Self {
        Self::Auto(default_tau_grid())
    }
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub n_th: u32,
    pub tau: TauSetting,
    pub policy: ThresholdPolicy,
    pub second_pass: bool,
    pub second_pass_tau_s: f64,
    pub baseline_discard: f64,
    pub min_second_pass_score: f64,
}

impl DetectorConfig {
    pub fn new(n_th: u32, tau: TauSetting) -> Self {
        Self {
            n_th,
            tau,
            policy: ThresholdPolicy::default(),
            second_pass: false,
            second_pass_tau_s: LONG_RECOVERY_TAU_S,
            baseline_discard: BASELINE_DISCARD,
            min_second_pass_score: MIN_SECOND_PASS_SCORE,
        }
    }

    pub fn with_second_pass(mut self, on: bool) -> Self {
        self.second_pass = on;
        self
    }

    /// Threshold at which candidates are marked and the fit is made.
    fn base_n_th(&self) -> u32 {
        self.n_th.min(self.policy.fit_n_th())
    }
}

/// Output of a detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Classified events with `peak_n >= n_th`, in time order.
    pub events: Vec<EventRecord>,
    pub fit: ThresholdFit,
    pub second_fit: Option<ThresholdFit>,
    pub tau_cycles: f64,
    /// Candidates scored at the fit threshold (including those below `n_th`).
    pub n_candidates: usize,
    /// Kept events dropped by the baseline rule.
    pub discarded: usize,
    /// Simultaneous-error counts; absent for chunked runs.
    pub counts: Option<Vec<u16>>,
}

impl Detection {
    pub fn count(&self, pred: impl Fn(Classification) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e.classification)).count()
    }
}

/// Access to simultaneous-error counts over a range of cycles.
pub trait CountSource {
    fn len(&self) -> usize;
    /// Counts for cycles `lo..hi`.
    fn range(&self, lo: usize, hi: usize) -> Cow<'_, [u16]>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl CountSource for [u16] {
    fn len(&self) -> usize {
        <[u16]>::len(self)
    }
    fn range(&self, lo: usize, hi: usize) -> Cow<'_, [u16]> {
        Cow::Borrowed(&self[lo..hi])
    }
}

impl CountSource for OutcomeSeries {
    fn len(&self) -> usize {
        self.n_cycles()
    }
    fn range(&self, lo: usize, hi: usize) -> Cow<'_, [u16]> {
        Cow::Owned(counts_in_range(&self.outcomes, lo, hi))
    }
}

/// Counts for cycles `lo..hi` computed straight from the outcomes.
fn counts_in_range(o: &BitMatrix, lo: usize, hi: usize) -> Vec<u16> {
    let from = lo.saturating_sub(1);
    let sub = o.slice_rows(from, hi);
    let cfg_free = sub_counts(&sub);
    cfg_free[lo - from..].to_vec()
}

fn sub_counts(o: &BitMatrix) -> Vec<u16> {
    let mut n = vec![0u16; o.rows()];
    let cols = o.cols();
    for k in 1..o.rows() {
        let mut c = 0u32;
        for (b, (p, q)) in o.row(k - 1).iter().zip(o.row(k)).enumerate() {
            let bits = (cols - 8 * b).min(8);
            let mask = if bits == 8 { 0xFF } else { (1u8 << bits) - 1 };
            c += (!(p | q) & mask).count_ones();
        }
        n[k] = c as u16;
    }
    n
}

/// Scores a candidate using only the counts its template support touches.
fn score_from_source<S: CountSource + ?Sized>(c: &EventRecord, src: &S, t: &TemplateSpec) -> EventRecord {
    let len = src.len();
    let lo = c.core_start.saturating_sub(t.pre_len);
    let hi = (c.core_end + t.post_len).min(len);
    let local = src.range(lo, hi);
    let mut shifted = c.clone();
    shifted.core_start -= lo;
    shifted.core_end -= lo;
    let scored = super::template::score_and_align(&shifted, &local, t);
    let mut ev = c.clone();
    ev.mf_peak = scored.mf_peak;
    ev.t0_cycle = scored.t0_cycle + lo;
    ev.boundary_clipped = c.boundary_clipped || c.core_start < t.pre_len || c.core_end + t.post_len > len;
    ev
}

/// Labels each candidate against the fitted threshold (`>=` keeps).
/// Boundary-clipped candidates are always rejected.
pub fn classify(candidates: &[EventRecord], fit: &ThresholdFit) -> Vec<EventRecord> {
    candidates
        .iter()
        .map(|c| {
            let mut e = c.clone();
            e.classification = if !c.boundary_clipped && c.mf_peak >= fit.threshold {
                Classification::Kept
            } else {
                Classification::Rejected
            };
            e
        })
        .collect()
}

/// Result of the long-recovery pass.
#[derive(Debug, Clone)]
pub struct SecondPass {
    pub events: Vec<EventRecord>,
    pub fit: Option<ThresholdFit>,
    pub discarded: usize,
}

/// Re-scores kept events with a long (2 ms) template and relabels the ones
/// above a newly fitted threshold as `KeptLongRecovery`. Events with a
/// pre-window baseline above `baseline_discard` are dropped.
pub fn second_pass_long_recovery<S: CountSource + ?Sized>(
    kept: &[EventRecord],
    n: &S,
    t_cycle_s: Option<f64>,
    cfg: &DetectorConfig,
) -> Result<SecondPass> {
    let t_cycle_s = t_cycle_s
        .filter(|t| t.is_finite() && *t > 0.0)
        .ok_or_else(|| Error::InvalidArgument("second pass needs t_cycle".into()))?;
    let before = kept.len();
    let mut events: Vec<EventRecord> = kept
        .iter()
        .filter(|e| e.baseline_pre <= cfg.baseline_discard)
        .cloned()
        .collect();
    let discarded = before - events.len();
    let template = TemplateSpec::for_tau(cfg.second_pass_tau_s / t_cycle_s)?;
    let scores: Vec<f64> = events.iter().map(|e| score_from_source(e, n, &template).mf_peak).collect();
    let fit = match fit_threshold(&scores, cfg.policy) {
        Ok(mut f) => {
            f.tau_cycles = Some(template.tau_cycles);
            Some(f)
        }
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(f) = &fit {
        if f.separation_score >= cfg.min_second_pass_score {
            for (e, s) in events.iter_mut().zip(&scores) {
                if e.classification == Classification::Kept && *s >= f.threshold {
                    e.classification = Classification::KeptLongRecovery;
                }
            }
        }
    }
    Ok(SecondPass { events, fit, discarded })
}

/// Peaks of all non-clipped candidates.
fn fit_peaks(cands: &[EventRecord]) -> Vec<f64> {
    cands.iter().filter(|c| !c.boundary_clipped).map(|c| c.mf_peak).collect()
}

fn scored_candidates(n: &[u16], base_n_th: u32, n_qubits: usize, tau: f64) -> Result<Vec<EventRecord>> {
    let template = TemplateSpec::for_tau(tau)?;
    let cands = mark_candidates(n, base_n_th, n_qubits, tail_for_tau(tau))?;
    Ok(cands.iter().map(|c| score_from_source(c, n, &template)).collect())
}

/// Cycles of filter output computed in one go during the decay-constant scan.
const SCAN_BLOCK: usize = 1 << 16;

/// Peaks of the unclipped candidates for one decay constant, filtering
/// blocks of neighbouring candidates together instead of one at a time.
fn scan_peaks(n: &[u16], regions: &[EventRecord], tau: f64) -> Result<Vec<f64>> {
    let t = TemplateSpec::for_tau(tau)?;
    let tail = tail_for_tau(tau);
    let len = n.len();
    let inside = |c: &EventRecord| c.core_start >= t.pre_len && c.core_end + t.post_len <= len && c.core_end + tail < len;
    let mut peaks = Vec::with_capacity(regions.len());
    let mut i = 0;
    while i < regions.len() {
        let lo = regions[i].core_start;
        let mut j = i;
        while j + 1 < regions.len() && regions[j + 1].core_end - lo < SCAN_BLOCK {
            j += 1;
        }
        let out = t.outputs_in(n, lo, regions[j].core_end);
        for c in regions[i..=j].iter().filter(|c| inside(c)) {
            peaks.push(out[c.core_start - lo..=c.core_end - lo].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        i = j + 1;
    }
    Ok(peaks)
}

/// Runs the full pipeline on a series.
pub fn detect(series: &OutcomeSeries, cfg: &DetectorConfig) -> Result<Detection> {
    detect_with_fit(series, cfg, None)
}

/// Like [`detect`], but classifies with `fit` instead of fitting a new threshold.
pub fn detect_with_fit(series: &OutcomeSeries, cfg: &DetectorConfig, fit: Option<&ThresholdFit>) -> Result<Detection> {
    let nq = series.n_qubits();
    check_n_th(cfg.n_th, nq)?;
    let n = error_counts(series);
    let base = cfg.base_n_th();
    let tau = match &cfg.tau {
        TauSetting::Fixed(t) => *t,
        TauSetting::Auto(grid) => {
            let regions = mark_candidates(&n, base, nq, 0)?;
            let mut scan = Vec::with_capacity(grid.len());
            for &t in grid {
                scan.push((t, scan_peaks(&n, &regions, t)?));
            }
            optimize_tau(&scan)?.0
        }
    };
    let scored = scored_candidates(&n, base, nq, tau)?;
    let mut det = finish(scored, &n[..], series.config.t_cycle_s(), tau, cfg, fit)?;
    det.counts = Some(n);
    Ok(det)
}

/// Detection in chunks of `chunk_cycles`, each processed with enough overlap
/// that every candidate sees the same counts as in a one-shot run. Produces
/// the same events as [`detect`]. Needs a fixed decay constant.
pub fn detect_chunked(series: &OutcomeSeries, cfg: &DetectorConfig, chunk_cycles: usize) -> Result<Detection> {
    let nq = series.n_qubits();
    check_n_th(cfg.n_th, nq)?;
    let tau = match cfg.tau {
        TauSetting::Fixed(t) => t,
        TauSetting::Auto(_) => {
            return Err(Error::InvalidArgument("chunked detection needs a fixed tau".into()));
        }
    };
    if chunk_cycles == 0 {
        return Err(Error::InvalidArgument("chunk length must be positive".into()));
    }
    let template = TemplateSpec::for_tau(tau)?;
    let tail = tail_for_tau(tau);
    let base = cfg.base_n_th();
    let len = series.n_cycles();
    let min_overlap = template.len().max(BASELINE_CYCLES) + 1;
    let mut scored = Vec::new();
    let mut a = 0;
    while a < len {
        let b = (a + chunk_cycles).min(len);
        let mut overlap = min_overlap;
        loop {
            let lo = a.saturating_sub(overlap);
            let hi = (b + overlap).min(len);
            let local = series.range(lo, hi);
            let cands = mark_candidates(&local, base, nq, 0)?;
            let owned: Vec<&EventRecord> = cands
                .iter()
                .filter(|c| c.core_start + lo >= a && c.core_start + lo < b)
                .collect();
            // a run still open at the slice edge, or a template reaching past it, needs more context
            let short = owned
                .iter()
                .any(|c| hi < len && c.core_end + lo + template.post_len + 1 >= hi);
            if short {
                overlap *= 2;
                continue;
            }
            for c in owned {
                let core_start = c.core_start + lo;
                let core_end = c.core_end + lo;
                let tail_end = core_end + tail;
                let mut g = EventRecord::candidate(core_start, core_end, c.peak_n, tail_end.min(len - 1), c.baseline_pre);
                g.baseline_pre = super::candidates::baseline_before(&local, c.core_start);
                g.boundary_clipped = tail_end > len - 1;
                scored.push(score_from_source(&g, series, &template));
            }
            break;
        }
        a = b;
    }
    finish(scored, series, series.config.t_cycle_s(), tau, cfg, None)
}

fn check_n_th(n_th: u32, nq: usize) -> Result<()> {
    if n_th < 1 || n_th as usize > nq {
        return Err(Error::InvalidArgument(format!(
            "n_th = {n_th} must lie in 1..={nq} (n_th exceeds qubit count or is zero)"
        )));
    }
    Ok(())
}

fn finish<S: CountSource + ?Sized>(
    scored: Vec<EventRecord>,
    n: &S,
    t_cycle_s: f64,
    tau: f64,
    cfg: &DetectorConfig,
    fit: Option<&ThresholdFit>,
) -> Result<Detection> {
    let n_candidates = scored.len();
    let fit = match fit {
        Some(f) => f.clone(),
        None => {
            let mut f = fit_threshold(&fit_peaks(&scored), cfg.policy)?;
            f.tau_cycles = Some(tau);
            f
        }
    };
    let mut events: Vec<EventRecord> = classify(&scored, &fit)
        .into_iter()
        .filter(|e| e.peak_n >= cfg.n_th)
        .collect();
    let mut second_fit = None;
    let mut discarded = 0;
    if cfg.second_pass {
        let kept: Vec<EventRecord> = events.iter().filter(|e| e.classification.is_kept()).cloned().collect();
        let sp = second_pass_long_recovery(&kept, n, Some(t_cycle_s), cfg)?;
        discarded = sp.discarded;
        second_fit = sp.fit;
        let mut relabelled = sp.events.into_iter().peekable();
        let mut merged = Vec::with_capacity(events.len());
        for e in events {
            if e.classification.is_kept() {
                if relabelled.peek().is_some_and(|r| r.core_start == e.core_start) {
                    merged.push(relabelled.next().unwrap());
                }
            } else {
                merged.push(e);
            }
        }
        events = merged;
    }
    Ok(Detection {
        events,
        fit,
        second_fit,
        tau_cycles: tau,
        n_candidates,
        discarded,
        counts: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_scan_matches_per_candidate_scoring() {
        let n: Vec<u16> = (0..200_000u32)
            .map(|k| {
                let h = k.wrapping_mul(2654435761) >> 27;
                if k % 9000 < 40 { 5 } else { (h % 5).saturating_sub(2) as u16 }
            })
            .collect();
        for tau in [1.0, 6.3, 100.0] {
            let regions = mark_candidates(&n, 3, 5, 0).unwrap();
            let fast = scan_peaks(&n, &regions, tau).unwrap();
            let slow = fit_peaks(&scored_candidates(&n, 3, 5, tau).unwrap());
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "tau={tau}: {a} vs {b}");
            }
        }
    }
}
