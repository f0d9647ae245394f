use serde::{Deserialize, Serialize};

use crate::types::EventRecord;
use crate::{Error, Result};

/// Zero-mean stepped-exponential matched-filter template.
///
/// The raw shape is 0 for `pre_len` cycles, then `exp(-k / tau_cycles)` for
/// `k = 0..post_len`; `values` is that shape minus its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub tau_cycles: f64,
    pub pre_len: usize,
    pub post_len: usize,
    pub values: Vec<f64>,
}

pub fn make_template(tau_cycles: f64, pre_len: usize, post_len: usize) -> Result<TemplateSpec> {
    if !(tau_cycles.is_finite() && tau_cycles > 0.0) {
        return Err(Error::InvalidArgument(format!("tau_cycles must be positive, got {tau_cycles}")));
    }
    if pre_len < 1 || post_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "degenerate template lengths pre_len={pre_len}, post_len={post_len}"
        )));
    }
    let raw: Vec<f64> = (0..pre_len)
        .map(|_| 0.0)
        .chain((0..post_len).map(|k| (-(k as f64) / tau_cycles).exp()))
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(TemplateSpec {
        tau_cycles,
        pre_len,
        post_len,
        values: raw.into_iter().map(|v| v - mean).collect(),
    })
}

impl TemplateSpec {
    /// Template with both segments `max(2, ceil(3 tau))` cycles long.
    pub fn for_tau(tau_cycles: f64) -> Result<Self> {
        let len = ((3.0 * tau_cycles).ceil() as usize).max(2);
        make_template(tau_cycles, len, len)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean of the raw (pre-offset) shape.
    fn offset(&self) -> f64 {
        let s: f64 = (0..self.post_len).map(|k| (-(k as f64) / self.tau_cycles).exp()).sum();
        s / self.len() as f64
    }

    /// Filter output at a single position, by direct summation.
    pub fn output_at(&self, n: &[u16], k: usize) -> f64 {
        let mut acc = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let idx = k as isize + j as isize - self.pre_len as isize;
            if idx >= 0 && (idx as usize) < n.len() {
                acc += v * n[idx as usize] as f64;
            }
        }
        acc
    }

    /// Filter outputs for positions `lo..=hi`.
    ///
    /// Splits the output into a truncated exponential sum and a box sum and
    /// runs both recursively from `hi` down, so the cost is
    /// `O(len + hi - lo)` instead of `O(len * (hi - lo))`.
    pub fn outputs_in(&self, n: &[u16], lo: usize, hi: usize) -> Vec<f64> {
        debug_assert!(lo <= hi);
        let at = |i: isize| -> f64 {
            if i >= 0 && (i as usize) < n.len() {
                n[i as usize] as f64
            } else {
                0.0
            }
        };
        let p = self.pre_len as isize;
        let q = self.post_len as isize;
        let decay = (-1.0 / self.tau_cycles).exp();
        let decay_q = (-(q as f64) / self.tau_cycles).exp();
        let mu = self.offset();

        let h = hi as isize;
        let mut expo = 0.0;
        for i in 0..q {
            expo += (-(i as f64) / self.tau_cycles).exp() * at(h + i);
        }
        let mut boxed = 0.0;
        for j in (h - p)..(h + q) {
            boxed += at(j);
        }
        let mut out = vec![0.0; hi - lo + 1];
        out[hi - lo] = expo - mu * boxed;
        for k in (lo as isize..h).rev() {
            expo = at(k) + decay * expo - decay_q * at(k + q);
            boxed += at(k - p) - at(k + q);
            out[(k - lo as isize) as usize] = expo - mu * boxed;
        }
        out
    }
}

/// Full filter output `out[k] = sum_j values[j] * n[k + j - pre_len]`, zero padded.
pub fn matched_filter(n: &[u16], template: &TemplateSpec) -> Vec<f64> {
    if n.is_empty() {
        return Vec::new();
    }
    template.outputs_in(n, 0, n.len() - 1)
}

/// Relative slack under which two filter outputs count as tied.
const TIE_RELATIVE: f64 = 1e-12;

/// Scores a candidate: the largest filter output over its core region sets
/// `mf_peak`, and the earliest position reaching it sets `t0_cycle`.
///
/// A candidate whose template support leaves the trace is flagged
/// `boundary_clipped`.
pub fn score_and_align(candidate: &EventRecord, n: &[u16], template: &TemplateSpec) -> EventRecord {
    let mut ev = candidate.clone();
    let (lo, hi) = (candidate.core_start, candidate.core_end);
    let out = template.outputs_in(n, lo, hi);
    let best = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_RELATIVE * best.abs().max(1.0);
    let first = out.iter().position(|&v| v >= best - tol).unwrap_or(0);
    ev.mf_peak = best;
    ev.t0_cycle = lo + first;
    if lo < template.pre_len || hi + template.post_len > n.len() {
        ev.boundary_clipped = true;
    }
    ev
}
