use crate::types::EventRecord;
use crate::{Error, Result};

/// Cycles before a window used to estimate `baseline_pre`.
pub const BASELINE_CYCLES: usize = 200;

/// Largest tail appended to a core region.
pub const MAX_TAIL_CYCLES: usize = 5000;

/// Window tail for a template decay constant: `min(10 tau, 5000)` cycles.
pub fn tail_for_tau(tau_cycles: f64) -> usize {
    ((10.0 * tau_cycles).ceil() as usize).min(MAX_TAIL_CYCLES)
}

/// Marks one candidate per maximal run of `n >= 1` that reaches `n_th`.
///
/// Windows span the core region plus `tail_cycles`; candidates whose tail
/// would run past the end of the trace are flagged `boundary_clipped`.
pub fn mark_candidates(n: &[u16], n_th: u32, n_qubits: usize, tail_cycles: usize) -> Result<Vec<EventRecord>> {
    if n_th < 1 || n_th as usize > n_qubits {
        return Err(Error::InvalidArgument(format!(
            "n_th = {n_th} must lie in 1..={n_qubits} (n_th exceeds qubit count or is zero)"
        )));
    }
    let len = n.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < len {
        if n[i] == 0 {
            i += 1;
            continue;
        }
        let start = i;
        let mut peak = 0u16;
        while i < len && n[i] > 0 {
            peak = peak.max(n[i]);
            i += 1;
        }
        let end = i - 1;
        if peak as u32 >= n_th {
            let tail_end = end + tail_cycles;
            let mut c = EventRecord::candidate(start, end, peak as u32, tail_end.min(len - 1), baseline_before(n, start));
            c.boundary_clipped = tail_end > len - 1;
            out.push(c);
        }
    }
    Ok(out)
}

/// Mean of `n` over the [`BASELINE_CYCLES`] cycles before `start` (fewer near the origin; 0 if none).
pub fn baseline_before(n: &[u16], start: usize) -> f64 {
    let lo = start.saturating_sub(BASELINE_CYCLES);
    if lo == start {
        return 0.0;
    }
    n[lo..start].iter().map(|&v| v as u64).sum::<u64>() as f64 / (start - lo) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_excursion() {
        let c = mark_candidates(&[0, 1, 5, 3, 1, 0], 3, 7, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].core_start, c[0].core_end, c[0].peak_n), (1, 4, 5));
        assert!(!c[0].boundary_clipped);
    }

    #[test]
    fn below_threshold() {
        assert!(mark_candidates(&[0, 2, 2, 0], 3, 7, 0).unwrap().is_empty());
    }

    #[test]
    fn threshold_range_checked() {
        assert!(mark_candidates(&[0, 1], 0, 5, 0).is_err());
        let e = mark_candidates(&[0, 1], 8, 7, 0).unwrap_err();
        assert!(e.to_string().contains("exceeds qubit count"));
    }

    #[test]
    fn tail_clipping_and_baseline() {
        let mut n = vec![1u16; 10];
        n.extend([0, 4, 4, 0, 0]);
        let c = mark_candidates(&n, 3, 5, 2).unwrap();
        // the first run never reaches 3
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].window, (11, 14));
        assert!(!c[0].boundary_clipped);
        assert!((c[0].baseline_pre - 10.0 / 11.0).abs() < 1e-12);
        let c = mark_candidates(&n, 3, 5, 3).unwrap();
        assert!(c[0].boundary_clipped);
        assert_eq!(c[0].window.1, 14);
    }

    #[test]
    fn tail_rule() {
        assert_eq!(tail_for_tau(33.3), 333);
        assert_eq!(tail_for_tau(1000.0), 5000);
    }
}
