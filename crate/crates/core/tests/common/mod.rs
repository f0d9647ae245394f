#![allow(dead_code)]

use qburst::rng::CounterRng;
use qburst::{AcquisitionConfig, BitMatrix, OutcomeSeries};
use rand::Rng;

pub fn config(n_qubits: usize) -> AcquisitionConfig {
    AcquisitionConfig::with_cycle(n_qubits, 20.0, 1.0, 2.0, 30.0, 0, "test", 0.64).unwrap()
}

pub fn series_from_rows(rows: &[Vec<u8>], n_qubits: usize) -> OutcomeSeries {
    OutcomeSeries::new(config(n_qubits), BitMatrix::from_rows(rows, n_qubits).unwrap()).unwrap()
}

/// Random outcome rows: alternating 1,0 with errors at `p_err`, plus a few
/// stretches where every qubit reads 0 with probability `p_burst`.
pub fn random_rows(seed: u64, n_qubits: usize, len: usize, p_err: f64, bursts: usize, p_burst: f64) -> Vec<Vec<u8>> {
    let mut rng = CounterRng::new(seed).stream(0, 0);
    let mut hot = vec![false; len];
    for _ in 0..bursts {
        let at = rng.random_range(0..len);
        let dur = rng.random_range(1..=len.clamp(1, 30));
        for h in hot.iter_mut().skip(at).take(dur) {
            *h = true;
        }
    }
    (0..len)
        .map(|k| {
            (0..n_qubits)
                .map(|_| {
                    let p0 = if hot[k] { p_burst } else if k % 2 == 1 { 1.0 - p_err } else { p_err };
                    u8::from(rng.random::<f64>() >= p0)
                })
                .collect()
        })
        .collect()
}

/// Simultaneous-error counts by direct definition.
pub fn naive_counts(rows: &[Vec<u8>]) -> Vec<u16> {
    (0..rows.len())
        .map(|k| {
            if k == 0 {
                return 0;
            }
            rows[k].iter().zip(&rows[k - 1]).filter(|(a, b)| **a == 0 && **b == 0).count() as u16
        })
        .collect()
}

/// Candidate regions `(start, end, peak)` by a quadratic scan: every cycle
/// reaching `n_th` is grown left and right while `n >= 1`, then duplicates go.
pub fn naive_candidates(n: &[u16], n_th: u32) -> Vec<(usize, usize, u32)> {
    let mut out: Vec<(usize, usize, u32)> = Vec::new();
    for k in 0..n.len() {
        if (n[k] as u32) < n_th {
            continue;
        }
        let mut a = k;
        while a > 0 && n[a - 1] >= 1 {
            a -= 1;
        }
        let mut b = k;
        while b + 1 < n.len() && n[b + 1] >= 1 {
            b += 1;
        }
        let peak = (a..=b).map(|i| n[i] as u32).max().unwrap();
        if !out.contains(&(a, b, peak)) {
            out.push((a, b, peak));
        }
    }
    out.sort();
    out
}
