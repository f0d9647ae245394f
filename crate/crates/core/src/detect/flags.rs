use crate::types::{BitMatrix, OutcomeSeries};

/// Per-qubit error flags: set where a qubit reads 0 on two consecutive cycles.
///
/// Row 0 is always clear. Consecutive 1s never flag (leakage looks the same).
pub fn compute_error_flags(series: &OutcomeSeries) -> BitMatrix {
    let o = &series.outcomes;
    let nq = o.cols();
    let mut flags = BitMatrix::zeros(o.rows(), nq);
    let masks = row_masks(nq);
    for k in 1..o.rows() {
        let (prev, cur) = (o.row(k - 1), o.row(k));
        let dst = flags.row_mut(k);
        for b in 0..dst.len() {
            dst[b] = !(prev[b] | cur[b]) & masks[b];
        }
    }
    flags
}

/// Simultaneous-error count `n[k]`: the number of flagged qubits per cycle.
pub fn count_simultaneous(flags: &BitMatrix) -> Vec<u16> {
    (0..flags.rows()).map(|k| flags.row_count(k) as u16).collect()
}

/// `count_simultaneous(compute_error_flags(series))` without the intermediate matrix.
pub fn error_counts(series: &OutcomeSeries) -> Vec<u16> {
    let o = &series.outcomes;
    let rows = o.rows();
    let mut n = vec![0u16; rows];
    if rows == 0 {
        return n;
    }
    let masks = row_masks(o.cols());
    if o.row_bytes() == 1 {
        let data = o.as_bytes();
        let m = masks[0];
        for k in 1..rows {
            n[k] = (!(data[k - 1] | data[k]) & m).count_ones() as u16;
        }
    } else {
        for k in 1..rows {
            let (prev, cur) = (o.row(k - 1), o.row(k));
            n[k] = prev
                .iter()
                .zip(cur)
                .zip(&masks)
                .map(|((p, c), m)| (!(p | c) & m).count_ones() as u16)
                .sum();
        }
    }
    n
}

fn row_masks(cols: usize) -> Vec<u8> {
    let row_bytes = cols.div_ceil(8);
    (0..row_bytes)
        .map(|b| {
            let bits = (cols - 8 * b).min(8);
            if bits == 8 {
                0xFF
            } else {
                (1u8 << bits) - 1
            }
        })
        .collect()
}
