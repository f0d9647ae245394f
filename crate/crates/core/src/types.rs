//! Domain types shared by the detector, the statistics layer and the simulator.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Tolerance on `t_cycle = t_x + t_wait + t_ro + t_idle`, in µs (one ns).
pub const CYCLE_SUM_TOLERANCE_US: f64 = 1e-3;

/// Timing and device metadata of one repeated π-pulse/measure acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub n_qubits: usize,
    /// π-pulse duration, ns.
    pub t_x_ns: f64,
    /// Wait between π pulse and readout, µs.
    pub t_wait_us: f64,
    /// Readout duration, µs.
    pub t_ro_us: f64,
    /// Idle after readout, µs.
    pub t_idle_us: f64,
    /// Full cycle, µs.
    pub t_cycle_us: f64,
    /// Extra π pulses inserted during the idle; always even.
    pub m_extra_pulses: u32,
    pub device_label: String,
    pub device_area_cm2: f64,
}

impl AcquisitionConfig {
    /// Builds a config with an explicit cycle time, checking it against the sum of its parts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_qubits: usize,
        t_x_ns: f64,
        t_wait_us: f64,
        t_ro_us: f64,
        t_idle_us: f64,
        t_cycle_us: f64,
        m_extra_pulses: u32,
        device_label: impl Into<String>,
        device_area_cm2: f64,
    ) -> Result<Self, Error> {
        let cfg = Self {
            n_qubits,
            t_x_ns,
            t_wait_us,
            t_ro_us,
            t_idle_us,
            t_cycle_us,
            m_extra_pulses,
            device_label: device_label.into(),
            device_area_cm2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config whose idle time fills the remainder of `t_cycle_us`.
    pub fn with_cycle(
        n_qubits: usize,
        t_x_ns: f64,
        t_wait_us: f64,
        t_ro_us: f64,
        t_cycle_us: f64,
        m_extra_pulses: u32,
        device_label: impl Into<String>,
        device_area_cm2: f64,
    ) -> Result<Self, Error> {
        let t_idle_us = t_cycle_us - t_x_ns * 1e-3 - t_wait_us - t_ro_us;
        Self::new(
            n_qubits,
            t_x_ns,
            t_wait_us,
            t_ro_us,
            t_idle_us,
            t_cycle_us,
            m_extra_pulses,
            device_label,
            device_area_cm2,
        )
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_qubits == 0 {
            return bad("n_qubits must be at least 1".into());
        }
        for (name, v) in [
            ("t_x_ns", self.t_x_ns),
            ("t_wait_us", self.t_wait_us),
            ("t_ro_us", self.t_ro_us),
            ("t_cycle_us", self.t_cycle_us),
            ("device_area_cm2", self.device_area_cm2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        // Rounding in the idle time may leave it a hair below zero.
        if !(self.t_idle_us.is_finite() && self.t_idle_us >= -CYCLE_SUM_TOLERANCE_US) {
            return bad(format!("t_idle_us must be non-negative, got {}", self.t_idle_us));
        }
        if self.m_extra_pulses % 2 != 0 {
            return bad(format!("m_extra_pulses must be even, got {}", self.m_extra_pulses));
        }
        let sum = self.t_x_ns * 1e-3 + self.t_wait_us + self.t_ro_us + self.t_idle_us;
        if (sum - self.t_cycle_us).abs() > CYCLE_SUM_TOLERANCE_US {
            return bad(format!(
                "t_cycle_us = {} differs from t_x + t_wait + t_ro + t_idle = {sum}",
                self.t_cycle_us
            ));
        }
        Ok(())
    }

    pub fn t_cycle_s(&self) -> f64 {
        self.t_cycle_us * 1e-6
    }

    /// Net π-pulse rate seen by the device, pulses per second.
    pub fn pulse_rate_hz(&self) -> f64 {
        (1 + self.m_extra_pulses) as f64 / self.t_cycle_s()
    }
}

/// Row-major bit matrix, one packed row per cycle, column 0 in the LSB of byte 0.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    row_bytes: usize,
    data: Vec<u8>,
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BitMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let row_bytes = cols.div_ceil(8);
        Self {
            rows,
            cols,
            row_bytes,
            data: vec![0; rows * row_bytes],
        }
    }

    /// Wraps packed row data. Unused high bits must be zero.
    pub fn from_packed(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self, Error> {
        let row_bytes = cols.div_ceil(8);
        if data.len() != rows * row_bytes {
            return Err(Error::Format(format!(
                "packed data has {} bytes, expected {}",
                data.len(),
                rows * row_bytes
            )));
        }
        if cols % 8 != 0 && row_bytes > 0 {
            let mask = !((1u8 << (cols % 8)) - 1);
            if let Some(r) = data.chunks(row_bytes).position(|row| row[row_bytes - 1] & mask != 0) {
                return Err(Error::Format(format!("row {r} has bits set beyond column {cols}")));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_bytes,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>], cols: usize) -> Result<Self, Error> {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Format(format!("row {r} has {} entries, expected {cols}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(r, c, true),
                    _ => return Err(Error::Format(format!("entry ({r},{c}) = {v} is not a bit"))),
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_bytes(&self) -> usize {
        self.row_bytes
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.row_bytes..(r + 1) * self.row_bytes]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.data[r * self.row_bytes..(r + 1) * self.row_bytes]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.row_bytes + c / 8] >> (c % 8) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let b = &mut self.data[r * self.row_bytes + c / 8];
        if v {
            *b |= 1 << (c % 8);
        } else {
            *b &= !(1 << (c % 8));
        }
    }

    /// Number of set bits in row `r`.
    #[inline]
    pub fn row_count(&self, r: usize) -> u32 {
        self.row(r).iter().map(|b| b.count_ones()).sum()
    }

    /// Appends one packed row.
    pub fn push_packed_row(&mut self, row: &[u8]) {
        debug_assert_eq!(row.len(), self.row_bytes);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        let row_bytes = cols.div_ceil(8);
        Self {
            rows: 0,
            cols,
            row_bytes,
            data: Vec::with_capacity(rows * row_bytes),
        }
    }

    /// Copy of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            row_bytes: self.row_bytes,
            data: self.data[start * self.row_bytes..end * self.row_bytes].to_vec(),
        }
    }
}

/// Time-ordered per-qubit binary outcomes (1 = read as excited).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSeries {
    pub config: AcquisitionConfig,
    pub outcomes: BitMatrix,
    /// Wall-clock start, free-form (ISO 8601 by convention). Not used in analysis.
    pub start_time: Option<String>,
    /// Seed of the run that produced the series, when simulated.
    pub seed: Option<u64>,
}

impl OutcomeSeries {
    pub fn new(config: AcquisitionConfig, outcomes: BitMatrix) -> Result<Self, Error> {
        config.validate()?;
        if outcomes.cols() != config.n_qubits {
            return Err(Error::Format(format!(
                "outcome matrix has {} columns but n_qubits = {}",
                outcomes.cols(),
                config.n_qubits
            )));
        }
        Ok(Self {
            config,
            outcomes,
            start_time: None,
            seed: None,
        })
    }

    pub fn n_cycles(&self) -> usize {
        self.outcomes.rows()
    }

    pub fn n_qubits(&self) -> usize {
        self.config.n_qubits
    }

    /// Elapsed acquisition time at the start of cycle `k`, seconds.
    pub fn time_of_cycle(&self, k: usize) -> f64 {
        k as f64 * self.config.t_cycle_s()
    }

    pub fn duration_s(&self) -> f64 {
        self.time_of_cycle(self.n_cycles())
    }
}

/// Outcome of keep/reject classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Not yet scored against a threshold.
    Unclassified,
    Kept,
    Rejected,
    KeptLongRecovery,
}

impl Classification {
    /// True for both kept labels.
    pub fn is_kept(self) -> bool {
        matches!(self, Self::Kept | Self::KeptLongRecovery)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unclassified => "unclassified",
            Self::Kept => "kept",
            Self::Rejected => "rejected",
            Self::KeptLongRecovery => "kept_long_recovery",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unclassified" => Ok(Self::Unclassified),
            "kept" => Ok(Self::Kept),
            "rejected" => Ok(Self::Rejected),
            "kept_long_recovery" => Ok(Self::KeptLongRecovery),
            other => Err(Error::Format(format!("unknown classification `{other}`"))),
        }
    }
}

/// One simultaneous-error event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Alignment origin: argmax of the matched-filter output.
    pub t0_cycle: usize,
    /// Largest simultaneous-error count inside the core region.
    pub peak_n: u32,
    /// First cycle of the core region (maximal run of n >= 1).
    pub core_start: usize,
    /// Last cycle of the core region, inclusive.
    pub core_end: usize,
    /// Inclusive event window: core region plus tail.
    pub window: (usize, usize),
    pub mf_peak: f64,
    pub classification: Classification,
    /// Mean simultaneous-error count before the window.
    pub baseline_pre: f64,
    /// Template support or tail ran past the trace edge.
    pub boundary_clipped: bool,
}

impl EventRecord {
    /// Candidate with its core region known but not yet scored.
    pub fn candidate(core_start: usize, core_end: usize, peak_n: u32, window_end: usize, baseline_pre: f64) -> Self {
        Self {
            t0_cycle: core_start,
            peak_n,
            core_start,
            core_end,
            window: (core_start, window_end),
            mf_peak: 0.0,
            classification: Classification::Unclassified,
            baseline_pre,
            boundary_clipped: false,
        }
    }
}

/// Poisson counting estimate of an event rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub n_events: u64,
    /// Acquisition time, seconds.
    pub duration: f64,
    /// Events per second.
    pub rate: f64,
    /// Events per second.
    pub stderr: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_sum_is_enforced() {
        assert!(AcquisitionConfig::new(5, 20.0, 2.0, 2.0, 25.98, 30.0, 0, "d", 0.64).is_ok());
        assert!(AcquisitionConfig::new(5, 20.0, 2.0, 2.0, 25.0, 30.0, 0, "d", 0.64).is_err());
        // half a ns off is within rounding
        assert!(AcquisitionConfig::new(5, 20.0, 2.0, 2.0, 25.9805, 30.0, 0, "d", 0.64).is_ok());
    }

    #[test]
    fn odd_extra_pulses_rejected() {
        let err = AcquisitionConfig::with_cycle(5, 20.0, 2.0, 2.0, 100.0, 3, "d", 0.64).unwrap_err();
        assert!(err.to_string().contains("even"));
        assert!(AcquisitionConfig::with_cycle(0, 20.0, 2.0, 2.0, 100.0, 0, "d", 0.64).is_err());
        assert!(AcquisitionConfig::with_cycle(5, 20.0, 2.0, 2.0, 3.0, 0, "d", 0.64).is_err());
    }

    #[test]
    fn pulse_rate_counts_extra_pulses() {
        let c = AcquisitionConfig::with_cycle(5, 20.0, 2.0, 2.0, 100.0, 4, "d", 0.64).unwrap();
        assert!((c.pulse_rate_hz() - 5.0e4).abs() < 1e-6);
    }

    #[test]
    fn bit_matrix_lsb_first() {
        let m = BitMatrix::from_rows(&[vec![1, 0, 0, 0, 0, 0, 0, 0, 1], vec![0, 1, 0, 0, 0, 0, 0, 0, 0]], 9).unwrap();
        assert_eq!(m.row_bytes(), 2);
        assert_eq!(m.as_bytes(), &[0b0000_0001, 0b0000_0001, 0b0000_0010, 0]);
        assert_eq!(m.row_count(0), 2);
        assert!(BitMatrix::from_packed(1, 9, vec![0, 0b10]).is_err());
    }
}
