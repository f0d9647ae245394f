use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::profile::{ProfileKind, RateProfile};
use crate::physics::QpModelParams;
use crate::types::AcquisitionConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub t1_us: f64,
    /// Probability of reading 0 when the qubit is in |1⟩.
    pub ro_error_1to0: f64,
    /// Probability of reading 1 when the qubit is in |0⟩.
    pub ro_error_0to1: f64,
}

impl QubitParams {
    /// Symmetric misassignment from an average assignment fidelity in percent.
    pub fn from_fidelity(t1_us: f64, fidelity_pct: f64) -> Self {
        let e = 1.0 - fidelity_pct / 100.0;
        Self {
            t1_us,
            ro_error_1to0: e,
            ro_error_0to1: e,
        }
    }
}

/// Distribution of the density injected by one burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    /// Lognormal median of `x_inject`.
    pub x_median: f64,
    /// Lognormal shape (standard deviation of `ln x_inject`).
    pub x_sigma: f64,
    /// Share of bursts whose quasiparticles are removed more slowly.
    pub long_fraction: f64,
    /// Trapping rates of those bursts are multiplied by this factor.
    pub long_rate_scale: f64,
}

impl Default for Injection {
    fn default() -> Self {
        Self {
            x_median: 20.0,
            x_sigma: 0.5,
            long_fraction: 0.0,
            long_rate_scale: 0.1,
        }
    }
}

/// Everything needed to generate one acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: AcquisitionConfig,
    pub qubits: Vec<QubitParams>,
    pub qp: QpModelParams,
    pub has_builtin_trap: bool,
    pub profile: RateProfile,
    pub injection: Injection,
    /// Relaxation-sensitive interval per cycle; `t_wait + t_ro/2` when unset.
    pub t_exposed_us: Option<f64>,
    /// T1 multiplier while a surge spike lasts.
    pub t1_suppression: f64,
    /// Per-qubit, per-cycle probability of entering a leaked state that reads 1.
    pub leakage_prob: f64,
    pub leakage_cycles: u32,
    /// Record the true density and Γ1 every this many cycles.
    pub trace_decimate: Option<usize>,
    pub seed: u64,
}

const S5_T1_US: [f64; 5] = [15.0, 21.0, 19.0, 23.0, 15.0];
const S5_FIDELITY: [f64; 5] = [97.0, 98.4, 98.3, 98.7, 97.9];
const S7_T1_US: [f64; 7] = [31.0, 15.0, 23.0, 18.0, 22.0, 36.0, 49.0];
const S7_FIDELITY: [f64; 7] = [98.6, 98.0, 96.6, 95.9, 93.9, 97.0, 93.7];

impl Scenario {
    /// Five active transmons with a built-in trap; recovery around 2 ms at
    /// 100 µs cycles, shortened by pumping at faster cycles.
    pub fn s5_like(t_cycle_us: f64, m_extra_pulses: u32) -> Result<Self> {
        let config = AcquisitionConfig::with_cycle(5, 20.0, 2.0, 2.0, t_cycle_us, m_extra_pulses, "S5", 0.64)?;
        Ok(Self::base(
            config,
            S5_T1_US.iter().zip(S5_FIDELITY).map(|(&t, f)| QubitParams::from_fidelity(t, f)).collect(),
            QpModelParams {
                r: 200.0,
                s0: 1500.0,
                kappa: 0.075,
                g: 0.0,
                c_gamma: 1e6,
                gamma1_base: 1.0 / 18.6e-6,
            },
            true,
        ))
    }

    /// Seven transmons without a trap electrode; recovery around 250 µs.
    pub fn s7_like(t_cycle_us: f64, m_extra_pulses: u32) -> Result<Self> {
        let config = AcquisitionConfig::with_cycle(7, 20.0, 2.0, 1.0, t_cycle_us, m_extra_pulses, "S7", 0.64)?;
        Ok(Self::base(
            config,
            S7_T1_US.iter().zip(S7_FIDELITY).map(|(&t, f)| QubitParams::from_fidelity(t, f)).collect(),
            QpModelParams {
                r: 200.0,
                s0: 20_000.0,
                kappa: 0.0,
                g: 0.0,
                c_gamma: 1e6,
                gamma1_base: 1.0 / 27.7e-6,
            },
            false,
        ))
    }

    fn base(config: AcquisitionConfig, qubits: Vec<QubitParams>, qp: QpModelParams, trap: bool) -> Self {
        Self {
            config,
            qubits,
            qp,
            has_builtin_trap: trap,
            profile: RateProfile::constant(1.0 / 38.9),
            injection: Injection::default(),
            t_exposed_us: None,
            t1_suppression: 1.0 / 3.0,
            leakage_prob: 0.0,
            leakage_cycles: 10,
            trace_decimate: None,
            seed: 0,
        }
    }

    pub fn t_exposed_us(&self) -> f64 {
        self.t_exposed_us
            .unwrap_or(self.config.t_wait_us + 0.5 * self.config.t_ro_us)
    }

    /// Cycles in `duration_s` of acquisition.
    pub fn n_cycles(&self, duration_s: f64) -> usize {
        (duration_s / self.config.t_cycle_s() + 1e-9).floor() as usize
    }

    pub fn mean_t1_us(&self) -> f64 {
        self.qubits.iter().map(|q| q.t1_us).sum::<f64>() / self.qubits.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.qubits.len() != self.config.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "{} qubit entries for n_qubits = {}",
                self.qubits.len(),
                self.config.n_qubits
            )));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if !(q.t1_us > 0.0) {
                return Err(Error::InvalidArgument(format!("qubit {i}: t1_us must be positive")));
            }
            for p in [q.ro_error_1to0, q.ro_error_0to1] {
                check_prob(p, &format!("qubit {i} readout error"))?;
            }
        }
        self.qp.validate_for_trap(self.has_builtin_trap)?;
        self.profile.validate()?;
        let inj = &self.injection;
        if !(inj.x_median > 0.0 && inj.x_sigma >= 0.0 && inj.long_rate_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "burst.x_median and burst.long_rate_scale must be positive, burst.x_sigma non-negative".into(),
            ));
        }
        check_prob(inj.long_fraction, "burst.long_fraction")?;
        check_prob(self.leakage_prob, "sim.leakage_prob")?;
        if !(self.t1_suppression > 0.0 && self.t1_suppression <= 1.0) {
            return Err(Error::InvalidArgument("surge.t1_factor must lie in (0, 1]".into()));
        }
        if !(self.t_exposed_us() > 0.0) {
            return Err(Error::InvalidArgument("sim.t_exposed_us must be positive".into()));
        }
        if self.trace_decimate == Some(0) {
            return Err(Error::InvalidArgument("trace.decimate must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses `key=value` scenario text. A `preset=s5|s7` line, wherever it
    /// appears, selects the defaults that the other lines override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Scenario {
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            lines.push((i + 1, k.trim(), v.trim()));
        }
        let mut sc = Self::s5_like(100.0, 0)?;
        let mut t_cycle = None;
        for &(no, k, v) in &lines {
            match k {
                "preset" => {
                    sc = match v {
                        "s5" | "S5" => Self::s5_like(100.0, 0)?,
                        "s7" | "S7" => Self::s7_like(100.0, 0)?,
                        other => {
                            return Err(Error::Scenario {
                                line: no,
                                msg: format!("unknown preset `{other}`"),
                            })
                        }
                    }
                }
                "config.t_cycle_us" => t_cycle = Some((no, v)),
                _ => {}
            }
        }
        for &(no, k, v) in &lines {
            if k == "preset" || k == "config.t_cycle_us" {
                continue;
            }
            sc.set(k, v).map_err(|msg| Error::Scenario { line: no, msg })?;
        }
        let cycle = match t_cycle {
            Some((no, v)) => num(v).map_err(|msg| Error::Scenario { line: no, msg })?,
            None => sc.config.t_cycle_us,
        };
        let c = &sc.config;
        sc.config = AcquisitionConfig::with_cycle(
            c.n_qubits,
            c.t_x_ns,
            c.t_wait_us,
            c.t_ro_us,
            cycle,
            c.m_extra_pulses,
            c.device_label.clone(),
            c.device_area_cm2,
        )?;
        sc.validate()?;
        Ok(sc)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["config", field] => {
                let c = &mut self.config;
                match *field {
                    "n_qubits" => {
                        let n: usize = v.parse().map_err(|_| format!("`{v}` is not a count"))?;
                        if n == 0 {
                            return Err("n_qubits must be at least 1".into());
                        }
                        let fill = *self.qubits.last().unwrap_or(&QubitParams::from_fidelity(20.0, 98.0));
                        self.qubits.resize(n, fill);
                        c.n_qubits = n;
                    }
                    "t_x_ns" => c.t_x_ns = num(v)?,
                    "t_wait_us" => c.t_wait_us = num(v)?,
                    "t_ro_us" => c.t_ro_us = num(v)?,
                    "m_extra_pulses" => c.m_extra_pulses = v.parse().map_err(|_| format!("`{v}` is not a count"))?,
                    "device_label" => c.device_label = v.to_string(),
                    "device_area_cm2" => c.device_area_cm2 = num(v)?,
                    other => return Err(format!("unknown key `config.{other}`")),
                }
            }
            ["qubit", idx, field] => {
                let i: usize = idx.parse().map_err(|_| format!("`{idx}` is not a qubit index"))?;
                let q = self
                    .qubits
                    .get_mut(i)
                    .ok_or_else(|| format!("qubit {i} out of range (set config.n_qubits first)"))?;
                match *field {
                    "t1_us" => q.t1_us = num(v)?,
                    "ro_error_1to0" => q.ro_error_1to0 = num(v)?,
                    "ro_error_0to1" => q.ro_error_0to1 = num(v)?,
                    other => return Err(format!("unknown key `qubit.{i}.{other}`")),
                }
            }
            ["qp", field] => self.qp.set(field, v)?,
            ["device", "builtin_trap"] => self.has_builtin_trap = boolean(v)?,
            ["burst", field] => match *field {
                "profile" => {
                    self.profile.kind = match v {
                        "constant" => ProfileKind::Constant,
                        "surge" => ProfileKind::Surge,
                        other => return Err(format!("unknown profile `{other}`")),
                    }
                }
                "gamma0_per_s" => self.profile.gamma0 = num(v)?,
                "x_median" => self.injection.x_median = num(v)?,
                "x_sigma" => self.injection.x_sigma = num(v)?,
                "long_fraction" => self.injection.long_fraction = num(v)?,
                "long_rate_scale" => self.injection.long_rate_scale = num(v)?,
                other => return Err(format!("unknown key `burst.{other}`")),
            },
            ["surge", field] => match *field {
                "start_s" => self.profile.surge_start_s = num(v)?,
                "spike_factor" => self.profile.spike_factor = num(v)?,
                "spike_duration_s" => self.profile.spike_duration_s = num(v)?,
                "decay_time_s" => self.profile.decay_time_s = num(v)?,
                "stall_factor" => self.profile.stall_factor = num(v)?,
                "t1_factor" => self.t1_suppression = num(v)?,
                other => return Err(format!("unknown key `surge.{other}`")),
            },
            ["sim", field] => match *field {
                "t_exposed_us" => self.t_exposed_us = Some(num(v)?),
                "leakage_prob" => self.leakage_prob = num(v)?,
                "leakage_cycles" => self.leakage_cycles = v.parse().map_err(|_| format!("`{v}` is not a count"))?,
                "seed" => self.seed = v.parse().map_err(|_| format!("`{v}` is not a 64-bit seed"))?,
                other => return Err(format!("unknown key `sim.{other}`")),
            },
            ["trace", "decimate"] => {
                self.trace_decimate = Some(v.parse().map_err(|_| format!("`{v}` is not a count"))?)
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Serializes to text that [`Scenario::parse`] reads back unchanged.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "config.n_qubits={}", c.n_qubits);
        let _ = writeln!(s, "config.t_x_ns={}", c.t_x_ns);
        let _ = writeln!(s, "config.t_wait_us={}", c.t_wait_us);
        let _ = writeln!(s, "config.t_ro_us={}", c.t_ro_us);
        let _ = writeln!(s, "config.t_cycle_us={}", c.t_cycle_us);
        let _ = writeln!(s, "config.m_extra_pulses={}", c.m_extra_pulses);
        let _ = writeln!(s, "config.device_label={}", c.device_label);
        let _ = writeln!(s, "config.device_area_cm2={}", c.device_area_cm2);
        for (i, q) in self.qubits.iter().enumerate() {
            let _ = writeln!(s, "qubit.{i}.t1_us={}", q.t1_us);
            let _ = writeln!(s, "qubit.{i}.ro_error_1to0={}", q.ro_error_1to0);
            let _ = writeln!(s, "qubit.{i}.ro_error_0to1={}", q.ro_error_0to1);
        }
        for line in self.qp.to_kv().lines() {
            let _ = writeln!(s, "qp.{line}");
        }
        let _ = writeln!(s, "device.builtin_trap={}", self.has_builtin_trap);
        let p = &self.profile;
        let kind = match p.kind {
            ProfileKind::Constant => "constant",
            ProfileKind::Surge => "surge",
        };
        let _ = writeln!(s, "burst.profile={kind}");
        let _ = writeln!(s, "burst.gamma0_per_s={}", p.gamma0);
        let i = &self.injection;
        let _ = writeln!(s, "burst.x_median={}", i.x_median);
        let _ = writeln!(s, "burst.x_sigma={}", i.x_sigma);
        let _ = writeln!(s, "burst.long_fraction={}", i.long_fraction);
        let _ = writeln!(s, "burst.long_rate_scale={}", i.long_rate_scale);
        let _ = writeln!(s, "surge.start_s={}", p.surge_start_s);
        let _ = writeln!(s, "surge.spike_factor={}", p.spike_factor);
        let _ = writeln!(s, "surge.spike_duration_s={}", p.spike_duration_s);
        let _ = writeln!(s, "surge.decay_time_s={}", p.decay_time_s);
        let _ = writeln!(s, "surge.stall_factor={}", p.stall_factor);
        let _ = writeln!(s, "surge.t1_factor={}", self.t1_suppression);
        if let Some(t) = self.t_exposed_us {
            let _ = writeln!(s, "sim.t_exposed_us={t}");
        }
        let _ = writeln!(s, "sim.leakage_prob={}", self.leakage_prob);
        let _ = writeln!(s, "sim.leakage_cycles={}", self.leakage_cycles);
        let _ = writeln!(s, "sim.seed={}", self.seed);
        if let Some(d) = self.trace_decimate {
            let _ = writeln!(s, "trace.decimate={d}");
        }
        s
    }
}

fn num(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must lie in [0, 1], got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let s5 = Scenario::s5_like(30.0, 0).unwrap();
        s5.validate().unwrap();
        assert!((s5.mean_t1_us() - 18.6).abs() < 1e-9);
        assert!((s5.t_exposed_us() - 3.0).abs() < 1e-12);
        let s7 = Scenario::s7_like(100.0, 0).unwrap();
        s7.validate().unwrap();
        assert!((s7.mean_t1_us() - 27.714).abs() < 1e-3);
        assert_eq!(s7.qp.kappa, 0.0);
    }

    #[test]
    fn parse_overrides_and_round_trip() {
        let text = "\
# comment
config.t_cycle_us=30
burst.gamma0_per_s=0.5
qubit.2.t1_us=40
preset=s5
qp.kappa=0.2
";
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.config.t_cycle_us, 30.0);
        assert_eq!(sc.profile.gamma0, 0.5);
        assert_eq!(sc.qubits[2].t1_us, 40.0);
        assert_eq!(sc.qp.kappa, 0.2);
        assert_eq!(Scenario::parse(&sc.to_kv()).unwrap(), sc);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Scenario::parse("preset=s5\n\nbogus.key=1\n") {
            Err(Error::Scenario { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("bogus.key"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(Scenario::parse("qp.r=abc"), Err(Error::Scenario { line: 1, .. })));
        assert!(matches!(Scenario::parse("no equals sign"), Err(Error::Scenario { line: 1, .. })));
        assert!(matches!(Scenario::parse("qubit.9.t1_us=3"), Err(Error::Scenario { line: 1, .. })));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Scenario::parse("qubit.0.ro_error_1to0=1.5").is_err());
        assert!(Scenario::parse("preset=s7\nqp.kappa=0.1").is_err());
        assert!(Scenario::parse("config.m_extra_pulses=3").is_err());
        assert!(Scenario::parse("burst.profile=surge\nsurge.stall_factor=0").is_err());
    }

    #[test]
    fn n_qubits_resizes() {
        let sc = Scenario::parse("preset=s7\nconfig.n_qubits=5").unwrap();
        assert_eq!(sc.qubits.len(), 5);
        assert_eq!(sc.qubits[4].t1_us, 22.0);
    }

    #[test]
    fn cycle_count() {
        let sc = Scenario::s5_like(30.0, 0).unwrap();
        assert_eq!(sc.n_cycles(60.0), 2_000_000);
        assert_eq!(sc.n_cycles(0.3), 10_000);
    }
}
