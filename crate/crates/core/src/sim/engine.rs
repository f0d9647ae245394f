use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::profile::{generate_arrivals, rate_profile_at, ProfileKind};
use super::scenario::Scenario;
use crate::physics::{advance, QpModelParams};
use crate::rng::{domain, CounterRng};
use crate::types::{BitMatrix, OutcomeSeries};
use crate::{Error, Result};

/// `(P(read 0 | prepared in 1), P(read 1 | prepared in 0))` for one cycle.
pub fn error_prob_per_cycle(t1_us: f64, t_exposed_us: f64, ro_err_1to0: f64, ro_err_0to1: f64) -> Result<(f64, f64)> {
    if !(t1_us > 0.0) || !(t_exposed_us >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need t1 > 0 and t_exposed >= 0, got t1={t1_us}, t_exposed={t_exposed_us}"
        )));
    }
    for p in [ro_err_1to0, ro_err_0to1] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("invalid probability {p}")));
        }
    }
    let p_relax = -(-t_exposed_us / t1_us).exp_m1();
    Ok((p_relax * (1.0 - ro_err_0to1) + (1.0 - p_relax) * ro_err_1to0, ro_err_0to1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstTruth {
    /// First cycle affected.
    pub cycle: usize,
    pub time_s: f64,
    pub x_inject: f64,
    /// Drawn into the slowly trapped population.
    pub long: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_s: f64,
    pub x: f64,
    pub gamma1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthLog {
    /// Strictly increasing in `cycle`.
    pub bursts: Vec<BurstTruth>,
    pub trace: Vec<TraceSample>,
    /// `(t_s, burst rate)` sampled once per second of acquisition.
    pub profile: Vec<(f64, f64)>,
}

impl GroundTruthLog {
    /// CSV `cycle,x_inject`.
    pub fn bursts_csv(&self) -> String {
        let mut s = String::from("cycle,x_inject\n");
        for b in &self.bursts {
            let _ = writeln!(s, "{},{}", b.cycle, b.x_inject);
        }
        s
    }

    /// CSV `t_s,x,gamma1_q0,...`, or `None` when no trace was recorded.
    pub fn trace_csv(&self) -> Option<String> {
        let first = self.trace.first()?;
        let mut s = String::from("t_s,x");
        for q in 0..first.gamma1.len() {
            let _ = write!(s, ",gamma1_q{q}");
        }
        s.push('\n');
        for row in &self.trace {
            let _ = write!(s, "{},{}", row.t_s, row.x);
            for g in &row.gamma1 {
                let _ = write!(s, ",{g}");
            }
            s.push('\n');
        }
        Some(s)
    }
}

/// Cumulative outcome thresholds on a 32-bit uniform, scaled by 2^32.
#[derive(Debug, Clone, Copy, Default)]
struct Cuts {
    /// From |1⟩: below `stay1` read 1 and stay; below `stay0` read 0 and stay;
    /// below `relax0` relax and read 0; otherwise relax and read 1.
    stay1: u64,
    stay0: u64,
    relax0: u64,
    /// From |0⟩: below `flip` read 1.
    flip: u64,
}

const SCALE: f64 = 4_294_967_296.0;

fn to_cut(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * SCALE).round() as u64
}

fn cuts(p_relax: f64, e10: f64, e01: f64) -> Cuts {
    let a = (1.0 - p_relax) * (1.0 - e10);
    let b = a + (1.0 - p_relax) * e10;
    let c = b + p_relax * (1.0 - e01);
    Cuts {
        stay1: to_cut(a),
        stay0: to_cut(b),
        relax0: to_cut(c),
        flip: to_cut(e01),
    }
}

/// Excess relaxation below which a decaying density is treated as gone.
const NEGLIGIBLE_EXCESS: f64 = 1e-9;

/// Generates `duration_s` of outcomes and the ground truth behind them.
///
/// Each cycle every qubit is flipped, may relax with probability
/// `1 - exp(-Γ1 t_exposed)` where `Γ1 = 1/T1 + c_gamma x`, and is read out
/// with misassignment; the state after readout is the true state. Bursts add
/// lognormal density to `x`, which then evolves under the quasiparticle model
/// at the cycle's π-pulse rate.
pub fn simulate(scenario: &Scenario, duration_s: f64) -> Result<(OutcomeSeries, GroundTruthLog)> {
    scenario.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration_s}")));
    }
    let cfg = &scenario.config;
    let nq = cfg.n_qubits;
    let tc = cfg.t_cycle_s();
    let n_cycles = scenario.n_cycles(duration_s);
    let t_exp = scenario.t_exposed_us() * 1e-6;
    let pulse_rate = cfg.pulse_rate_hz();
    let rng = CounterRng::new(scenario.seed);

    let qp_typ = scenario.qp;
    let scale = scenario.injection.long_rate_scale;
    let qp_long = QpModelParams {
        s0: qp_typ.s0 * scale,
        kappa: qp_typ.kappa * scale,
        g: 0.0,
        ..qp_typ
    };
    let x_eq = qp_typ.equilibrium(pulse_rate);
    let bursts = draw_bursts(scenario, duration_s, n_cycles)?;

    let base_gamma: Vec<f64> = scenario.qubits.iter().map(|q| 1.0 / (q.t1_us * 1e-6)).collect();
    let mut log = GroundTruthLog {
        bursts: bursts.clone(),
        ..Default::default()
    };
    let mut outcomes = BitMatrix::zeros(n_cycles, nq);
    let mut state = vec![false; nq];
    let mut leaked = vec![0u32; nq];
    let mut lanes = vec![[0u32; 4]; nq];
    let mut leak_lanes = vec![[0u32; 4]; nq];
    let leak_cut = to_cut(scenario.leakage_prob);
    let mut cut = vec![Cuts::default(); nq];
    let mut gamma = vec![0.0; nq];

    let (mut x_typ, mut x_long) = (x_eq, 0.0);
    let mut active = false;
    let mut dirty = true;
    let mut t1_factor = 1.0;
    let surge = scenario.profile.kind == ProfileKind::Surge;
    let mut next_burst = 0;
    let mut next_profile_sample = 0.0;

    for k in 0..n_cycles {
        let t = k as f64 * tc;
        while next_burst < bursts.len() && bursts[next_burst].cycle == k {
            let b = &bursts[next_burst];
            if b.long {
                x_long += b.x_inject;
            } else {
                x_typ += b.x_inject;
            }
            active = true;
            dirty = true;
            next_burst += 1;
        }
        if surge {
            let f = scenario.profile.t1_factor(t, scenario.t1_suppression);
            if (f - t1_factor).abs() > 1e-6 {
                t1_factor = f;
                dirty = true;
            }
        }
        if t >= next_profile_sample {
            log.profile.push((t, rate_profile_at(&scenario.profile, t)));
            next_profile_sample += 1.0;
        }
        if dirty {
            let excess = qp_typ.c_gamma * (x_typ + x_long);
            for q in 0..nq {
                gamma[q] = base_gamma[q] / t1_factor + excess;
                let p = -(-gamma[q] * t_exp).exp_m1();
                let qb = &scenario.qubits[q];
                cut[q] = cuts(p, qb.ro_error_1to0, qb.ro_error_0to1);
            }
            dirty = active;
        }
        if let Some(d) = scenario.trace_decimate {
            if k % d == 0 {
                log.trace.push(TraceSample {
                    t_s: t,
                    x: x_typ + x_long,
                    gamma1: gamma.clone(),
                });
            }
        }

        let lane = k % 4;
        if lane == 0 {
            let block = (k / 4) as u64;
            for q in 0..nq {
                lanes[q] = rng.block32(block, q as u32, domain::QUBIT);
                if leak_cut > 0 {
                    leak_lanes[q] = rng.block32(block, q as u32, domain::LEAKAGE);
                }
            }
        }
        let row = outcomes.row_mut(k);
        for q in 0..nq {
            if leak_cut > 0 {
                if leaked[q] == 0 && (leak_lanes[q][lane] as u64) < leak_cut {
                    leaked[q] = scenario.leakage_cycles.max(1);
                }
                if leaked[q] > 0 {
                    leaked[q] -= 1;
                    state[q] = true;
                    row[q / 8] |= 1 << (q % 8);
                    continue;
                }
            }
            let u = lanes[q][lane] as u64;
            let c = &cut[q];
            let (read, next) = if !state[q] {
                // flipped into |1⟩
                if u < c.stay1 {
                    (true, true)
                } else if u < c.stay0 {
                    (false, true)
                } else if u < c.relax0 {
                    (false, false)
                } else {
                    (true, false)
                }
            } else {
                (u < c.flip, false)
            };
            state[q] = next;
            if read {
                row[q / 8] |= 1 << (q % 8);
            }
        }

        if active {
            x_typ = advance(x_typ, &qp_typ, pulse_rate, tc);
            if x_long > 0.0 {
                x_long = advance(x_long, &qp_long, pulse_rate, tc);
            }
            let settled = |x: f64, eq: f64| qp_typ.c_gamma * (x - eq).abs() * t_exp < NEGLIGIBLE_EXCESS;
            if settled(x_typ, x_eq) && settled(x_long, 0.0) {
                x_typ = x_eq;
                x_long = 0.0;
                active = false;
            }
            dirty = true;
        }
    }

    let mut series = OutcomeSeries::new(cfg.clone(), outcomes)?;
    series.seed = Some(scenario.seed);
    Ok((series, log))
}

/// Burst arrivals mapped to the first cycle starting at or after them.
/// Arrivals landing in the same cycle are merged into one burst.
fn draw_bursts(scenario: &Scenario, duration_s: f64, n_cycles: usize) -> Result<Vec<BurstTruth>> {
    let times = generate_arrivals(&scenario.profile, duration_s, scenario.seed)?;
    let tc = scenario.config.t_cycle_s();
    let inj = &scenario.injection;
    let size = LogNormal::new(inj.x_median.ln(), inj.x_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let rng = CounterRng::new(scenario.seed);
    let mut sizes = rng.stream(1, domain::BURST);
    let mut out: Vec<BurstTruth> = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let x = size.sample(&mut sizes);
        let long = rng.uniforms(i as u64, 2, domain::BURST)[0] < inj.long_fraction;
        let cycle = (t / tc).ceil() as usize;
        if cycle >= n_cycles {
            break;
        }
        match out.last_mut() {
            Some(prev) if prev.cycle == cycle => {
                prev.x_inject += x;
                prev.long |= long;
            }
            _ => out.push(BurstTruth {
                cycle,
                time_s: t,
                x_inject: x,
                long,
            }),
        }
    }
    Ok(out)
}

/// Mean T1 across qubits, µs, averaged over bins of `bin_width_s` following
/// the surge suppression schedule. Bins match [`crate::stats::surge_history`].
pub fn surge_t1_overlay(scenario: &Scenario, duration_s: f64, bin_width_s: f64) -> Result<Vec<f64>> {
    if !(bin_width_s > 0.0 && duration_s > 0.0) {
        return Err(Error::InvalidArgument("duration and bin width must be positive".into()));
    }
    let total = scenario.n_cycles(duration_s) as f64 * scenario.config.t_cycle_s();
    let n_bins = ((total / bin_width_s) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mean_t1 = scenario.mean_t1_us();
    const SUBSAMPLES: usize = 64;
    Ok((0..n_bins)
        .map(|b| {
            let lo = b as f64 * bin_width_s;
            let hi = ((b + 1) as f64 * bin_width_s).min(total);
            let avg = (0..SUBSAMPLES)
                .map(|j| {
                    let t = lo + (j as f64 + 0.5) / SUBSAMPLES as f64 * (hi - lo);
                    scenario.profile.t1_factor(t, scenario.t1_suppression)
                })
                .sum::<f64>()
                / SUBSAMPLES as f64;
            mean_t1 * avg
        })
        .collect())
}
