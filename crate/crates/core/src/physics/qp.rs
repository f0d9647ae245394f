//! Lumped quasiparticle density with recombination, trapping and π-pulse pumping.
//!
//! ```text
//! dx/dt = -r x² - (s0 + kappa · f_pulse) x + g
//! Γ1    = gamma1_base + c_gamma · x
//! ```

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::{Error, Result};

/// Largest relative change of `x` allowed in one integrator substep.
pub const MAX_RELATIVE_CHANGE: f64 = 0.01;

const MAX_SUBSTEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpModelParams {
    /// Recombination coefficient, 1/(density·s).
    pub r: f64,
    /// Baseline trapping rate, 1/s.
    pub s0: f64,
    /// Trapping added per π pulse per second (dimensionless).
    pub kappa: f64,
    /// Background generation, density/s.
    pub g: f64,
    /// Relaxation rate per unit density, 1/s.
    pub c_gamma: f64,
    /// Relaxation rate without quasiparticles, 1/s.
    pub gamma1_base: f64,
}

impl Default for QpModelParams {
    fn default() -> Self {
        Self {
            r: 0.0,
            s0: 3000.0,
            kappa: 0.0,
            g: 0.0,
            c_gamma: 1e6,
            gamma1_base: 1.0 / 18.6e-6,
        }
    }
}

impl QpModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r", self.r),
            ("s0", self.s0),
            ("kappa", self.kappa),
            ("g", self.g),
            ("c_gamma", self.c_gamma),
            ("gamma1_base", self.gamma1_base),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} = {v}")));
            }
            if v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Pumping needs a trap to pump into.
    pub fn validate_for_trap(&self, has_builtin_trap: bool) -> Result<()> {
        self.validate()?;
        if !has_builtin_trap && self.kappa != 0.0 {
            return Err(Error::InvalidArgument(
                "kappa must be 0 for a junction without a built-in trap".into(),
            ));
        }
        Ok(())
    }

    /// Linear loss rate at a given pulse rate, 1/s.
    pub fn trap_rate(&self, pulse_rate_hz: f64) -> f64 {
        self.s0 + self.kappa * pulse_rate_hz
    }

    #[inline]
    pub fn derivative(&self, x: f64, pulse_rate_hz: f64) -> f64 {
        -self.r * x * x - self.trap_rate(pulse_rate_hz) * x + self.g
    }

    /// Steady state: non-negative root of `r x² + s x = g`.
    pub fn equilibrium(&self, pulse_rate_hz: f64) -> f64 {
        let s = self.trap_rate(pulse_rate_hz);
        if self.g == 0.0 {
            0.0
        } else if self.r == 0.0 {
            if s > 0.0 {
                self.g / s
            } else {
                f64::INFINITY
            }
        } else {
            // stable form of (-s + sqrt(s² + 4 r g)) / 2r
            2.0 * self.g / (s + (s * s + 4.0 * self.r * self.g).sqrt())
        }
    }

    /// `key=value` lines, one per parameter.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Scenario {
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            p.set(k.trim(), v.trim()).map_err(|msg| Error::Scenario { line: i + 1, msg })?;
        }
        p.validate()?;
        Ok(p)
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("r", self.r),
            ("s0", self.s0),
            ("kappa", self.kappa),
            ("g", self.g),
            ("c_gamma", self.c_gamma),
            ("gamma1_base", self.gamma1_base),
        ]
    }

    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v: f64 = value.parse().map_err(|_| format!("`{value}` is not a number"))?;
        match key {
            "r" => self.r = v,
            "s0" => self.s0 = v,
            "kappa" => self.kappa = v,
            "g" => self.g = v,
            "c_gamma" => self.c_gamma = v,
            "gamma1_base" => self.gamma1_base = v,
            other => return Err(format!("unknown quasiparticle parameter `{other}`")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpState {
    /// Normalised density, never negative.
    pub x: f64,
    /// Seconds.
    pub t: f64,
}

/// One classical fourth-order Runge-Kutta step of size `h`, without clamping.
#[inline]
pub fn rk4_step(x: f64, p: &QpModelParams, pulse_rate_hz: f64, h: f64) -> f64 {
    let k1 = p.derivative(x, pulse_rate_hz);
    let k2 = p.derivative(x + 0.5 * h * k1, pulse_rate_hz);
    let k3 = p.derivative(x + 0.5 * h * k2, pulse_rate_hz);
    let k4 = p.derivative(x + h * k3, pulse_rate_hz);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// `n` fixed RK4 steps covering `t_end`; used for convergence checks.
pub fn integrate_fixed(x0: f64, p: &QpModelParams, pulse_rate_hz: f64, t_end: f64, n: usize) -> f64 {
    let h = t_end / n as f64;
    (0..n).fold(x0, |x, _| rk4_step(x, p, pulse_rate_hz, h))
}

/// Advances the state by `dt`, subdividing so that no substep changes `x` by
/// more than 1 %, and clamps the density at zero.
pub fn qp_step(state: QpState, params: &QpModelParams, pulse_rate_hz: f64, dt: f64) -> Result<QpState> {
    if !(state.x.is_finite() && state.t.is_finite() && pulse_rate_hz.is_finite() && dt.is_finite()) {
        return Err(Error::NonFinite(format!(
            "x={}, t={}, pulse_rate={pulse_rate_hz}, dt={dt}",
            state.x, state.t
        )));
    }
    if !(dt > 0.0) || pulse_rate_hz < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and pulse_rate >= 0, got dt={dt}, pulse_rate={pulse_rate_hz}"
        )));
    }
    let x0 = state.x.max(0.0);
    Ok(QpState {
        x: advance(x0, params, pulse_rate_hz, dt),
        t: state.t + dt,
    })
}

/// Unchecked core of [`qp_step`].
pub(crate) fn advance(x0: f64, params: &QpModelParams, pulse_rate_hz: f64, dt: f64) -> f64 {
    let scale = x0.max(params.equilibrium(pulse_rate_hz).min(f64::MAX)).max(1e-12);
    let change = params.derivative(x0, pulse_rate_hz).abs() * dt;
    let n = ((change / (MAX_RELATIVE_CHANGE * scale)).ceil() as u64).clamp(1, MAX_SUBSTEPS);
    let h = dt / n as f64;
    let mut x = x0;
    for _ in 0..n {
        x = rk4_step(x, params, pulse_rate_hz, h).max(0.0);
    }
    x
}

pub fn gamma1_of(state: &QpState, params: &QpModelParams) -> f64 {
    params.gamma1_base + excess_gamma1(state.x, params)
}

/// Relaxation rate added by the quasiparticles alone, 1/s.
#[inline]
pub fn excess_gamma1(x: f64, params: &QpModelParams) -> f64 {
    params.c_gamma * x
}

/// Time for an injected density `x_inject` to decay below `threshold`.
///
/// The crossing is located by interpolating `ln x` between the two
/// bracketing steps, which is exact for a pure exponential.
pub fn recovery_time_model(params: &QpModelParams, x_inject: f64, pulse_rate_hz: f64, threshold: f64) -> Result<f64> {
    params.validate()?;
    if !(threshold > 0.0 && threshold < x_inject) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < threshold < x_inject, got threshold={threshold}, x_inject={x_inject}"
        )));
    }
    const HORIZON_S: f64 = 1e4;
    if params.equilibrium(pulse_rate_hz) >= threshold {
        return Err(Error::NeverRecovers(f64::INFINITY));
    }
    let initial_rate = params.r * x_inject + params.trap_rate(pulse_rate_hz);
    if initial_rate <= 0.0 {
        return Err(Error::NeverRecovers(f64::INFINITY));
    }
    let dt = 0.01 / initial_rate;
    let mut state = QpState { x: x_inject, t: 0.0 };
    while state.t < HORIZON_S {
        let next = qp_step(state, params, pulse_rate_hz, dt)?;
        if next.x < threshold {
            let (l0, l1, lt) = (state.x.ln(), next.x.max(f64::MIN_POSITIVE).ln(), threshold.ln());
            let frac = if l0 > l1 { (l0 - lt) / (l0 - l1) } else { 1.0 };
            return Ok(state.t + frac * dt);
        }
        state = next;
    }
    Err(Error::NeverRecovers(HORIZON_S))
}

/// Sampled trajectory `(t_s, x, gamma1)` every `dt` for `steps` steps.
pub fn trajectory(params: &QpModelParams, x0: f64, pulse_rate_hz: f64, dt: f64, steps: usize) -> Result<Vec<(f64, f64, f64)>> {
    let mut s = QpState { x: x0, t: 0.0 };
    let mut out = Vec::with_capacity(steps + 1);
    out.push((s.t, s.x, gamma1_of(&s, params)));
    for _ in 0..steps {
        s = qp_step(s, params, pulse_rate_hz, dt)?;
        out.push((s.t, s.x, gamma1_of(&s, params)));
    }
    Ok(out)
}

/// CSV with header `t_s,x,gamma1`.
pub fn trajectory_csv(traj: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("t_s,x,gamma1\n");
    for (t, x, g) in traj {
        let _ = writeln!(s, "{t},{x},{g}");
    }
    s
}
