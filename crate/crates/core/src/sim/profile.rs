use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::rng::{domain, CounterRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    Surge,
}

/// Burst rate over acquisition time.
///
/// A surge holds `gamma0 · spike_factor` from `surge_start_s` for
/// `spike_duration_s`, then relaxes exponentially towards
/// `gamma0 · stall_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub kind: ProfileKind,
    /// Events per second.
    pub gamma0: f64,
    pub surge_start_s: f64,
    pub spike_factor: f64,
    pub spike_duration_s: f64,
    pub decay_time_s: f64,
    pub stall_factor: f64,
}

impl RateProfile {
    pub fn constant(gamma0: f64) -> Self {
        Self {
            kind: ProfileKind::Constant,
            gamma0,
            surge_start_s: 0.0,
            spike_factor: 1.0,
            spike_duration_s: 0.0,
            decay_time_s: 1.0,
            stall_factor: 1.0,
        }
    }

    pub fn surge(gamma0: f64, start_s: f64, spike_factor: f64, spike_duration_s: f64, decay_time_s: f64, stall_factor: f64) -> Self {
        Self {
            kind: ProfileKind::Surge,
            gamma0,
            surge_start_s: start_s,
            spike_factor,
            spike_duration_s,
            decay_time_s,
            stall_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return bad(format!("gamma0 must be non-negative, got {}", self.gamma0));
        }
        if self.kind == ProfileKind::Surge {
            if !(self.spike_factor >= 1.0) {
                return bad(format!("spike_factor must be >= 1, got {}", self.spike_factor));
            }
            if !(self.stall_factor > 0.0 && self.stall_factor <= 1.0) {
                return bad(format!("stall_factor must lie in (0, 1], got {}", self.stall_factor));
            }
            if !(self.decay_time_s > 0.0) || self.spike_duration_s < 0.0 || self.surge_start_s < 0.0 {
                return bad("surge times must be non-negative and decay_time_s positive".into());
            }
        }
        Ok(())
    }

    fn spike_end(&self) -> f64 {
        self.surge_start_s + self.spike_duration_s
    }

    pub fn max_rate(&self) -> f64 {
        match self.kind {
            ProfileKind::Constant => self.gamma0,
            ProfileKind::Surge => self.gamma0 * self.spike_factor.max(1.0),
        }
    }

    /// Multiplier on every qubit's T1 at time `t_s`: `suppression` during the
    /// spike, recovering towards 1 with the rate decay time afterwards.
    pub fn t1_factor(&self, t_s: f64, suppression: f64) -> f64 {
        if self.kind == ProfileKind::Constant || t_s < self.surge_start_s {
            1.0
        } else if t_s <= self.spike_end() {
            suppression
        } else {
            1.0 - (1.0 - suppression) * (-(t_s - self.spike_end()) / self.decay_time_s).exp()
        }
    }
}

/// Burst rate at acquisition time `t_s`, events per second.
pub fn rate_profile_at(profile: &RateProfile, t_s: f64) -> f64 {
    match profile.kind {
        ProfileKind::Constant => profile.gamma0,
        ProfileKind::Surge => {
            let p = profile;
            if t_s < p.surge_start_s {
                p.gamma0
            } else if t_s <= p.spike_end() {
                p.gamma0 * p.spike_factor
            } else {
                let decay = (-(t_s - p.spike_end()) / p.decay_time_s).exp();
                p.gamma0 * (p.stall_factor + (p.spike_factor - p.stall_factor) * decay)
            }
        }
    }
}

/// Burst times in `[0, duration_s)` by thinning a homogeneous process at the
/// profile's maximum rate.
pub fn generate_arrivals(profile: &RateProfile, duration_s: f64, seed: u64) -> Result<Vec<f64>> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration_s}")));
    }
    let lambda = profile.max_rate();
    if lambda == 0.0 {
        return Ok(Vec::new());
    }
    let gaps = Exp::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = CounterRng::new(seed).stream(0, domain::BURST);
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t >= duration_s {
            return Ok(out);
        }
        let accept: f64 = rng.random();
        if accept * lambda < rate_profile_at(profile, t) {
            out.push(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile() {
        let p = RateProfile::constant(0.3);
        for t in [0.0, 1.0, 1e6] {
            assert_eq!(rate_profile_at(&p, t), 0.3);
            assert_eq!(p.t1_factor(t, 1.0 / 3.0), 1.0);
        }
    }

    #[test]
    fn surge_profile_pieces() {
        let p = RateProfile::surge(2.0, 100.0, 10.0, 50.0, 20.0, 0.01);
        assert_eq!(rate_profile_at(&p, 99.0), 2.0);
        assert_eq!(rate_profile_at(&p, 100.0), 20.0);
        assert_eq!(rate_profile_at(&p, 150.0), 20.0);
        let late = rate_profile_at(&p, 1e6);
        assert!((late - 0.02).abs() / 0.02 < 1e-6);
        let t = 170.0;
        assert!((rate_profile_at(&p, t) - 2.0 * (0.01 + 9.99 * (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(p.t1_factor(120.0, 1.0 / 3.0), 1.0 / 3.0);
        assert!((p.t1_factor(1e6, 1.0 / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(RateProfile::constant(-1.0).validate().is_err());
        assert!(RateProfile::surge(1.0, 0.0, 0.5, 1.0, 1.0, 0.1).validate().is_err());
        assert!(RateProfile::surge(1.0, 0.0, 10.0, 1.0, 1.0, 0.0).validate().is_err());
        assert!(RateProfile::surge(1.0, 0.0, 10.0, 1.0, 1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn arrivals_sorted_and_seeded() {
        assert!(generate_arrivals(&RateProfile::constant(0.0), 100.0, 1).unwrap().is_empty());
        let p = RateProfile::constant(2.0);
        let a = generate_arrivals(&p, 500.0, 11).unwrap();
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&t| (0.0..500.0).contains(&t)));
        assert_eq!(a, generate_arrivals(&p, 500.0, 11).unwrap());
        assert_ne!(a, generate_arrivals(&p, 500.0, 12).unwrap());
    }

    #[test]
    fn poisson_count_moments() {
        // 1.5 per minute over 2 h: mean 180
        let p = RateProfile::constant(1.5 / 60.0);
        let seeds = 500u64;
        let counts: Vec<f64> = (0..seeds)
            .map(|s| generate_arrivals(&p, 7200.0, s).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / seeds as f64;
        assert!((mean - 180.0).abs() <= 2.0 * (180.0f64 / seeds as f64).sqrt(), "{mean}");
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        assert!((var / 180.0 - 1.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn surge_arrivals_follow_profile_in_each_regime() {
        let p = RateProfile::surge(1.0, 2000.0, 10.0, 500.0, 1000.0, 0.01);
        let arrivals = generate_arrivals(&p, 10_000.0, 3).unwrap();
        // baseline, spike, decay, stall
        let edges = [0.0, 2000.0, 2500.0, 4500.0, 10_000.0];
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let steps = 100_000;
            let h = (b - a) / steps as f64;
            let expected: f64 = (0..steps).map(|i| rate_profile_at(&p, a + (i as f64 + 0.5) * h) * h).sum();
            let seen = arrivals.iter().filter(|&&t| t >= a && t < b).count() as f64;
            assert!((seen - expected).abs() <= 3.0 * expected.sqrt(), "[{a}, {b}): {seen} vs {expected:.1}");
        }
    }
}
