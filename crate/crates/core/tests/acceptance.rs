//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::{naive_candidates, naive_counts, random_rows, series_from_rows};
use qburst::detect::*;
use qburst::physics::*;
use qburst::qob::{binary_header_len, read_outcomes, write_outcomes, QobFormat};
use qburst::rng::CounterRng;
use qburst::sim::*;
use qburst::stats::*;
use qburst::{Classification, EventRecord, OutcomeSeries, RateEstimate};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn kept(events: &[EventRecord]) -> Vec<EventRecord> {
    events.iter().filter(|e| e.classification.is_kept()).cloned().collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gap_formula() -> Outcome {
    let m = GapModel::default();
    let stack = |top| JunctionStack { d_bottom_nm: 30.0, d_top_nm: top, f_q_ghz: 5.0, has_builtin_trap: true };
    let a = gap_difference_ghz(&stack(60.0), &m).unwrap().ghz;
    let b = gap_difference_ghz(&stack(140.0), &m).unwrap().ghz;
    outcome(
        rel(a, 2.42) <= 0.02 && rel(b, 3.80) <= 0.02,
        format!("(30,60) nm -> {a:.3} GHz, (30,140) nm -> {b:.3} GHz (targets 2.42, 3.80 +- 2%)"),
    )
}

fn rate_normalization() -> Outcome {
    let norm = |r: f64| normalize_rate(&RateEstimate { n_events: 0, duration: 1.0, rate: r, stderr: 0.0 }, 0.64).unwrap();
    let (a, b) = (norm(1.0 / 38.9), norm(1.0 / 58.9));
    outcome(
        rel(a, 2.41) <= 0.005 && rel(b, 1.59) <= 0.005,
        format!("1/38.9 s^-1 -> {a:.4}, 1/58.9 s^-1 -> {b:.4} per cm^2 per min (targets 2.41, 1.59 +- 0.5%)"),
    )
}

fn rate_recovery() -> Outcome {
    let duration = 7200.0;
    let gamma0 = 1.0 / 38.9;
    let mut sc = Scenario::s5_like(30.0, 0).unwrap();
    sc.profile = RateProfile::constant(gamma0);
    sc.seed = 20240501;
    let (series, _) = simulate(&sc, duration).unwrap();
    let cfg = DetectorConfig::new(3, TauSetting::auto());
    let det = detect(&series, &cfg).unwrap();
    let k = kept(&det.events);
    let est = estimate_rate(k.len() as u64, series.duration_s()).unwrap();
    let rate_ok = (est.rate - gamma0).abs() <= 2.0 * est.stderr;
    drop(series);

    sc.profile = RateProfile::constant(0.0);
    sc.seed += 1;
    let (control, _) = simulate(&sc, duration).unwrap();
    let fixed = DetectorConfig::new(3, TauSetting::Fixed(det.tau_cycles));
    let ctl = detect_with_fit(&control, &fixed, Some(&det.fit)).unwrap();
    let fp = ctl.count(Classification::is_kept);
    let fp_fraction = fp as f64 / ctl.n_candidates.max(1) as f64;
    outcome(
        rate_ok && fp_fraction <= 0.01,
        format!(
            "gamma_kept = {:.5} +- {:.5} s^-1 vs {gamma0:.5} ({} kept, tau {:.2} cycles, score {:.2}); control kept {fp} of {} candidates ({:.2e}, limit 1%)",
            est.rate, est.stderr, k.len(), det.tau_cycles, det.fit.separation_score, ctl.n_candidates, fp_fraction
        ),
    )
}

/// Recovery time and its uncertainty: bootstrap spread combined with the
/// one-cycle resolution of the alignment origin.
fn recovery(sc: &Scenario, duration: f64) -> (f64, f64) {
    let (series, _) = simulate(sc, duration).unwrap();
    let det = detect(&series, &DetectorConfig::new(3, TauSetting::auto())).unwrap();
    let tc = sc.config.t_cycle_s();
    let w = Window { pre: (2e-3 / tc).ceil() as usize, post: (15e-3 / tc).ceil() as usize };
    let est = bootstrap_recovery_time(&kept(&det.events), det.counts.as_ref().unwrap(), w, tc, RecoveryCriterion::default(), 200, sc.seed)
        .unwrap();
    (est.t_rec, est.stderr.hypot(tc))
}

fn pumping_signature() -> Outcome {
    let (duration, gamma0, seed) = (600.0, 0.5, 77);
    let run = |tc: f64, m: u32, no_pumping: bool| {
        let mut sc = Scenario::s5_like(tc, m).unwrap();
        if no_pumping {
            // same recovery as the pumped device at 100 µs, but no rate dependence
            sc.qp.s0 += sc.qp.kappa * 1e4;
            sc.qp.kappa = 0.0;
        }
        sc.profile = RateProfile::constant(gamma0);
        sc.seed = seed;
        recovery(&sc, duration)
    };
    let cycles = [100.0, 30.0, 20.0, 10.0];
    let by_cycle: Vec<(f64, f64)> = cycles.iter().map(|&tc| run(tc, 0, false)).collect();
    let by_m: Vec<(f64, f64)> = [0, 2, 4, 6].iter().map(|&m| if m == 0 { by_cycle[0] } else { run(100.0, m, false) }).collect();
    let flat: Vec<(f64, f64)> = cycles.iter().map(|&tc| run(tc, 0, true)).collect();
    let decreasing = |v: &[(f64, f64)]| v.windows(2).all(|w| w[1].0 < w[0].0);
    let mut worst = 0.0f64;
    for i in 0..flat.len() {
        for j in i + 1..flat.len() {
            let (a, b) = (flat[i], flat[j]);
            worst = worst.max((a.0 - b.0).abs() / (2.0 * a.1.hypot(b.1)));
        }
    }
    let ms = |v: &[(f64, f64)]| v.iter().map(|x| format!("{:.3}", x.0 * 1e3)).collect::<Vec<_>>().join(", ");
    outcome(
        decreasing(&by_cycle) && decreasing(&by_m) && worst <= 1.0,
        format!(
            "t_rec(ms) vs t_cycle [{}], vs m [{}]; kappa=0 [{}] worst pair at {:.2} of 2 combined sd",
            ms(&by_cycle),
            ms(&by_m),
            ms(&flat),
            worst
        ),
    )
}

fn surge_phenomenology() -> Outcome {
    let gamma0 = 0.5;
    let (start, spike, decay, bin) = (600.0, 432.0, 864.0, 300.0);
    let mut sc = Scenario::s5_like(30.0, 0).unwrap();
    sc.profile = RateProfile::surge(gamma0, start, 10.0, spike, decay, 0.01);
    sc.injection.long_fraction = 0.02;
    sc.seed = 5;
    let duration = 8100.0;
    let (series, log) = simulate(&sc, duration).unwrap();
    let det = detect(&series, &DetectorConfig::new(3, TauSetting::auto()).with_second_pass(true)).unwrap();
    let k = kept(&det.events);
    let history = surge_history(&k, sc.config.t_cycle_s(), series.n_cycles(), bin).unwrap();
    let rates = history.rates();
    let pre_bins = (start / bin) as usize;
    let pre = rates[..pre_bins].iter().sum::<f64>() / pre_bins as f64;
    let peak = rates.iter().cloned().fold(0.0, f64::max);
    let last = *rates.last().unwrap();
    let regimes = regime_sequence(&rates, pre, 3.0);
    let regimes_ok = regimes == [Regime::Baseline, Regime::Elevated, Regime::Suppressed];

    // match kept events to injected bursts within a few cycles of onset
    let near = |e: &EventRecord, c: usize| e.t0_cycle + 3 >= c && e.t0_cycle <= c + 8;
    let long: Vec<usize> = log.bursts.iter().filter(|b| b.long).map(|b| b.cycle).collect();
    let flagged = long
        .iter()
        .filter(|&&c| k.iter().any(|e| near(e, c) && e.classification == Classification::KeptLongRecovery))
        .count();
    let typical: Vec<&EventRecord> = k.iter().filter(|e| log.bursts.iter().any(|b| !b.long && near(e, b.cycle))).collect();
    let mislabelled = typical.iter().filter(|e| e.classification == Classification::KeptLongRecovery).count();
    let flagged_frac = flagged as f64 / long.len().max(1) as f64;
    let mislabelled_frac = mislabelled as f64 / typical.len().max(1) as f64;
    outcome(
        regimes_ok && peak >= 8.0 * pre && last <= 0.05 * pre && flagged_frac >= 0.95 && mislabelled_frac <= 0.05,
        format!(
            "regimes {regimes:?}; peak {:.2}x, final {:.3}x pre-surge; long flagged {flagged}/{} ({:.1}%), typical mislabelled {mislabelled}/{} ({:.2}%)",
            peak / pre,
            last / pre,
            long.len(),
            100.0 * flagged_frac,
            typical.len(),
            100.0 * mislabelled_frac
        ),
    )
}

fn detector_oracle() -> Outcome {
    let mut rng = CounterRng::new(6).stream(0, 0);
    let accept_all = ThresholdFit {
        threshold: f64::NEG_INFINITY,
        separation_score: 1.0,
        tau_cycles: None,
        histogram: log_histogram(&[]),
    };
    let mut mismatches = 0;
    let mut total = 0;
    for trial in 0..1000u64 {
        let nq = rng.random_range(1..=5usize);
        let len = rng.random_range(2..=200usize);
        let p_err = rng.random_range(0.0..0.5);
        let rows = random_rows(trial, nq, len, p_err, rng.random_range(0..4), 0.9);
        let n_th = rng.random_range(1..=nq as u32);
        let tau = rng.random_range(1.0..20.0);
        let det = detect_with_fit(&series_from_rows(&rows, nq), &DetectorConfig::new(n_th, TauSetting::Fixed(tau)), Some(&accept_all))
            .unwrap();
        let got: Vec<(usize, usize, u32)> = det.events.iter().map(|e| (e.core_start, e.core_end, e.peak_n)).collect();
        let want = naive_candidates(&naive_counts(&rows), n_th);
        total += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1000 random traces, {total} candidates, {mismatches} mismatching traces"))
}

fn integrator() -> Outcome {
    let (r, x0) = (200.0, 20.0);
    let recomb = QpModelParams { r, s0: 0.0, kappa: 0.0, g: 0.0, ..Default::default() };
    let (s0, g, y0) = (2250.0, 4.5, 20.0);
    let linear = QpModelParams { r: 0.0, s0, kappa: 0.0, g, ..Default::default() };
    let exact_r = |t: f64| x0 / (1.0 + r * x0 * t);
    let exact_l = |t: f64| g / s0 + (y0 - g / s0) * (-s0 * t).exp();

    // standard step: one 30 µs cycle per call
    let dt = 30e-6;
    let mut worst = 0.0f64;
    let (mut a, mut b) = (QpState { x: x0, t: 0.0 }, QpState { x: y0, t: 0.0 });
    for _ in 0..100 {
        a = qp_step(a, &recomb, 0.0, dt).unwrap();
        b = qp_step(b, &linear, 0.0, dt).unwrap();
        worst = worst.max(rel(a.x, exact_r(a.t))).max(rel(b.x, exact_l(b.t)));
    }
    let ratios = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let e: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| f(n)).collect();
        e.windows(2).map(|w| w[0] / w[1]).collect()
    };
    let t_r = 1.0 / (r * x0);
    let rr = ratios(&|n| (integrate_fixed(x0, &recomb, 0.0, t_r, n) - exact_r(t_r)).abs());
    let t_l = 2.0 / s0;
    let rl = ratios(&|n| (integrate_fixed(y0, &linear, 0.0, t_l, n) - exact_l(t_l)).abs());
    let order_ok = rr.iter().chain(&rl).all(|&q| q >= 8.0);
    let fmt = |v: &[f64]| v.iter().map(|q| format!("{q:.1}")).collect::<Vec<_>>().join(", ");
    outcome(
        worst <= 1e-3 && order_ok,
        format!("max relative error {worst:.2e} (limit 1e-3); halving ratios recombination [{}], linear [{}] (need >= 8)", fmt(&rr), fmt(&rl)),
    )
}

fn coverage() -> Outcome {
    let (replicas, duration, gamma0) = (200u64, 120.0, 1.0);
    let mut covered = 0;
    for i in 0..replicas {
        let mut sc = Scenario::s5_like(30.0, 0).unwrap();
        sc.profile = RateProfile::constant(gamma0);
        sc.seed = 1000 + i;
        let (series, _) = simulate(&sc, duration).unwrap();
        let det = detect(&series, &DetectorConfig::new(3, TauSetting::auto())).unwrap();
        let est = estimate_rate(det.count(Classification::is_kept) as u64, series.duration_s()).unwrap();
        if (est.rate - gamma0).abs() <= 2.0 * est.stderr {
            covered += 1;
        }
    }
    let frac = covered as f64 / replicas as f64;
    outcome(frac >= 0.93, format!("{covered}/{replicas} replicas cover the true rate ({:.1}%, need >= 93%)", 100.0 * frac))
}

fn bytes(series: &OutcomeSeries, format: QobFormat) -> Vec<u8> {
    let mut out = Vec::new();
    write_outcomes(series, format, &mut out).unwrap();
    out
}

fn determinism_and_round_trip() -> Outcome {
    let mut sc = Scenario::s5_like(30.0, 0).unwrap();
    sc.profile = RateProfile::constant(2.0);
    sc.seed = 99;
    let duration = 1e6 * sc.config.t_cycle_s();
    let (a, _) = simulate(&sc, duration).unwrap();
    let (b, _) = simulate(&sc, duration).unwrap();
    let mut ok = a.n_cycles() == 1_000_000;
    let expected_binary = binary_header_len(&a.config.device_label) + a.n_cycles() * a.config.n_qubits.div_ceil(8);
    ok &= bytes(&a, QobFormat::Binary).len() == expected_binary;
    let mut notes = Vec::new();
    for format in [QobFormat::Binary, QobFormat::Text] {
        let (ba, bb) = (bytes(&a, format), bytes(&b, format));
        let same = ba == bb;
        let back = read_outcomes(&ba[..], format).unwrap();
        // the binary header has no slot for the seed or start time
        let carried = match format {
            QobFormat::Text => back == a,
            QobFormat::Binary => back.config == a.config && back.outcomes == a.outcomes,
        };
        let identity = carried && bytes(&back, format) == ba;
        ok &= same && identity;
        notes.push(format!("{format:?}: {} bytes, identical {same}, round trip {identity}", ba.len()));
    }
    outcome(ok, format!("{} cycles; {}", a.n_cycles(), notes.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gap formula", gap_formula),
        ("rate normalization", rate_normalization),
        ("end-to-end rate recovery", rate_recovery),
        ("pumping signature", pumping_signature),
        ("surge phenomenology", surge_phenomenology),
        ("detector oracle equivalence", detector_oracle),
        ("numerical integrator", integrator),
        ("estimator calibration", coverage),
        ("determinism and format round trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
