use proptest::prelude::*;
use qburst::physics::*;
use qburst::stats::*;
use qburst::EventRecord;

fn recombination(r: f64) -> QpModelParams {
    QpModelParams { r, s0: 0.0, kappa: 0.0, g: 0.0, ..Default::default() }
}

fn linear(s0: f64, g: f64) -> QpModelParams {
    QpModelParams { r: 0.0, s0, kappa: 0.0, g, ..Default::default() }
}

fn recombination_exact(x0: f64, r: f64, t: f64) -> f64 {
    x0 / (1.0 + r * x0 * t)
}

fn linear_exact(x0: f64, s0: f64, g: f64, t: f64) -> f64 {
    g / s0 + (x0 - g / s0) * (-s0 * t).exp()
}

fn at(t0: usize, peak_n: u32) -> EventRecord {
    let mut e = EventRecord::candidate(t0, t0, peak_n, t0, 0.0);
    e.t0_cycle = t0;
    e
}

#[test]
fn rk4_converges_at_fourth_order() {
    // error ratio under step halving should approach 16
    let (x0, r) = (20.0, 200.0);
    let t = 1.0 / (r * x0);
    let p = recombination(r);
    let mut errs = Vec::new();
    for n in [4, 8, 16, 32] {
        errs.push((integrate_fixed(x0, &p, 0.0, t, n) - recombination_exact(x0, r, t)).abs());
    }
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "{errs:?}");
    }
    let (s0, g) = (3000.0, 15.0);
    let p = linear(s0, g);
    let t = 2.0 / s0;
    let mut errs = Vec::new();
    for n in [2, 4, 8, 16] {
        errs.push((integrate_fixed(0.5, &p, 0.0, t, n) - linear_exact(0.5, s0, g, t)).abs());
    }
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "{errs:?}");
    }
}

#[test]
fn step_matches_linear_solution() {
    let (s0, g, x0) = (2200.0, 4.4, 30.0);
    let p = linear(s0, g);
    let mut s = QpState { x: x0, t: 0.0 };
    for _ in 0..100 {
        s = qp_step(s, &p, 0.0, 30e-6).unwrap();
        let exact = linear_exact(x0, s0, g, s.t);
        assert!((s.x - exact).abs() / exact < 1e-3, "t={} {} {}", s.t, s.x, exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_never_negative(r in 0.0f64..1e5, s0 in 0.0f64..1e5, kappa in 0.0f64..1.0, g in 0.0f64..100.0,
                              x0 in 0.0f64..100.0, rate in 0.0f64..1e6, dt in 1e-7f64..1e-2) {
        let p = QpModelParams { r, s0, kappa, g, ..Default::default() };
        let mut s = QpState { x: x0, t: 0.0 };
        for _ in 0..5 {
            s = qp_step(s, &p, rate, dt).unwrap();
            prop_assert!(s.x >= 0.0 && s.x.is_finite());
        }
    }

    #[test]
    fn step_matches_recombination_solution(r in 10.0f64..1e4, x0 in 0.1f64..100.0) {
        let t = 1.0 / (r * x0);
        let s = qp_step(QpState { x: x0, t: 0.0 }, &recombination(r), 0.0, t).unwrap();
        let exact = recombination_exact(x0, r, t);
        prop_assert!((s.x - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn recovery_non_increasing_in_pulse_rate(kappa in 0.01f64..0.5, s0 in 500.0f64..5000.0, r in 0.0f64..500.0) {
        let p = QpModelParams { r, s0, kappa, g: 0.0, ..Default::default() };
        let rates: Vec<f64> = [200.0, 100.0, 50.0, 30.0, 20.0, 10.0, 5.0].iter().map(|t| 1.0 / (t * 1e-6)).collect();
        let times: Vec<f64> = rates.iter().map(|&f| recovery_time_model(&p, 20.0, f, 0.05).unwrap()).collect();
        for w in times.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", times);
        }
    }

    #[test]
    fn gap_difference_symmetric(a in 5.0f64..500.0, b in 5.0f64..500.0) {
        let m = GapModel::default();
        let s = JunctionStack { d_bottom_nm: a, d_top_nm: b, f_q_ghz: 5.0, has_builtin_trap: false };
        let t = JunctionStack { d_bottom_nm: b, d_top_nm: a, ..s };
        let (x, y) = (gap_difference_ghz(&s, &m).unwrap().ghz, gap_difference_ghz(&t, &m).unwrap().ghz);
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn normalization_round_trip(rate in 1e-6f64..1e3, area in 1e-3f64..10.0) {
        let est = estimate_rate(100, 100.0 / rate).unwrap();
        let back = denormalize_rate(normalize_rate(&est, area).unwrap(), area).unwrap();
        prop_assert!((back - est.rate).abs() <= 1e-12 * est.rate);
    }

    #[test]
    fn average_of_copies_is_the_event(n in prop::collection::vec(0u16..8, 60..200), k in 1usize..10, t0 in 20usize..40) {
        let w = Window { pre: 20, post: 20 };
        let one = average_events(&[at(t0, 3)], &n, w, 1e-5).unwrap();
        let many = average_events(&vec![at(t0, 3); k], &n, w, 1e-5).unwrap();
        prop_assert_eq!(&one.mean_n, &many.mean_n);
        let raw: Vec<f64> = n[t0 - 20..t0 + 20].iter().map(|&v| v as f64).collect();
        prop_assert_eq!(one.mean_n, raw);
    }

    #[test]
    fn rate_curve_non_increasing(peaks in prop::collection::vec(1u32..8, 0..300)) {
        let events: Vec<EventRecord> = peaks.iter().enumerate().map(|(i, &p)| at(i, p)).collect();
        let curve = rate_vs_threshold(&events, &[1, 2, 3, 4, 5, 6, 7], 3600.0).unwrap();
        for w in curve.rates.windows(2) {
            prop_assert!(w[1].n_events <= w[0].n_events);
        }
    }

    #[test]
    fn recovery_of_closed_form_exponential(tau in 5.0f64..200.0, amp in 0.5f64..6.0, baseline in 0.0f64..2.0) {
        let pre = 10usize;
        let len = pre + (tau * 12.0) as usize + 50;
        let t_rel: Vec<f64> = (0..len).map(|i| i as f64 - pre as f64).collect();
        let mean_n = t_rel.iter().map(|&t| if t < 0.0 { baseline } else { baseline + amp * (-t / tau).exp() }).collect();
        let tr = AveragedTrace { t_rel, mean_n, n_events: 1, baseline, t_rec: None };
        let t = extract_recovery_time(&tr, RecoveryCriterion::default()).unwrap();
        let exact = tau * (amp / (0.1 * amp)).ln();
        prop_assert!((t - exact).abs() <= 1.0, "{} vs {}", t, exact);
    }
}
