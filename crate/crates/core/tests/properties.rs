use proptest::prelude::*;

use plshoot::classify::{classify, shoot, sweep, ShotKind, Spacing, CLASS_TOL_REL};
use plshoot::model::{check_f_hypotheses, check_k1, default_u_grid, NonlinearitySpec, Parameters, ProblemModel, WeightSpec};
use plshoot::numerics::geomspace;
use plshoot::numerics::quad::{quad, QuadOptions};
use plshoot::shoot::{integrate_ivp, node_energies, IntegratorControls, StopEvent};
use plshoot::transform::{default_transform_grid, qt_change, transform_ab_to_k, GeneralWeightPair, RadialFunction};
use plshoot::variational::{fd_check, solve_variational};

fn admissible_weight(p: f64) -> impl Strategy<Value = WeightSpec> {
    let mut options = vec![
        (0.05..=p).prop_map(|sigma| WeightSpec::Matukuma { sigma }).boxed(),
        (-p..3.0, 0.1..4.0f64).prop_map(|(theta, a_exp)| WeightSpec::PowerLog { theta, a_exp }).boxed(),
        (-p..3.0).prop_map(|theta| WeightSpec::LogGaussian { theta }).boxed(),
        (-p..3.0).prop_map(|theta| WeightSpec::Power { theta }).boxed(),
    ];
    if p >= 2.0 {
        options.push((0.05..8.0f64).prop_map(|sigma| WeightSpec::Stellar { sigma }).boxed());
    }
    proptest::strategy::Union::new(options)
}

fn p_and_weight() -> impl Strategy<Value = (f64, WeightSpec)> {
    (1.1..4.0f64).prop_flat_map(|p| (Just(p), admissible_weight(p)))
}

/// `(p, q₁, q₂)` with `0 < q₂ < p-1 ≤ q₁`.
fn admissible_f(p_max: f64) -> impl Strategy<Value = (f64, f64, f64)> {
    (1.1..=p_max).prop_flat_map(|p| (Just(p), (p - 1.0)..(p + 3.0), (0.05..0.95f64).prop_map(move |x| x * (p - 1.0))))
}

fn model(p: f64, n: f64, weight: WeightSpec, q1: f64, q2: f64) -> ProblemModel {
    ProblemModel::new(Parameters::new(p, n).unwrap(), weight, NonlinearitySpec::PowerDiff { q1, q2 }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k1_holds_for_admissible_weights((p, w) in p_and_weight(), count in 40usize..400, lo in 1e-8..1e-6f64, hi in 1e6..1e8f64) {
        let params = Parameters::new(p, p + 1.0).unwrap();
        let report = check_k1(&w, &params, &geomspace(lo, hi, count)).unwrap();
        prop_assert!(report.passed(), "{w:?}, p={p}: {:?}", report.first_failure());
    }

    #[test]
    fn g_matches_log_derivative((p, w) in p_and_weight(), r in 1e-5..1e5f64) {
        let d = 1e-6;
        let (kp, km) = (w.eval(r * (1.0 + d), p).k, w.eval(r * (1.0 - d), p).k);
        let fd = (kp.ln() - km.ln()) / ((1.0 + d).ln() - (1.0 - d).ln());
        let g = w.g(r, p);
        prop_assert!(((p + fd) - g).abs() <= 1e-5 * g.abs().max(1.0), "{w:?} r={r}: {} vs {g}", p + fd);
        prop_assert!((p + w.eval(r, p).log_slope - g).abs() <= 1e-12 * p.max(g.abs()) + 4.0 * f64::EPSILON * p);
    }

    #[test]
    fn power_diff_primitives((_, q1, q2) in admissible_f(4.0), u in 0.0..3.0f64) {
        let nl = NonlinearitySpec::PowerDiff { q1, q2 };
        prop_assert_eq!(nl.u0(), 1.0);
        let exact = u.powf(q1 + 1.0) / (q1 + 1.0) - u.powf(q2 + 1.0) / (q2 + 1.0);
        let by_quad = quad(|s| nl.f(s), 0.0, u, QuadOptions::tol(1e-14, 1e-13)).unwrap();
        prop_assert!((nl.big_f(u).unwrap() - exact).abs() < 1e-10);
        prop_assert!((nl.big_f(u).unwrap() - by_quad).abs() < 1e-10);
        let f0 = quad(|s| nl.f(s), 1.0, u, QuadOptions::tol(1e-14, 1e-13)).unwrap();
        prop_assert!((nl.big_f0(u).unwrap() - f0).abs() < 1e-10);
    }

    #[test]
    fn f_hypotheses_hold_in_admissible_box((p, q1, q2) in admissible_f(2.0)) {
        let params = Parameters::new(p, p + 1.0).unwrap();
        let r = check_f_hypotheses(&NonlinearitySpec::PowerDiff { q1, q2 }, &params, &default_u_grid(1.0)).unwrap();
        prop_assert!(r.passed(), "p={p} q1={q1} q2={q2}: {:?}", r.first_failure());
    }
}

fn ab_pair() -> impl Strategy<Value = (f64, f64, GeneralWeightPair)> {
    (1.3..3.5f64, 0.7..2.5f64, -0.5..1.0f64, 0.5..3.0f64, 0.2..2.0f64).prop_map(|(p, extra, k, s, sigma)| {
        let big_n = p + extra;
        let l = k - p + 0.5;
        let pair = GeneralWeightPair {
            a: RadialFunction::Power { coef: 1.0, exponent: big_n + k - 1.0 },
            b: RadialFunction::Saturating { coef: 1.0, exponent: big_n + l - 1.0, s, sigma },
        };
        (p, big_n, pair)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_maps_round_trip((p, big_n, pair) in ab_pair(), x in -2.0..2.0f64) {
        let nl = NonlinearitySpec::PowerDiff { q1: p, q2: 0.5 * (p - 1.0) };
        let grid = geomspace(1e-4, 1e4, 801);
        let tm = transform_ab_to_k(&pair, p, big_n, nl, &grid).unwrap();
        let r = 10f64.powf(x);
        let t = tm.forward(r).unwrap();
        prop_assert!((tm.inverse(t).unwrap() / r - 1.0).abs() < 1e-10);
        let back = tm.forward(tm.inverse(r).unwrap()).unwrap();
        prop_assert!((back / r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn transformed_log_slope_identity((p, big_n, pair) in ab_pair(), x in -2.0..2.0f64) {
        let nl = NonlinearitySpec::PowerDiff { q1: p, q2: 0.5 * (p - 1.0) };
        let tm = transform_ab_to_k(&pair, p, big_n, nl, &default_transform_grid()).unwrap();
        let r = 10f64.powf(x);
        let d = 1e-5;
        let (rp, rm) = (r * (1.0 + d), r * (1.0 - d));
        let num = (tm.k_tilde_at(rp).unwrap().0.ln() - tm.k_tilde_at(rm).unwrap().0.ln())
            / (tm.forward(rp).unwrap().ln() - tm.forward(rm).unwrap().ln());
        let rhs = tm.g_tilde_identity(r).unwrap();
        prop_assert!(((p + num) - rhs).abs() <= 1e-8 * rhs.abs().max(1.0), "{} vs {rhs}", p + num);
    }

    #[test]
    fn qt_bound_holds(sigma in 0.2..2.0f64, x in -4.0..4.0f64) {
        let m = model(2.0, 3.0, WeightSpec::Matukuma { sigma }, 3.0, 0.5);
        let q = qt_change(&m).unwrap();
        let r = 10f64.powf(x);
        prop_assert!(q.tq_ratio_at_r(r).unwrap() <= q.tq_bound_at_r(r) * (1.0 + 1e-10));
        let t = q.t_of_r(r).unwrap();
        prop_assert!((q.r_of_t(t).unwrap() / r - 1.0).abs() < 1e-10);
    }
}

fn shot_model() -> impl Strategy<Value = ProblemModel> {
    prop_oneof![
        (0.5..2.0f64, 2.5..4.0f64, 0.2..0.8f64).prop_map(|(s, q1, q2)| model(2.0, 3.0, WeightSpec::Matukuma { sigma: s }, q1, q2)),
        (0.5..1.5f64).prop_map(|s| model(1.5, 3.0, WeightSpec::Matukuma { sigma: s }, 1.5, 0.25)),
        (0.5..3.0f64).prop_map(|s| model(3.0, 4.0, WeightSpec::Matukuma { sigma: s }, 4.0, 1.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shots_obey_energy_and_residual_bounds(m in shot_model(), x in 0.005..1.7f64) {
        let alpha = 10f64.powf(x);
        let c = IntegratorControls::default();
        let (t, o) = shoot(&m, alpha, &c).unwrap();
        let e = node_energies(&m, &t).unwrap();
        let slack = 1e-8 * (1.0 + e[0].abs());
        prop_assert!(e.windows(2).all(|w| w[1] <= w[0] + slack));
        prop_assert!(t.std_residual().unwrap() < 100.0 * c.rel_tol);
        if t.stop_event != StopEvent::ReachedRMax {
            prop_assert!(t.terminal().u <= m.u0());
        }
        match o.kind {
            ShotKind::Crossing | ShotKind::GroundCandidate => {
                let last = e.len() - 1;
                prop_assert!(e[..last].iter().all(|&v| v > 0.0));
            }
            ShotKind::Positive => {
                prop_assert!(o.e_r < 0.0);
                if t.stop_event == StopEvent::DuHitZero {
                    prop_assert!((o.e_r - m.big_f(o.u_r).unwrap()).abs() <= 1e-9 * (1.0 + e[0].abs()));
                }
            }
            ShotKind::Inconclusive => {}
        }
    }

    #[test]
    fn classification_is_stable_under_refinement(m in shot_model(), x in 0.005..1.7f64) {
        let alpha = 10f64.powf(x);
        let c = IntegratorControls::default();
        let o = classify(&m, alpha, &c).unwrap();
        let eps = CLASS_TOL_REL * alpha;
        let margin = match o.kind {
            ShotKind::Crossing => -o.du_r - eps,
            ShotKind::Positive => o.u_r - eps,
            _ => 0.0,
        };
        prop_assume!(margin > 10.0 * eps);
        prop_assert_eq!(classify(&m, alpha, &c.scaled(0.1)).unwrap().kind, o.kind);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sweeps_are_ordered(m in shot_model()) {
        let c = IntegratorControls::default();
        let shots = sweep(&m, 1.01 * m.u0(), 60.0 * m.u0(), 40, Spacing::Geometric, &c).unwrap();
        let first_crossing = shots.iter().position(|o| o.kind == ShotKind::Crossing).unwrap_or(shots.len());
        let last_positive = shots.iter().rposition(|o| o.kind == ShotKind::Positive);
        if let Some(lp) = last_positive {
            prop_assert!(lp < first_crossing && first_crossing - lp <= 2);
        }
        let crossing: Vec<_> = shots.iter().filter(|o| o.kind == ShotKind::Crossing).collect();
        for w in crossing.windows(2) {
            prop_assert!(w[0].r_stop > w[1].r_stop);
            prop_assert!(w[0].crossing_measure.unwrap() < w[1].crossing_measure.unwrap());
        }
    }

    #[test]
    fn variational_solution_matches_differences(m in shot_model(), x in 0.2..1.5f64) {
        let alpha = 10f64.powf(x);
        let c = IntegratorControls::default();
        let t = integrate_ivp(&m, alpha, &c).unwrap();
        prop_assume!(t.r0.is_some());
        let v = solve_variational(&t).unwrap();
        prop_assert!(v.phi.iter().zip(&v.nodes).take_while(|(_, &r)| r < 0.1 * v.r0).all(|(&p, _)| p > 0.0));
        let fd = fd_check(&m, alpha, 1e-6, &c, &c).unwrap();
        prop_assert!(fd.phi_max_rel_err < 1e-4, "{fd:?}");
        prop_assert!(fd.dr0_rel_err < 1e-3, "{fd:?}");
    }
}
