//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use plshoot::classify::{classify, shoot, sweep, transitions, ShotKind, ShotOutcome, Spacing};
use plshoot::model::{check_f_hypotheses, check_k1, default_u_grid, NonlinearitySpec, Parameters, ProblemModel, WeightSpec};
use plshoot::numerics::geomspace;
use plshoot::shoot::{integrate_ivp, node_energies, IntegratorControls, Trajectory};
use plshoot::transform::{default_transform_grid, transform_ab_to_k, GeneralWeightPair, RadialFunction};
use plshoot::uniqueness::{find_ground_state, solve_dirichlet, uniqueness_scan, verify_suite, BracketResult};
use plshoot::variational::fd_check;

// pinned tolerances
const ORDER_MIN: f64 = 2.0;
const RESIDUAL_FACTOR: f64 = 100.0;
const ENERGY_RISE: f64 = 1e-8;
const ENERGY_STOP: f64 = 1e-9;
const BRACKET_WIDTH: f64 = 1e-8;
const PHI_REL: f64 = 1e-4;
const DR0_REL: f64 = 1e-3;
const FD_STEP_REL: f64 = 1e-6;
const DELTA_REL: f64 = 1e-2;
const DIRICHLET_U: f64 = 1e-8;
const TRANSFORM_REL: f64 = 1e-6;
const TRANSFORM_U_FLOOR: f64 = 1e-3;
const ROUND_TRIP: f64 = 1e-10;

type Verdict = Result<String, String>;

fn model(p: f64, n: f64, weight: WeightSpec, q1: f64, q2: f64) -> ProblemModel {
    ProblemModel::new(Parameters::new(p, n).unwrap(), weight, NonlinearitySpec::PowerDiff { q1, q2 }).unwrap()
}

fn canonical() -> ProblemModel {
    model(2.0, 3.0, WeightSpec::Matukuma { sigma: 2.0 }, 3.0, 0.5)
}

/// Models with `p ∈ {1.5, 2, 3}` and a valid `power_diff`.
fn p_family() -> Vec<(ProblemModel, f64)> {
    vec![
        (model(1.5, 3.0, WeightSpec::Matukuma { sigma: 1.0 }, 1.5, 0.25), 3.0),
        (canonical(), 6.0),
        (model(3.0, 4.0, WeightSpec::Matukuma { sigma: 2.0 }, 4.0, 1.0), 3.0),
    ]
}

fn controls() -> IntegratorControls {
    IntegratorControls::default()
}

fn canonical_bracket() -> Result<BracketResult, String> {
    let m = canonical();
    let shots = sweep(&m, 1.01, 50.0, 64, Spacing::Geometric, &controls()).map_err(|e| e.to_string())?;
    let t = transitions(&shots);
    let (i, j) = *t.first().ok_or("no transition in the 64-shot sweep")?;
    find_ground_state(&m, shots[i].alpha, shots[j].alpha, BRACKET_WIDTH, &controls()).map_err(|e| e.to_string())
}

fn hypotheses() -> Verdict {
    let grid = geomspace(1e-6, 1e6, 241);
    let mut bad = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let params = Parameters::new(p, p + 1.5).unwrap();
        let mut passing = vec![];
        for s in [0.25, 0.5 * p, p] {
            passing.push(WeightSpec::Matukuma { sigma: s });
        }
        // g → p - 2 at infinity
        if p >= 2.0 {
            for s in [0.1, 1.0, 2.0, 7.0] {
                passing.push(WeightSpec::Stellar { sigma: s });
            }
        }
        for theta in [-p, -1.0, 0.0, 2.0] {
            for a_exp in [0.5, 1.0, 3.0] {
                passing.push(WeightSpec::PowerLog { theta, a_exp });
            }
            passing.push(WeightSpec::LogGaussian { theta });
        }
        for w in &passing {
            let r = check_k1(w, &params, &grid).map_err(|e| e.to_string())?;
            if !r.passed() {
                bad.push(format!("{w:?} at p={p} rejected: {:?}", r.first_failure()));
            }
        }
        let r = check_k1(&WeightSpec::Matukuma { sigma: p + 1.0 }, &params, &grid).map_err(|e| e.to_string())?;
        match r.first_failure() {
            Some(c) if c.witness.is_some() => {}
            _ => bad.push(format!("matukuma sigma={} at p={p} not rejected with a witness", p + 1.0)),
        }
        // near u₀, (p-1)f ≤ f'(u-u₀) forces p ≤ 2 whenever f'(u₀) > 0
        if p > 2.0 {
            continue;
        }
        let ugrid = default_u_grid(1.0);
        let q = p - 1.0;
        let cases = [
            ((q + 2.0, 0.5 * q), true),
            ((q, 0.5 * q), true),
            ((q + 0.3, 0.9 * q), true),
            ((q + 2.0, q), false),
            ((q + 2.0, 1.5 * q), false),
            ((0.7 * q, 0.5 * q), false),
        ];
        for ((q1, q2), want) in cases {
            let r = check_f_hypotheses(&NonlinearitySpec::PowerDiff { q1, q2 }, &params, &ugrid).map_err(|e| e.to_string())?;
            if r.passed() != want {
                bad.push(format!("power_diff({q1}, {q2}) at p={p}: expected pass={want}"));
            }
            if !want && r.first_failure().and_then(|c| c.witness.as_ref()).is_none() {
                bad.push(format!("power_diff({q1}, {q2}) at p={p}: failure without witness"));
            }
        }
    }
    if bad.is_empty() {
        Ok("weights at p = 1.5, 2, 3 and nonlinearities at p = 1.5, 2 as expected".into())
    } else {
        Err(bad.join("; "))
    }
}

fn self_convergence() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (m, alpha) in p_family() {
        let reference = integrate_ivp(&m, alpha, &controls().with_tol(1e-13)).map_err(|e| e.to_string())?;
        let r_star = 0.5 * reference.r0.ok_or("reference never reaches u0")?;
        let u_ref = reference.u_at(r_star).map_err(|e| e.to_string())?;
        let mut pts = Vec::new();
        for tol in [1e-6, 1e-8, 1e-10] {
            let t = integrate_ivp(&m, alpha, &controls().with_tol(tol)).map_err(|e| e.to_string())?;
            let err = (t.u_at(r_star).map_err(|e| e.to_string())? - u_ref).abs();
            pts.push((t.steps as f64, err));
        }
        for w in pts.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[1].0 / w[0].0).ln();
            ok &= order >= ORDER_MIN;
            notes.push(format!("p={} order {order:.2}", m.p()));
        }
    }
    let msg = notes.join(", ");
    if ok { Ok(msg) } else { Err(msg) }
}

fn suite_trajectories() -> Result<Vec<Trajectory>, String> {
    let c = controls();
    let mut out = Vec::new();
    let m = canonical();
    for a in geomspace(1.01, 50.0, 64) {
        out.push(integrate_ivp(&m, a, &c).map_err(|e| e.to_string())?);
    }
    let b = canonical_bracket()?;
    for a in [b.alpha_lo, b.alpha_hi] {
        out.push(integrate_ivp(&m, a, &c).map_err(|e| e.to_string())?);
    }
    for (pm, a) in p_family() {
        for tol in [1e-6, 1e-8, 1e-10] {
            out.push(integrate_ivp(&pm, a, &c.with_tol(tol)).map_err(|e| e.to_string())?);
        }
    }
    for r in [2.0, 0.5] {
        out.push(solve_dirichlet(&m, r, 10.0, 1e-10, &c).map_err(|e| e.to_string())?.trajectory);
    }
    Ok(out)
}

fn residual() -> Verdict {
    let trajs = suite_trajectories()?;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for t in &trajs {
        let r = t.std_residual().map_err(|e| e.to_string())?;
        let ratio = r / t.rel_tol;
        worst = worst.max(ratio);
        if ratio >= RESIDUAL_FACTOR {
            bad.push(format!("alpha={} tol={:e}: residual {r:e}", t.alpha, t.rel_tol));
        }
    }
    if bad.is_empty() {
        Ok(format!("{} trajectories, worst residual {worst:.3} x rel_tol", trajs.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn energy() -> Verdict {
    let m = canonical();
    let c = controls();
    let mut bad = Vec::new();
    let (mut np, mut nn) = (0, 0);
    for a in geomspace(1.01, 50.0, 64) {
        let (t, o) = shoot(&m, a, &c).map_err(|e| e.to_string())?;
        let e = node_energies(&m, &t).map_err(|e| e.to_string())?;
        let slack = ENERGY_RISE * (1.0 + e[0].abs());
        if let Some(i) = (1..e.len()).find(|&i| e[i] - e[i - 1] > slack) {
            bad.push(format!("alpha={a}: E rises at r={:e}", t.nodes[i]));
        }
        match o.kind {
            ShotKind::Crossing => {
                nn += 1;
                if !(o.e_r > 0.0) {
                    bad.push(format!("alpha={a}: crossing with E(R) = {:e}", o.e_r));
                }
            }
            ShotKind::Positive => {
                np += 1;
                let f = m.big_f(o.u_r).map_err(|e| e.to_string())?;
                if !(o.e_r < 0.0 && (o.e_r - f).abs() <= ENERGY_STOP * (1.0 + e[0].abs())) {
                    bad.push(format!("alpha={a}: positive with E(R) = {:e}, F(u(R)) = {f:e}", o.e_r));
                }
            }
            k => bad.push(format!("alpha={a}: unclassified ({})", k.as_str())),
        }
    }
    if bad.is_empty() {
        Ok(format!("64 shots ({np} positive, {nn} crossing), no energy increase"))
    } else {
        Err(bad.join("; "))
    }
}

fn bracketing() -> Verdict {
    let m = canonical();
    let c = controls();
    let b = canonical_bracket()?;
    let lo = classify(&m, b.alpha_lo, &c).map_err(|e| e.to_string())?.kind;
    let hi = classify(&m, b.alpha_hi, &c).map_err(|e| e.to_string())?.kind;
    let scan = uniqueness_scan(&m, &b, 256, &c).map_err(|e| e.to_string())?;
    let ok = b.width < BRACKET_WIDTH
        && b.unresolved == 0
        && lo == ShotKind::Positive
        && hi == ShotKind::Crossing
        && scan.transitions.len() == 1;
    let msg = format!(
        "alpha in ({:.12}, {:.12}), width {:.2e}, {} iterations, {} transition(s) in 256 shots up to {:.1}",
        b.alpha_lo,
        b.alpha_hi,
        b.width,
        b.iterations,
        scan.transitions.len(),
        scan.alphas.last().unwrap()
    );
    if ok { Ok(msg) } else { Err(format!("{msg}; ends {lo:?}/{hi:?}, unresolved {}", b.unresolved)) }
}

fn variational() -> Verdict {
    let c = controls();
    let mut notes = Vec::new();
    let mut ok = true;
    for (m, alpha) in p_family() {
        let r = fd_check(&m, alpha, FD_STEP_REL, &c, &c).map_err(|e| e.to_string())?;
        ok &= r.phi_max_rel_err < PHI_REL && r.dr0_rel_err < DR0_REL;
        notes.push(format!("p={}: phi {:.1e}, dr0 {:.1e}", m.p(), r.phi_max_rel_err, r.dr0_rel_err));
    }
    let msg = notes.join(", ");
    if ok { Ok(msg) } else { Err(msg) }
}

fn separation() -> Verdict {
    let m = canonical();
    let b = canonical_bracket()?;
    let rep = verify_suite(&m, &b, DELTA_REL, 16, &controls()).map_err(|e| e.to_string())?;
    let failed: Vec<String> = rep
        .checks
        .iter()
        .filter(|c| c.required && !(c.pass && c.witnesses.is_empty()))
        .map(|c| format!("{} ({} witnesses)", c.name, c.witnesses.len()))
        .collect();
    let names: Vec<&str> = rep.checks.iter().filter(|c| c.required).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(format!("delta_rel = {DELTA_REL:e}: {} with zero witnesses", names.join(", ")))
    } else {
        Err(failed.join("; "))
    }
}

fn dirichlet() -> Verdict {
    let m = canonical();
    let c = controls();
    let (r1, r2) = (2.0, 0.5);
    let s1 = solve_dirichlet(&m, r1, 10.0, 1e-10, &c).map_err(|e| e.to_string())?;
    let s2 = solve_dirichlet(&m, r2, 10.0, 1e-10, &c).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    if !(s1.alpha < s2.alpha) {
        bad.push(format!("alpha(R1) = {} not below alpha(R2) = {}", s1.alpha, s2.alpha));
    }
    for (s, r) in [(&s1, r1), (&s2, r2)] {
        let t = &s.trajectory;
        let end = t.terminal();
        let u = (end.u + end.du * (r - t.r_stop())).abs();
        if !(u < DIRICHLET_U) {
            bad.push(format!("u(R = {r}) = {u:e}"));
        }
        if !t.states[..t.states.len() - 1].iter().all(|st| st.u > 0.0) {
            bad.push(format!("u not positive inside R = {r}"));
        }
    }
    if bad.is_empty() {
        Ok(format!("alpha({r1}) = {:.10} < alpha({r2}) = {:.10}", s1.alpha, s2.alpha))
    } else {
        Err(bad.join("; "))
    }
}

fn transform_round_trip() -> Verdict {
    let c = controls();
    let direct_model = canonical();
    let alpha = 6.0;
    let direct = integrate_ivp(&direct_model, alpha, &c).map_err(|e| e.to_string())?;
    let pair = GeneralWeightPair {
        a: RadialFunction::Power { coef: 1.0, exponent: 2.0 },
        b: RadialFunction::Weighted { exponent: 2.0, weight: WeightSpec::Matukuma { sigma: 2.0 } },
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for big_n in [3.0, 4.0] {
        let tm = transform_ab_to_k(&pair, 2.0, big_n, direct_model.nonlinearity.clone(), &default_transform_grid())
            .map_err(|e| e.to_string())?;
        let tt = integrate_ivp(&tm.model, alpha, &c).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (&r, st) in direct.nodes.iter().zip(&direct.states) {
            if r <= 0.0 || st.u <= TRANSFORM_U_FLOOR {
                continue;
            }
            let (u, _) = tm.pull_back(&tt, r).map_err(|e| e.to_string())?;
            worst = worst.max(((u - st.u) / st.u).abs());
        }
        let mut trip: f64 = 0.0;
        for t in geomspace(1e-2, 1e2, 101) {
            let r = tm.inverse(t).map_err(|e| e.to_string())?;
            trip = trip.max((tm.forward(r).map_err(|e| e.to_string())? / t - 1.0).abs());
            let back = tm.inverse(tm.forward(t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            trip = trip.max((back / t - 1.0).abs());
        }
        ok &= worst < TRANSFORM_REL && trip < ROUND_TRIP;
        notes.push(format!("N={big_n}: profile {worst:.1e}, maps {trip:.1e}"));
    }
    let msg = notes.join(", ");
    if ok { Ok(msg) } else { Err(msg) }
}

fn suite_bytes() -> Result<String, String> {
    let m = canonical();
    let c = controls();
    let shots: Vec<ShotOutcome> = sweep(&m, 1.01, 50.0, 64, Spacing::Geometric, &c).map_err(|e| e.to_string())?;
    let b = canonical_bracket()?;
    let rep = verify_suite(&m, &b, DELTA_REL, 16, &c).map_err(|e| e.to_string())?;
    let scan = uniqueness_scan(&m, &b, 256, &c).map_err(|e| e.to_string())?;
    let d = solve_dirichlet(&m, 2.0, 10.0, 1e-10, &c).map_err(|e| e.to_string())?;
    let fd: Vec<_> = p_family()
        .iter()
        .map(|(pm, a)| fd_check(pm, *a, FD_STEP_REL, &c, &c).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    serde_json::to_string(&(shots, b, rep, scan, d.alpha, d.trajectory.nodes, fd)).map_err(|e| e.to_string())
}

fn determinism() -> Verdict {
    let mut runs = Vec::new();
    for threads in [1, 4, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        runs.push(pool.install(suite_bytes)?);
    }
    if runs.windows(2).all(|w| w[0] == w[1]) {
        Ok(format!("{} bytes identical across 3 runs (1, 4, 4 threads)", runs[0].len()))
    } else {
        Err("outputs differ between runs".into())
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("hypothesis certification", hypotheses),
        ("integrator self-convergence", self_convergence),
        ("integral-form residual", residual),
        ("energy monotonicity", energy),
        ("ground-state bracketing", bracketing),
        ("variational correctness", variational),
        ("monotone separation suite", separation),
        ("dirichlet inversion", dirichlet),
        ("transform round-trip", transform_round_trip),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({secs:.2}s) {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.2}s) {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 10 passed in {:.1}s", 10 - failures, start.elapsed().as_secs_f64());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
