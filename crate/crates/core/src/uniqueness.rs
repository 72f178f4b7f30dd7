//! Ground-state bracketing, the Dirichlet problem on a ball, and the
//! separation checks around the ground state.

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{classify, classify_many, shoot, sweep, transitions, ShotKind, ShotOutcome, Spacing};
use crate::error::{Error, Result, Witness};
use crate::model::{plateau_slack, ProblemModel};
use crate::numerics::geomspace;
use crate::shoot::{capital_i_with, invert_profile, IntegratorControls, ReferenceFbar, Trajectory};
use crate::variational::{g_profile, kwong_endpoint, kwong_violations};

/// Final bracket `α_lo ∈ 𝒫`, `α_hi ∈ 𝒩` around the ground-state height.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketResult {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub width: f64,
    pub iterations: usize,
    /// Shot at the midpoint of the final bracket.
    pub best_candidate: ShotOutcome,
    /// Midpoints that stayed inconclusive after tightening and were put on the positive side.
    pub unresolved: usize,
}

impl BracketResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha_lo + self.alpha_hi)
    }
}

// kind of a midpoint; inconclusive shots are repeated with 10x tighter tolerances
fn resolve(model: &ProblemModel, alpha: f64, controls: &IntegratorControls) -> (ShotKind, bool) {
    let kind = classify(model, alpha, controls).map(|o| o.kind).unwrap_or(ShotKind::Inconclusive);
    match kind {
        ShotKind::Positive | ShotKind::Crossing => (kind, false),
        _ => match classify(model, alpha, &controls.scaled(0.1)).map(|o| o.kind) {
            Ok(ShotKind::Crossing) => (ShotKind::Crossing, false),
            Ok(ShotKind::Positive) => (ShotKind::Positive, false),
            _ => (ShotKind::Positive, true),
        },
    }
}

/// Bisects `[alpha_lo, alpha_hi]` down to width `< tol_alpha`, keeping a positive
/// lower end and a crossing upper end.
pub fn find_ground_state(
    model: &ProblemModel,
    alpha_lo: f64,
    alpha_hi: f64,
    tol_alpha: f64,
    controls: &IntegratorControls,
) -> Result<BracketResult> {
    if !(tol_alpha > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol_alpha}")));
    }
    if !(alpha_lo < alpha_hi) {
        return Err(Error::precondition("bracket must satisfy alpha_lo < alpha_hi", Some(Witness::new(alpha_lo, "alpha_lo"))));
    }
    let lo_kind = classify(model, alpha_lo, controls)?.kind;
    if lo_kind != ShotKind::Positive {
        return Err(Error::precondition(
            "the lower end of the bracket must be a positive shot",
            Some(Witness::new(alpha_lo, format!("classified {}", lo_kind.as_str()))),
        ));
    }
    let hi_kind = classify(model, alpha_hi, controls)?.kind;
    if hi_kind != ShotKind::Crossing {
        return Err(Error::precondition(
            "the upper end of the bracket must be a crossing shot",
            Some(Witness::new(alpha_hi, format!("classified {}", hi_kind.as_str()))),
        ));
    }
    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    let mut iterations = 0;
    let mut unresolved = 0;
    while hi - lo >= tol_alpha {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (kind, forced) = resolve(model, mid, controls);
        unresolved += forced as usize;
        match kind {
            ShotKind::Crossing => hi = mid,
            _ => lo = mid,
        }
        iterations += 1;
    }
    let mid = 0.5 * (lo + hi);
    let best_candidate = classify(model, mid, controls)?;
    Ok(BracketResult { alpha_lo: lo, alpha_hi: hi, width: hi - lo, iterations, best_candidate, unresolved })
}

/// Sweeps `count` shots over `[lo, hi]` and bisects the first positive-to-crossing transition.
pub fn ground_state_from_sweep(
    model: &ProblemModel,
    lo: f64,
    hi: f64,
    count: usize,
    tol_alpha: f64,
    controls: &IntegratorControls,
) -> Result<BracketResult> {
    let shots = sweep(model, lo, hi, count, Spacing::Geometric, controls)?;
    let (i, j) = *transitions(&shots)
        .first()
        .ok_or_else(|| Error::domain(format!("no positive-to-crossing transition among {count} shots in [{lo}, {hi}]")))?;
    find_ground_state(model, shots[i].alpha, shots[j].alpha, tol_alpha, controls)
}

/// A 256-shot scan of `[u₀(1+10⁻³), 100·ᾱ]` looking for further transitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessScan {
    pub alphas: Vec<f64>,
    pub kinds: Vec<ShotKind>,
    pub transitions: Vec<(f64, f64)>,
    /// Crossing shots where `R(α)` failed to decrease.
    pub r_monotonicity_witnesses: Vec<Witness>,
}

pub fn uniqueness_scan(
    model: &ProblemModel,
    bracket: &BracketResult,
    count: usize,
    controls: &IntegratorControls,
) -> Result<UniquenessScan> {
    let lo = model.u0() * (1.0 + 1e-3);
    let hi = 100.0 * bracket.alpha_hi;
    let shots = sweep(model, lo, hi, count, Spacing::Geometric, controls)?;
    let trans = transitions(&shots).into_iter().map(|(i, j)| (shots[i].alpha, shots[j].alpha)).collect();
    let crossing: Vec<&ShotOutcome> = shots.iter().filter(|o| o.kind == ShotKind::Crossing).collect();
    let r_monotonicity_witnesses = crossing
        .windows(2)
        .filter(|w| !(w[1].r_stop < w[0].r_stop))
        .map(|w| Witness::new(w[1].alpha, format!("R = {:e} after {:e}", w[1].r_stop, w[0].r_stop)))
        .collect();
    Ok(UniquenessScan {
        alphas: shots.iter().map(|o| o.alpha).collect(),
        kinds: shots.iter().map(|o| o.kind).collect(),
        transitions: trans,
        r_monotonicity_witnesses,
    })
}

/// Solution of the Dirichlet problem on the ball of radius `R`.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub alpha: f64,
    pub radius: f64,
    pub iterations: usize,
    pub trajectory: Trajectory,
}

const DIRICHLET_MAX_ITER: usize = 400;

/// Finds `α` with `R(α) = r_target` by bisection on the decreasing map `α ↦ R(α)`.
pub fn solve_dirichlet(
    model: &ProblemModel,
    r_target: f64,
    alpha_seed: f64,
    tol: f64,
    controls: &IntegratorControls,
) -> Result<DirichletSolution> {
    if !(r_target > 0.0 && tol > 0.0) {
        return Err(Error::Config("radius and tol must be positive".into()));
    }
    let (traj, seed) = shoot(model, alpha_seed, controls)?;
    if seed.kind != ShotKind::Crossing {
        return Err(Error::precondition(
            "the seed height must give a crossing shot",
            Some(Witness::new(alpha_seed, format!("classified {}", seed.kind.as_str()))),
        ));
    }
    if (seed.r_stop - r_target).abs() < tol {
        return Ok(DirichletSolution { alpha: alpha_seed, radius: seed.r_stop, iterations: 0, trajectory: traj });
    }
    // R(α) > r_target on the lower end (or no crossing at all), R(α) < r_target on the upper end
    let (mut lo, mut hi);
    let mut iterations = 0;
    if seed.r_stop > r_target {
        lo = alpha_seed;
        hi = alpha_seed;
        loop {
            hi *= 2.0;
            iterations += 1;
            let o = classify(model, hi, controls)?;
            if o.kind == ShotKind::Crossing && o.r_stop < r_target {
                break;
            }
            lo = hi;
            if iterations >= 200 || !hi.is_finite() {
                return Err(Error::OutOfRange(format!("no height found with R(alpha) below {r_target}")));
            }
        }
    } else {
        hi = alpha_seed;
        lo = model.u0();
    }
    let mut lo_crossing = lo > model.u0();
    while iterations < DIRICHLET_MAX_ITER {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (traj, o) = match shoot(model, mid, controls) {
            Ok(x) => x,
            Err(_) => {
                lo = mid;
                continue;
            }
        };
        if o.kind != ShotKind::Crossing {
            lo = mid;
            continue;
        }
        if (o.r_stop - r_target).abs() < tol {
            return Ok(DirichletSolution { alpha: mid, radius: o.r_stop, iterations, trajectory: traj });
        }
        if o.r_stop > r_target {
            lo = mid;
            lo_crossing = true;
        } else {
            hi = mid;
        }
    }
    if !lo_crossing {
        return Err(Error::OutOfRange(format!(
            "radius {r_target} exceeds every R(alpha) reached by crossing shots (largest near alpha = {hi})"
        )));
    }
    Err(Error::NoConvergence(format!("R(alpha) did not reach {r_target} within {tol} in [{lo}, {hi}]")))
}

/// One entry of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
    pub delta_tested: f64,
    /// `false` for checks reported for information only.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub delta_rel: f64,
    pub samples: usize,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| c.required && !c.pass)
    }
}

fn check(name: &str, witnesses: Vec<Witness>, delta: f64, required: bool) -> CheckReport {
    CheckReport { name: name.into(), pass: witnesses.is_empty(), witnesses, delta_tested: delta, required }
}

fn s_grid(u0: f64) -> Vec<f64> {
    geomspace(1e-3 * u0, 0.99 * u0, 24)
}

// t(s, α) < t(s, ᾱ) and t|u'| > t̄|ū'| on the s-grid, plus the s = 0 comparison of R
fn separation_witnesses(model: &ProblemModel, reference: &Trajectory, shots: &[Trajectory]) -> Result<Vec<Witness>> {
    let rinv = invert_profile(reference)?;
    let r_ref = reference.r_stop();
    let slope_ref = r_ref * reference.terminal().du.abs();
    let mut out = Vec::new();
    for traj in shots {
        let inv = invert_profile(traj)?;
        for &s in &s_grid(model.u0()) {
            let (t, tr) = (inv.t(s), rinv.t(s));
            if !(t < tr) {
                out.push(Witness::new(s, format!("alpha = {}: t = {t:e} not below {tr:e}", traj.alpha)));
                continue;
            }
            let w = t * traj.state_at(t)?.du.abs();
            let wr = tr * reference.state_at(tr)?.du.abs();
            if !(w > wr) {
                out.push(Witness::new(s, format!("alpha = {}: t|u'| = {w:e} not above {wr:e}", traj.alpha)));
            }
        }
        let r = traj.r_stop();
        let slope = r * traj.terminal().du.abs();
        if !(r < r_ref && slope > slope_ref) {
            out.push(Witness::new(0.0, format!("alpha = {}: R = {r:e}, R|u'| = {slope:e}", traj.alpha)));
        }
    }
    Ok(out)
}

fn shots(model: &ProblemModel, alphas: &[f64], controls: &IntegratorControls) -> Result<Vec<(Trajectory, ShotOutcome)>> {
    alphas.par_iter().map(|&a| shoot(model, a, controls)).collect()
}

/// Runs the separation checks on `samples` heights on each side of the bracket,
/// within `delta_rel·ᾱ`.
pub fn verify_suite(
    model: &ProblemModel,
    bracket: &BracketResult,
    delta_rel: f64,
    samples: usize,
    controls: &IntegratorControls,
) -> Result<VerifyReport> {
    if !(delta_rel > 0.0 && delta_rel < 1.0) || samples == 0 {
        return Err(Error::Config("verify needs 0 < delta_rel < 1 and samples ≥ 1".into()));
    }
    let (lo, hi) = (bracket.alpha_lo, bracket.alpha_hi);
    let step = delta_rel * hi / samples as f64;
    let above: Vec<f64> = (1..=samples).map(|k| hi + step * k as f64).collect();
    let below: Vec<f64> = (1..=samples).rev().map(|k| lo - step * k as f64).filter(|&a| a > model.u0()).collect();
    let mut all = below.clone();
    all.push(lo);
    all.push(hi);
    all.extend(&above);
    let shot_list = shots(model, &all, controls)?;
    let nb = below.len();
    let (ref_traj, ref_out) = &shot_list[nb + 1];
    let mut checks = Vec::new();

    // side classification
    let mut w = Vec::new();
    for (i, (_, o)) in shot_list.iter().enumerate() {
        let want = if i <= nb { ShotKind::Positive } else { ShotKind::Crossing };
        if o.kind != want {
            w.push(Witness::new(o.alpha, format!("classified {}, expected {}", o.kind.as_str(), want.as_str())));
        }
    }
    checks.push(check("sides", w, delta_rel, true));

    // (a)
    let upper: Vec<Trajectory> = shot_list[nb + 2..].iter().map(|(t, _)| t.clone()).collect();
    checks.push(check("a_separation", separation_witnesses(model, ref_traj, &upper)?, delta_rel, true));

    // (b)
    let mut w = Vec::new();
    let mut prev: Option<(f64, f64, f64)> = None;
    for (traj, o) in &shot_list {
        let Some(r0) = o.r0 else {
            w.push(Witness::new(o.alpha, "no r0"));
            continue;
        };
        let slope = r0 * traj.state_at(r0)?.du.abs();
        if let Some((a, pr0, ps)) = prev {
            if r0 > pr0 {
                w.push(Witness::new(o.alpha, format!("r0 = {r0:e} above {pr0:e} at alpha = {a}")));
            }
            if !(slope - ps > plateau_slack(ps)) {
                w.push(Witness::new(o.alpha, format!("r0|u'(r0)| = {slope:e} not above {ps:e}")));
            }
        }
        prev = Some((o.alpha, r0, slope));
    }
    checks.push(check("b_r0_monotone", w, delta_rel, true));

    // (c)
    let crossing: Vec<&ShotOutcome> = shot_list[nb + 1..].iter().map(|(_, o)| o).collect();
    let w = crossing
        .windows(2)
        .filter_map(|p| match (p[0].crossing_measure, p[1].crossing_measure) {
            (Some(e0), Some(e1)) if e1 > e0 => None,
            (e0, e1) => Some(Witness::new(p[1].alpha, format!("crossing measure {e1:?} after {e0:?}"))),
        })
        .collect();
    checks.push(check("c_crossing_measure", w, delta_rel, true));

    // (d)
    let mut w = Vec::new();
    for (traj, _) in &shot_list[nb..nb + 2] {
        w.extend(kwong_violations(traj)?);
        let end = kwong_endpoint(model, traj)?;
        if !(end < 0.0) {
            w.push(Witness::new(traj.r0.unwrap_or(f64::NAN), format!("alpha = {}: endpoint value {end:e}", traj.alpha)));
        }
    }
    checks.push(check("d_kwong", w, delta_rel, true));

    // (e)
    let fbar = ReferenceFbar::new(model, ref_traj)?;
    let mut w = Vec::new();
    for (traj, o) in shot_list[nb..].iter() {
        let s_min = invert_profile(traj)?.s_min().max(fbar.inverse().s_min());
        for &s in s_grid(model.u0()).iter().filter(|&&s| s >= s_min) {
            let iv = capital_i_with(&fbar, traj, s)?;
            if !(iv.i > 0.0) {
                w.push(Witness::new(s, format!("alpha = {}: I = {:e}", o.alpha, iv.i)));
            }
        }
    }
    checks.push(check("e_i_positive", w, delta_rel, true));

    // G on (u₀, ᾱ)
    let gp = g_profile(model, ref_traj, 64)?;
    let mut w = gp.witnesses.clone();
    let target = -(model.n() - model.p());
    if (gp.g[0] - target).abs() > 1e-4 * target.abs().max(1.0) {
        w.push(Witness::new(gp.s[0], format!("G(u0+) = {:e}, expected {target}", gp.g[0])));
    }
    checks.push(check("g_increasing", w, delta_rel, true));

    // far crossing pairs, for information
    let far_alphas = geomspace(hi * (1.0 + 2.0 * delta_rel), 10.0 * hi, samples.max(2));
    let far: Vec<Trajectory> = shots(model, &far_alphas, controls)?
        .into_iter()
        .filter(|(_, o)| o.kind == ShotKind::Crossing)
        .map(|(t, _)| t)
        .collect();
    checks.push(check("a_separation_far", separation_witnesses(model, ref_traj, &far)?, 10.0, false));

    let _ = ref_out;
    let pass = checks.iter().all(|c| c.pass || !c.required);
    Ok(VerifyReport { alpha_lo: lo, alpha_hi: hi, delta_rel, samples, checks, pass })
}

/// Classifies heights and checks `R(α)` is strictly decreasing over the crossing ones.
pub fn dirichlet_monotone(model: &ProblemModel, alphas: &[f64], controls: &IntegratorControls) -> Vec<Witness> {
    let shots = classify_many(model, alphas, controls);
    let crossing: Vec<&ShotOutcome> = shots.iter().filter(|o| o.kind == ShotKind::Crossing).collect();
    crossing
        .windows(2)
        .filter(|w| !(w[1].r_stop < w[0].r_stop))
        .map(|w| Witness::new(w[1].alpha, format!("R = {:e} after {:e}", w[1].r_stop, w[0].r_stop)))
        .collect()
}
