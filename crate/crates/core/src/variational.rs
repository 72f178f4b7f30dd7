//! Sensitivity of a shot to its height: `φ = ∂u/∂α` and `Λ = ∂m/∂α` on
//! `[0, r₀]`, the α-derivatives at `r₀`, and the auxiliary function `G`.
//!
//! Near the origin the linear system
//! `Λ(r) = -∫₀^r b f'(u) φ`, `φ(r) = 1 + ∫₀^r Λ / ((p-1) a |u'|^{p-2})`
//! is solved by successive substitution on the startup panels of the base
//! shot; beyond them it is integrated together with the base equation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result, Witness};
use crate::model::{plateau_slack, ProblemModel, RadialOperator};
use crate::numerics::interp::Hermite;
use crate::numerics::ode::{integrate, DenseSolution, Direction, Event, StepControl, Termination};
use crate::numerics::roots::brent;
use crate::numerics::{geomspace, phi_p_inv};
use crate::shoot::{
    eval_log_curve, integrate_ivp, invert_profile, log_curve, merged_samples, origin_startup, Clock,
    IntegratorControls, InverseProfile, StartupProfile, Trajectory,
};

const MAX_PICARD: usize = 200;
const MAX_SHRINKS: usize = 10;

/// `φ`, `φ'`, `Θ = Λ/q` and `Λ` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarPoint {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
    pub theta: f64,
    pub lambda: f64,
}

struct VarStartup {
    base: StartupProfile,
    // log(1 - φ) and log(-Λ) against log r
    drop: Option<Hermite>,
    flux: Option<Hermite>,
    phi1: f64,
    lambda1: f64,
}

/// Solution of the variational problem along one shot, up to `r₀`.
pub struct VariationalState {
    pub alpha: f64,
    pub r0: f64,
    pub nodes: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Slope `u'(r₀)` of the base shot.
    pub du_r0: f64,
    startup: VarStartup,
    dense: DenseSolution<5>,
    seg_r: Vec<f64>,
    clock: Clock,
    op: Arc<dyn RadialOperator>,
}

impl std::fmt::Debug for VariationalState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariationalState")
            .field("alpha", &self.alpha)
            .field("r0", &self.r0)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

// 1/((p-1) a |u'|^{p-2}) written through m = a φ_p(u')
fn flux_to_slope(op: &dyn RadialOperator, r: f64, m: f64) -> f64 {
    let p = op.p();
    let a = op.a(r);
    let du = (m / a).abs().powf(1.0 / (p - 1.0));
    1.0 / ((p - 1.0) * a * du.powf(p - 2.0))
}

// q = a (b/a)^{1/p'}
fn q_of(op: &dyn RadialOperator, r: f64) -> f64 {
    let p = op.p();
    let a = op.a(r);
    a * (op.b(r) / a).powf((p - 1.0) / p)
}

fn df_clamped(op: &dyn RadialOperator, u: f64) -> f64 {
    let nl = op.nonlinearity();
    nl.df(u.max(nl.u0())).unwrap_or(0.0)
}

fn variational_startup(op: &dyn RadialOperator, base: StartupProfile) -> Result<VarStartup> {
    let panels = &base.panels;
    let nodes = panels.nodes();
    let b: Vec<f64> = nodes.iter().map(|&r| op.b(r)).collect();
    let fp: Vec<f64> = base.u_nodes.iter().map(|&u| df_clamped(op, u)).collect();
    let w: Vec<f64> = nodes.iter().zip(&base.m_nodes).map(|(&r, &m)| flux_to_slope(op, r, m)).collect();
    let mut phi = vec![1.0; nodes.len()];
    let mut iterations = 0;
    let (mut lam_cum, mut drop_cum);
    loop {
        iterations += 1;
        let src: Vec<f64> = b.iter().zip(&fp).zip(&phi).map(|((b, f), ph)| b * f * ph).collect();
        lam_cum = panels.cumulative(&src);
        let g: Vec<f64> = lam_cum.at_nodes.iter().zip(&w).map(|(l, w)| l * w).collect();
        drop_cum = panels.cumulative(&g);
        let new_phi: Vec<f64> = drop_cum.at_nodes.iter().map(|d| 1.0 - d).collect();
        let change = new_phi.iter().zip(&phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        phi = new_phi;
        if !change.is_finite() {
            return Err(Error::NoConvergence("variational startup iteration diverged".into()));
        }
        if change <= 4.0 * f64::EPSILON {
            break;
        }
        if iterations >= MAX_PICARD {
            return Err(Error::NoConvergence(format!(
                "variational startup iteration stalled at r1={:e} (last change {change:e})",
                base.r1
            )));
        }
    }
    let (rs, drops) = merged_samples(panels, &drop_cum);
    let (_, fluxes) = merged_samples(panels, &lam_cum);
    Ok(VarStartup {
        drop: log_curve(&rs, &drops),
        flux: log_curve(&rs, &fluxes),
        phi1: 1.0 - drop_cum.total(),
        lambda1: -lam_cum.total(),
        base,
    })
}

/// Solves the variational problem along `traj` up to its `r₀`.
pub fn solve_variational(traj: &Trajectory) -> Result<VariationalState> {
    if traj.r0.is_none() {
        return Err(Error::Domain {
            message: "the shot never reaches u0, so r0 and the variational problem on [0, r0] are undefined".into(),
            witness: Some(Witness::new(traj.alpha, "alpha")),
        });
    }
    let op = traj.operator_arc();
    let opr: &dyn RadialOperator = op.as_ref();
    let controls = *traj.controls();
    let alpha = traj.alpha;

    let mut base = traj.startup().clone();
    let mut startup = None;
    for _ in 0..=MAX_SHRINKS {
        match variational_startup(opr, base.clone()) {
            Ok(s) => {
                startup = Some(s);
                break;
            }
            Err(Error::NoConvergence(_)) => base = origin_startup(opr, alpha, 0.1 * base.r1)?,
            Err(e) => return Err(e),
        }
    }
    let startup = startup.ok_or_else(|| Error::NoConvergence("variational startup did not converge".into()))?;

    let p = opr.p();
    let u0 = opr.nonlinearity().u0();
    let nl = opr.nonlinearity();
    let clock = traj.clock;
    let rhs = |_tau: f64, y: &[f64; 5]| -> [f64; 5] {
        let r = y[0];
        let a = opr.a(r);
        let b = opr.b(r);
        let j = match clock {
            Clock::Radius => 1.0,
            Clock::WeightedRadius => (a / b).powf(1.0 / p),
        };
        let du = phi_p_inv(y[2] / a, p);
        let dphi = y[4] / ((p - 1.0) * a * du.abs().powf(p - 2.0));
        [j, j * du, -j * b * nl.f_ext(y[1]), j * dphi, -j * b * df_clamped(opr, y[1]) * y[3]]
    };
    let r_max = controls.r_max;
    let events = [
        Event::new(move |_, y: &[f64; 5]| y[1] - u0, Direction::Falling, true),
        Event::new(move |_, y: &[f64; 5]| y[0] - r_max, Direction::Rising, true),
    ];
    let r1 = startup.base.r1;
    let t1 = match clock {
        Clock::Radius => r1,
        Clock::WeightedRadius => 0.0,
    };
    let ctl = StepControl {
        rel_tol: controls.rel_tol,
        abs_tol: controls.abs_tol,
        initial_step: 0.1 * match clock {
            Clock::Radius => r1,
            Clock::WeightedRadius => controls.startup_radius,
        },
        max_step: f64::INFINITY,
        max_steps: controls.max_steps,
    };
    let y0 = [r1, startup.base.u1, startup.base.m1, startup.phi1, startup.lambda1];
    let t_end = match clock {
        Clock::Radius => r_max,
        Clock::WeightedRadius => f64::MAX,
    };
    let run = integrate(&rhs, t1, y0, t_end, &ctl, &events);
    match run.termination {
        Termination::Event(0) => {}
        Termination::StepFailure(msg) => return Err(Error::StepFailure(format!("variational shot alpha={alpha}: {msg}"))),
        _ => {
            return Err(Error::Domain {
                message: "the variational shot did not reach u0 before r_max".into(),
                witness: Some(Witness::new(alpha, "alpha")),
            })
        }
    }
    let end = run.solution.y_end;
    let r0 = end[0];
    let du_r0 = phi_p_inv(end[2] / opr.a(r0), p);
    let seg_r = run.solution.segments.iter().map(|s| s.start()[0]).collect();
    let mut state = VariationalState {
        alpha,
        r0,
        nodes: Vec::new(),
        phi: Vec::new(),
        dphi: Vec::new(),
        theta: Vec::new(),
        lambda: Vec::new(),
        du_r0,
        startup,
        dense: run.solution,
        seg_r,
        clock,
        op,
    };
    let mut grid: Vec<f64> = traj.nodes.iter().copied().filter(|&r| r < r0).collect();
    grid.push(r0);
    for r in grid {
        let v = state.at(r)?;
        state.nodes.push(r);
        state.phi.push(v.phi);
        state.dphi.push(v.dphi);
        state.theta.push(v.theta);
        state.lambda.push(v.lambda);
    }
    Ok(state)
}

impl VariationalState {
    pub fn r1(&self) -> f64 {
        self.startup.base.r1
    }

    /// Values at any `0 ≤ r ≤ r₀`.
    pub fn at(&self, r: f64) -> Result<VarPoint> {
        if !(r >= 0.0 && r <= self.r0 * (1.0 + 1e-14)) {
            return Err(Error::Domain {
                message: format!("radius outside [0, r0 = {:e}]", self.r0),
                witness: Some(Witness::new(r, "query radius")),
            });
        }
        let op = self.op.as_ref();
        if r == 0.0 {
            return Ok(VarPoint { r, phi: 1.0, dphi: 0.0, theta: 0.0, lambda: 0.0 });
        }
        let (phi, lambda, m) = if r <= self.r1() {
            let phi = 1.0 - eval_log_curve(&self.startup.drop, r);
            let lambda = -eval_log_curve(&self.startup.flux, r);
            (phi, lambda, self.startup.base.state_at(r).1)
        } else {
            let y = self.dense_at(r);
            (y[3], y[4], y[2])
        };
        Ok(VarPoint {
            r,
            phi,
            dphi: lambda * flux_to_slope(op, r, m),
            theta: lambda / q_of(op, r),
            lambda,
        })
    }

    fn dense_at(&self, r: f64) -> [f64; 5] {
        let segs = &self.dense.segments;
        if segs.is_empty() || r >= self.r0 {
            return self.dense.y_end;
        }
        let k = self.seg_r.partition_point(|&x| x <= r).saturating_sub(1);
        let seg = &segs[k];
        let theta = match self.clock {
            Clock::Radius => ((r - seg.t0) / seg.h).clamp(0.0, 1.0),
            Clock::WeightedRadius => {
                let r_end = if k + 1 < segs.len() { self.seg_r[k + 1] } else { self.r0 };
                if r <= self.seg_r[k] {
                    0.0
                } else if r >= r_end {
                    1.0
                } else {
                    brent(|th| seg.component_at_theta(0, th) - r, 0.0, 1.0, 1e-15).unwrap_or(0.5)
                }
            }
        };
        seg.at_theta(theta)
    }

    pub fn end(&self) -> VarPoint {
        let n = self.nodes.len() - 1;
        VarPoint {
            r: self.nodes[n],
            phi: self.phi[n],
            dphi: self.dphi[n],
            theta: self.theta[n],
            lambda: self.lambda[n],
        }
    }
}

/// `dr₀/dα` and `d(r₀u'(r₀))/dα` at one height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaDerivatives {
    pub alpha: f64,
    pub r0: f64,
    pub du_r0: f64,
    pub phi_r0: f64,
    pub dphi_r0: f64,
    pub dr0_dalpha: f64,
    pub d_r0du_dalpha: f64,
    /// `d/dr [r^c φ]` at `r₀` with `c = (n-p)/(p-1)`, which equals
    /// `r₀^{c-1} d(r₀u'(r₀))/dα`.
    pub weighted_phi_slope: f64,
}

pub fn derivatives_from_state(model: &ProblemModel, v: &VariationalState) -> AlphaDerivatives {
    let e = v.end();
    let r0 = v.r0;
    let c = (model.n() - model.p()) / (model.p() - 1.0);
    AlphaDerivatives {
        alpha: v.alpha,
        r0,
        du_r0: v.du_r0,
        phi_r0: e.phi,
        dphi_r0: e.dphi,
        dr0_dalpha: -e.phi / v.du_r0,
        d_r0du_dalpha: c * e.phi + r0 * e.dphi,
        weighted_phi_slope: c * r0.powf(c - 1.0) * e.phi + r0.powf(c) * e.dphi,
    }
}

/// Integrates the shot at `α` and returns its α-derivatives at `r₀`.
pub fn alpha_derivatives(model: &ProblemModel, alpha: f64, controls: &IntegratorControls) -> Result<AlphaDerivatives> {
    let traj = integrate_ivp(model, alpha, controls)?;
    let v = solve_variational(&traj)?;
    Ok(derivatives_from_state(model, &v))
}

/// Comparison of `φ` and `dr₀/dα` against central differences in `α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub alpha: f64,
    pub h: f64,
    /// `max |φ - φ_fd| / max |φ|` over nodes in `[0, 0.9 r₀]`.
    pub phi_max_rel_err: f64,
    pub phi_worst_r: f64,
    /// Same for `Λ` against differences of `m`.
    pub lambda_max_rel_err: f64,
    pub dr0_dalpha: f64,
    pub dr0_dalpha_fd: f64,
    pub dr0_rel_err: f64,
}

/// Finite-difference check with step `h = h_rel·α`; the two extra shots use `fd_controls`.
pub fn fd_check(
    model: &ProblemModel,
    alpha: f64,
    h_rel: f64,
    controls: &IntegratorControls,
    fd_controls: &IntegratorControls,
) -> Result<FdReport> {
    let traj = integrate_ivp(model, alpha, controls)?;
    let v = solve_variational(&traj)?;
    let d = derivatives_from_state(model, &v);
    let h = h_rel * alpha;
    let plus = integrate_ivp(model, alpha + h, fd_controls)?;
    let minus = integrate_ivp(model, alpha - h, fd_controls)?;
    let (r0p, r0m) = match (plus.r0, minus.r0) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::domain("a finite-difference shot never reaches u0")),
    };
    let limit = 0.9 * v.r0;
    let (mut phi_err, mut phi_scale, mut worst_r) = (0.0f64, 0.0f64, 0.0);
    let (mut lam_err, mut lam_scale) = (0.0f64, 0.0f64);
    for (i, &r) in v.nodes.iter().enumerate().filter(|(_, &r)| r <= limit) {
        let sp = plus.state_at(r)?;
        let sm = minus.state_at(r)?;
        let fd_phi = (sp.u - sm.u) / (2.0 * h);
        let fd_lam = (sp.m - sm.m) / (2.0 * h);
        let e = (v.phi[i] - fd_phi).abs();
        if e > phi_err {
            phi_err = e;
            worst_r = r;
        }
        phi_scale = phi_scale.max(v.phi[i].abs());
        lam_err = lam_err.max((v.lambda[i] - fd_lam).abs());
        lam_scale = lam_scale.max(v.lambda[i].abs());
    }
    let fd_r0 = (r0p - r0m) / (2.0 * h);
    Ok(FdReport {
        alpha,
        h,
        phi_max_rel_err: phi_err / phi_scale,
        phi_worst_r: worst_r,
        lambda_max_rel_err: if lam_scale > 0.0 { lam_err / lam_scale } else { lam_err },
        dr0_dalpha: d.dr0_dalpha,
        dr0_dalpha_fd: fd_r0,
        dr0_rel_err: ((d.dr0_dalpha - fd_r0) / fd_r0).abs(),
    })
}

/// `G(s) = p (n + tK'(t)/K(t)) F₀(s) / (s f(s)) - (n - p)` with `t = t(s, ᾱ)`.
pub fn eval_g_with(model: &ProblemModel, inverse: &InverseProfile<'_>, alpha_ref: f64, s: f64) -> Result<f64> {
    let u0 = model.u0();
    if !(s > u0 && s < alpha_ref) {
        return Err(Error::Domain {
            message: format!("G is defined for u0 < s < alpha = {alpha_ref}"),
            witness: Some(Witness::new(s, "s")),
        });
    }
    let t = inverse.t(s);
    let ls = model.weight_at(t).log_slope;
    let (p, n) = (model.p(), model.n());
    let f0 = model.nonlinearity.big_f0(s)?;
    Ok(p * (n + ls) * f0 / (s * model.f(s)) - (n - p))
}

pub fn eval_g(model: &ProblemModel, reference: &Trajectory, s: f64) -> Result<f64> {
    let inv = invert_profile(reference)?;
    eval_g_with(model, &inv, reference.alpha, s)
}

/// `G` sampled on `(u₀, ᾱ)` with its monotonicity diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GProfile {
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    pub increasing: bool,
    pub sign_changes: usize,
    /// First `s` with `G(s) ≥ 0`.
    pub s1: Option<f64>,
    pub witnesses: Vec<Witness>,
}

/// Samples `G` at `count` points clustered at both ends of `(u₀, ᾱ)`.
pub fn g_profile(model: &ProblemModel, reference: &Trajectory, count: usize) -> Result<GProfile> {
    let inv = invert_profile(reference)?;
    let (u0, a) = (model.u0(), reference.alpha);
    let half = count / 2;
    let mut s: Vec<f64> = geomspace(1e-6, 0.5, half.max(2)).into_iter().map(|x| u0 + (a - u0) * x).collect();
    s.extend(geomspace(1e-6, 0.5, (count - half).max(2)).into_iter().rev().map(|x| a - (a - u0) * x));
    s.sort_by(f64::total_cmp);
    s.dedup();
    let g = s.iter().map(|&x| eval_g_with(model, &inv, a, x)).collect::<Result<Vec<f64>>>()?;
    let mut witnesses = Vec::new();
    for i in 1..g.len() {
        if g[i] - g[i - 1] < -plateau_slack(g[i - 1]) {
            witnesses.push(Witness::new(s[i], format!("G decreases from {:e} to {:e}", g[i - 1], g[i])));
        }
    }
    let sign_changes = g.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    let s1 = s.iter().zip(&g).find(|(_, &v)| v >= 0.0).map(|(&x, _)| x);
    Ok(GProfile {
        increasing: witnesses.is_empty(),
        s,
        g,
        sign_changes,
        s1,
        witnesses,
    })
}

/// Violations of the strict decrease of `r u'(r) / u(r)` on `(0, r₀)`.
pub fn kwong_violations(traj: &Trajectory) -> Result<Vec<Witness>> {
    let r0 = traj
        .r0
        .ok_or_else(|| Error::domain("the shot never reaches u0; the Kwong quotient is checked on (0, r0)"))?;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&r, st) in traj.nodes.iter().zip(&traj.states) {
        if r <= 0.0 || r >= r0 {
            continue;
        }
        let q = r * st.du / st.u;
        if let Some((_, qp)) = prev {
            if q - qp >= plateau_slack(qp) {
                out.push(Witness::new(r, format!("r u'/u = {q:e} after {qp:e}")));
            }
        }
        prev = Some((r, q));
    }
    Ok(out)
}

/// `(n-p)/(p-1)·u₀ + r₀ u'(r₀)`; negative for shots at or beyond the ground state.
pub fn kwong_endpoint(model: &ProblemModel, traj: &Trajectory) -> Result<f64> {
    let r0 = traj.r0.ok_or_else(|| Error::domain("the shot never reaches u0"))?;
    let du = traj.state_at(r0)?.du;
    Ok((model.n() - model.p()) / (model.p() - 1.0) * model.u0() + r0 * du)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NonlinearitySpec, Parameters, WeightSpec};
    use crate::numerics::quad::{quad, QuadOptions};

    fn model(p: f64, n: f64, sigma: f64, q1: f64, q2: f64) -> ProblemModel {
        ProblemModel::new(
            Parameters::new(p, n).unwrap(),
            WeightSpec::Matukuma { sigma },
            NonlinearitySpec::PowerDiff { q1, q2 },
        )
        .unwrap()
    }

    fn canonical() -> ProblemModel {
        model(2.0, 3.0, 2.0, 3.0, 0.5)
    }

    #[test]
    fn origin_values() {
        let t = integrate_ivp(&canonical(), 6.0, &IntegratorControls::default()).unwrap();
        let v = solve_variational(&t).unwrap();
        assert_eq!(v.phi[0], 1.0);
        assert_eq!(v.dphi[0], 0.0);
        let tiny = v.at(1e-9).unwrap();
        assert!((tiny.phi - 1.0).abs() < 1e-12);
        assert!(tiny.theta.abs() < 1e-6);
        // r^{n-1}|u'|^{p-2}φ' = Λ/(p-1) → 0
        assert!(tiny.lambda.abs() < 1e-20);
    }

    #[test]
    fn constant_weight_startup_series() {
        // K ≡ 1, p = 2: φ ≈ 1 - f'(α) r²/(2n) near the origin
        let m = ProblemModel::new(
            Parameters::new(2.0, 3.0).unwrap(),
            WeightSpec::Power { theta: 0.0 },
            NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 },
        )
        .unwrap();
        let t = integrate_ivp(&m, 3.0, &IntegratorControls::default()).unwrap();
        let v = solve_variational(&t).unwrap();
        let fp = m.nonlinearity.df(3.0).unwrap();
        let r = 0.5 * v.r1();
        let got = 1.0 - v.at(r).unwrap().phi;
        assert!((got / (fp * r * r / 6.0) - 1.0).abs() < 1e-5, "{got}");
    }

    #[test]
    fn integral_system_residual() {
        let t = integrate_ivp(&canonical(), 6.0, &IntegratorControls::default()).unwrap();
        let v = solve_variational(&t).unwrap();
        let op = t.operator();
        let opts = QuadOptions::tol(1e-16, 1e-12);
        let mut worst: f64 = 0.0;
        for &r in v.nodes.iter().step_by(7) {
            if r == 0.0 {
                continue;
            }
            let mut lam_int = 0.0;
            let mut phi_int = 0.0;
            // dyadic pieces near the origin, then one piece per node gap
            let mut pieces = vec![];
            let r1 = v.r1();
            let mut hi = r.min(r1);
            for _ in 0..60 {
                pieces.push((0.5 * hi, hi));
                hi *= 0.5;
            }
            let mut lo = r1;
            for &x in v.nodes.iter().filter(|&&x| x > r1 && x <= r) {
                pieces.push((lo, x));
                lo = x;
            }
            for (a, b) in pieces {
                if b <= a {
                    continue;
                }
                lam_int += quad(
                    |s| {
                        let st = t.state_at(s).unwrap();
                        op.b(s) * df_clamped(op, st.u) * v.at(s).unwrap().phi
                    },
                    a,
                    b,
                    opts,
                )
                .unwrap();
                phi_int += quad(|s| v.at(s).unwrap().dphi, a, b, opts).unwrap();
            }
            let at = v.at(r).unwrap();
            worst = worst.max((at.lambda + lam_int).abs() / (1.0 + at.lambda.abs()));
            worst = worst.max((at.phi - 1.0 - phi_int).abs() / (1.0 + at.phi.abs()));
        }
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn derivative_formula_identity() {
        let m = canonical();
        let d = alpha_derivatives(&m, 6.0, &IntegratorControls::default()).unwrap();
        let c: f64 = 1.0;
        assert!((d.weighted_phi_slope - d.r0.powf(c - 1.0) * d.d_r0du_dalpha).abs() < 1e-12 * d.d_r0du_dalpha.abs().max(1.0));
        assert!(d.du_r0 < 0.0);
    }

    #[test]
    fn finite_differences_agree() {
        let tight = IntegratorControls::default().with_tol(1e-13);
        for &(ref m, alpha) in &[(canonical(), 6.0), (model(1.5, 3.0, 1.0, 1.5, 0.25), 3.0), (model(3.0, 4.0, 2.0, 4.0, 1.0), 3.0)] {
            let rep = fd_check(m, alpha, 1e-6, &tight, &tight).unwrap();
            assert!(rep.phi_max_rel_err < 1e-4, "p={} {rep:?}", m.p());
            assert!(rep.lambda_max_rel_err < 1e-4, "p={} {rep:?}", m.p());
            assert!(rep.dr0_rel_err < 1e-3, "p={} {rep:?}", m.p());
        }
    }

    #[test]
    fn no_r0_is_a_domain_error() {
        let m = canonical();
        let t = integrate_ivp(&m, 1.0 + 1e-9, &IntegratorControls::default()).unwrap();
        if t.r0.is_none() {
            assert_eq!(solve_variational(&t).unwrap_err().code(), "domain");
        }
    }

    #[test]
    fn g_starts_at_minus_n_minus_p_and_increases() {
        let m = canonical();
        let t = integrate_ivp(&m, 8.0, &IntegratorControls::default()).unwrap();
        let g = g_profile(&m, &t, 120).unwrap();
        assert!((g.g[0] + 1.0).abs() < 1e-4, "{}", g.g[0]);
        assert!(g.increasing, "{:?}", g.witnesses.first());
        assert_eq!(g.sign_changes, 1);
        assert!(eval_g(&m, &t, 0.5).is_err());
    }

    #[test]
    fn kwong_quotient_decreases_on_crossing_shot() {
        let m = canonical();
        let t = integrate_ivp(&m, 8.0, &IntegratorControls::default()).unwrap();
        assert!(kwong_violations(&t).unwrap().is_empty());
        assert!(kwong_endpoint(&m, &t).unwrap() < 0.0);
    }
}
