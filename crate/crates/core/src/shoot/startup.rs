//! Regular startup away from the singular point `r = 0`.
//!
//! On `[0, r₁]` the integral form
//! `m(r) = -∫₀^r b f(u)`, `u(r) = α - ∫₀^r (|m|/a)^{1/(p-1)}`
//! is solved by successive substitution on dyadically graded panels, so that
//! the power-law behaviour of every integrand at the origin is resolved.

use crate::error::{Error, Result, Witness};
use crate::model::RadialOperator;
use crate::numerics::interp::Hermite;
use crate::numerics::panels::{Cumulative, GradedPanels};
use crate::numerics::quad::{quad, QuadOptions};
use crate::numerics::roots::brent;

pub(crate) const LEVELS: usize = 60;
pub(crate) const NODES_PER_PANEL: usize = 12;
const MAX_PICARD: usize = 200;
/// `|α - u(r₁)|` allowed at the end of the startup region, relative to α.
pub const STARTUP_DRIFT: f64 = 1e-6;
const MAX_SHRINKS: usize = 10;

/// Converged startup solution on `[0, r₁]`.
#[derive(Debug, Clone)]
pub struct StartupProfile {
    pub alpha: f64,
    pub r1: f64,
    pub u1: f64,
    pub m1: f64,
    pub iterations: usize,
    pub(crate) panels: GradedPanels,
    /// `u` and `m` at the panel nodes.
    pub(crate) u_nodes: Vec<f64>,
    pub(crate) m_nodes: Vec<f64>,
    /// `u` and `m` at the panel edges (innermost first, last is `r₁`).
    pub(crate) u_edges: Vec<f64>,
    pub(crate) m_edges: Vec<f64>,
    // log(α - u) and log(-m) against log r
    drop_curve: Option<Hermite>,
    flux_curve: Option<Hermite>,
}

/// Edge and node values of a cumulative integral, merged in increasing `r`.
pub(crate) fn merged_samples(panels: &GradedPanels, c: &Cumulative) -> (Vec<f64>, Vec<f64>) {
    let m_per = panels.nodes_per_panel();
    let (nodes, edges) = (panels.nodes(), panels.edges());
    let mut rs = Vec::with_capacity(nodes.len() + edges.len());
    let mut vs = Vec::with_capacity(nodes.len() + edges.len());
    for pi in 0..panels.panels() {
        rs.push(edges[pi]);
        vs.push(c.at_edges[pi]);
        for j in pi * m_per..(pi + 1) * m_per {
            rs.push(nodes[j]);
            vs.push(c.at_nodes[j]);
        }
    }
    rs.push(*edges.last().unwrap());
    vs.push(c.total());
    (rs, vs)
}

pub(crate) fn log_curve(r: &[f64], v: &[f64]) -> Option<Hermite> {
    let (x, y): (Vec<f64>, Vec<f64>) = r
        .iter()
        .zip(v)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(r, v)| (r.ln(), v.ln()))
        .unzip();
    (x.len() >= 2).then(|| Hermite::monotone(x, y))
}

pub(crate) fn eval_log_curve(c: &Option<Hermite>, r: f64) -> f64 {
    let Some(c) = c else { return 0.0 };
    let x = r.ln();
    let (lo, hi) = c.domain();
    if x <= lo {
        // power-law continuation towards the origin
        (c.ys()[0] + c.slopes()[0] * (x - lo)).exp()
    } else if x >= hi {
        c.ys().last().unwrap().exp()
    } else {
        c.eval(x).exp()
    }
}

impl StartupProfile {
    /// `(u, m)` at `0 ≤ r ≤ r₁`.
    pub fn state_at(&self, r: f64) -> (f64, f64) {
        if r <= 0.0 {
            return (self.alpha, 0.0);
        }
        if r >= self.r1 {
            return (self.u1, self.m1);
        }
        (self.alpha - eval_log_curve(&self.drop_curve, r), -eval_log_curve(&self.flux_curve, r))
    }

    pub fn edges(&self) -> &[f64] {
        self.panels.edges()
    }
}

/// Solves the startup problem on `[0, r₁]` at fixed `r₁` (no validation).
pub fn origin_startup(op: &dyn RadialOperator, alpha: f64, r1: f64) -> Result<StartupProfile> {
    let p = op.p();
    let nl = op.nonlinearity();
    let panels = GradedPanels::new(r1, LEVELS, NODES_PER_PANEL);
    let nodes = panels.nodes().to_vec();
    let a: Vec<f64> = nodes.iter().map(|&r| op.a(r)).collect();
    let b: Vec<f64> = nodes.iter().map(|&r| op.b(r)).collect();
    let mut u = vec![alpha; nodes.len()];
    let inv = 1.0 / (p - 1.0);
    let mut iterations = 0;
    let (mut m_cum, mut u_cum);
    loop {
        iterations += 1;
        let src: Vec<f64> = b.iter().zip(&u).map(|(b, &u)| b * nl.f(u)).collect();
        m_cum = panels.cumulative(&src);
        let slope: Vec<f64> = m_cum.at_nodes.iter().zip(&a).map(|(m, a)| (m.abs() / a).powf(inv)).collect();
        u_cum = panels.cumulative(&slope);
        let new_u: Vec<f64> = u_cum.at_nodes.iter().map(|d| alpha - d).collect();
        let change = new_u.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        u = new_u;
        if !change.is_finite() {
            return Err(Error::StepFailure(format!("startup iteration diverged at r1={r1:e}")));
        }
        if change <= 4.0 * f64::EPSILON * alpha {
            break;
        }
        if iterations >= MAX_PICARD {
            return Err(Error::NoConvergence(format!("startup iteration stalled at r1={r1:e} (last change {change:e})")));
        }
    }
    let m_nodes: Vec<f64> = m_cum.at_nodes.iter().map(|v| -v).collect();
    let m_edges: Vec<f64> = m_cum.at_edges.iter().map(|v| -v).collect();
    let u_edges: Vec<f64> = u_cum.at_edges.iter().map(|d| alpha - d).collect();

    let (rs, drops) = merged_samples(&panels, &u_cum);
    let (_, fluxes) = merged_samples(&panels, &m_cum);

    Ok(StartupProfile {
        alpha,
        r1,
        u1: alpha - u_cum.total(),
        m1: -m_cum.total(),
        iterations,
        drop_curve: log_curve(&rs, &drops),
        flux_curve: log_curve(&rs, &fluxes),
        panels,
        u_nodes: u,
        m_nodes,
        u_edges,
        m_edges,
    })
}

/// `t(r) = ∫₀^r (b/a)^{1/p}`.
pub fn t_of_r(op: &dyn RadialOperator, r: f64) -> Result<f64> {
    let p = op.p();
    let g = |s: f64| if s <= 0.0 { 0.0 } else { (op.b(s) / op.a(s)).powf(1.0 / p) };
    // dyadic pieces keep the origin behaviour resolved
    let mut total = 0.0;
    let mut hi = r;
    for _ in 0..80 {
        let lo = 0.5 * hi;
        let piece = quad(g, lo, hi, QuadOptions::tol(1e-15 * total, 1e-12))?;
        total += piece;
        if piece <= 1e-18 * total {
            break;
        }
        hi = lo;
    }
    Ok(total)
}

/// Radius `r₁` with `t(r₁) = t1`.
pub fn startup_radius_in_r(op: &dyn RadialOperator, t1: f64) -> Result<f64> {
    let (mut lo, mut hi) = (t1, t1);
    let mut guard = 0;
    while t_of_r(op, hi)? < t1 {
        hi *= 4.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::domain("t(r) = ∫K^{1/p} stays bounded; the weight is outside the admissible class"));
        }
    }
    while t_of_r(op, lo)? > t1 {
        lo *= 0.25;
        guard += 1;
        if guard > 400 {
            return Err(Error::domain("cannot place the startup radius: t(r) does not vanish at the origin"));
        }
    }
    brent(|r| t_of_r(op, r).unwrap_or(f64::NAN) - t1, lo, hi, 1e-9 * hi)
}

/// Startup with a posteriori validation: `r₁` is shrunk tenfold until the
/// drop `α - u(r₁)` is within [`STARTUP_DRIFT`]`·α`.
pub fn validated_startup(op: &dyn RadialOperator, alpha: f64, t1: f64) -> Result<StartupProfile> {
    let mut r1 = startup_radius_in_r(op, t1)?;
    let mut last_err = None;
    for _ in 0..=MAX_SHRINKS {
        match origin_startup(op, alpha, r1) {
            Ok(s) if (alpha - s.u1).abs() <= STARTUP_DRIFT * alpha => return Ok(s),
            Ok(s) => {
                last_err = Some(Error::StepFailure(format!(
                    "startup drift {:e} exceeds {STARTUP_DRIFT:e}·alpha at r1={r1:e}",
                    alpha - s.u1
                )))
            }
            Err(e) => last_err = Some(e),
        }
        r1 *= 0.1;
    }
    match last_err {
        Some(Error::StepFailure(m)) | Some(Error::NoConvergence(m)) => Err(Error::StepFailure(m)),
        Some(e) => Err(e),
        None => Err(Error::Domain {
            message: "startup failed".into(),
            witness: Some(Witness::new(r1, "startup radius")),
        }),
    }
}
