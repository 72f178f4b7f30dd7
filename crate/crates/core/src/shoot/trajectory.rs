use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::controls::IntegratorControls;
use super::startup::{validated_startup, StartupProfile, LEVELS};
use crate::error::{Error, Result, Witness};
use crate::model::{ProblemModel, RadialOperator};
use crate::numerics::ode::{integrate, DenseSolution, Direction, Event, StepControl, Termination};
use crate::numerics::phi_p_inv;
use crate::numerics::quad::{quad, QuadOptions};
use crate::numerics::roots::brent;

/// Startup-region panel edges kept as trajectory nodes.
const STARTUP_NODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopEvent {
    UHitZero,
    DuHitZero,
    ReachedRMax,
}

/// Independent variable used by the step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// the radius itself
    Radius,
    /// `t = ∫K^{1/p}`, for weights with `rK'/K` unbounded at the origin
    WeightedRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeState {
    pub u: f64,
    pub du: f64,
    /// `a(r) φ_p(u')`, i.e. `r^{n-1} φ_p(u')` for a K-form model.
    pub m: f64,
}

/// Extra data for shots truncated at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailDiagnostics {
    pub r_du: f64,
    pub u_at_r_max: f64,
}

/// A radial profile from `r = 0` to its stop event.
#[derive(Clone)]
pub struct Trajectory {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub states: Vec<NodeState>,
    pub stop_event: StopEvent,
    /// First radius where `u = u₀`.
    pub r0: Option<f64>,
    pub tail: Option<TailDiagnostics>,
    pub clock: Clock,
    pub steps: usize,
    pub rejected: usize,
    pub rel_tol: f64,
    controls: IntegratorControls,
    startup: StartupProfile,
    dense: DenseSolution<3>,
    seg_r: Vec<f64>,
    op: Arc<dyn RadialOperator>,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("alpha", &self.alpha)
            .field("nodes", &self.nodes.len())
            .field("stop_event", &self.stop_event)
            .field("r_stop", &self.r_stop())
            .field("r0", &self.r0)
            .finish()
    }
}

/// Integrates the radial problem of `model` from `u(0) = α`, `u'(0) = 0`.
pub fn integrate_ivp(model: &ProblemModel, alpha: f64, controls: &IntegratorControls) -> Result<Trajectory> {
    integrate_operator(Arc::new(model.clone()), alpha, controls)
}

/// Same as [`integrate_ivp`] for any radial operator `(a φ_p(u'))' = -b f(u)`.
pub fn integrate_operator(op: Arc<dyn RadialOperator>, alpha: f64, controls: &IntegratorControls) -> Result<Trajectory> {
    controls.validate()?;
    let u0 = op.nonlinearity().u0();
    if !(alpha > u0) {
        return Err(Error::precondition(
            format!(
                "alpha = {alpha} must exceed u0 = {u0}: for alpha ≤ u0 the energy E(r, alpha) < 0 for all r > 0, so the profile can never reach zero"
            ),
            Some(Witness::new(alpha, format!("alpha ≤ u0 = {u0}"))),
        ));
    }
    let startup = validated_startup(op.as_ref(), alpha, controls.startup_radius)?;
    let r1 = startup.r1;
    let r_max = controls.r_max;
    if r1 >= r_max {
        return Err(Error::Config(format!("startup radius {r1:e} is beyond r_max = {r_max:e}")));
    }
    let p = op.p();
    let clock = if op.prefers_t_clock() { Clock::WeightedRadius } else { Clock::Radius };
    let opr: &dyn RadialOperator = op.as_ref();
    let nl = opr.nonlinearity();
    let rhs = |_tau: f64, y: &[f64; 3]| -> [f64; 3] {
        let r = y[0];
        let a = opr.a(r);
        let b = opr.b(r);
        let j = match clock {
            Clock::Radius => 1.0,
            Clock::WeightedRadius => (a / b).powf(1.0 / p),
        };
        let du = phi_p_inv(y[2] / a, p);
        [j, j * du, -j * b * nl.f_ext(y[1])]
    };
    let events = [
        Event::new(|_, y: &[f64; 3]| y[1], Direction::Falling, true),
        Event::new(|_, y: &[f64; 3]| y[2], Direction::Rising, true).armed_when(move |_, y: &[f64; 3]| y[1] < u0),
        Event::new(move |_, y: &[f64; 3]| y[1] - u0, Direction::Falling, false),
        Event::new(move |_, y: &[f64; 3]| y[0] - r_max, Direction::Rising, true),
    ];
    let (tau0, tau_end) = match clock {
        Clock::Radius => (r1, r_max),
        Clock::WeightedRadius => (0.0, f64::MAX),
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
    let run = integrate(&rhs, tau0, [r1, startup.u1, startup.m1], tau_end, &ctl, &events);
    let stop_event = match run.termination {
        Termination::Event(0) => StopEvent::UHitZero,
        Termination::Event(1) => StopEvent::DuHitZero,
        Termination::Event(_) | Termination::ReachedEnd => StopEvent::ReachedRMax,
        Termination::StepFailure(msg) => {
            return Err(Error::StepFailure(format!("shot alpha={alpha}: {msg}")));
        }
    };
    let r0 = run.hits.iter().find(|h| h.index == 2).map(|h| h.y[0]);

    let du_of = |r: f64, m: f64| if r > 0.0 { phi_p_inv(m / opr.a(r), p) } else { 0.0 };
    let mut nodes = vec![0.0];
    let mut states = vec![NodeState { u: alpha, du: 0.0, m: 0.0 }];
    let edges = startup.edges();
    for j in (LEVELS - STARTUP_NODES)..LEVELS {
        let (r, u, m) = (edges[j], startup.u_edges[j], startup.m_edges[j]);
        nodes.push(r);
        states.push(NodeState { u, du: du_of(r, m), m });
    }
    let mut push = |y: [f64; 3]| {
        if y[0] > *nodes.last().unwrap() {
            nodes.push(y[0]);
            states.push(NodeState { u: y[1], du: du_of(y[0], y[2]), m: y[2] });
        }
    };
    for seg in &run.solution.segments {
        push(seg.start());
    }
    push(run.solution.y_end);
    let tail = (stop_event == StopEvent::ReachedRMax).then(|| {
        let (r, s) = (*nodes.last().unwrap(), *states.last().unwrap());
        TailDiagnostics { r_du: r * s.du.abs(), u_at_r_max: s.u }
    });
    let seg_r = run.solution.segments.iter().map(|s| s.start()[0]).collect();
    Ok(Trajectory {
        alpha,
        nodes,
        states,
        stop_event,
        r0,
        tail,
        clock,
        steps: run.steps,
        rejected: run.rejected,
        rel_tol: controls.rel_tol,
        controls: *controls,
        startup,
        dense: run.solution,
        seg_r,
        op,
    })
}

impl Trajectory {
    pub fn operator(&self) -> &dyn RadialOperator {
        self.op.as_ref()
    }

    pub fn p(&self) -> f64 {
        self.op.p()
    }

    /// Radius of the stop event (possibly the truncation radius).
    pub fn r_stop(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn terminal(&self) -> NodeState {
        *self.states.last().unwrap()
    }

    pub fn truncated(&self) -> bool {
        self.stop_event == StopEvent::ReachedRMax
    }

    /// Controls the shot was integrated with.
    pub fn controls(&self) -> &IntegratorControls {
        &self.controls
    }

    pub fn startup(&self) -> &StartupProfile {
        &self.startup
    }

    pub(crate) fn operator_arc(&self) -> Arc<dyn RadialOperator> {
        self.op.clone()
    }

    /// End of the startup region.
    pub fn startup_radius(&self) -> f64 {
        self.startup.r1
    }

    pub fn du_from_m(&self, r: f64, m: f64) -> f64 {
        if r > 0.0 {
            phi_p_inv(m / self.op.a(r), self.op.p())
        } else {
            0.0
        }
    }

    fn domain_check(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r <= self.r_stop() * (1.0 + 1e-14)) {
            return Err(Error::Domain {
                message: format!("radius outside the trajectory range [0, {:e}]", self.r_stop()),
                witness: Some(Witness::new(r, "query radius")),
            });
        }
        Ok(())
    }

    // (segment, θ) of an ODE-region radius
    fn locate(&self, r: f64) -> Option<(usize, f64)> {
        let segs = &self.dense.segments;
        if segs.is_empty() || r >= self.dense.y_end[0] {
            return None;
        }
        let k = self.seg_r.partition_point(|&x| x <= r).saturating_sub(1);
        let seg = &segs[k];
        let theta = match self.clock {
            Clock::Radius => ((r - seg.t0) / seg.h).clamp(0.0, 1.0),
            Clock::WeightedRadius => {
                let r_end = if k + 1 < segs.len() { self.seg_r[k + 1] } else { self.dense.y_end[0] };
                if r <= self.seg_r[k] {
                    0.0
                } else if r >= r_end {
                    1.0
                } else {
                    brent(|th| seg.component_at_theta(0, th) - r, 0.0, 1.0, 1e-15).unwrap_or(0.5)
                }
            }
        };
        Some((k, theta))
    }

    /// `(u, u', m)` at any `0 ≤ r ≤ R`.
    pub fn state_at(&self, r: f64) -> Result<NodeState> {
        self.domain_check(r)?;
        let (u, m) = if r <= self.startup.r1 {
            self.startup.state_at(r)
        } else {
            match self.locate(r) {
                Some((k, th)) => {
                    let y = self.dense.segments[k].at_theta(th);
                    (y[1], y[2])
                }
                None => (self.dense.y_end[1], self.dense.y_end[2]),
            }
        };
        Ok(NodeState { u, du: self.du_from_m(r, m), m })
    }

    pub fn u_at(&self, r: f64) -> Result<f64> {
        Ok(self.state_at(r)?.u)
    }

    /// `∫_{lo}^{hi} g(r, u, m) dr` along the dense output.
    pub fn integrate_along<G: FnMut(f64, f64, f64) -> f64>(&self, mut g: G, lo: f64, hi: f64) -> Result<f64> {
        self.domain_check(lo)?;
        self.domain_check(hi)?;
        if hi <= lo {
            return Ok(0.0);
        }
        let opts = QuadOptions::tol(1e-18, 1e-11);
        let r1 = self.startup.r1;
        let mut total: f64 = 0.0;
        if lo < r1 {
            let mut b = r1;
            for _ in 0..LEVELS {
                let a = 0.5 * b;
                let (pa, pb) = (a.max(lo), b.min(hi));
                if pb > pa {
                    // pieces shrink toward the origin, so the running total sets the scale
                    let piece = QuadOptions::tol(1e-15 * total.abs(), 1e-12);
                    total += quad(
                        |r| {
                            let (u, m) = self.startup.state_at(r);
                            g(r, u, m)
                        },
                        pa,
                        pb,
                        piece,
                    )?;
                }
                if a <= lo {
                    break;
                }
                b = a;
            }
        }
        let (lo, hi) = (lo.max(r1), hi);
        if hi <= lo {
            return Ok(total);
        }
        let segs = &self.dense.segments;
        let first = self.seg_r.partition_point(|&x| x <= lo).saturating_sub(1);
        let op = self.op.as_ref();
        let p = op.p();
        for k in first..segs.len() {
            let seg = &segs[k];
            let r_end = if k + 1 < segs.len() { self.seg_r[k + 1] } else { self.dense.y_end[0] };
            if self.seg_r[k] >= hi {
                break;
            }
            let th_a = if lo > self.seg_r[k] { self.locate(lo).map_or(0.0, |(_, t)| t) } else { 0.0 };
            let th_b = if hi < r_end { self.locate(hi).map_or(1.0, |(_, t)| t) } else { 1.0 };
            if th_b <= th_a {
                continue;
            }
            let clock = self.clock;
            total += quad(
                |th| {
                    let y = seg.at_theta(th);
                    let j = match clock {
                        Clock::Radius => 1.0,
                        Clock::WeightedRadius => (op.a(y[0]) / op.b(y[0])).powf(1.0 / p),
                    };
                    g(y[0], y[1], y[2]) * j * seg.h
                },
                th_a,
                th_b,
                opts,
            )?;
        }
        Ok(total)
    }

    /// `∫₀^{r_i} g` at every node `r_i`.
    pub fn cumulative_at_nodes<G: FnMut(f64, f64, f64) -> f64>(&self, mut g: G) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.nodes.windows(2) {
            acc += self.integrate_along(&mut g, w[0], w[1])?;
            out.push(acc);
        }
        Ok(out)
    }

    /// Largest `|m(r) + ∫₀^r b f(u)| / (1 + |m(r)|)` over the nodes.
    pub fn std_residual(&self) -> Result<f64> {
        let op = self.op.as_ref();
        let nl = op.nonlinearity();
        let c = self.cumulative_at_nodes(|r, u, _| if r > 0.0 { op.b(r) * nl.f_ext(u) } else { 0.0 })?;
        Ok(self
            .states
            .iter()
            .zip(&c)
            .map(|(s, c)| (s.m + c).abs() / (1.0 + s.m.abs()))
            .fold(0.0, f64::max))
    }
}
