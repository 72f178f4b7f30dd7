//! Dormand–Prince 5(4) with continuous extension and event location.

use super::roots::brent_known;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]> OdeSystem<N> for F {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// One accepted step with its quartic continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeff: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at relative position `theta ∈ [0, 1]`.
    pub fn at_theta(&self, theta: f64) -> [f64; N] {
        let s = 1.0 - theta;
        let c = &self.coeff;
        std::array::from_fn(|i| c[0][i] + theta * (c[1][i] + s * (c[2][i] + theta * (c[3][i] + s * c[4][i]))))
    }

    pub fn component_at_theta(&self, i: usize, theta: f64) -> f64 {
        let s = 1.0 - theta;
        let c = &self.coeff;
        c[0][i] + theta * (c[1][i] + s * (c[2][i] + theta * (c[3][i] + s * c[4][i])))
    }

    pub fn at(&self, t: f64) -> [f64; N] {
        self.at_theta((t - self.t0) / self.h)
    }

    /// Start state of the segment.
    pub fn start(&self) -> [f64; N] {
        self.coeff[0]
    }
}

/// Accepted steps from `t_start` to `t_end` with dense output.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    pub segments: Vec<Segment<N>>,
    pub t_end: f64,
    pub y_end: [f64; N],
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map(|s| s.t0).unwrap_or(self.t_end)
    }

    pub fn segment_index(&self, t: f64) -> usize {
        let k = self.segments.partition_point(|s| s.t0 <= t);
        k.saturating_sub(1).min(self.segments.len().saturating_sub(1))
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.segments.is_empty() || t >= self.t_end {
            return self.y_end;
        }
        self.segments[self.segment_index(t)].at(t)
    }

    /// Node times: every segment start plus the end point.
    pub fn node_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        ts.push(self.t_end);
        ts
    }

    pub fn node_states(&self) -> Vec<[f64; N]> {
        let mut ys: Vec<[f64; N]> = self.segments.iter().map(|s| s.start()).collect();
        ys.push(self.y_end);
        ys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// A zero-crossing detector on the dense output.
pub struct Event<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub direction: Direction,
    pub terminal: bool,
    /// Checked at the located root; an unarmed crossing is ignored.
    pub armed: Box<dyn Fn(f64, &[f64; N]) -> bool + 'a>,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(g: impl Fn(f64, &[f64; N]) -> f64 + 'a, direction: Direction, terminal: bool) -> Self {
        Self {
            g: Box::new(g),
            direction,
            terminal,
            armed: Box::new(|_, _| true),
        }
    }

    pub fn armed_when(mut self, armed: impl Fn(f64, &[f64; N]) -> bool + 'a) -> Self {
        self.armed = Box::new(armed);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EventHit<const N: usize> {
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    ReachedEnd,
    Event(usize),
    StepFailure(String),
}

#[derive(Debug, Clone)]
pub struct Integration<const N: usize> {
    pub solution: DenseSolution<N>,
    pub hits: Vec<EventHit<N>>,
    pub termination: Termination,
    pub steps: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrates from `t0` to `t_end` (`t_end > t0`), stopping early at the
/// first terminal event.
pub fn integrate<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    events: &[Event<'_, N>],
) -> Integration<N> {
    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut h = ctl.initial_step.min(t_end - t0).min(ctl.max_step);
    let mut segments: Vec<Segment<N>> = Vec::new();
    let mut hits = Vec::new();
    let mut steps = 0;
    let mut rejected = 0;
    let mut err_prev: f64 = 1e-4;
    // set while retrying a step shortened to end just past a terminal event
    let mut approaching = false;
    let finish = |segments: Vec<Segment<N>>, t_end: f64, y_end: [f64; N], hits, termination, steps, rejected| Integration {
        solution: DenseSolution { segments, t_end, y_end },
        hits,
        termination,
        steps,
        rejected,
    };
    if !y.iter().all(|v| v.is_finite()) || !k1.iter().all(|v| v.is_finite()) {
        return finish(segments, t, y, hits, Termination::StepFailure("non-finite initial state".into()), 0, 0);
    }
    loop {
        if t >= t_end {
            return finish(segments, t, y, hits, Termination::ReachedEnd, steps, rejected);
        }
        if steps >= ctl.max_steps {
            return finish(segments, t, y, hits, Termination::StepFailure(format!("step budget {} exhausted at t={t:e}", ctl.max_steps)), steps, rejected);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return finish(segments, t, y, hits, Termination::StepFailure(format!("step size underflow at t={t:e}")), steps, rejected);
        }
        let k2 = sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = sys.rhs(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = sys.rhs(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t1 = if last { t_end } else { t + h };
        let k7 = sys.rhs(t1, &y1);

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
            finite &= y1[i].is_finite() && k7[i].is_finite();
        }
        let err = (err / N as f64).sqrt();
        if !finite || !err.is_finite() {
            rejected += 1;
            h *= 0.2;
            continue;
        }
        if err > 1.0 {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }

        let ydiff: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
        let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
        let coeff = [
            y,
            ydiff,
            bspl,
            std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
            std::array::from_fn(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])),
        ];
        let seg = Segment { t0: t, h: t1 - t, coeff };
        steps += 1;

        // events: earliest armed crossing inside this step
        let mut first: Option<EventHit<N>> = None;
        for (index, ev) in events.iter().enumerate() {
            let ga = (ev.g)(t, &y);
            let gb = (ev.g)(t1, &y1);
            let crosses = match ev.direction {
                Direction::Rising => ga < 0.0 && gb >= 0.0,
                Direction::Falling => ga > 0.0 && gb <= 0.0,
                Direction::Either => (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0),
            };
            if !crosses {
                continue;
            }
            let g_theta = |th: f64| (ev.g)(t + th * seg.h, &seg.at_theta(th));
            let theta = brent_known(g_theta, 0.0, 1.0, ga, gb, 1e-15).unwrap_or(1.0);
            let te = if theta >= 1.0 { t1 } else { t + theta * seg.h };
            let ye = if theta >= 1.0 { y1 } else { seg.at_theta(theta) };
            if !(ev.armed)(te, &ye) {
                continue;
            }
            if !ev.terminal {
                hits.push(EventHit { index, t: te, y: ye });
            } else if first.as_ref().map_or(true, |f| te < f.t) {
                first = Some(EventHit { index, t: te, y: ye });
            }
        }
        if let Some(hit) = &first {
            let theta = (hit.t - t) / seg.h;
            if !approaching && theta < 1.0 - 1e-6 && hit.t - t > 1024.0 * f64::EPSILON * t.abs() {
                // redo the step so that it ends just past the event; stages
                // then never sample far beyond a possibly non-smooth point
                hits.retain(|e| e.t <= t);
                approaching = true;
                steps -= 1;
                rejected += 1;
                h = (hit.t - t) * (1.0 + 1e-8);
                continue;
            }
        }
        approaching = false;
        if let Some(hit) = first {
            // non-terminal hits recorded past the stop are dropped
            hits.retain(|e| e.t <= hit.t);
            hits.sort_by(|a, b| a.t.total_cmp(&b.t));
            hits.push(hit);
            let mut seg = seg;
            let keep = hit.t - seg.t0;
            if keep > 0.0 {
                // rescale the quartic to the truncated interval
                seg = truncate_segment(&seg, keep / seg.h);
                segments.push(seg);
            }
            return finish(segments, hit.t, hit.y, hits, Termination::Event(hit.index), steps, rejected);
        }

        segments.push(seg);
        t = t1;
        y = y1;
        k1 = k7;
        // PI step-size controller
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
        };
        err_prev = err.max(1e-4);
        h = (h * fac).min(ctl.max_step);
    }
}

// Re-expresses the segment's polynomial on [0, s] as a new segment over [0, 1].
fn truncate_segment<const N: usize>(seg: &Segment<N>, s: f64) -> Segment<N> {
    // sample the quartic at 5 points and refit in the same nested basis
    let thetas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let vals: Vec<[f64; N]> = thetas.iter().map(|&th| seg.at_theta(th * s)).collect();
    let mut coeff = [[0.0; N]; 5];
    for i in 0..N {
        let v: Vec<f64> = vals.iter().map(|y| y[i]).collect();
        let c = fit_nested_quartic(&thetas, &v);
        for k in 0..5 {
            coeff[k][i] = c[k];
        }
    }
    Segment { t0: seg.t0, h: seg.h * s, coeff }
}

// Solves for c in p(θ) = c0 + θ(c1 + (1-θ)(c2 + θ(c3 + (1-θ)c4))) through five samples.
fn fit_nested_quartic(th: &[f64; 5], v: &[f64]) -> [f64; 5] {
    let basis = |t: f64| -> [f64; 5] {
        let s = 1.0 - t;
        [1.0, t, t * s, t * s * t, t * s * t * s]
    };
    let mut a = [[0.0; 6]; 5];
    for r in 0..5 {
        let b = basis(th[r]);
        a[r][..5].copy_from_slice(&b);
        a[r][5] = v[r];
    }
    // Gaussian elimination with partial pivoting
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..5 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..6 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    std::array::from_fn(|k| a[k][5] / a[k][k])
}
