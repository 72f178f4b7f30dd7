//! Changes of variables: the `h`-transform of an `(a, b)` problem to K-form,
//! the weighted radius `t = ∫K^{1/p}` with `q(t)`, and the compact-support test.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Witness};
use crate::model::{
    ClosureWeight, NonlinearitySpec, Parameters, ProblemModel, RadialOperator, TabulatedWeight, WeightSpec,
};
use crate::numerics::interp::Hermite;
use crate::numerics::quad::{quad, QuadOptions};
use crate::numerics::geomspace;
use crate::shoot::{t_of_r, Trajectory};

/// Positive radial coefficient with its logarithmic slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialFunction {
    /// `c r^e`.
    Power { coef: f64, exponent: f64 },
    /// `r^e K(r)` for any weight family.
    Weighted { exponent: f64, weight: WeightSpec },
    /// `c r^e (r^s/(1+r^s))^{σ/s}`.
    Saturating { coef: f64, exponent: f64, s: f64, sigma: f64 },
    /// Returns `(value, derivative)`.
    #[serde(skip)]
    Closure(ClosureWeight),
}

impl RadialFunction {
    pub fn closure(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        RadialFunction::Closure(ClosureWeight(Arc::new(f)))
    }

    /// `(value, r·value'/value)` at `r > 0`; `p` only matters for weights that use it.
    pub fn eval(&self, r: f64, p: f64) -> (f64, f64) {
        match self {
            RadialFunction::Power { coef, exponent } => (coef * r.powf(*exponent), *exponent),
            RadialFunction::Weighted { exponent, weight } => {
                let w = weight.eval(r, p);
                (r.powf(*exponent) * w.k, exponent + w.log_slope)
            }
            RadialFunction::Saturating { coef, exponent, s, sigma } => {
                let rs = r.powf(*s);
                let v = coef * r.powf(*exponent) * (rs / (1.0 + rs)).powf(sigma / s);
                (v, exponent + sigma / (1.0 + rs))
            }
            RadialFunction::Closure(c) => {
                let (v, d) = (c.0)(r);
                (v, r * d / v)
            }
        }
    }
}

/// Coefficients of `-(a φ_p(u'))' = b f(u)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralWeightPair {
    pub a: RadialFunction,
    pub b: RadialFunction,
}

/// On-disk form of an `(a, b)` problem; `n` is the dimension `N` chosen for the transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbModelConfig {
    pub p: f64,
    pub n: f64,
    pub a: RadialFunction,
    pub b: RadialFunction,
    pub nonlinearity: NonlinearitySpec,
}

impl AbModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        Parameters::new(c.p, c.n)?;
        Ok(c)
    }

    pub fn pair(&self) -> GeneralWeightPair {
        GeneralWeightPair { a: self.a.clone(), b: self.b.clone() }
    }
}

/// The `(a, b)` problem itself, integrated directly by the shooting code.
#[derive(Debug, Clone)]
pub struct AbOperator {
    pub p: f64,
    pub pair: GeneralWeightPair,
    pub nonlinearity: NonlinearitySpec,
}

impl RadialOperator for AbOperator {
    fn p(&self) -> f64 {
        self.p
    }

    fn a(&self, r: f64) -> f64 {
        self.pair.a.eval(r, self.p).0
    }

    fn b(&self, r: f64) -> f64 {
        self.pair.b.eval(r, self.p).0
    }

    fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }
}

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

// V(r) = V(r_j) + orient·∫_{r_j}^r g, tabulated on a log grid; V > 0 and monotone.
#[derive(Clone)]
struct MonotoneIntegral {
    r: Vec<f64>,
    v: Vec<f64>,
    orient: f64,
    g: Density,
    // ln r against ln V
    inverse: Hermite,
}

fn log_quad(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, scale: f64) -> Result<f64> {
    // ∫_lo^hi g(r) dr with r = e^x
    quad(|x| { let r = x.exp(); g(r) * r }, lo.ln(), hi.ln(), QuadOptions::tol(1e-16 * scale, 1e-13))
}

impl MonotoneIntegral {
    fn build(r: Vec<f64>, v: Vec<f64>, orient: f64, g: Density) -> Result<Self> {
        let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let (x, y) = if orient > 0.0 { (lv, lr) } else { (lv.into_iter().rev().collect(), lr.into_iter().rev().collect()) };
        if !x.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("the change of variables is not strictly monotone on the grid"));
        }
        let inverse = Hermite::monotone(x, y);
        Ok(Self { r, v, orient, g, inverse })
    }

    fn value(&self, r: f64) -> Result<f64> {
        let j = match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(j) => return Ok(self.v[j]),
            Err(j) => {
                if j == 0 {
                    0
                } else if j >= self.r.len() {
                    self.r.len() - 1
                } else if (r / self.r[j - 1]).ln() < (self.r[j] / r).ln() {
                    j - 1
                } else {
                    j
                }
            }
        };
        let piece = if r > self.r[j] {
            log_quad(self.g.as_ref(), self.r[j], r, self.v[j])?
        } else {
            -log_quad(self.g.as_ref(), r, self.r[j], self.v[j])?
        };
        Ok(self.v[j] + self.orient * piece)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.orient * (self.g)(r)
    }

    fn invert(&self, v: f64) -> Result<f64> {
        let lv = v.ln();
        let (lo, hi) = self.inverse.domain();
        let mut x = if lv <= lo {
            self.inverse.ys()[0] + self.inverse.slopes()[0] * (lv - lo)
        } else if lv >= hi {
            *self.inverse.ys().last().unwrap() + self.inverse.slopes().last().unwrap() * (lv - hi)
        } else {
            self.inverse.eval(lv)
        };
        // Newton polish on ln V(e^x) = ln v
        for _ in 0..4 {
            let r = x.exp();
            let val = self.value(r)?;
            let slope = r * self.derivative(r) / val;
            let dx = (val.ln() - lv) / slope;
            if !dx.is_finite() {
                break;
            }
            x -= dx.clamp(-0.5, 0.5);
            if dx.abs() < 1e-15 {
                break;
            }
        }
        Ok(x.exp())
    }
}

/// One row of the sampled transform table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapRow {
    pub r: f64,
    pub t: f64,
    pub h: f64,
    pub k_tilde: f64,
}

/// K-form model obtained from an `(a, b)` problem through `t = h(r)^{-(p-1)/(N-p)}`.
#[derive(Clone)]
pub struct TransformedModel {
    pub model: ProblemModel,
    pub table: Vec<MapRow>,
    pair: GeneralWeightPair,
    p: f64,
    big_n: f64,
    h: MonotoneIntegral,
}

impl std::fmt::Debug for TransformedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedModel")
            .field("p", &self.p)
            .field("n", &self.big_n)
            .field("rows", &self.table.len())
            .finish()
    }
}

/// Default radial grid for [`transform_ab_to_k`].
pub fn default_transform_grid() -> Vec<f64> {
    geomspace(1e-6, 1e6, 2401)
}

/// Transforms `-(a φ_p(u'))' = b f(u)` into `-(t^{N-1} φ_p(v_t))_t = t^{N-1} K̃(t) f(v)`.
pub fn transform_ab_to_k(
    pair: &GeneralWeightPair,
    p: f64,
    big_n: f64,
    nonlinearity: NonlinearitySpec,
    grid: &[f64],
) -> Result<TransformedModel> {
    let params = Parameters::new(p, big_n)?;
    if grid.len() < 2 || !grid.windows(2).all(|w| w[0] < w[1]) || grid[0] <= 0.0 {
        return Err(Error::Config("transform grid must be positive and strictly increasing".into()));
    }
    let pp = params.p_prime();
    let a_fn = pair.a.clone();
    let g: Density = Arc::new(move |r: f64| a_fn.eval(r, p).0.powf(1.0 - pp));
    let ls_a = |r: f64| pair.a.eval(r, p).1;

    // tail beyond the grid: integrate out to 10⁶ r_max, then a power-law remainder
    let r_top = *grid.last().unwrap();
    let far = r_top * 1e6;
    let beta = (1.0 - pp) * ls_a(far);
    if !(beta < -1.0) {
        return Err(Error::precondition(
            "a^{1-p'} is not integrable at infinity, so h(r) = ∫_r^∞ a^{1-p'} diverges",
            Some(Witness::new(far, format!("integrand log slope {beta} ≥ -1"))),
        ));
    }
    let beta0 = (1.0 - pp) * ls_a(grid[0]);
    if beta0 > -1.0 + 1e-9 {
        return Err(Error::precondition(
            "a^{1-p'} is integrable at the origin; h stays bounded and t = h^{-(p-1)/(N-p)} does not start at 0",
            Some(Witness::new(grid[0], format!("integrand log slope {beta0} > -1"))),
        ));
    }
    let tail = g(far) * far / (-beta - 1.0);
    let mut h = vec![0.0; grid.len()];
    h[grid.len() - 1] = tail + log_quad(g.as_ref(), r_top, far, tail)?;
    for i in (0..grid.len() - 1).rev() {
        h[i] = h[i + 1] + log_quad(g.as_ref(), grid[i], grid[i + 1], h[i + 1])?;
    }
    if let Some(i) = h.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::precondition("h(r) is not finite and positive", Some(Witness::new(grid[i], "h"))));
    }
    let h_map = MonotoneIntegral::build(grid.to_vec(), h.clone(), -1.0, g)?;

    let mut table = Vec::with_capacity(grid.len());
    let (mut ts, mut ks, mut dks) = (Vec::new(), Vec::new(), Vec::new());
    for (&r, &hv) in grid.iter().zip(&h) {
        let (kt, slope, t) = k_tilde_parts(pair, p, big_n, r, hv);
        table.push(MapRow { r, t, h: hv, k_tilde: kt });
        ts.push(t);
        ks.push(kt);
        dks.push(kt * slope / t);
    }
    let weight = WeightSpec::Tabulated(TabulatedWeight::new(ts, ks, Some(dks))?);
    let model = ProblemModel::new(params, weight, nonlinearity)?;
    Ok(TransformedModel { model, table, pair: pair.clone(), p, big_n, h: h_map })
}

// (K̃, tK̃'/K̃, t) at radius r given h(r)
fn k_tilde_parts(pair: &GeneralWeightPair, p: f64, big_n: f64, r: f64, h: f64) -> (f64, f64, f64) {
    let pp = p / (p - 1.0);
    let (a, la) = pair.a.eval(r, p);
    let (b, lb) = pair.b.eval(r, p);
    let e_h = big_n * (p - 1.0) / (big_n - p) + 1.0;
    let t = h.powf(-(p - 1.0) / (big_n - p));
    let k = ((big_n - p) / (p - 1.0)).powf(p) * a.powf(pp - 1.0) * b * h.powf(e_h);
    // r h'/h = -r a^{1-p'} / h
    let rh = -r * a.powf(1.0 - pp) / h;
    let dlnk = (pp - 1.0) * la + lb + e_h * rh;
    let dlnt = -(p - 1.0) / (big_n - p) * rh;
    (k, dlnk / dlnt, t)
}

impl TransformedModel {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dimension(&self) -> f64 {
        self.big_n
    }

    pub fn h(&self, r: f64) -> Result<f64> {
        self.h.value(r)
    }

    /// `r ↦ t`.
    pub fn forward(&self, r: f64) -> Result<f64> {
        Ok(self.h.value(r)?.powf(-(self.p - 1.0) / (self.big_n - self.p)))
    }

    /// `t ↦ r`.
    pub fn inverse(&self, t: f64) -> Result<f64> {
        self.h.invert(t.powf(-(self.big_n - self.p) / (self.p - 1.0)))
    }

    /// `dt/dr`.
    pub fn dt_dr(&self, r: f64) -> Result<f64> {
        let h = self.h.value(r)?;
        let t = h.powf(-(self.p - 1.0) / (self.big_n - self.p));
        Ok(t * (self.p - 1.0) / (self.big_n - self.p) * (-self.h.derivative(r)) / h)
    }

    /// `(K̃(t(r)), t K̃'/K̃)` from the closed formula, at any radius.
    pub fn k_tilde_at(&self, r: f64) -> Result<(f64, f64)> {
        let h = self.h.value(r)?;
        let (k, s, _) = k_tilde_parts(&self.pair, self.p, self.big_n, r, h);
        Ok((k, s))
    }

    /// Right side of `p + tK̃_t/K̃ = p'(N-p)/(p-1)·((a'/(pa) + b'/(p'b)) h/|h'| - (p-1))`.
    pub fn g_tilde_identity(&self, r: f64) -> Result<f64> {
        let p = self.p;
        let pp = p / (p - 1.0);
        let h = self.h.value(r)?;
        let hp = self.h.derivative(r).abs();
        let (_, la) = self.pair.a.eval(r, p);
        let (_, lb) = self.pair.b.eval(r, p);
        let bracket = (la / p + lb / pp) / r * h / hp;
        Ok(pp * (self.big_n - p) / (p - 1.0) * (bracket - (p - 1.0)))
    }

    /// `(u(r), u'(r))` of the original problem from a trajectory of the transformed model.
    pub fn pull_back(&self, traj: &Trajectory, r: f64) -> Result<(f64, f64)> {
        let t = self.forward(r)?;
        let s = traj.state_at(t)?;
        Ok((s.u, s.du * self.dt_dr(r)?))
    }
}

/// `t(r) = ∫₀^r K^{1/p}` and `q(t) = r^{n-1} K^{1/p'}` for a K-form model.
#[derive(Clone)]
pub struct QtChange {
    model: ProblemModel,
    t: MonotoneIntegral,
}

impl std::fmt::Debug for QtChange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QtChange").field("nodes", &self.t.r.len()).finish()
    }
}

/// Builds the weighted-radius change on the default working range `[10⁻⁶, 10⁶]`.
pub fn qt_change(model: &ProblemModel) -> Result<QtChange> {
    qt_change_on(model, &geomspace(1e-6, 1e6, 1201))
}

pub fn qt_change_on(model: &ProblemModel, grid: &[f64]) -> Result<QtChange> {
    let p = model.p();
    let m = model.clone();
    let g: Density = Arc::new(move |r: f64| m.k(r).powf(1.0 / p));
    let mut v = vec![t_of_r(model, grid[0]).map_err(|e| Error::Domain {
        message: format!("∫₀ K^{{1/p}} does not converge near the origin: {e}"),
        witness: Some(Witness::new(grid[0], "r")),
    })?];
    for w in grid.windows(2) {
        let last = *v.last().unwrap();
        v.push(last + log_quad(g.as_ref(), w[0], w[1], last)?);
    }
    Ok(QtChange { model: model.clone(), t: MonotoneIntegral::build(grid.to_vec(), v, 1.0, g)? })
}

impl QtChange {
    pub fn t_of_r(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        self.t.value(r)
    }

    pub fn r_of_t(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        self.t.invert(t)
    }

    /// `q` at the radius `r` (that is, `q(t(r))`).
    pub fn q_at_r(&self, r: f64) -> f64 {
        let pp = self.model.params.p_prime();
        r.powf(self.model.n() - 1.0) * self.model.k(r).powf(1.0 / pp)
    }

    pub fn q(&self, t: f64) -> Result<f64> {
        Ok(self.q_at_r(self.r_of_t(t)?))
    }

    /// `t q_t / q` at the radius `r`.
    pub fn tq_ratio_at_r(&self, r: f64) -> Result<f64> {
        let w = self.model.weight_at(r);
        let pp = self.model.params.p_prime();
        let t = self.t_of_r(r)?;
        let dt_dr = w.k.powf(1.0 / self.model.p());
        Ok(t / (r * dt_dr) * (self.model.n() - 1.0 + w.log_slope / pp))
    }

    /// Upper bound `(n-p)p/g(r) + p - 1` for `t q_t / q`.
    pub fn tq_bound_at_r(&self, r: f64) -> f64 {
        let (p, n) = (self.model.p(), self.model.n());
        (n - p) * p / self.model.g(r) + p - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportVerdict {
    Finite,
    Infinite,
    Inconclusive,
}

/// Outcome of the compact-support integral `∫₀^δ |F(u)|^{-e} du`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactSupport {
    pub verdict: SupportVerdict,
    pub finite: bool,
    /// The integral, or `∞` when divergence was detected.
    pub value: f64,
    /// Estimates after each refinement, with the lower cut-off used.
    pub estimates: Vec<(f64, f64)>,
}

const SUPPORT_CONVERGED: f64 = 1e-8;
const SUPPORT_GROWTH: f64 = 0.1;

/// Decides finiteness of `∫₀^δ |F(u)|^{-exponent} du`.
///
/// Refinement `k` integrates down to `u = δ e^{-Y_k}` with `Y_k = 2^{k/2}`.
pub fn compact_support_test(nl: &NonlinearitySpec, exponent: f64, delta: f64) -> Result<CompactSupport> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::Config(format!("exponent must lie in (0, 1), got {exponent}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    for &u in &geomspace(1e-12 * delta, delta, 200) {
        let f = nl.big_f(u)?;
        if !(f < 0.0) {
            return Err(Error::precondition(
                "F must be negative on (0, delta]",
                Some(Witness::new(u, format!("F(u) = {f:e} ≥ 0"))),
            ));
        }
    }
    let integrand = |y: f64| -> f64 {
        let u = delta * (-y).exp();
        match nl.big_f(u) {
            Ok(f) if f < 0.0 => (-f).powf(-exponent) * u,
            _ => f64::NAN,
        }
    };
    let mut estimates = Vec::new();
    let mut total = 0.0;
    let mut y_lo = 0.0;
    let mut small = 0;
    let mut growth_run = 0;
    let mut verdict = SupportVerdict::Inconclusive;
    for k in 0..40 {
        let y_hi = 2f64.powf(0.5 * k as f64);
        let piece = match quad(integrand, y_lo, y_hi, QuadOptions::tol(1e-300, 1e-12)) {
            Ok(v) if v.is_finite() => v,
            _ => break,
        };
        let prev = total;
        total += piece;
        estimates.push((delta * (-y_hi).exp(), total));
        if k > 0 {
            let change = piece / prev;
            small = if change < SUPPORT_CONVERGED { small + 1 } else { 0 };
            growth_run = if change >= SUPPORT_GROWTH { growth_run + 1 } else { 0 };
            if small >= 3 {
                verdict = SupportVerdict::Finite;
                break;
            }
        }
        y_lo = y_hi;
    }
    if verdict == SupportVerdict::Inconclusive && growth_run >= 3 {
        verdict = SupportVerdict::Infinite;
    }
    Ok(CompactSupport {
        verdict,
        finite: verdict == SupportVerdict::Finite,
        value: if verdict == SupportVerdict::Infinite { f64::INFINITY } else { total },
        estimates,
    })
}
