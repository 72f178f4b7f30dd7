//! Radial weights `K(r) > 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp::{monotone_slopes, Hermite};

/// `K`, `K'` and the logarithmic slope `r K'(r)/K(r)` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEval {
    pub k: f64,
    pub dk: f64,
    pub log_slope: f64,
}

impl WeightEval {
    fn from_log_slope(r: f64, k: f64, log_slope: f64) -> Self {
        Self {
            k,
            dk: k * log_slope / r,
            log_slope,
        }
    }
}

/// User-supplied weight returning `(K(r), K'(r))`.
#[derive(Clone)]
pub struct ClosureWeight(pub Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>);

impl fmt::Debug for ClosureWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosureWeight(..)")
    }
}

/// Sampled weight, interpolated as `log K` against `log r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedData", into = "TabulatedData")]
pub struct TabulatedWeight {
    data: TabulatedData,
    curve: Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedData {
    pub r: Vec<f64>,
    pub k: Vec<f64>,
    /// Optional exact derivatives `K'(r)`; monotone slopes are used otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dk: Option<Vec<f64>>,
}

impl TryFrom<TabulatedData> for TabulatedWeight {
    type Error = Error;

    fn try_from(data: TabulatedData) -> Result<Self> {
        let n = data.r.len();
        if n < 2 || data.k.len() != n || data.dk.as_ref().is_some_and(|d| d.len() != n) {
            return Err(Error::Config("tabulated weight needs ≥2 samples with matching lengths".into()));
        }
        if !data.r.windows(2).all(|w| w[0] < w[1]) || data.r[0] <= 0.0 {
            return Err(Error::Config("tabulated radii must be positive and strictly increasing".into()));
        }
        if let Some(i) = data.k.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!("tabulated weight not positive at r={}", data.r[i])));
        }
        let x: Vec<f64> = data.r.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = data.k.iter().map(|k| k.ln()).collect();
        let slopes = match &data.dk {
            Some(dk) => data.r.iter().zip(&data.k).zip(dk).map(|((r, k), d)| r * d / k).collect(),
            None => monotone_slopes(&x, &y),
        };
        let curve = Hermite::with_slopes(x, y, slopes);
        Ok(Self { data, curve })
    }
}

impl From<TabulatedWeight> for TabulatedData {
    fn from(w: TabulatedWeight) -> Self {
        w.data
    }
}

impl TabulatedWeight {
    pub fn new(r: Vec<f64>, k: Vec<f64>, dk: Option<Vec<f64>>) -> Result<Self> {
        TabulatedData { r, k, dk }.try_into()
    }

    pub fn data(&self) -> &TabulatedData {
        &self.data
    }

    fn eval(&self, r: f64) -> WeightEval {
        let x = r.ln();
        let (lo, hi) = self.curve.domain();
        // outside the table: power law with the end slope
        let (y, s) = if x < lo {
            let s = self.curve.slopes()[0];
            (self.curve.ys()[0] + s * (x - lo), s)
        } else if x > hi {
            let s = *self.curve.slopes().last().unwrap();
            (*self.curve.ys().last().unwrap() + s * (x - hi), s)
        } else {
            self.curve.eval_with_slope(x)
        };
        WeightEval::from_log_slope(r, y.exp(), s)
    }
}

/// Breakpoint of the log-Gaussian weight (see [`WeightSpec::LogGaussian`]).
pub const LOG_GAUSSIAN_JOIN: f64 = 0.36787944117144233;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `1/(1+r^σ)`.
    Matukuma { sigma: f64 },
    /// `r^{σ-2} (1+r²)^{-σ/2}`, the stellar-structure weight written in K-form.
    Stellar { sigma: f64 },
    /// `r^θ`; `θ = 0` is the unweighted operator.
    Power { theta: f64 },
    /// K-form of `div(|x|^k |Du|^{p-2} Du) + |x|^ℓ (|x|^s/(1+|x|^s))^{σ/s} f(u) = 0`
    /// in dimension `dim` after the `h`-transform (closed form; the radial
    /// variable of this weight is the transformed radius).
    PowerGeneral { k: f64, l: f64, s: f64, sigma: f64, dim: f64 },
    /// `r^θ log^{a}(1+r)`.
    PowerLog { theta: f64, a_exp: f64 },
    /// `r^θ exp(-(log r)²/2)` up to `r = 1/e`, continued as the C¹-matched
    /// power law `K(1/e) (e r)^{θ+1}` beyond.
    LogGaussian { theta: f64 },
    Tabulated(TabulatedWeight),
    #[serde(skip)]
    Closure(ClosureWeight),
}

impl WeightSpec {
    pub fn closure(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        WeightSpec::Closure(ClosureWeight(Arc::new(f)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::Matukuma { .. } => "matukuma",
            WeightSpec::Stellar { .. } => "stellar",
            WeightSpec::Power { .. } => "power",
            WeightSpec::PowerGeneral { .. } => "power_general",
            WeightSpec::PowerLog { .. } => "power_log",
            WeightSpec::LogGaussian { .. } => "log_gaussian",
            WeightSpec::Tabulated(_) => "tabulated",
            WeightSpec::Closure(_) => "closure",
        }
    }

    /// `p + rK'/K` is unbounded as `r → 0⁺`.
    pub fn log_slope_unbounded_at_origin(&self) -> bool {
        matches!(self, WeightSpec::LogGaussian { .. })
    }

    /// Evaluates the weight at `r > 0`; `p` is only used by `power_general`.
    pub fn eval(&self, r: f64, p: f64) -> WeightEval {
        match *self {
            WeightSpec::Matukuma { sigma } => {
                let rs = r.powf(sigma);
                let k = 1.0 / (1.0 + rs);
                WeightEval::from_log_slope(r, k, -sigma * rs * k)
            }
            WeightSpec::Stellar { sigma } => {
                let r2 = r * r;
                let k = r.powf(sigma - 2.0) * (1.0 + r2).powf(-0.5 * sigma);
                WeightEval::from_log_slope(r, k, sigma / (1.0 + r2) - 2.0)
            }
            WeightSpec::Power { theta } => WeightEval::from_log_slope(r, r.powf(theta), theta),
            WeightSpec::PowerGeneral { k, l, s, sigma, dim } => {
                let g = PowerGeneralConsts::new(k, l, dim, p);
                let rho = (r / g.c_t).powf(1.0 / g.gamma);
                let rs = rho.powf(s);
                let kk = g.prefactor * rho.powf(g.exponent) * (rs / (1.0 + rs)).powf(sigma / s);
                let ls = (g.exponent + sigma / (1.0 + rs)) / g.gamma;
                WeightEval::from_log_slope(r, kk, ls)
            }
            WeightSpec::PowerLog { theta, a_exp } => {
                let l1p = r.ln_1p();
                let k = r.powf(theta) * l1p.powf(a_exp);
                let ratio = if r < 1e-8 { 1.0 - 0.5 * r } else { r / ((1.0 + r) * l1p) };
                WeightEval::from_log_slope(r, k, theta + a_exp * ratio)
            }
            WeightSpec::LogGaussian { theta } => {
                if r <= LOG_GAUSSIAN_JOIN {
                    let lr = r.ln();
                    let k = (theta * lr - 0.5 * lr * lr).exp();
                    WeightEval::from_log_slope(r, k, theta - lr)
                } else {
                    // K(1/e) = e^{-θ-1/2}
                    let k = (-theta - 0.5).exp() * (r / LOG_GAUSSIAN_JOIN).powf(theta + 1.0);
                    WeightEval::from_log_slope(r, k, theta + 1.0)
                }
            }
            WeightSpec::Tabulated(ref t) => t.eval(r),
            WeightSpec::Closure(ref c) => {
                let (k, dk) = (c.0)(r);
                WeightEval { k, dk, log_slope: r * dk / k }
            }
        }
    }
}

impl WeightSpec {
    /// `g(r) = p + rK'(r)/K(r)`, grouped so that `p` cancels exactly where it can.
    pub fn g(&self, r: f64, p: f64) -> f64 {
        match *self {
            WeightSpec::Matukuma { sigma } => (p - sigma) + sigma / (1.0 + r.powf(sigma)),
            WeightSpec::Stellar { sigma } => (p - 2.0) + sigma / (1.0 + r * r),
            WeightSpec::PowerGeneral { k, l, s, sigma, dim } => {
                let g = PowerGeneralConsts::new(k, l, dim, p);
                let rs = (r / g.c_t).powf(s / g.gamma);
                (p + g.exponent / g.gamma) + sigma / ((1.0 + rs) * g.gamma)
            }
            WeightSpec::PowerLog { theta, .. } | WeightSpec::LogGaussian { theta } => {
                (p + theta) + (self.eval(r, p).log_slope - theta)
            }
            _ => p + self.eval(r, p).log_slope,
        }
    }
}

/// Constants of the closed-form transformed weight for `power_general`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerGeneralConsts {
    /// `t = c_t r^γ`
    pub c_t: f64,
    pub gamma: f64,
    pub exponent: f64,
    pub prefactor: f64,
}

impl PowerGeneralConsts {
    pub fn new(k: f64, l: f64, dim: f64, p: f64) -> Self {
        let big_n = dim;
        // h(r) = c_h r^β
        let c_h = (p - 1.0) / (big_n + k - p);
        let beta = (big_n + k - p) / (1.0 - p);
        let e_h = big_n * (p - 1.0) / (big_n - p) + 1.0;
        let gamma = (big_n + k - p) / (big_n - p);
        let c_t = c_h.powf(-(p - 1.0) / (big_n - p));
        let exponent = (big_n + k - 1.0) / (p - 1.0) + big_n + l - 1.0 + beta * e_h;
        let prefactor = ((big_n - p) / (p - 1.0)).powf(p) * c_h.powf(e_h);
        Self { c_t, gamma, exponent, prefactor }
    }
}
