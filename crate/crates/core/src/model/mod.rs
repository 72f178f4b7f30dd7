//! Problem instances `-Δ_p u = K(|x|) f(u)` in radial form and their hypotheses.

mod hypotheses;
mod nonlinearity;
mod weight;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use hypotheses::{
    check_example_conditions, check_f_hypotheses, check_k1, plateau_slack, HypothesisCheck, HypothesisReport,
};
pub use nonlinearity::{ClosureNonlinearity, NonlinearitySpec};
pub use weight::{ClosureWeight, TabulatedData, TabulatedWeight, WeightEval, WeightSpec, LOG_GAUSSIAN_JOIN};
#[allow(unused_imports)]
pub(crate) use weight::PowerGeneralConsts;

use crate::error::{Error, Result, Witness};
use crate::numerics::geomspace;

/// Exponent `p` and (possibly fractional) dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub p: f64,
    pub n: f64,
}

impl Parameters {
    pub fn new(p: f64, n: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("p must exceed 1, got {p}")));
        }
        if !(n > p && n.is_finite()) {
            return Err(Error::Config(format!("n must exceed p, got n={n}, p={p}")));
        }
        Ok(Self { p, n })
    }

    /// Conjugate exponent `p/(p-1)`.
    pub fn p_prime(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

/// The radial operator `(a(r) φ_p(u'))' = -b(r) f(u)` that the shooting code integrates.
pub trait RadialOperator: Send + Sync {
    fn p(&self) -> f64;
    fn a(&self, r: f64) -> f64;
    fn b(&self, r: f64) -> f64;
    fn nonlinearity(&self) -> &NonlinearitySpec;
    /// Whether integration should run in `t = ∫K^{1/p}` (for `K = b/a`).
    fn prefers_t_clock(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ProblemModel {
    pub params: Parameters,
    pub weight: WeightSpec,
    pub nonlinearity: NonlinearitySpec,
}

/// On-disk form of a [`ProblemModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub p: f64,
    pub n: f64,
    pub weight: WeightSpec,
    pub nonlinearity: NonlinearitySpec,
}

impl TryFrom<ModelConfig> for ProblemModel {
    type Error = Error;

    fn try_from(c: ModelConfig) -> Result<Self> {
        ProblemModel::new(Parameters::new(c.p, c.n)?, c.weight, c.nonlinearity)
    }
}

impl From<ProblemModel> for ModelConfig {
    fn from(m: ProblemModel) -> Self {
        ModelConfig {
            p: m.params.p,
            n: m.params.n,
            weight: m.weight,
            nonlinearity: m.nonlinearity,
        }
    }
}

impl ProblemModel {
    pub fn new(params: Parameters, weight: WeightSpec, nonlinearity: NonlinearitySpec) -> Result<Self> {
        nonlinearity.validate()?;
        if let WeightSpec::PowerGeneral { k, l, s, sigma, dim } = weight {
            if (dim - params.n).abs() > 1e-12 * params.n {
                return Err(Error::Config(format!("power_general dimension {dim} differs from n = {}", params.n)));
            }
            if !(s > 0.0 && sigma > 0.0) {
                return Err(Error::Config("power_general needs s > 0 and sigma > 0".into()));
            }
            if !check_example_conditions(k, l, dim, params.p) {
                return Err(Error::Config(format!(
                    "power_general needs N + k > p and l ≥ k - p (k={k}, l={l}, N={dim}, p={})",
                    params.p
                )));
            }
        }
        Ok(Self { params, weight, nonlinearity })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn n(&self) -> f64 {
        self.params.n
    }

    pub fn u0(&self) -> f64 {
        self.nonlinearity.u0()
    }

    pub fn weight_at(&self, r: f64) -> WeightEval {
        self.weight.eval(r, self.params.p)
    }

    pub fn k(&self, r: f64) -> f64 {
        self.weight_at(r).k
    }

    /// `g(r) = p + rK'(r)/K(r)`.
    pub fn g(&self, r: f64) -> f64 {
        self.weight.g(r, self.params.p)
    }

    pub fn f(&self, u: f64) -> f64 {
        self.nonlinearity.f(u)
    }

    pub fn big_f(&self, u: f64) -> Result<f64> {
        self.nonlinearity.big_f(u)
    }

    /// Runs the `K` and `f` checks on default grids.
    pub fn check_hypotheses(&self) -> Result<HypothesisReport> {
        let k1 = check_k1(&self.weight, &self.params, &geomspace(1e-6, 1e6, 241))?;
        let u0 = self.u0();
        let f = check_f_hypotheses(&self.nonlinearity, &self.params, &default_u_grid(u0))?;
        Ok(k1.merge(f))
    }
}

/// Geometric grid on `[10⁻³u₀, 10²u₀]` with `u₀` itself included.
pub fn default_u_grid(u0: f64) -> Vec<f64> {
    let mut g = geomspace(1e-3 * u0, 1e2 * u0, 300);
    g.push(u0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

impl RadialOperator for ProblemModel {
    fn p(&self) -> f64 {
        self.params.p
    }

    fn a(&self, r: f64) -> f64 {
        r.powf(self.params.n - 1.0)
    }

    fn b(&self, r: f64) -> f64 {
        r.powf(self.params.n - 1.0) * self.k(r)
    }

    fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    fn prefers_t_clock(&self) -> bool {
        self.weight.log_slope_unbounded_at_origin()
    }
}

/// Every pointwise model quantity at `(r, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEval {
    pub k: f64,
    pub dk: f64,
    pub g: f64,
    pub f: f64,
    /// `None` below `u₀` when the nonlinearity has no derivative there.
    pub df: Option<f64>,
    pub big_f: f64,
    pub big_f0: f64,
}

pub fn eval_model(model: &ProblemModel, r: f64, u: f64) -> Result<PointEval> {
    if !(r > 0.0) {
        return Err(Error::Domain {
            message: "model is evaluated at r > 0 only".into(),
            witness: Some(Witness::new(r, "r ≤ 0")),
        });
    }
    if !(u >= 0.0) {
        return Err(Error::Domain {
            message: "model is evaluated at u ≥ 0 only".into(),
            witness: Some(Witness::new(u, "u < 0")),
        });
    }
    let w = model.weight_at(r);
    let nl = &model.nonlinearity;
    let df = if u >= nl.u0() { Some(nl.df(u)?) } else { nl.df(u).ok() };
    Ok(PointEval {
        k: w.k,
        dk: w.dk,
        g: model.params.p + w.log_slope,
        f: nl.f(u),
        df,
        big_f: nl.big_f(u)?,
        big_f0: nl.big_f0(u)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ProblemModel {
        ProblemModel::new(
            Parameters::new(2.0, 3.0).unwrap(),
            WeightSpec::Matukuma { sigma: 1.0 },
            NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 },
        )
        .unwrap()
    }

    #[test]
    fn matukuma_point() {
        let e = eval_model(&canonical(), 1.0, 1.0).unwrap();
        assert_eq!(e.k, 0.5);
        assert_eq!(e.g, 1.5);
        assert_eq!(e.f, 0.0);
        assert_eq!(e.big_f0, 0.0);
    }

    #[test]
    fn constant_weight_g_is_p() {
        let m = ProblemModel::new(
            Parameters::new(3.0, 4.0).unwrap(),
            WeightSpec::Power { theta: 0.0 },
            NonlinearitySpec::PowerDiff { q1: 4.0, q2: 1.0 },
        )
        .unwrap();
        for &r in &[1e-3, 1.0, 1e3] {
            assert_eq!(eval_model(&m, r, 2.0).unwrap().g, 3.0);
        }
    }

    #[test]
    fn nonpositive_radius_is_a_domain_error() {
        let err = eval_model(&canonical(), 0.0, 1.0).unwrap_err();
        assert_eq!(err.code(), "domain");
        assert!(err.witness().is_some());
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let json = r#"{"p":2,"n":3,"weight":{"family":"matukuma","params":{"sigma":2}},
            "nonlinearity":{"family":"power_diff","params":{"q1":3,"q2":0.5}}}"#;
        let m = ProblemModel::from_json(json).unwrap();
        let back = ProblemModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.params, m.params);
        let extra = json.replacen("\"p\":2", "\"p\":2,\"q\":1", 1);
        assert!(ProblemModel::from_json(&extra).is_err());
        let bad_n = json.replacen("\"n\":3", "\"n\":1.5", 1);
        assert!(ProblemModel::from_json(&bad_n).is_err());
    }

    #[test]
    fn canonical_hypotheses_pass() {
        let rep = canonical().check_hypotheses().unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }
}
