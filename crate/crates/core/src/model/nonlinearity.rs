//! Nonlinearities `f` with a single positive zero `u₀`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Witness};
use crate::numerics::quad::{quad, QuadOptions};

/// User-supplied nonlinearity. `df` is only consulted for `u ≥ u0`.
#[derive(Clone)]
pub struct ClosureNonlinearity {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub u0: f64,
}

impl fmt::Debug for ClosureNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureNonlinearity {{ u0: {} }}", self.u0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `u^{q₁} - u^{q₂}`, zero at `u₀ = 1`.
    PowerDiff { q1: f64, q2: f64 },
    #[serde(skip)]
    Closure(ClosureNonlinearity),
}

impl NonlinearitySpec {
    pub fn closure(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u0: f64,
    ) -> Self {
        NonlinearitySpec::Closure(ClosureNonlinearity {
            f: Arc::new(f),
            df: Arc::new(df),
            u0,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            NonlinearitySpec::PowerDiff { .. } => "power_diff",
            NonlinearitySpec::Closure(_) => "closure",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            NonlinearitySpec::PowerDiff { q1, q2 } => {
                if !(q1 > 0.0 && q2 > 0.0 && q1 > q2 && q1.is_finite()) {
                    return Err(Error::Config(format!("power_diff needs q1 > q2 > 0, got q1={q1}, q2={q2}")));
                }
            }
            NonlinearitySpec::Closure(ref c) => {
                if !(c.u0 > 0.0 && c.u0.is_finite()) {
                    return Err(Error::Config(format!("closure nonlinearity needs u0 > 0, got {}", c.u0)));
                }
            }
        }
        Ok(())
    }

    pub fn u0(&self) -> f64 {
        match self {
            NonlinearitySpec::PowerDiff { .. } => 1.0,
            NonlinearitySpec::Closure(c) => c.u0,
        }
    }

    /// `f(u)` for `u ≥ 0`.
    pub fn f(&self, u: f64) -> f64 {
        match self {
            NonlinearitySpec::PowerDiff { q1, q2 } => {
                if u == 0.0 {
                    0.0
                } else {
                    // stays accurate near the zero at u = 1
                    u.powf(*q2) * ((q1 - q2) * u.ln()).exp_m1()
                }
            }
            NonlinearitySpec::Closure(c) => (c.f)(u),
        }
    }

    /// Odd extension of `f` to `u < 0`, used only for trial steps that
    /// overshoot the zero of `u`.
    pub fn f_ext(&self, u: f64) -> f64 {
        if u >= 0.0 {
            self.f(u)
        } else {
            -self.f(-u)
        }
    }

    /// `f'(u)`; at `u₀` this is the right derivative.
    pub fn df(&self, u: f64) -> Result<f64> {
        match self {
            NonlinearitySpec::PowerDiff { q1, q2 } => {
                if u <= 0.0 {
                    return Err(Error::Domain {
                        message: "f' of power_diff is not defined at u ≤ 0".into(),
                        witness: Some(Witness::new(u, "u ≤ 0")),
                    });
                }
                Ok(q1 * u.powf(q1 - 1.0) - q2 * u.powf(q2 - 1.0))
            }
            NonlinearitySpec::Closure(c) => {
                if u < c.u0 {
                    return Err(Error::Domain {
                        message: "f' of a closure nonlinearity is only available for u ≥ u0".into(),
                        witness: Some(Witness::new(u, format!("u < u0 = {}", c.u0))),
                    });
                }
                Ok((c.df)(u))
            }
        }
    }

    /// `F(u) = ∫₀ᵘ f`.
    pub fn big_f(&self, u: f64) -> Result<f64> {
        match *self {
            NonlinearitySpec::PowerDiff { q1, q2 } => {
                Ok(u.powf(q1 + 1.0) / (q1 + 1.0) - u.powf(q2 + 1.0) / (q2 + 1.0))
            }
            NonlinearitySpec::Closure(ref c) => quad(|x| (c.f)(x), 0.0, u, QuadOptions::default()),
        }
    }

    /// `F₀(u) = ∫_{u₀}^u f`, computed without the cancellation in `F(u) - F(u₀)`.
    pub fn big_f0(&self, u: f64) -> Result<f64> {
        match *self {
            NonlinearitySpec::PowerDiff { q1, q2 } => {
                let l = u.ln();
                let (a, b) = (q1 + 1.0, q2 + 1.0);
                let direct = (a * l).exp_m1() / a - (b * l).exp_m1() / b;
                if (u - 1.0).abs() > 1e-3 {
                    return Ok(direct);
                }
                // near u₀ both terms cancel to second order; integrate instead
                quad(|x| self.f(x), 1.0, u, QuadOptions::default())
            }
            NonlinearitySpec::Closure(ref c) => quad(|x| (c.f)(x), c.u0, u, QuadOptions::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_diff_zero_and_primitives() {
        let nl = NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 };
        assert_eq!(nl.u0(), 1.0);
        assert_eq!(nl.f(1.0), 0.0);
        for &u in &[0.1, 0.7, 0.9995, 1.0, 1.0003, 1.4, 3.0] {
            let by_quad = quad(|x| nl.f(x), 0.0, u, QuadOptions::default()).unwrap();
            assert!((nl.big_f(u).unwrap() - by_quad).abs() < 1e-12);
            let f0 = nl.big_f0(u).unwrap();
            let diff = nl.big_f(u).unwrap() - nl.big_f(1.0).unwrap();
            assert!((f0 - diff).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn f0_is_positive_near_u0() {
        let nl = NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 };
        for &d in &[1e-9, 1e-6, 1e-4] {
            let f0 = nl.big_f0(1.0 + d).unwrap();
            // F₀ ≈ f'(1) d²/2 with f'(1) = 5/2
            assert!((f0 / (1.25 * d * d) - 1.0).abs() < 1e-3, "d={d}: {f0}");
        }
    }

    #[test]
    fn df_matches_finite_difference() {
        let nl = NonlinearitySpec::PowerDiff { q1: 1.5, q2: 0.25 };
        for &u in &[1.0, 1.2, 4.0] {
            let h = 1e-6;
            let fd = (nl.f(u + h) - nl.f(u - h)) / (2.0 * h);
            assert!((nl.df(u).unwrap() - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn closure_derivative_below_u0_is_a_domain_error() {
        let nl = NonlinearitySpec::closure(|u| u * u - 1.0, |u| 2.0 * u, 1.0);
        assert!(nl.df(0.5).is_err());
        assert_eq!(nl.df(2.0).unwrap(), 4.0);
    }

    #[test]
    fn odd_extension() {
        let nl = NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 };
        assert_eq!(nl.f_ext(-0.3), -nl.f(0.3));
    }
}
