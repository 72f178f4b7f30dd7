use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits for one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_max: f64,
    /// Size of the startup region around the origin, in `t = ∫K^{1/p}` units.
    pub startup_radius: f64,
    pub max_steps: usize,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            r_max: 1e6,
            startup_radius: 1e-4,
            max_steps: 200_000,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.abs_tol && self.abs_tol <= self.rel_tol && self.rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < abs_tol ≤ rel_tol < 1, got abs_tol={:e}, rel_tol={:e}",
                self.abs_tol, self.rel_tol
            )));
        }
        if !(self.r_max > self.startup_radius && self.startup_radius > 0.0) {
            return Err(Error::Config(format!(
                "need r_max > startup_radius > 0, got r_max={:e}, startup_radius={:e}",
                self.r_max, self.startup_radius
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same controls with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }

    /// Same controls with `rel_tol = tol` and `abs_tol = tol/100`.
    pub fn with_tol(&self, tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol * 1e-2,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        IntegratorControls::default().validate().unwrap();
    }

    #[test]
    fn inverted_tolerances_rejected() {
        let c = IntegratorControls { abs_tol: 1e-6, rel_tol: 1e-8, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
