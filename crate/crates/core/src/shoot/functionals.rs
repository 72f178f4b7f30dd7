//! Quantities derived from trajectories: energy, inverse profile, `F̄`, `I`, `W`.

use serde::Serialize;

use super::trajectory::Trajectory;
use crate::error::{Error, Result, Witness};
use crate::model::ProblemModel;

/// `E(r) = |u'|^p/(p'K) + F(u)` and `dE/dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue {
    pub e: f64,
    pub de_dr: f64,
}

fn energy_from_state(model: &ProblemModel, r: f64, u: f64, du: f64) -> Result<EnergyValue> {
    let p = model.p();
    let pp = model.params.p_prime();
    let big_f = model.big_f(u.max(0.0))?;
    if r <= 0.0 {
        return Ok(EnergyValue { e: big_f, de_dr: 0.0 });
    }
    let w = model.weight_at(r);
    let kin = du.abs().powf(p);
    let e = kin / (pp * w.k) + big_f;
    let de_dr = -kin / (pp * r * w.k) * ((model.n() - 1.0) * p / (p - 1.0) + w.log_slope);
    Ok(EnergyValue { e, de_dr })
}

/// Energy at radius `r`; at `r = 0` this is the limit `F(α)`.
pub fn energy(model: &ProblemModel, traj: &Trajectory, r: f64) -> Result<EnergyValue> {
    let s = traj.state_at(r)?;
    energy_from_state(model, r, s.u, s.du)
}

/// Energy at every trajectory node.
pub fn node_energies(model: &ProblemModel, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.nodes
        .iter()
        .zip(&traj.states)
        .map(|(&r, s)| energy_from_state(model, r, s.u, s.du).map(|e| e.e))
        .collect()
}

/// Inverse `t(s)` of a decreasing profile on `[u(R), α]`.
#[derive(Debug, Clone)]
pub struct InverseProfile<'a> {
    traj: &'a Trajectory,
    /// Node values of `u`, strictly decreasing.
    pub s_grid: Vec<f64>,
    /// Radii at which `u` takes the values in `s_grid`.
    pub t_grid: Vec<f64>,
}

/// Builds the inverse profile of `traj`.
pub fn invert_profile(traj: &Trajectory) -> Result<InverseProfile<'_>> {
    let mut s_grid = vec![traj.alpha];
    let mut t_grid = vec![0.0];
    for (&r, st) in traj.nodes.iter().zip(&traj.states).skip(1) {
        let last = *s_grid.last().unwrap();
        if st.u < last {
            s_grid.push(st.u);
            t_grid.push(r);
        } else if st.u > last {
            return Err(Error::Domain {
                message: "trajectory is not decreasing; it cannot be inverted".into(),
                witness: Some(Witness::new(r, format!("u = {} after {}", st.u, last))),
            });
        }
    }
    Ok(InverseProfile { traj, s_grid, t_grid })
}

impl InverseProfile<'_> {
    pub fn s_min(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    /// Whether the profile reaches level `s`, up to rounding in the terminal value.
    pub fn reaches(&self, s: f64) -> bool {
        s >= self.s_min() - 8.0 * f64::EPSILON * self.traj.alpha
    }

    /// `t(s)`, with `s` clamped to `[u(R), α]`.
    pub fn t(&self, s: f64) -> f64 {
        let s = s.clamp(self.s_min(), self.traj.alpha);
        // index of the first node with u ≤ s
        let i = self.s_grid.partition_point(|&v| v > s);
        if i >= self.s_grid.len() {
            return *self.t_grid.last().unwrap();
        }
        if self.s_grid[i] == s {
            return self.t_grid[i];
        }
        let (lo, hi) = (self.t_grid[i - 1], self.t_grid[i]);
        let (flo, fhi) = (self.s_grid[i - 1] - s, self.s_grid[i] - s);
        crate::numerics::roots::brent_known(
            |r| self.traj.u_at(r).map(|u| u - s).unwrap_or(f64::NAN),
            lo,
            hi,
            flo,
            fhi,
            1e-15 * hi,
        )
        .unwrap_or(0.5 * (lo + hi))
    }

    /// `dt/ds = 1/u'(t(s))`.
    pub fn dt_ds(&self, s: f64) -> f64 {
        let t = self.t(s);
        let du = self.traj.state_at(t).map(|st| st.du).unwrap_or(f64::NAN);
        1.0 / du
    }
}

/// Tail integrals `F̄(s) = ∫_{t₁(s)}^{R₁} r^p K f(u₁) |u₁'| dr` along a reference shot.
#[derive(Debug, Clone)]
pub struct ReferenceFbar<'a> {
    model: &'a ProblemModel,
    inverse: InverseProfile<'a>,
    tail_at_nodes: Vec<f64>,
}

impl<'a> ReferenceFbar<'a> {
    pub fn new(model: &'a ProblemModel, reference: &'a Trajectory) -> Result<Self> {
        if reference.r0.is_none() {
            return Err(Error::domain("the reference shot never descends below u0"));
        }
        let inverse = invert_profile(reference)?;
        let p = model.p();
        let mut integrand = |r: f64, u: f64, m: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let du = reference.du_from_m(r, m);
            r.powf(p) * model.k(r) * model.f(u.max(0.0)) * du.abs()
        };
        let nodes = &reference.nodes;
        let mut tail = vec![0.0; nodes.len()];
        for i in (0..nodes.len() - 1).rev() {
            tail[i] = tail[i + 1] + reference.integrate_along(&mut integrand, nodes[i], nodes[i + 1])?;
        }
        Ok(Self { model, inverse, tail_at_nodes: tail })
    }

    pub fn inverse(&self) -> &InverseProfile<'a> {
        &self.inverse
    }

    /// `F̄(s)` for `s` in `[u₁(R₁), u₀]`.
    pub fn value(&self, s: f64) -> Result<f64> {
        let traj = self.inverse.traj;
        if !(self.inverse.reaches(s) && s <= self.model.u0()) {
            return Err(Error::Domain {
                message: format!("F̄ is available on [{:e}, u0] for this reference shot", self.inverse.s_min()),
                witness: Some(Witness::new(s, "s")),
            });
        }
        let t1 = self.inverse.t(s);
        let k = traj.nodes.partition_point(|&r| r <= t1);
        if k >= traj.nodes.len() {
            return Ok(0.0);
        }
        let p = self.model.p();
        let piece = traj.integrate_along(
            |r, u, m| {
                let du = traj.du_from_m(r, m);
                r.powf(p) * self.model.k(r) * self.model.f(u.max(0.0)) * du.abs()
            },
            t1,
            traj.nodes[k],
        )?;
        Ok(piece + self.tail_at_nodes[k])
    }
}

/// `F̄(s)`, `I(s, α) = t^p |u'(t)|^p / p' + F̄(s)` and, where `I ≥ 0`, `W = I^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IValues {
    pub s: f64,
    pub fbar: f64,
    pub i: f64,
}

impl IValues {
    pub fn w(&self, p: f64) -> Result<f64> {
        if self.i < 0.0 {
            return Err(Error::Domain {
                message: "W = I^{1/p} needs I ≥ 0".into(),
                witness: Some(Witness::new(self.s, format!("I = {:e}", self.i))),
            });
        }
        Ok(self.i.powf(1.0 / p))
    }
}

/// `I(s, ·)` for a shot against a precomputed reference.
pub fn capital_i_with(fbar: &ReferenceFbar<'_>, traj: &Trajectory, s: f64) -> Result<IValues> {
    let model = fbar.model;
    let inv = invert_profile(traj)?;
    if !inv.reaches(s) {
        return Err(Error::Domain {
            message: "the shot does not descend to this level".into(),
            witness: Some(Witness::new(s, format!("u(R) = {:e}", inv.s_min()))),
        });
    }
    let fb = fbar.value(s)?;
    let t = inv.t(s);
    let du = traj.state_at(t)?.du;
    let p = model.p();
    let i = (t * du.abs()).powf(p) / model.params.p_prime() + fb;
    Ok(IValues { s, fbar: fb, i })
}

/// `(F̄(s), I(s, ·), W(s, ·))` for `traj` measured against the reference shot `traj_ref`.
pub fn capital_i(model: &ProblemModel, traj_ref: &Trajectory, traj: &Trajectory, s: f64) -> Result<IValues> {
    if !(0.0..=model.u0()).contains(&s) {
        return Err(Error::Domain {
            message: "s must lie in [0, u0]".into(),
            witness: Some(Witness::new(s, "s")),
        });
    }
    if traj.r0.is_none() {
        return Err(Error::domain("the shot never descends below u0"));
    }
    let fbar = ReferenceFbar::new(model, traj_ref)?;
    capital_i_with(&fbar, traj, s)
}

/// Root of `u(r) = level` on `[0, R]`, if the shot reaches that level.
pub fn radius_at_level(traj: &Trajectory, level: f64) -> Option<f64> {
    let inv = invert_profile(traj).ok()?;
    (inv.reaches(level) && level <= traj.alpha).then(|| inv.t(level))
}
