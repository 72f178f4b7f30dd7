//! Classification of shots into crossing, ground-state candidate and positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Witness};
use crate::model::ProblemModel;
use crate::numerics::{geomspace, linspace};
use crate::shoot::{energy, integrate_ivp, IntegratorControls, StopEvent, Trajectory};

/// Default classification band relative to `α`.
pub const CLASS_TOL_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    Crossing,
    GroundCandidate,
    Positive,
    Inconclusive,
}

impl ShotKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShotKind::Crossing => "crossing",
            ShotKind::GroundCandidate => "ground_candidate",
            ShotKind::Positive => "positive",
            ShotKind::Inconclusive => "inconclusive",
        }
    }
}

/// Terminal data of one shot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotOutcome {
    pub alpha: f64,
    pub kind: ShotKind,
    #[serde(rename = "R")]
    pub r_stop: f64,
    #[serde(rename = "u_R")]
    pub u_r: f64,
    #[serde(rename = "du_R")]
    pub du_r: f64,
    #[serde(rename = "E_R")]
    pub e_r: f64,
    pub r0: Option<f64>,
    pub du_r0: Option<f64>,
    /// `E(R, α)` for crossing shots.
    pub crossing_measure: Option<f64>,
    pub truncated: bool,
    pub stop_event: Option<StopEvent>,
    /// Set when the shot itself failed.
    pub error: Option<String>,
}

impl ShotOutcome {
    fn failed(alpha: f64, err: &Error) -> Self {
        ShotOutcome {
            alpha,
            kind: ShotKind::Inconclusive,
            r_stop: f64::NAN,
            u_r: f64::NAN,
            du_r: f64::NAN,
            e_r: f64::NAN,
            r0: None,
            du_r0: None,
            crossing_measure: None,
            truncated: false,
            stop_event: None,
            error: Some(err.to_string()),
        }
    }
}

/// Applies the kind rules to an integrated shot with band `eps`.
pub fn classify_trajectory(model: &ProblemModel, traj: &Trajectory, eps: f64) -> Result<ShotOutcome> {
    let r = traj.r_stop();
    let end = traj.terminal();
    let e_r = energy(model, traj, r)?.e;
    let small_tail = end.u.abs() <= eps && r * end.du.abs() <= eps;
    let kind = match traj.stop_event {
        StopEvent::UHitZero => {
            if end.du < -eps {
                ShotKind::Crossing
            } else if small_tail {
                ShotKind::GroundCandidate
            } else {
                ShotKind::Inconclusive
            }
        }
        StopEvent::DuHitZero => {
            if end.u > eps {
                ShotKind::Positive
            } else if small_tail {
                ShotKind::GroundCandidate
            } else {
                ShotKind::Inconclusive
            }
        }
        StopEvent::ReachedRMax => {
            if small_tail {
                ShotKind::GroundCandidate
            } else if e_r < -eps && end.u > eps {
                ShotKind::Positive
            } else {
                ShotKind::Inconclusive
            }
        }
    };
    let du_r0 = match traj.r0 {
        Some(r0) => Some(traj.state_at(r0)?.du),
        None => None,
    };
    Ok(ShotOutcome {
        alpha: traj.alpha,
        kind,
        r_stop: r,
        u_r: end.u,
        du_r: end.du,
        e_r,
        r0: traj.r0,
        du_r0,
        crossing_measure: (kind == ShotKind::Crossing).then_some(e_r),
        truncated: traj.truncated(),
        stop_event: Some(traj.stop_event),
        error: None,
    })
}

/// Integrates and classifies, returning the trajectory as well.
pub fn shoot(model: &ProblemModel, alpha: f64, controls: &IntegratorControls) -> Result<(Trajectory, ShotOutcome)> {
    let traj = integrate_ivp(model, alpha, controls)?;
    let out = classify_trajectory(model, &traj, CLASS_TOL_REL * alpha)?;
    Ok((traj, out))
}

/// Classifies the shot `u(0) = α`.
pub fn classify(model: &ProblemModel, alpha: f64, controls: &IntegratorControls) -> Result<ShotOutcome> {
    shoot(model, alpha, controls).map(|(_, o)| o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Geometric,
    Linear,
}

/// Grid of `count` heights in `[lo, hi]`.
pub fn alpha_grid(lo: f64, hi: f64, count: usize, spacing: Spacing) -> Vec<f64> {
    match spacing {
        Spacing::Geometric => geomspace(lo, hi, count),
        Spacing::Linear => linspace(lo, hi, count),
    }
}

/// Classifies a grid of heights in parallel; results follow the grid order.
pub fn sweep(
    model: &ProblemModel,
    alpha_lo: f64,
    alpha_hi: f64,
    count: usize,
    spacing: Spacing,
    controls: &IntegratorControls,
) -> Result<Vec<ShotOutcome>> {
    let u0 = model.u0();
    if !(u0 < alpha_lo && alpha_lo < alpha_hi) {
        return Err(Error::precondition(
            format!("sweep needs u0 < alpha_lo < alpha_hi (u0 = {u0}, range {alpha_lo}..{alpha_hi})"),
            Some(Witness::new(alpha_lo, "alpha_lo")),
        ));
    }
    if count < 2 {
        return Err(Error::Config("sweep needs at least 2 shots".into()));
    }
    Ok(classify_many(model, &alpha_grid(alpha_lo, alpha_hi, count, spacing), controls))
}

/// Classifies arbitrary heights in parallel; failed shots become `Inconclusive`.
pub fn classify_many(model: &ProblemModel, alphas: &[f64], controls: &IntegratorControls) -> Vec<ShotOutcome> {
    alphas
        .par_iter()
        .map(|&a| classify(model, a, controls).unwrap_or_else(|e| ShotOutcome::failed(a, &e)))
        .collect()
}

/// Adjacent pairs `(i, i+1)` where the kind switches from positive to crossing,
/// allowing one ground candidate or inconclusive shot in between.
pub fn transitions(outcomes: &[ShotOutcome]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut last_positive: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        match o.kind {
            ShotKind::Positive => last_positive = Some(i),
            ShotKind::Crossing => {
                if let Some(j) = last_positive.take() {
                    if i - j <= 2 {
                        out.push((j, i));
                    }
                }
            }
            _ => {}
        }
    }
    out
}
