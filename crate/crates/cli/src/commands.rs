use std::path::{Path, PathBuf};

use serde::Serialize;

use plshoot::classify::{classify, classify_trajectory, sweep, ShotOutcome, Spacing, CLASS_TOL_REL};
use plshoot::model::{NonlinearitySpec, Parameters, ProblemModel, WeightSpec};
use plshoot::numerics::geomspace;
use plshoot::shoot::{integrate_ivp, node_energies, Clock, IntegratorControls, Trajectory};
use plshoot::transform::{transform_ab_to_k, AbModelConfig};
use plshoot::uniqueness::{
    find_ground_state, ground_state_from_sweep, solve_dirichlet, uniqueness_scan, verify_suite, BracketResult,
};
use plshoot::variational::{derivatives_from_state, fd_check, solve_variational, AlphaDerivatives, FdReport};
use plshoot::{Error, Result, Witness};

use crate::args::*;
use crate::output::{emit, json, json_line, num, opt, Csv};

/// What a finished command asks the process to exit with.
pub enum Outcome {
    Done,
    /// Verification ran but some required check failed.
    VerifyFailed,
}

pub struct Globals {
    pub rmax: Option<f64>,
}

impl Globals {
    fn controls(&self, tol: Option<f64>) -> Result<IntegratorControls> {
        let mut c = IntegratorControls::default();
        if let Some(t) = tol {
            c = c.with_tol(t);
        }
        if let Some(r) = self.rmax {
            c.r_max = r;
        }
        c.validate()?;
        Ok(c)
    }
}

fn load(path: &Path) -> Result<ProblemModel> {
    ProblemModel::load(path)
}

fn canonical() -> ProblemModel {
    ProblemModel::new(
        Parameters { p: 2.0, n: 3.0 },
        WeightSpec::Matukuma { sigma: 2.0 },
        NonlinearitySpec::PowerDiff { q1: 3.0, q2: 0.5 },
    )
    .expect("canonical model is valid")
}

/// Parses `LO:HI:N`.
fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Config(format!("expected LO:HI:N, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let n = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn spacing(s: SpacingArg) -> Spacing {
    match s {
        SpacingArg::Geometric => Spacing::Geometric,
        SpacingArg::Linear => Spacing::Linear,
    }
}

pub fn check(a: CheckArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let report = model.check_hypotheses()?;
    emit(&a.out, &json(&report)?)?;
    match report.first_failure() {
        None => Ok(Outcome::Done),
        Some(c) => Err(Error::precondition(format!("hypothesis {} fails", c.name), c.witness.clone())),
    }
}

fn trajectory_csv(model: &ProblemModel, traj: &Trajectory) -> Result<String> {
    let e = node_energies(model, traj)?;
    let mut csv = Csv::new(&["r", "u", "du", "m", "E"]);
    for ((&r, s), e) in traj.nodes.iter().zip(&traj.states).zip(e) {
        csv.row(&[num(r), num(s.u), num(s.du), num(s.m), num(e)]);
    }
    Ok(csv.into_string())
}

#[derive(Serialize)]
struct IntegrateSummary {
    #[serde(flatten)]
    outcome: ShotOutcome,
    clock: Clock,
    steps: usize,
    rejected: usize,
    nodes: usize,
    rel_tol: f64,
    r_max: f64,
}

pub fn integrate(g: &Globals, a: IntegrateArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let controls = g.controls(a.tol)?;
    let traj = integrate_ivp(&model, a.alpha, &controls)?;
    let outcome = classify_trajectory(&model, &traj, CLASS_TOL_REL * a.alpha)?;
    emit(&a.out, &trajectory_csv(&model, &traj)?)?;
    let summary = IntegrateSummary {
        outcome,
        clock: traj.clock,
        steps: traj.steps,
        rejected: traj.rejected,
        nodes: traj.nodes.len(),
        rel_tol: controls.rel_tol,
        r_max: controls.r_max,
    };
    let path = match (a.summary, a.out.as_str()) {
        (Some(p), _) => Some(p),
        (None, "-") => None,
        (None, out) => Some(PathBuf::from(out).with_extension("json")),
    };
    if let Some(p) = path {
        emit(&p.to_string_lossy(), &json(&summary)?)?;
    }
    Ok(Outcome::Done)
}

fn sweep_csv(shots: &[ShotOutcome]) -> String {
    let mut csv = Csv::new(&["alpha", "kind", "R", "u_R", "du_R", "E_R", "r0", "crossing_measure"]);
    for o in shots {
        csv.row(&[
            num(o.alpha),
            o.kind.as_str().into(),
            num(o.r_stop),
            num(o.u_r),
            num(o.du_r),
            num(o.e_r),
            opt(o.r0),
            opt(o.crossing_measure),
        ]);
    }
    csv.into_string()
}

pub fn classify_cmd(g: &Globals, a: ClassifyArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let controls = g.controls(a.tol)?;
    let shots = match (a.alpha, &a.alpha_range) {
        (Some(alpha), _) => vec![classify(&model, alpha, &controls)?],
        (None, Some(r)) => {
            let (lo, hi, n) = parse_range(r)?;
            sweep(&model, lo, hi, n, spacing(a.spacing), &controls)?
        }
        (None, None) => return Err(Error::Config("give --alpha or --alpha-range".into())),
    };
    if a.out.as_deref() != Some("-") {
        let mut text = String::new();
        for s in &shots {
            text.push_str(&json_line(s)?);
        }
        emit("-", &text)?;
    }
    if let Some(out) = &a.out {
        emit(out, &sweep_csv(&shots))?;
    }
    Ok(Outcome::Done)
}

fn bracket_for(
    model: &ProblemModel,
    bracket: &Option<Vec<f64>>,
    sweep_spec: &Option<String>,
    tol: f64,
    controls: &IntegratorControls,
) -> Result<BracketResult> {
    if let Some(b) = bracket {
        return find_ground_state(model, b[0], b[1], tol, controls);
    }
    let (lo, hi, n) = match sweep_spec {
        Some(s) => parse_range(s)?,
        None => (1.01 * model.u0(), 50.0 * model.u0(), 64),
    };
    ground_state_from_sweep(model, lo, hi, n, tol, controls)
}

pub fn ground_state(g: &Globals, a: GroundStateArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let controls = g.controls(a.rtol)?;
    let b = bracket_for(&model, &a.bracket, &a.sweep, a.tol, &controls)?;
    emit(&a.out, &json(&b)?)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct DirichletSummary {
    alpha: f64,
    radius_target: f64,
    radius: f64,
    iterations: usize,
    du_at_radius: f64,
}

pub fn dirichlet(g: &Globals, a: DirichletArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let controls = g.controls(a.tol)?;
    let sol = solve_dirichlet(&model, a.radius, a.seed, a.radius_tol, &controls)?;
    if let Some(out) = &a.out {
        emit(out, &trajectory_csv(&model, &sol.trajectory)?)?;
    }
    let summary = DirichletSummary {
        alpha: sol.alpha,
        radius_target: a.radius,
        radius: sol.radius,
        iterations: sol.iterations,
        du_at_radius: sol.trajectory.terminal().du,
    };
    emit(&a.report, &json(&summary)?)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct VariationalReport {
    derivatives: AlphaDerivatives,
    #[serde(skip_serializing_if = "Option::is_none")]
    fd_check: Option<FdReport>,
}

pub fn variational(g: &Globals, a: VariationalArgs) -> Result<Outcome> {
    let model = load(&a.model.config)?;
    let controls = g.controls(a.tol)?;
    let traj = integrate_ivp(&model, a.alpha, &controls)?;
    let v = solve_variational(&traj)?;
    let mut csv = Csv::new(&["r", "phi", "dphi", "theta"]);
    for i in 0..v.nodes.len() {
        csv.row(&[num(v.nodes[i]), num(v.phi[i]), num(v.dphi[i]), num(v.theta[i])]);
    }
    emit(&a.out, &csv.into_string())?;
    let fd = match a.fd_check {
        Some(h) => Some(fd_check(&model, a.alpha, h, &controls, &controls)?),
        None => None,
    };
    let report = VariationalReport { derivatives: derivatives_from_state(&model, &v), fd_check: fd };
    let dest = match (&a.report, a.out.as_str()) {
        (Some(r), _) => Some(r.clone()),
        (None, "-") => None,
        (None, _) => Some("-".into()),
    };
    if let Some(d) = dest {
        emit(&d, &json(&report)?)?;
    }
    Ok(Outcome::Done)
}

pub fn transform(a: TransformArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg = AbModelConfig::from_json(&text)?;
    let (lo, hi, n) = parse_range(&a.grid)?;
    if !(0.0 < lo && lo < hi && n >= 2) {
        return Err(Error::Config(format!("grid needs 0 < LO < HI and N ≥ 2, got {}", a.grid)));
    }
    let tm = transform_ab_to_k(&cfg.pair(), cfg.p, cfg.n, cfg.nonlinearity.clone(), &geomspace(lo, hi, n))?;
    emit(&a.out, &(tm.model.to_json()? + "\n"))?;
    if let Some(t) = &a.table {
        let mut csv = Csv::new(&["r", "t", "h", "K_tilde"]);
        for row in &tm.table {
            csv.row(&[num(row.r), num(row.t), num(row.h), num(row.k_tilde)]);
        }
        emit(t, &csv.into_string())?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SuiteCheck {
    name: String,
    pass: bool,
    witnesses: Vec<Witness>,
    delta_tested: Option<f64>,
    required: bool,
}

#[derive(Serialize)]
struct SuiteReport {
    suite: String,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bracket: Option<BracketResult>,
    checks: Vec<SuiteCheck>,
}

pub fn verify(g: &Globals, a: VerifyArgs) -> Result<Outcome> {
    let model = match &a.config {
        Some(p) => load(p)?,
        None => canonical(),
    };
    let controls = g.controls(a.tol)?;
    let mut checks = Vec::new();
    let wants = |s: Suite| a.suite == Suite::All || a.suite == s;

    if wants(Suite::Hypotheses) {
        for c in model.check_hypotheses()?.checks {
            checks.push(SuiteCheck {
                name: format!("hypothesis_{}", c.name),
                pass: c.pass,
                witnesses: c.witness.into_iter().collect(),
                delta_tested: None,
                required: true,
            });
        }
    }
    let mut bracket = None;
    if wants(Suite::Separation) || wants(Suite::Uniqueness) {
        let b = bracket_for(&model, &a.bracket, &a.sweep, 1e-8, &controls)?;
        if wants(Suite::Separation) {
            let rep = verify_suite(&model, &b, a.delta, a.samples, &controls)?;
            for c in rep.checks {
                checks.push(SuiteCheck {
                    name: c.name,
                    pass: c.pass,
                    witnesses: c.witnesses,
                    delta_tested: Some(c.delta_tested),
                    required: c.required,
                });
            }
        }
        if wants(Suite::Uniqueness) {
            let scan = uniqueness_scan(&model, &b, 256, &controls)?;
            let extra: Vec<Witness> = if scan.transitions.len() == 1 {
                Vec::new()
            } else {
                scan.transitions
                    .iter()
                    .map(|&(lo, hi)| Witness::new(lo, format!("transition between {lo} and {hi}")))
                    .collect()
            };
            checks.push(SuiteCheck {
                name: "single_transition".into(),
                pass: scan.transitions.len() == 1,
                witnesses: extra,
                delta_tested: None,
                required: true,
            });
            checks.push(SuiteCheck {
                name: "radius_decreasing".into(),
                pass: scan.r_monotonicity_witnesses.is_empty(),
                witnesses: scan.r_monotonicity_witnesses,
                delta_tested: None,
                required: true,
            });
        }
        bracket = Some(b);
    }
    let pass = checks.iter().all(|c| c.pass || !c.required);
    let suite = format!("{:?}", a.suite).to_lowercase();
    emit(&a.report, &json(&SuiteReport { suite, pass, bracket, checks })?)?;
    Ok(if pass { Outcome::Done } else { Outcome::VerifyFailed })
}
