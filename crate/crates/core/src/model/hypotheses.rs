//! Grid-based certification of the structural hypotheses on `K` and `f`.

use serde::Serialize;

use super::{NonlinearitySpec, Parameters, WeightSpec};
use crate::error::{Error, Result, Witness};

/// Slack allowed on a "strictly decreasing" step before it counts as an increase.
pub fn plateau_slack(v: f64) -> f64 {
    1e-12 * (1.0 + v.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub pass: bool,
    pub witness: Option<Witness>,
}

impl HypothesisCheck {
    fn ok(name: &str) -> Self {
        Self { name: name.into(), pass: true, witness: None }
    }

    fn fail(name: &str, at: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: false,
            witness: Some(Witness::new(at, detail)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub grid: Vec<f64>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn merge(mut self, other: HypothesisReport) -> Self {
        self.checks.extend(other.checks);
        self.grid.extend(other.grid);
        self
    }
}

fn require_increasing(grid: &[f64], positive: bool) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::precondition("grid needs at least two points", None));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::precondition("grid must be strictly increasing", Some(Witness::new(w[1], "not increasing"))));
    }
    if positive && grid[0] <= 0.0 {
        return Err(Error::precondition("grid must be positive", Some(Witness::new(grid[0], "≤ 0"))));
    }
    Ok(())
}

/// `g(r) = p + rK'/K` positive and decreasing on the grid, `K > 0`.
pub fn check_k1(weight: &WeightSpec, params: &Parameters, grid: &[f64]) -> Result<HypothesisReport> {
    require_increasing(grid, true)?;
    let p = params.p;
    let evals: Vec<_> = grid.iter().map(|&r| (r, weight.eval(r, p))).collect();

    let positive = match evals.iter().find(|(_, e)| !(e.k > 0.0 && e.k.is_finite())) {
        Some((r, e)) => HypothesisCheck::fail("K_positive", *r, format!("K(r) = {:e} is not positive and finite", e.k)),
        None => HypothesisCheck::ok("K_positive"),
    };
    let g: Vec<(f64, f64)> = grid.iter().map(|&r| (r, weight.g(r, p))).collect();
    let g_pos = match g.iter().find(|(_, g)| !(*g > 0.0 && g.is_finite())) {
        Some((r, gv)) => HypothesisCheck::fail("g_positive", *r, format!("g(r) = p + rK'/K = {gv:e} ≤ 0")),
        None => HypothesisCheck::ok("g_positive"),
    };
    let g_dec = match g.windows(2).find(|w| w[1].1 - w[0].1 > plateau_slack(w[0].1) || w[1].1.is_nan()) {
        Some(w) => HypothesisCheck::fail(
            "g_decreasing",
            w[1].0,
            format!("g increases from {:e} at r={:e} to {:e}", w[0].1, w[0].0, w[1].1),
        ),
        None => HypothesisCheck::ok("g_decreasing"),
    };
    Ok(HypothesisReport {
        checks: vec![positive, g_pos, g_dec],
        grid: grid.to_vec(),
    })
}

/// Sign pattern, Lipschitz sampling, `(p-1)f ≤ f'(u-u₀)` and decrease of `uf'/f`.
pub fn check_f_hypotheses(nl: &NonlinearitySpec, params: &Parameters, grid: &[f64]) -> Result<HypothesisReport> {
    require_increasing(grid, true)?;
    let u0 = nl.u0();
    let p = params.p;
    if !(grid[0] < u0 && *grid.last().unwrap() > u0) {
        return Err(Error::precondition(
            "grid must span both sides of u0",
            Some(Witness::new(u0, "u0 outside the grid")),
        ));
    }
    let mut checks = Vec::new();

    let scale = grid.iter().map(|&u| nl.f(u).abs()).fold(0.0, f64::max);
    let fu0 = nl.f(u0);
    checks.push(if fu0.abs() <= 1e-12 * (1.0 + scale) {
        HypothesisCheck::ok("f1_zero_at_u0")
    } else {
        HypothesisCheck::fail("f1_zero_at_u0", u0, format!("f(u0) = {fu0:e} ≠ 0"))
    });

    let above: Vec<f64> = grid.iter().copied().filter(|&u| u > u0).collect();
    let below: Vec<f64> = grid.iter().copied().filter(|&u| u < u0).collect();
    checks.push(match above.iter().find(|&&u| !(nl.f(u) > 0.0)) {
        Some(&u) => HypothesisCheck::fail("f1_positive_above_u0", u, format!("f(u) = {:e} ≤ 0 above u0", nl.f(u))),
        None => HypothesisCheck::ok("f1_positive_above_u0"),
    });
    checks.push(match below.iter().find(|&&u| !(nl.f(u) <= 0.0)) {
        Some(&u) => HypothesisCheck::fail("f1_nonpositive_below_u0", u, format!("f(u) = {:e} > 0 below u0", nl.f(u))),
        None if below.iter().all(|&u| nl.f(u) == 0.0) => {
            HypothesisCheck::fail("f1_nonpositive_below_u0", below[0], "f vanishes identically below u0".into())
        }
        None => HypothesisCheck::ok("f1_nonpositive_below_u0"),
    });

    checks.push(lipschitz_check(nl, u0, &above));

    let mut f3 = HypothesisCheck::ok("f3");
    for &u in std::iter::once(&u0).chain(&above) {
        let lhs = (p - 1.0) * nl.f(u);
        match nl.df(u) {
            Ok(d) => {
                let rhs = d * (u - u0);
                if !(lhs <= rhs + 1e-12 * (1.0 + rhs.abs())) {
                    f3 = HypothesisCheck::fail("f3", u, format!("(p-1)f(u) = {lhs:e} > f'(u)(u-u0) = {rhs:e}"));
                    break;
                }
            }
            Err(e) => {
                f3 = HypothesisCheck::fail("f3", u, format!("f' unavailable: {e}"));
                break;
            }
        }
    }
    checks.push(f3);

    let mut f4 = HypothesisCheck::ok("f4");
    let mut prev: Option<(f64, f64)> = None;
    for &u in &above {
        let q = match nl.df(u) {
            Ok(d) => u * d / nl.f(u),
            Err(e) => {
                f4 = HypothesisCheck::fail("f4", u, format!("f' unavailable: {e}"));
                break;
            }
        };
        if !q.is_finite() {
            f4 = HypothesisCheck::fail("f4", u, format!("uf'/f = {q:e} is not finite"));
            break;
        }
        if let Some((pu, pq)) = prev {
            if q - pq > plateau_slack(pq) {
                f4 = HypothesisCheck::fail("f4", u, format!("uf'/f increases from {pq:e} at u={pu:e} to {q:e}"));
                break;
            }
        }
        prev = Some((u, q));
    }
    checks.push(f4);

    if let NonlinearitySpec::PowerDiff { q1, q2 } = *nl {
        checks.push(if 0.0 < q2 && q2 < p - 1.0 && p - 1.0 <= q1 {
            HypothesisCheck::ok("power_diff_range")
        } else {
            HypothesisCheck::fail(
                "power_diff_range",
                q2,
                format!("needs 0 < q2 < p-1 ≤ q1; got q1={q1}, q2={q2}, p-1={}", p - 1.0),
            )
        });
    }

    Ok(HypothesisReport { checks, grid: grid.to_vec() })
}

// Difference quotients above u₀ must stay bounded as the grid is refined
// towards u₀ and between grid points.
fn lipschitz_check(nl: &NonlinearitySpec, u0: f64, above: &[f64]) -> HypothesisCheck {
    let name = "f2_lipschitz";
    let mut pts: Vec<f64> = std::iter::once(u0).chain(above.iter().copied()).collect();
    let quotient = |a: f64, b: f64| ((nl.f(b) - nl.f(a)) / (b - a)).abs();
    let coarse = pts.windows(2).map(|w| quotient(w[0], w[1])).fold(0.0, f64::max);
    if !coarse.is_finite() {
        return HypothesisCheck::fail(name, u0, "non-finite difference quotient".into());
    }
    let first = pts.get(1).copied().unwrap_or(u0 + 1.0);
    for j in 1..=8 {
        pts.push(u0 + (first - u0) * 0.25f64.powi(j));
    }
    let mids: Vec<f64> = above.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    pts.extend(mids);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    for w in pts.windows(2) {
        let q = quotient(w[0], w[1]);
        if !(q <= 4.0 * coarse + 1e-12) {
            return HypothesisCheck::fail(
                name,
                w[0],
                format!("difference quotient {q:e} grows under refinement (coarse bound {coarse:e})"),
            );
        }
    }
    HypothesisCheck::ok(name)
}

/// `N + k > p` and `ℓ ≥ k - p`.
pub fn check_example_conditions(k: f64, l: f64, big_n: f64, p: f64) -> bool {
    big_n + k > p && l >= k - p
}
