//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Globally adaptive bisection: the panel with the largest error estimate is
//! split until the summed estimate meets the tolerance. Integrable endpoint
//! singularities are handled by repeated bisection toward the endpoint; no
//! integrand evaluation ever happens at an endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// One 15-point Kronrod panel: (integral, error estimate).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let (value, err, _) = gk15_abs(f, a, b);
    (value, err)
}

/// As [`gk15`], also returning the Kronrod estimate of `∫|f|`.
fn gk15_abs<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut mass = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod += WGK[j] * (f1 + f2);
        mass += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err, mass * half.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    mass: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[a, b]` (a < b or a > b; a == b gives zero).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, opts)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    let (v, e, w) = gk15_abs(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e, mass: w });
    let mut total = v;
    let mut mass = w;
    let mut total_err = e;
    let mut panels = 1;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a:e}, {b:e}]"
            )));
        }
        // errors below the rounding level of ∫|f| cannot be resolved
        let target = opts.abs_tol.max(opts.rel_tol * total.abs()).max(ROUNDOFF * mass);
        if total_err <= target {
            break;
        }
        if panels >= opts.max_panels {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a:e}, {b:e}] after {panels} panels (estimate {total:e}, error {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("heap holds every panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel is at floating-point resolution; accept its estimate
            heap.push(Panel { err: 0.0, ..worst });
            total_err = heap.iter().map(|p| p.err).sum();
            if heap.iter().all(|p| p.err == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1, w1) = gk15_abs(&mut f, worst.a, mid);
        let (v2, e2, w2) = gk15_abs(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        mass += w1 + w2 - worst.mass;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1, mass: w1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2, mass: w2 });
        panels += 1;
    }
    // re-sum to shed accumulated cancellation from the running updates
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.err).sum();
    Ok(QuadResult { value, error, panels })
}

/// Shorthand returning only the value.
pub fn quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    integrate(f, a, b, opts).map(|r| r.value)
}
