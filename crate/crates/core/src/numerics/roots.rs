//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Finds a root of `f` in `[a, b]`, given `f(a)` and `f(b)` of opposite sign
/// (or one of them zero). Terminates when the bracket is below `xtol`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    brent_with_values(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol)
}

/// Same as [`brent`] with the endpoint values already known.
pub fn brent_known<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> Result<f64> {
    brent_with_values(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol)
}

fn brent_with_values<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: &mut f64,
    b: &mut f64,
    fa: &mut f64,
    fb: &mut f64,
    xtol: f64,
) -> Result<f64> {
    if *fa == 0.0 {
        return Ok(*a);
    }
    if *fb == 0.0 {
        return Ok(*b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Domain {
            message: format!("root not bracketed on [{a:e}, {b:e}] (values {fa:e}, {fb:e})"),
            witness: None,
        });
    }
    let (mut a, mut b, mut fa, mut fb) = (*a, *b, *fa, *fb);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}
