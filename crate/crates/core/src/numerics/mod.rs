//! Numerical building blocks shared by the solver modules.

pub mod interp;
pub mod ode;
pub mod panels;
pub mod quad;
pub mod roots;

/// `φ_p(s) = |s|^{p-2} s`.
#[inline]
pub fn phi_p(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(p - 1.0).copysign(s)
    }
}

/// Inverse of [`phi_p`]: `|y|^{1/(p-1)} sign(y)`.
#[inline]
pub fn phi_p_inv(y: f64, p: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y.abs().powf(1.0 / (p - 1.0)).copysign(y)
    }
}

/// `n` points geometrically spaced over `[lo, hi]`, endpoints included.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    v[n - 1] = hi;
    v
}

/// `n` points evenly spaced over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[n - 1] = hi;
    v
}
