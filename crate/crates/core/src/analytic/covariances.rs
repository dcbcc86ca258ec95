//! Covariances of `Z_t` with its phase factor and modulus.
//!
//! Convention: `<A;B> = <AB> - <A><B>` without conjugation.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Covariances {
    pub t: f64,
    /// `<Z* Z ; exp(i phi)>`
    pub zz_eiphi: Complex64,
    /// `<Z* exp(i phi) ; Z>`
    pub zbar_eiphi_z: Complex64,
    /// `<exp(-i phi) Z ; Z>` (real)
    pub emiphi_z_z: Complex64,
    /// `int_0^t exp(cs)(1 - exp(-gamma^2 s)) ds`
    pub g_plus: Complex64,
    /// `int_0^t exp(-cs)(1 - exp(-gamma^2 s)) ds`
    pub g_minus: Complex64,
    /// `omega` is tiny against `gamma^2`; values came from quadrature.
    pub degenerate: bool,
}

/// `omega < DEGENERACY * max(omega, gamma^2)` triggers the quadrature route.
pub const DEGENERACY: f64 = 1e-6;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `int_0^t exp(a s) ds`, stable as `a t -> 0`.
fn int_exp(a: Complex64, t: f64) -> Complex64 {
    let x = a * t;
    if x.norm() < 1e-3 {
        t * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        (x.exp() - 1.0) / a
    }
}

/// `(g_plus, g_minus)` at `t`.
pub fn g_pm(params: &ModelParams, t: f64) -> (Complex64, Complex64) {
    let c = params.c();
    let g2 = params.gamma().powi(2);
    if g2 == 0.0 {
        return (zero(), zero());
    }
    (
        int_exp(c, t) - int_exp(c - g2, t),
        int_exp(-c, t) - int_exp(-c - g2, t),
    )
}

/// The three integrated forms `(A, B, C)` with `A = e^{ct} int g_plus`,
/// `B = e^{ct} int g_minus`, `C = e^{conj(c) t} int e^{(c - conj c) s} g_minus`.
fn abc_closed(params: &ModelParams, t: f64) -> (Complex64, Complex64, Complex64) {
    let c = params.c();
    let cb = c.conj();
    let w = params.omega();
    let g2 = params.gamma().powi(2);
    let ac2 = c.norm_sqr();
    let ect = (c * t).exp();
    let d = c - g2;
    let a = (2.0 * c * t).exp() / (c * c) - ((2.0 * c - g2) * t).exp() / (d * d)
        + g2 * (2.0 * c - g2) / (c * c * d * d) * ect
        + g2 / (c * d) * t * ect;
    let b = 1.0 / (c * c) - (-g2 * t).exp() / (cb * cb)
        - Complex64::new(0.0, 2.0 * g2 * w / (ac2 * ac2)) * ect
        - g2 / ac2 * t * ect;
    // e^{ct} - e^{conj(c) t} = 2i e^{-g2 t/2} sin(wt); sin(wt)/w stays finite
    let sinc = if w * t < 1e-8 { t } else { (w * t).sin() / w };
    let cc = (1.0 - (-g2 * t).exp()) / ac2 - g2 / ac2 * (-0.5 * g2 * t).exp() * sinc;
    (a, b, Complex64::new(cc, 0.0))
}

/// Composite Simpson rule of a complex integrand.
fn simpson<F: Fn(f64) -> Complex64>(f: F, t: f64, panels: usize) -> Complex64 {
    let n = panels + panels % 2;
    let h = t / n as f64;
    let mut s = f(0.0) + f(t);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

/// `(A, B, C)` by quadrature of the defining integrals.
pub fn abc_quadrature(params: &ModelParams, t: f64) -> (Complex64, Complex64, Complex64) {
    let c = params.c();
    let scale = c.norm().max(params.gamma().powi(2));
    let panels = ((t * scale / 0.002).ceil() as usize).max(2000);
    let gp = |s: f64| g_pm(params, s).0;
    let gm = |s: f64| g_pm(params, s).1;
    let ect = (c * t).exp();
    let a = ect * simpson(gp, t, panels);
    let b = ect * simpson(gm, t, panels);
    let dc = c - c.conj();
    let cc = (c.conj() * t).exp() * simpson(|s| (dc * s).exp() * gm(s), t, panels);
    (a, b, cc)
}

pub fn covariances(params: &ModelParams, t: f64) -> Result<Covariances> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let (g_plus, g_minus) = g_pm(params, t);
    let g2 = params.gamma().powi(2);
    if g2 == 0.0 || t == 0.0 {
        return Ok(Covariances {
            t,
            zz_eiphi: zero(),
            zbar_eiphi_z: zero(),
            emiphi_z_z: zero(),
            g_plus,
            g_minus,
            degenerate: false,
        });
    }
    let degenerate = params.omega() < DEGENERACY * g2.max(params.omega());
    let (a, b, c) = if degenerate {
        abc_quadrature(params, t)
    } else {
        abc_closed(params, t)
    };
    Ok(Covariances {
        t,
        zz_eiphi: b - a,
        zbar_eiphi_z: -a,
        emiphi_z_z: c,
        g_plus,
        g_minus,
        degenerate,
    })
}

/// `d/dt <Z*Z ; Z>`, the sum of the three covariances.
pub(crate) fn k_rate(params: &ModelParams, t: f64) -> Complex64 {
    if params.gamma() == 0.0 || t == 0.0 {
        return zero();
    }
    let (a, b, c) = abc_closed(params, t);
    b - 2.0 * a + c
}
