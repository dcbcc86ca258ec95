//! First moments of the path functionals in closed form.

use num_complex::Complex64;
use serde::Serialize;

use super::taylor::{remainder, TaylorFn};
use crate::error::{invalid, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSet {
    pub t: f64,
    /// `<exp(i phi_t)>`
    pub exp_eiphi: Complex64,
    pub mean_z: Complex64,
    pub mean_zstar_z: f64,
    pub mean_y1: Complex64,
    pub mean_y0: f64,
    pub mean_y1star_y1: f64,
}

/// `w + conj(w)`, where `w_conj` is `conj(w)` evaluated independently.
/// Panics if the two disagree beyond rounding.
fn plus_cc(w: Complex64, w_conj: Complex64) -> f64 {
    let residue = (w + w_conj).im.abs();
    assert!(
        residue <= 1e-12 * w.norm() + f64::MIN_POSITIVE,
        "c.c. residue {residue:e} for {w}"
    );
    2.0 * w.re
}

/// `c^-p R_n(f)(c t) + c.c.`
fn real_part_term(c: Complex64, p: i32, f: TaylorFn, n: usize, t: f64) -> f64 {
    let w = c.powi(-p) * remainder(f, n, c * t);
    let cb = c.conj();
    let w_conj = cb.powi(-p) * remainder(f, n, cb * t);
    plus_cc(w, w_conj)
}

pub fn moments(params: &ModelParams, t: f64) -> Result<MomentSet> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let c = params.c();
    let ct = c * t;
    Ok(MomentSet {
        t,
        exp_eiphi: ct.exp(),
        mean_z: remainder(TaylorFn::Exp, 0, ct) / c,
        mean_zstar_z: real_part_term(c, 2, TaylorFn::Exp, 1, t),
        mean_y1: remainder(TaylorFn::Exp, 1, ct) / (c * c),
        mean_y0: real_part_term(c, 3, TaylorFn::Exp, 2, t),
        mean_y1star_y1: real_part_term(c, 4, TaylorFn::ShiftedExp, 3, t),
    })
}
