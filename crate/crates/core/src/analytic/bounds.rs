//! Explicit bounds on the heating terms and the variance growth.
//!
//! The variance bounds and the estimator bound carry numerical constants
//! that are not fixed analytically. The values below are the suprema of the
//! corresponding ratios over the sweep in `examples/calibrate.rs`, rounded
//! up, and are guarded by regression tests.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2Constants {
    /// `|<Z*Z ; Z>| <= C gamma^2 t / omega^3`
    pub k_cov: f64,
    /// `<<(Z*Z)^2>> <= gamma^2 (2 gamma^2 t^2 + C t) / omega^4`
    pub var_zz: f64,
    /// `|<Z_s*Z_s ; Z_t*Z_t>| <= gamma^2 (2 gamma^2 s^2 + C s) / omega^4`
    pub cov_zz: f64,
    /// `<<Y0^2>> <= gamma^2 (gamma^2 t^4 + C t^3) / (3 omega^4)`
    pub var_y0: f64,
}

pub const LEMMA2: Lemma2Constants = Lemma2Constants {
    k_cov: 5.0,
    var_zz: 13.5,
    cov_zz: 14.0,
    var_y0: 6.5,
};

/// Constants of the estimator bound
/// `C1 |a|^2 (1 + g^2 t) <2N+1> + C2 |a|^4 (1 + (g^2 t)^2) + 1/(g^2 t)`.
pub const PROP5_C1: f64 = 2.0;
pub const PROP5_C2: f64 = 6.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBounds {
    pub s: f64,
    pub t: f64,
    pub k_cov: f64,
    pub var_zz: f64,
    pub cov_zz: f64,
    pub var_y0: f64,
}

pub fn variance_bounds(params: &ModelParams, s: f64, t: f64) -> Result<VarianceBounds> {
    if !(0.0 <= s && s <= t && t.is_finite()) {
        return Err(invalid("s", format!("need 0 <= s <= t, got s={s}, t={t}")));
    }
    let w = params.omega();
    let g2 = params.gamma().powi(2);
    let w4 = w.powi(4);
    let c = &LEMMA2;
    Ok(VarianceBounds {
        s,
        t,
        k_cov: c.k_cov * g2 * t / w.powi(3),
        var_zz: g2 / w4 * (2.0 * g2 * t * t + c.var_zz * t),
        cov_zz: g2 / w4 * (2.0 * g2 * s * s + c.cov_zz * s),
        var_y0: g2 / (3.0 * w4) * (g2 * t.powi(4) + c.var_y0 * t.powi(3)),
    })
}

/// `|alpha|^2 (4 + gamma^2 t)`, bounding `<N_t> - n`.
pub fn instantaneous_heating_bound(params: &ModelParams, t: f64) -> f64 {
    params.alpha_norm_sqr() * (4.0 + params.gamma().powi(2) * t)
}

/// `|alpha|^2 (4 + gamma^2 t / 2)`, bounding `<pointer_t> - n`.
pub fn pointer_heating_bound(params: &ModelParams, t: f64) -> f64 {
    params.alpha_norm_sqr() * (4.0 + 0.5 * params.gamma().powi(2) * t)
}

/// `t^2 (2 + gamma^2 t / 3) / omega^2`, bounding `<Y1* Y1>`.
pub fn y1_bound(params: &ModelParams, t: f64) -> f64 {
    t * t * (2.0 + params.gamma().powi(2) * t / 3.0) / params.omega().powi(2)
}

/// Right side of the estimator bound for a state with `<2a*a + 1> = excitation`.
pub fn estimator_bound(params: &ModelParams, t: f64, excitation: f64) -> f64 {
    let a2 = params.alpha_norm_sqr();
    let g2t = params.gamma().powi(2) * t;
    PROP5_C1 * a2 * (1.0 + g2t) * excitation + PROP5_C2 * a2 * a2 * (1.0 + g2t * g2t) + 1.0 / g2t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{moments, SecondOrder};

    #[test]
    fn origin_bounds_vanish() {
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        let b = variance_bounds(&p, 0.0, 0.0).unwrap();
        assert_eq!((b.k_cov, b.var_zz, b.cov_zz, b.var_y0), (0.0, 0.0, 0.0, 0.0));
        assert!(variance_bounds(&p, 2.0, 1.0).is_err());
    }

    // Regression guard on the frozen constants at points off the
    // calibration grid.
    #[test]
    fn frozen_constants_hold() {
        for &(w, g) in &[(1.0, 0.25), (2.0, 0.1), (0.5, 0.3), (1.0, 0.9)] {
            let p = ModelParams::real(w, g, 0.1).unwrap();
            let g2 = g * g;
            let t_max = 30.0 / g2;
            let so = SecondOrder::with_default_step(&p, t_max).unwrap();
            for i in 1..=37 {
                let t = t_max * (i as f64 / 37.0).powi(3);
                let s = 0.37 * t;
                let b = variance_bounds(&p, s, t).unwrap();
                assert!(so.k_cov(t).unwrap().norm() <= b.k_cov, "K w={w} g={g} t={t}");
                assert!(so.var_zz(t).unwrap() <= b.var_zz, "V w={w} g={g} t={t}");
                assert!(so.cov_zz(s, t).unwrap().abs() <= b.cov_zz, "Vst w={w} g={g} t={t}");
                assert!(so.var_y0(t).unwrap() <= b.var_y0, "VY0 w={w} g={g} t={t}");
                let m = moments(&p, t).unwrap();
                let lhs1 = w * w * m.mean_y1star_y1 / (t * t);
                assert!(lhs1 <= PROP5_C1 * (1.0 + g2 * t));
                let y0sq = so.var_y0(t).unwrap() + m.mean_y0 * m.mean_y0;
                assert!(w.powi(4) * y0sq / (t * t) <= PROP5_C2 * (1.0 + (g2 * t).powi(2)));
            }
        }
    }

    #[test]
    fn shot_noise_alone_satisfies_estimator_bound() {
        let p = ModelParams::real(1.0, 0.25, 0.0).unwrap();
        let t = 50.0;
        let lhs = 1.0 / (4.0 * 0.0625 * t);
        assert!(lhs <= estimator_bound(&p, t, 1.0));
        assert!((estimator_bound(&p, t, 1.0) / lhs - 4.0).abs() < 1e-12);
    }
}
