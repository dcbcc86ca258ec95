//! Exact moments of the instantaneous number `N_t` and the pointer reading
//! in the state `|n, vacuum>`, assembled from the path-functional moments.

use serde::Serialize;

use super::moments::moments;
use super::second_order::SecondOrder;
use crate::error::{invalid, Result};
use crate::params::ModelParams;

/// Path-functional inputs of the observable moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalMoments {
    pub mean_zz: f64,
    pub var_zz: f64,
    pub mean_y0: f64,
    pub var_y0: f64,
    pub mean_y1y1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactObservables {
    pub t: f64,
    pub n: u32,
    pub mean_n: f64,
    pub var_n: f64,
    pub mean_pointer: f64,
    pub var_pointer: f64,
}

impl FunctionalMoments {
    pub fn exact(params: &ModelParams, so: &SecondOrder, t: f64) -> Result<Self> {
        let m = moments(params, t)?;
        Ok(Self {
            mean_zz: m.mean_zstar_z,
            var_zz: so.var_zz(t)?,
            mean_y0: m.mean_y0,
            var_y0: so.var_y0(t)?,
            mean_y1y1: m.mean_y1star_y1,
        })
    }

    /// `(mean, variance)` of `N_t`, given `2n + 1 = excitation`.
    pub fn instantaneous(&self, params: &ModelParams, n: f64, excitation: f64) -> (f64, f64) {
        let h = params.heating_prefactor();
        (n + h * self.mean_zz, h * (h * self.var_zz + excitation * self.mean_zz))
    }

    /// `(mean, variance)` of the pointer reading at `t > 0`.
    pub fn pointer(&self, params: &ModelParams, t: f64, n: f64, excitation: f64) -> (f64, f64) {
        let h = params.heating_prefactor();
        let g2 = params.gamma().powi(2);
        let mean = n + h * self.mean_y0 / t;
        let num = t + 4.0 * g2 * h * (h * self.var_y0 + excitation * self.mean_y1y1);
        (mean, num / (4.0 * g2 * t * t))
    }

    /// `<(pointer - a*a)^2>` for a state with `<2a*a + 1> = excitation`.
    pub fn pointer_mse(&self, params: &ModelParams, t: f64, excitation: f64) -> f64 {
        let (mean, var) = self.pointer(params, t, 0.0, excitation);
        var + mean * mean
    }
}

pub fn exact_observables(
    params: &ModelParams,
    so: &SecondOrder,
    t: f64,
    n: u32,
) -> Result<ExactObservables> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be > 0"));
    }
    if params.gamma() == 0.0 {
        return Err(invalid("gamma", "the pointer is undefined without coupling"));
    }
    let f = FunctionalMoments::exact(params, so, t)?;
    let nf = n as f64;
    let (mean_n, var_n) = f.instantaneous(params, nf, 2.0 * nf + 1.0);
    let (mean_pointer, var_pointer) = f.pointer(params, t, nf, 2.0 * nf + 1.0);
    Ok(ExactObservables {
        t,
        n,
        mean_n,
        var_n,
        mean_pointer,
        var_pointer,
    })
}
