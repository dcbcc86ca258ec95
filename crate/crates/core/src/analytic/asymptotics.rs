//! Leading-order heating per regime, valid for weak coupling `gamma^2 << omega`.

use serde::Serialize;

use crate::error::Result;
use crate::params::{measurement_window, ModelParams, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeAsymptotics {
    pub regime: Regime,
    /// Predicted `<N_t> - n`.
    pub instantaneous_excess: f64,
    /// Predicted `<pointer_t> - n`.
    pub pointer_excess: f64,
    pub predicted_mean_n: f64,
    pub predicted_mean_pointer: f64,
    /// `gamma^2 <= 0.1 omega`; the formulas are not meant to hold otherwise.
    pub weak_coupling: bool,
}

pub fn regime_asymptotics(params: &ModelParams, t: f64, n: u32) -> Result<RegimeAsymptotics> {
    let report = measurement_window(params, t)?;
    let a2 = params.alpha_norm_sqr();
    let wt = params.omega() * t;
    let g2t = params.gamma().powi(2) * t;
    let (inst, ptr) = match report.regime {
        Regime::Early => (wt * wt, wt * wt / 3.0),
        Regime::Oscillatory => (2.0 * (1.0 - wt.cos()), 2.0),
        Regime::Late => (g2t, g2t / 2.0),
    };
    let weak_coupling = params.gamma().powi(2) <= 0.1 * params.omega();
    Ok(RegimeAsymptotics {
        regime: report.regime,
        instantaneous_excess: a2 * inst,
        pointer_excess: a2 * ptr,
        predicted_mean_n: n as f64 + a2 * inst,
        predicted_mean_pointer: n as f64 + a2 * ptr,
        weak_coupling,
    })
}
