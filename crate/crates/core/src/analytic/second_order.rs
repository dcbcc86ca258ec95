//! Second-order cumulants of `Z*Z` and `Y0`, integrated from the closed-form
//! covariances:
//!
//! * `K(t) = <Z*Z ; Z>`, with `K' = B - 2A + C`;
//! * `V(t) = <<(Z*Z)^2>>`, with `V' = 4 Re K`;
//! * `<Z_s*Z_s ; Z_t*Z_t> = V(s) + 2 Re(K(s) (e^{c(t-s)} - 1)/c)` for `s <= t`;
//! * `<<Y0_T^2>> = 2 int_0^T (T-s) V(s) + 2 Re(K(s) R_1(e^{c(T-s)})/c^2) ds`.
//!
//! The running integrals are trapezoid sums on a uniform master grid; a
//! query between nodes adds one partial panel.

use num_complex::Complex64;

use super::covariances::k_rate;
use super::taylor::{remainder, TaylorFn};
use crate::error::{invalid, Result};
use crate::params::ModelParams;

/// Default master step in units of `1/|c|`.
pub const DEFAULT_STEP: f64 = 0.005;

#[derive(Debug, Clone)]
pub struct SecondOrder {
    params: ModelParams,
    h: f64,
    t_max: f64,
    k: Vec<Complex64>,
    v: Vec<f64>,
}

impl SecondOrder {
    /// Tabulates `K`, `V` on `[0, t_max]` with step `step / |c|`.
    pub fn new(params: &ModelParams, t_max: f64, step: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(invalid("t_max", format!("must be > 0, got {t_max}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("step", format!("must be > 0, got {step}")));
        }
        let n = (t_max * params.c().norm() / step).ceil().max(1.0) as usize;
        let h = t_max / n as f64;
        let mut k = Vec::with_capacity(n + 1);
        let mut v = Vec::with_capacity(n + 1);
        let (mut kk, mut vv) = (Complex64::new(0.0, 0.0), 0.0);
        let mut rate_prev = k_rate(params, 0.0);
        k.push(kk);
        v.push(vv);
        for j in 1..=n {
            let rate = k_rate(params, j as f64 * h);
            let k_prev = kk;
            kk += (rate_prev + rate) * (0.5 * h);
            vv += 2.0 * h * (k_prev.re + kk.re);
            k.push(kk);
            v.push(vv);
            rate_prev = rate;
        }
        Ok(Self {
            params: *params,
            h,
            t_max,
            k,
            v,
        })
    }

    pub fn with_default_step(params: &ModelParams, t_max: f64) -> Result<Self> {
        Self::new(params, t_max, DEFAULT_STEP)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_max * (1.0 + 1e-12)) {
            return Err(invalid("t", format!("outside the tabulated range [0, {}]", self.t_max)));
        }
        Ok(())
    }

    /// Last node at or below `t` and the remaining partial step.
    fn locate(&self, t: f64) -> (usize, f64) {
        let j = ((t / self.h).floor() as usize).min(self.k.len() - 1);
        (j, (t - j as f64 * self.h).max(0.0))
    }

    fn k_at(&self, t: f64) -> Complex64 {
        let (j, r) = self.locate(t);
        if r == 0.0 {
            return self.k[j];
        }
        let t0 = j as f64 * self.h;
        self.k[j] + (k_rate(&self.params, t0) + k_rate(&self.params, t)) * (0.5 * r)
    }

    fn v_at(&self, t: f64) -> f64 {
        let (j, r) = self.locate(t);
        if r == 0.0 {
            return self.v[j];
        }
        self.v[j] + 2.0 * r * (self.k[j].re + self.k_at(t).re)
    }

    /// `<Z_t* Z_t ; Z_t>`
    pub fn k_cov(&self, t: f64) -> Result<Complex64> {
        self.check(t)?;
        Ok(self.k_at(t))
    }

    /// `<<(Z_t* Z_t)^2>>`
    pub fn var_zz(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.v_at(t))
    }

    /// `<Z_s* Z_s ; Z_t* Z_t>` for `s <= t`.
    pub fn cov_zz(&self, s: f64, t: f64) -> Result<f64> {
        self.check(t)?;
        if !(0.0 <= s && s <= t) {
            return Err(invalid("s", format!("need 0 <= s <= t, got s={s}, t={t}")));
        }
        let c = self.params.c();
        let r0 = remainder(TaylorFn::Exp, 0, c * (t - s));
        Ok(self.v_at(s) + 2.0 * (self.k_at(s) * r0 / c).re)
    }

    /// `<<Y0_T^2>>`
    pub fn var_y0(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let c = self.params.c();
        let c2 = c * c;
        let f = |s: f64, k: Complex64, v: f64| {
            (t - s) * v + 2.0 * (k * remainder(TaylorFn::Exp, 1, c * (t - s)) / c2).re
        };
        let (j, r) = self.locate(t);
        let mut acc = 0.5 * f(0.0, self.k[0], self.v[0]);
        for i in 1..j {
            acc += f(i as f64 * self.h, self.k[i], self.v[i]);
        }
        let mut total = if j > 0 {
            (acc + 0.5 * f(j as f64 * self.h, self.k[j], self.v[j])) * self.h
        } else {
            0.0
        };
        if r > 0.0 {
            let tj = j as f64 * self.h;
            total += 0.5 * r * (f(tj, self.k[j], self.v[j]) + f(t, self.k_at(t), self.v_at(t)));
        }
        Ok(2.0 * total)
    }
}
