//! Model parameters, derived constants, the shared time grid and the
//! measurement-window classification.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Oscillator frequency `omega`, field coupling `gamma` and the
/// displacement `alpha` of the perturbed Hamiltonian.
///
/// `gamma = 0` is accepted: it switches the apparatus off and makes every
/// path functional deterministic, which several checks rely on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    omega: f64,
    gamma: f64,
    alpha: Complex64,
}

impl ModelParams {
    pub fn new(omega: f64, gamma: f64, alpha: Complex64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(invalid("alpha", "must be finite"));
        }
        Ok(Self { omega, gamma, alpha })
    }

    /// Shorthand for a real displacement.
    pub fn real(omega: f64, gamma: f64, alpha: f64) -> Result<Self> {
        Self::new(omega, gamma, Complex64::new(alpha, 0.0))
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn alpha_norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `c = i*omega - gamma^2/2`, the exponent of the mean phase factor.
    pub fn c(&self) -> Complex64 {
        Complex64::new(-0.5 * self.gamma * self.gamma, self.omega)
    }

    /// `kappa = omega*alpha*gamma / c`.
    pub fn kappa(&self) -> Complex64 {
        self.alpha * (self.omega * self.gamma) / self.c()
    }

    /// Prefactor `omega^2 |alpha|^2` shared by the heating terms.
    pub fn heating_prefactor(&self) -> f64 {
        self.omega * self.omega * self.alpha_norm_sqr()
    }

    /// Parameters `(eps*omega, alpha, sqrt(eps)*gamma)` of the time-rescaled model.
    pub fn rescaled(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        Self::new(epsilon * self.omega, epsilon.sqrt() * self.gamma, self.alpha)
    }
}

/// Returns `(c, kappa)`.
pub fn derived_constants(params: &ModelParams) -> (Complex64, Complex64) {
    (params.c(), params.kappa())
}

/// Default bound on `dt * max(omega, gamma^2)`.
pub const RESOLUTION_LIMIT: f64 = 0.1;

/// Uniform grid `t_k = k * t_end / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(invalid("t_end", format!("must be finite and > 0, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "must be positive"));
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid with the step closest to (and not above) `dt`.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        let n = (t_end / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(t_end, n)
    }

    /// Like [`TimeGrid::new`] but also enforces the default resolution guard.
    pub fn resolved(t_end: f64, n_steps: usize, params: &ModelParams) -> Result<Self> {
        let grid = Self::new(t_end, n_steps)?;
        grid.check_resolution(params, RESOLUTION_LIMIT)?;
        Ok(grid)
    }

    pub fn check_resolution(&self, params: &ModelParams, limit: f64) -> Result<()> {
        let product = self.dt() * params.omega().max(params.gamma().powi(2));
        if product > limit * (1.0 + 1e-12) {
            return Err(Error::UnderResolved { product, limit });
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.time(k))
    }

    /// Index of the node nearest to `t`, if `t` lies on the grid to relative
    /// precision `1e-9`.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.t_end * (1.0 + 1e-12) {
            return None;
        }
        let k = (t / self.dt()).round() as usize;
        let scale = self.dt().max(t.abs());
        ((self.time(k) - t).abs() <= 1e-9 * scale && k <= self.n_steps).then_some(k)
    }

    /// The grid truncated to its first `k` steps.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_steps {
            return Err(invalid("prefix", format!("need 1..={} steps, got {k}", self.n_steps)));
        }
        Self::new(self.time(k), k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Early,
    Oscillatory,
    Late,
}

/// How "much smaller" and "much larger" are read.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowThresholds {
    /// Largest `|alpha|` counted as small.
    pub a_max: f64,
    /// Upper window edge as a fraction of `|alpha|^-2 gamma^-2`.
    pub f_hi: f64,
    /// Lower window edge as a multiple of `gamma^-2`.
    pub f_lo: f64,
}

impl Default for WindowThresholds {
    fn default() -> Self {
        Self {
            a_max: 0.1,
            f_hi: 0.1,
            f_lo: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WindowOk {
    pub a: bool,
    pub b: bool,
}

impl WindowOk {
    pub fn open(&self) -> bool {
        self.a && self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// True when `t` sits a full factor `f_lo` away from both crossover
    /// scales, i.e. the asymptotic formula of `regime` is expected to apply.
    pub well_separated: bool,
    /// `(1/omega, 1/gamma^2)`; the second entry is infinite for `gamma = 0`.
    pub thresholds: (f64, f64),
    pub window_ok: WindowOk,
}

fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12) || a <= b
}

pub fn measurement_window(params: &ModelParams, t: f64) -> Result<RegimeReport> {
    measurement_window_with(params, t, &WindowThresholds::default())
}

pub fn measurement_window_with(
    params: &ModelParams,
    t: f64,
    th: &WindowThresholds,
) -> Result<RegimeReport> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let t_osc = 1.0 / params.omega();
    let g2 = params.gamma().powi(2);
    let t_diff = if g2 > 0.0 { 1.0 / g2 } else { f64::INFINITY };

    // Nearest regime by the two crossover scales; late wins when the scales
    // are inverted (gamma^2 > omega) and no oscillatory stretch exists.
    let regime = if le(t_diff, t) {
        Regime::Late
    } else if le(t, t_osc) {
        Regime::Early
    } else {
        Regime::Oscillatory
    };
    let sep = th.f_lo;
    let well_separated = match regime {
        Regime::Early => le(t * sep, t_osc),
        Regime::Oscillatory => le(t_osc * sep, t) && le(t * sep, t_diff),
        Regime::Late => le(t_diff * sep, t),
    };

    let a2 = params.alpha_norm_sqr();
    let a_ok = if a2 == 0.0 {
        true
    } else {
        let upper = th.f_hi / (a2 * g2);
        le(params.alpha().norm(), th.a_max) && le(t, upper)
    };
    let b_ok = le(th.f_lo * t_diff, t);

    Ok(RegimeReport {
        regime,
        well_separated,
        thresholds: (t_osc, t_diff),
        window_ok: WindowOk { a: a_ok, b: b_ok },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn decoupled_apparatus_gives_zero_kappa() {
        let p = ModelParams::real(1.0, 0.0, 1.0).unwrap();
        let (c, kappa) = derived_constants(&p);
        assert_eq!(c, Complex64::new(0.0, 1.0));
        assert_eq!(kappa, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn unit_kappa_at_gamma_sqrt2() {
        let p = ModelParams::real(1.0, 2f64.sqrt(), 1.0).unwrap();
        let (c, kappa) = derived_constants(&p);
        assert_relative_eq!(c.re, -1.0, epsilon = 1e-15);
        assert_relative_eq!(c.im, 1.0, epsilon = 1e-15);
        assert_relative_eq!(kappa.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kappa_modulus_weak_coupling() {
        // |kappa| = 1 * 0.1 * 0.25 / sqrt(1 + 0.25^4/4); reference from 50-digit mpmath.
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        let (c, kappa) = derived_constants(&p);
        assert_eq!(c, Complex64::new(-0.03125, 1.0));
        assert_relative_eq!(kappa.norm(), 0.024987801902176970, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::real(0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::real(1.0, -1.0, 0.0).is_err());
        assert!(ModelParams::real(f64::NAN, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
    }

    #[test]
    fn resolution_guard() {
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        assert!(TimeGrid::resolved(10.0, 100, &p).is_ok());
        assert!(matches!(
            TimeGrid::resolved(10.0, 99, &p),
            Err(Error::UnderResolved { .. })
        ));
        let strong = ModelParams::real(1.0, 2.0, 0.1).unwrap();
        assert!(TimeGrid::resolved(1.0, 39, &strong).is_err());
        assert!(TimeGrid::resolved(1.0, 40, &strong).is_ok());
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(5.0, 5000).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(5000), 5.0);
        assert_eq!(g.node_of(1.0), Some(1000));
        assert_eq!(g.node_of(1.00005), None);
        assert_eq!(g.node_of(6.0), None);
        let w = TimeGrid::with_step(50.0, 1e-3).unwrap();
        assert_eq!(w.n_steps(), 50_000);
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let p = ModelParams::real(1.0, 0.1, 0.1).unwrap();
        let r = measurement_window(&p, 1e3).unwrap();
        assert!(r.window_ok.a && r.window_ok.b);
        assert!(r.window_ok.open());
        assert_eq!(r.regime, Regime::Late);
    }

    #[test]
    fn non_demolition_always_passes_a() {
        let p = ModelParams::real(1.0, 0.1, 0.0).unwrap();
        for t in [0.0, 1.0, 1e6, 1e12] {
            assert!(measurement_window(&p, t).unwrap().window_ok.a);
        }
    }

    #[test]
    fn large_alpha_closes_window() {
        let p = ModelParams::real(1.0, 1.0, 1.0).unwrap();
        assert!(!measurement_window(&p, 1.0).unwrap().window_ok.open());
    }

    #[test]
    fn regimes() {
        let p = ModelParams::real(1.0, 0.1, 0.1).unwrap();
        let early = measurement_window(&p, 0.05).unwrap();
        assert_eq!(early.regime, Regime::Early);
        assert!(early.well_separated);
        let mid = measurement_window(&p, 10.0).unwrap();
        assert_eq!(mid.regime, Regime::Oscillatory);
        assert!(mid.well_separated);
        let cross = measurement_window(&p, 50.0).unwrap();
        assert_eq!(cross.regime, Regime::Oscillatory);
        assert!(!cross.well_separated);
        let late = measurement_window(&p, 1e4).unwrap();
        assert_eq!(late.regime, Regime::Late);
        assert!(late.well_separated);
        assert!(measurement_window(&p, -1.0).is_err());
    }

    #[test]
    fn id_c_identity() {
        for &(w, g) in &[(1.0, 0.25), (0.3, 2.0), (7.0, 0.01)] {
            let p = ModelParams::real(w, g, 0.0).unwrap();
            let c = p.c();
            let lhs = 1.0 / c + 1.0 / c.conj();
            assert!((lhs.re + g * g / c.norm_sqr()).abs() < 1e-14);
            assert!(lhs.im.abs() < 1e-14);
            assert!(c.norm() >= w);
        }
    }
}
