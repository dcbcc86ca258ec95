//! Diffusive scaling limit: `sqrt(eps) Z_{t/eps}` against complex Brownian
//! motion, and Laplace transforms of the scaled observables.
//!
//! Limit targets, with `B` complex Brownian motion, `E|B_t|^2 = t`:
//! * endpoint `|kappa|^2 |B_t|^2`: `(1 + lambda |kappa|^2 t)^-1`;
//! * time average `|kappa|^2 t^-1 int_0^t |B_s|^2 ds`:
//!   `1 / cosh(sqrt(lambda |kappa|^2 t))`;
//! * real check, `W_t^2` for real `W`: `(1 + 2 lambda t)^-1/2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::taylor::{remainder, TaylorFn};
use crate::error::{invalid, Error, Result};
use crate::functionals::{stream_snapshots, Snapshot};
use crate::params::{ModelParams, TimeGrid, RESOLUTION_LIMIT};
use crate::path::stream_rng;
use crate::stats::{ks_normal, ks_two_sample, linear_fit, mean, ComplexEstimate, KsResult, MCEstimate};

pub const MIN_DISTRIBUTION_SAMPLES: usize = 1000;

/// `omega t / eps` must cover at least ten periods.
pub fn check_epsilon(params: &ModelParams, t: f64, epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("must be > 0, got {t}")));
    }
    let phase = params.omega() * t / epsilon;
    if phase < 20.0 * PI * (1.0 - 1e-12) {
        return Err(invalid(
            "epsilon",
            format!("omega t / eps = {phase:.3} is below 20 pi"),
        ));
    }
    Ok(())
}

pub fn endpoint_transform(params: &ModelParams, t: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + lambda * params.kappa().norm_sqr() * t)
}

pub fn time_average_transform(params: &ModelParams, t: f64, lambda: f64) -> f64 {
    1.0 / (lambda * params.kappa().norm_sqr() * t).sqrt().cosh()
}

pub fn real_transform(t: f64, lambda: f64) -> f64 {
    (1.0 + 2.0 * lambda * t).powf(-0.5)
}

/// Per-path values at horizon `t / eps` in the vacuum.
#[derive(Debug, Clone)]
pub struct ScaledEnsemble {
    pub params: ModelParams,
    pub epsilon: f64,
    pub t: f64,
    pub dt: f64,
    /// `sqrt(eps) Z_{t/eps}`
    pub z: Vec<Complex64>,
    /// `eps omega^2 |alpha|^2 |Z_{t/eps}|^2`, the scaled mean of `N` given the path.
    pub n_scaled: Vec<f64>,
    /// `eps^2 omega^2 |alpha|^2 Y0_{t/eps} / t`, the scaled pointer excess.
    pub pointer_scaled: Vec<f64>,
}

/// Streams `n_paths` paths to `t / eps` with step `dt` (before scaling).
pub fn scaled_z_samples(
    params: &ModelParams,
    t: f64,
    epsilon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ScaledEnsemble> {
    check_epsilon(params, t, epsilon)?;
    let grid = TimeGrid::with_step(t / epsilon, dt)?;
    grid.check_resolution(params, RESOLUTION_LIMIT)?;
    if n_paths < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n_paths });
    }
    let last = [grid.n_steps()];
    let snaps: Vec<Snapshot> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, stream| {
            stream_snapshots(params, &grid, seed, stream, &last, buf);
            buf[0]
        })
        .collect();
    let h = params.heating_prefactor();
    let se = epsilon.sqrt();
    Ok(ScaledEnsemble {
        params: *params,
        epsilon,
        t,
        dt: grid.dt(),
        z: snaps.iter().map(|s| s.z * se).collect(),
        n_scaled: snaps.iter().map(|s| epsilon * h * s.z.norm_sqr()).collect(),
        pointer_scaled: snaps.iter().map(|s| epsilon * epsilon * h * s.y0 / t).collect(),
    })
}

impl ScaledEnsemble {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `E[sqrt(eps) Z_{t/eps}] = sqrt(eps) (e^{ct/eps} - 1) / c`, which
    /// vanishes only as `eps -> 0`.
    pub fn exact_mean(&self) -> Complex64 {
        let c = self.params.c();
        remainder(TaylorFn::Exp, 0, c * (self.t / self.epsilon)) / c * self.epsilon.sqrt()
    }

    /// `(gamma^2 / |c|^2) t / 2`
    pub fn limit_component_variance(&self) -> f64 {
        self.params.gamma().powi(2) / self.params.c().norm_sqr() * self.t / 2.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianityReport {
    pub epsilon: f64,
    pub mean: ComplexEstimate,
    pub exact_mean: Complex64,
    pub var_re: MCEstimate,
    pub var_im: MCEstimate,
    pub target_variance: f64,
    pub ks_re: KsResult,
    pub ks_im: KsResult,
    /// Component z-score of the sample mean against the exact finite-eps mean.
    pub mean_z_score: f64,
    /// KS of both components and both variances; the mean is reported only.
    pub passed: bool,
}

/// KS of each component against `N(exact finite-eps mean, limit variance)`,
/// and the sample variances against the limit variance.
///
/// The finite-eps mean `sqrt(eps)(e^{ct/eps} - 1)/c` is about `-sqrt(eps)/c`,
/// several SE away from zero at `eps = 1e-3` with `1e4` paths, so the KS
/// reference is centred there rather than at the limit mean 0.
pub fn gaussianity_check(ens: &ScaledEnsemble, level: f64, k_se: f64) -> Result<GaussianityReport> {
    if ens.len() < MIN_DISTRIBUTION_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_DISTRIBUTION_SAMPLES,
            got: ens.len(),
        });
    }
    let re: Vec<f64> = ens.z.iter().map(|z| z.re).collect();
    let im: Vec<f64> = ens.z.iter().map(|z| z.im).collect();
    let mu = ens.exact_mean();
    let target = ens.limit_component_variance();
    let sd = target.sqrt();
    let n = ens.len() as f64;
    let centered = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2) * n / (n - 1.0)).collect::<Vec<_>>()
    };
    let var_re = MCEstimate::from_samples(&centered(&re), ens.dt)?;
    let var_im = MCEstimate::from_samples(&centered(&im), ens.dt)?;
    let ks_re = ks_normal(&re, mu.re, sd)?;
    let ks_im = ks_normal(&im, mu.im, sd)?;
    let mean = ComplexEstimate::from_samples(&ens.z, ens.dt)?;
    let passed = ks_re.passes(level)
        && ks_im.passes(level)
        && var_re.within(target, k_se)
        && var_im.within(target, k_se);
    let mean_z_score = mean.z_score(mu);
    Ok(GaussianityReport {
        epsilon: ens.epsilon,
        mean,
        exact_mean: mu,
        var_re,
        var_im,
        target_variance: target,
        ks_re,
        ks_im,
        mean_z_score,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitObservable {
    /// `eps omega^2 |alpha|^2 |Z_{t/eps}|^2`
    Endpoint,
    /// `eps N_{t/eps}` in the vacuum, Poisson given the path
    Number,
    /// scaled `Y0` part of the pointer
    TimeAverage,
    /// `TimeAverage` extrapolated to `eps = 0` from two values of `eps`
    TimeAverageExtrapolated,
    Real,
}

impl LimitObservable {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Endpoint => "endpoint",
            Self::Number => "number",
            Self::TimeAverage => "time_average",
            Self::TimeAverageExtrapolated => "time_average_extrapolated",
            Self::Real => "real",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformRow {
    pub observable: LimitObservable,
    pub epsilon: f64,
    pub lambda: f64,
    pub empirical: f64,
    pub target: f64,
    pub se: f64,
}

impl TransformRow {
    pub fn within(&self, k: f64) -> bool {
        let d = (self.empirical - self.target).abs();
        if self.se > 0.0 {
            d <= k * self.se
        } else {
            d <= 1e-12
        }
    }
}

fn transform_row(
    observable: LimitObservable,
    epsilon: f64,
    lambda: f64,
    values: impl Iterator<Item = f64>,
    target: f64,
) -> Result<TransformRow> {
    let v: Vec<f64> = values.collect();
    let est = MCEstimate::from_samples(&v, 0.0)?;
    Ok(TransformRow {
        observable,
        epsilon,
        lambda,
        empirical: est.mean,
        target,
        se: est.se,
    })
}

/// Empirical Laplace transforms of the scaled observables.
///
/// Given the path, `N_{t/eps}` in the vacuum is Poisson with mean
/// `|iw alpha Z|^2`, so `E[exp(-lambda eps N) | path]` is
/// `exp(-|iw alpha Z|^2 (1 - exp(-lambda eps)))`. Its distance to the limit
/// is `O(lambda eps)`, which is not small on the usual lambda grid, so these
/// rows are reported alongside the path functional `eps w^2 |a|^2 |Z|^2`
/// that carries the limit. The pointer is represented by its scaled `Y0`
/// part; its shot noise vanishes like `eps^3 / t`.
pub fn limit_cf_check(ens: &ScaledEnsemble, lambdas: &[f64]) -> Result<Vec<TransformRow>> {
    if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(invalid("lambda", "need finite lambda >= 0"));
    }
    let eps = ens.epsilon;
    let mut rows = Vec::with_capacity(3 * lambdas.len());
    for &l in lambdas {
        rows.push(transform_row(
            LimitObservable::Endpoint,
            eps,
            l,
            ens.n_scaled.iter().map(|x| (-l * x).exp()),
            endpoint_transform(&ens.params, ens.t, l),
        )?);
    }
    for &l in lambdas {
        let q = -(-l * eps).exp_m1() / eps;
        rows.push(transform_row(
            LimitObservable::Number,
            eps,
            l,
            ens.n_scaled.iter().map(|x| (-x * q).exp()),
            endpoint_transform(&ens.params, ens.t, l),
        )?);
    }
    for &l in lambdas {
        rows.push(transform_row(
            LimitObservable::TimeAverage,
            eps,
            l,
            ens.pointer_scaled.iter().map(|x| (-l * x).exp()),
            time_average_transform(&ens.params, ens.t, l),
        )?);
    }
    Ok(rows)
}

/// Two-point Richardson extrapolation of the time-average transform,
/// assuming an `O(eps)` leading bias. `fine` must use the smaller `eps`;
/// the two ensembles must be independent.
pub fn time_average_extrapolated(
    coarse: &ScaledEnsemble,
    fine: &ScaledEnsemble,
    lambdas: &[f64],
) -> Result<Vec<TransformRow>> {
    if !(fine.epsilon < coarse.epsilon) || coarse.t != fine.t || coarse.params != fine.params {
        return Err(invalid("ensembles", "need the same (params, t) and a smaller fine eps"));
    }
    let r = coarse.epsilon / fine.epsilon;
    let a = limit_cf_check(coarse, lambdas)?;
    let b = limit_cf_check(fine, lambdas)?;
    Ok(a.iter()
        .zip(&b)
        .filter(|(x, _)| x.observable == LimitObservable::TimeAverage)
        .map(|(x, y)| TransformRow {
            observable: LimitObservable::TimeAverageExtrapolated,
            epsilon: 0.0,
            lambda: x.lambda,
            empirical: (r * y.empirical - x.empirical) / (r - 1.0),
            target: x.target,
            se: (r * y.se).hypot(x.se) / (r - 1.0),
        })
        .collect())
}

/// Laplace transform of `W_t^2` from synthetic real Gaussian samples.
pub fn real_case_check(t: f64, lambdas: &[f64], n_samples: usize, seed: u64) -> Result<Vec<TransformRow>> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be > 0"));
    }
    let w2: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let x: f64 = StandardNormal.sample(&mut stream_rng(seed, i));
            t * x * x
        })
        .collect();
    lambdas
        .iter()
        .map(|&l| {
            transform_row(
                LimitObservable::Real,
                f64::NAN,
                l,
                w2.iter().map(|x| (-l * x).exp()),
                real_transform(t, l),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelRow {
    pub epsilon: f64,
    pub n: u32,
    /// Scaled mean of `N` for level `n` minus that of level 0, from
    /// independent ensembles.
    pub difference: MCEstimate,
    /// Same difference on common paths; equals `eps n` up to rounding.
    pub paired_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateIndependenceReport {
    pub t: f64,
    pub rows: Vec<LevelRow>,
    /// Log-log slope of the paired difference of the top level against `eps`.
    pub slope: f64,
}

/// The level-dependent part of the scaled mean of `N_{t/eps}` is `eps n`.
///
/// Level 0 and the levels `n >= 1` are fed from two independent ensembles
/// per `eps`, so `difference` is a genuine two-sample comparison.
pub fn state_independence_check(
    params: &ModelParams,
    t: f64,
    epsilons: &[f64],
    n_levels: u32,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StateIndependenceReport> {
    if n_levels < 2 {
        return Err(invalid("n_levels", "need at least 2 levels"));
    }
    if epsilons.len() < 2 {
        return Err(invalid("epsilons", "need at least two values"));
    }
    let mut rows = Vec::new();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (ie, &eps) in epsilons.iter().enumerate() {
        let s = seed.wrapping_add((ie as u64) << 32);
        let reference = scaled_z_samples(params, t, eps, dt, n_paths, s)?;
        let other = scaled_z_samples(params, t, eps, dt, n_paths, s.wrapping_add(1))?;
        let base = &reference.n_scaled;
        let m0 = MCEstimate::from_samples(base, 0.0)?;
        for n in 1..n_levels {
            let shift = eps * n as f64;
            let own: Vec<f64> = other.n_scaled.iter().map(|x| x + shift).collect();
            let m1 = MCEstimate::from_samples(&own, 0.0)?;
            let paired: Vec<f64> = base.iter().map(|x| x + shift).collect();
            let paired_difference = mean(&paired) - m0.mean;
            rows.push(LevelRow {
                epsilon: eps,
                n,
                difference: MCEstimate {
                    mean: m1.mean - m0.mean,
                    se: m0.se.hypot(m1.se),
                    n_paths,
                    dt: reference.dt,
                    second_moment: None,
                },
                paired_difference,
            });
            if n == n_levels - 1 {
                lx.push(eps.ln());
                ly.push(paired_difference.ln());
            }
        }
    }
    Ok(StateIndependenceReport {
        t,
        rows,
        slope: linear_fit(&lx, &ly)?.slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingConsistency {
    pub epsilon: f64,
    pub ks: KsResult,
}

/// Two-sample KS of `eps |Z_{t/eps}|^2` against `eps^-1 |Z_t|^2` computed in
/// the model with `(omega/eps, alpha, gamma/sqrt(eps))`, on independent seeds.
pub fn wiener_scaling_check(
    params: &ModelParams,
    t: f64,
    epsilon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ScalingConsistency> {
    let direct = scaled_z_samples(params, t, epsilon, dt, n_paths, seed)?;
    let fast = params.rescaled(1.0 / epsilon)?;
    let grid = TimeGrid::with_step(t, dt * epsilon)?;
    grid.check_resolution(&fast, RESOLUTION_LIMIT)?;
    let last = [grid.n_steps()];
    let other = seed.wrapping_add(0x5EED);
    let b: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, stream| {
            stream_snapshots(&fast, &grid, other, stream, &last, buf);
            buf[0].z.norm_sqr() / epsilon
        })
        .collect();
    let a: Vec<f64> = direct.z.iter().map(|z| z.norm_sqr()).collect();
    Ok(ScalingConsistency {
        epsilon,
        ks: ks_two_sample(&a, &b)?,
    })
}
