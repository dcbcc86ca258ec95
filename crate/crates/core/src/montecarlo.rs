//! Monte-Carlo ensembles of path functionals and the observable moments
//! built from them.
//!
//! Per-path results are collected in stream order and reduced sequentially,
//! so every estimate is independent of the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::bounds::estimator_bound;
use crate::analytic::{FunctionalMoments, SecondOrder};
use crate::error::{invalid, Error, Result};
use crate::functionals::{stream_snapshots, Snapshot};
use crate::params::{ModelParams, TimeGrid};
use crate::stats::{covariance_estimate, ComplexEstimate, MCEstimate};

pub const THREADS_ENV: &str = "QMETER_THREADS";

/// Sizes the global rayon pool from `QMETER_THREADS` if set. Returns the
/// worker count in effect.
pub fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| invalid(THREADS_ENV, format!("not a thread count: {v:?}")))?;
        if n == 0 {
            return Err(invalid(THREADS_ENV, "must be at least 1"));
        }
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Functional values of `n_paths` independent paths at a few grid nodes.
#[derive(Debug, Clone)]
pub struct SnapshotEnsemble {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Path-major: `data[p * nodes.len() + j]`.
    data: Vec<Snapshot>,
}

/// Streams paths `0..n_paths` of `seed` and keeps the functionals at `nodes`.
pub fn simulate_snapshots(
    params: &ModelParams,
    grid: &TimeGrid,
    nodes: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<SnapshotEnsemble> {
    grid.check_resolution(params, crate::params::RESOLUTION_LIMIT)?;
    if n_paths < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n_paths });
    }
    if nodes.is_empty() || !nodes.windows(2).all(|p| p[0] < p[1]) {
        return Err(invalid("nodes", "need a non-empty increasing list"));
    }
    if let Some(&k) = nodes.last().filter(|&&k| k > grid.n_steps()) {
        return Err(Error::GridMismatch(format!("node {k} beyond {} steps", grid.n_steps())));
    }
    let per_path: Vec<Vec<Snapshot>> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, stream| {
            stream_snapshots(params, grid, seed, stream, nodes, buf);
            buf.clone()
        })
        .collect();
    Ok(SnapshotEnsemble {
        nodes: nodes.to_vec(),
        times: nodes.iter().map(|&k| grid.time(k)).collect(),
        dt: grid.dt(),
        n_paths,
        seed,
        data: per_path.into_iter().flatten().collect(),
    })
}

impl SnapshotEnsemble {
    /// Index of the node at time `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Snapshot> + '_ {
        let m = self.nodes.len();
        self.data.iter().skip(j).step_by(m)
    }

    pub fn samples<T, F: Fn(&Snapshot) -> T>(&self, j: usize, f: F) -> Vec<T> {
        self.column(j).map(f).collect()
    }
}

/// MC counterparts of the six closed-form first and second moments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentEstimates {
    pub t: f64,
    pub exp_eiphi: ComplexEstimate,
    pub mean_z: ComplexEstimate,
    pub mean_zstar_z: MCEstimate,
    pub mean_y1: ComplexEstimate,
    pub mean_y0: MCEstimate,
    pub mean_y1star_y1: MCEstimate,
}

pub fn moment_estimates(ens: &SnapshotEnsemble, j: usize) -> Result<MomentEstimates> {
    let dt = ens.dt;
    Ok(MomentEstimates {
        t: ens.times[j],
        exp_eiphi: ComplexEstimate::from_samples(&ens.samples(j, |s| s.eiphi), dt)?,
        mean_z: ComplexEstimate::from_samples(&ens.samples(j, |s| s.z), dt)?,
        mean_zstar_z: MCEstimate::from_samples(&ens.samples(j, |s| s.z.norm_sqr()), dt)?,
        mean_y1: ComplexEstimate::from_samples(&ens.samples(j, |s| s.y1), dt)?,
        mean_y0: MCEstimate::from_samples(&ens.samples(j, |s| s.y0), dt)?,
        mean_y1star_y1: MCEstimate::from_samples(&ens.samples(j, |s| s.y1.norm_sqr()), dt)?,
    })
}

/// MC counterparts of the three phase/modulus covariances.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovarianceEstimates {
    pub t: f64,
    pub zz_eiphi: ComplexEstimate,
    pub zbar_eiphi_z: ComplexEstimate,
    pub emiphi_z_z: ComplexEstimate,
}

pub fn covariance_estimates(ens: &SnapshotEnsemble, j: usize) -> Result<CovarianceEstimates> {
    let dt = ens.dt;
    let z = ens.samples(j, |s| s.z);
    let e = ens.samples(j, |s| s.eiphi);
    let zz: Vec<Complex64> = z.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    let zbar_e: Vec<Complex64> = z.iter().zip(&e).map(|(z, e)| z.conj() * e).collect();
    let emi_z: Vec<Complex64> = z.iter().zip(&e).map(|(z, e)| e.conj() * z).collect();
    Ok(CovarianceEstimates {
        t: ens.times[j],
        zz_eiphi: covariance_estimate(&zz, &e, dt)?,
        zbar_eiphi_z: covariance_estimate(&zbar_e, &z, dt)?,
        emiphi_z_z: covariance_estimate(&emi_z, &z, dt)?,
    })
}

/// Moments of `N_t` and of the pointer reading in `|n, vacuum>`.
///
/// Only the path functionals are sampled; the reduction to them is exact,
/// and the vacuum contribution `t` to the pointer variance is inserted
/// analytically. Each estimate is the mean of a per-path quantity, so its
/// SE is the plain sample SE of that quantity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObservableMoments {
    pub t: f64,
    pub n: u32,
    pub mean_n: MCEstimate,
    pub var_n: MCEstimate,
    pub mean_pointer: MCEstimate,
    pub var_pointer: MCEstimate,
    /// `2 gamma t`
    pub x2: f64,
    /// `2 i gamma omega alpha <Y1>`
    pub x1: ComplexEstimate,
    /// `2 gamma omega^2 |alpha|^2 <Y0>`
    pub x0: MCEstimate,
}

pub fn observable_moments(params: &ModelParams, ens: &SnapshotEnsemble, j: usize, n: u32) -> Result<ObservableMoments> {
    let t = ens.times[j];
    if !(t > 0.0) {
        return Err(invalid("t", "observables need t > 0"));
    }
    if params.gamma() == 0.0 {
        return Err(invalid("gamma", "the pointer is undefined without coupling"));
    }
    let dt = ens.dt;
    let np = ens.n_paths as f64;
    let unbias = np / (np - 1.0);
    let h = params.heating_prefactor();
    let g = params.gamma();
    let g2 = g * g;
    let nf = n as f64;
    let exc = 2.0 * nf + 1.0;

    let zz = ens.samples(j, |s| s.z.norm_sqr());
    let y0 = ens.samples(j, |s| s.y0);
    let y1 = ens.samples(j, |s| s.y1);
    let m_zz = crate::stats::mean(&zz);
    let m_y0 = crate::stats::mean(&y0);

    let mean_n: Vec<f64> = zz.iter().map(|x| nf + h * x).collect();
    let var_n: Vec<f64> = zz
        .iter()
        .map(|x| h * (h * (x - m_zz).powi(2) * unbias + exc * x))
        .collect();
    let mean_p: Vec<f64> = y0.iter().map(|y| nf + h * y / t).collect();
    let var_p: Vec<f64> = y0
        .iter()
        .zip(&y1)
        .map(|(y, y1)| {
            let num = t + 4.0 * g2 * h * (h * (y - m_y0).powi(2) * unbias + exc * y1.norm_sqr());
            num / (4.0 * g2 * t * t)
        })
        .collect();
    let x1_pref = Complex64::new(0.0, 2.0 * g * params.omega()) * params.alpha();
    let x1: Vec<Complex64> = y1.iter().map(|y| x1_pref * y).collect();
    let x0: Vec<f64> = y0.iter().map(|y| 2.0 * g * h * y).collect();
    Ok(ObservableMoments {
        t,
        n,
        mean_n: MCEstimate::from_samples(&mean_n, dt)?,
        var_n: MCEstimate::from_samples(&var_n, dt)?,
        mean_pointer: MCEstimate::from_samples(&mean_p, dt)?,
        var_pointer: MCEstimate::from_samples(&var_p, dt)?,
        x2: 2.0 * g * t,
        x1: ComplexEstimate::from_samples(&x1, dt)?,
        x0: MCEstimate::from_samples(&x0, dt)?,
    })
}

pub const MIN_MOMENT_PATHS: usize = 100;

/// Observable moments for level `n` at each of `nodes`.
pub fn estimate_moments(
    params: &ModelParams,
    grid: &TimeGrid,
    nodes: &[usize],
    n: u32,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ObservableMoments>> {
    if n_paths < MIN_MOMENT_PATHS {
        return Err(Error::InsufficientSamples {
            required: MIN_MOMENT_PATHS,
            got: n_paths,
        });
    }
    let ens = simulate_snapshots(params, grid, nodes, n_paths, seed)?;
    (0..nodes.len())
        .filter(|&j| ens.times[j] > 0.0)
        .map(|j| observable_moments(params, &ens, j, n))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorPoint {
    pub t: f64,
    pub mse: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorErrorReport {
    pub excitation: f64,
    pub points: Vec<ErrorPoint>,
    pub all_within_bound: bool,
    pub argmin_t: f64,
    /// `[1/gamma^2, 0.1/(|alpha|^2 gamma^2)]`
    pub window: (f64, f64),
    /// The argmin is strictly inside the sweep and inside the window.
    pub interior_minimum: bool,
}

/// Master step of the second-order tables used by the error sweep, in
/// units of `1/|c|`.
const SWEEP_STEP: f64 = 0.02;

/// Exact mean-square error of the pointer as an estimator of `a*a`, for a
/// state with `<2a*a + 1> = excitation`, against the calibrated bound.
pub fn estimator_error(params: &ModelParams, excitation: f64, t_grid: &[f64]) -> Result<EstimatorErrorReport> {
    if t_grid.len() < 3 || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("t_grid", "need at least three positive times"));
    }
    if params.gamma() == 0.0 {
        return Err(invalid("gamma", "the pointer is undefined without coupling"));
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let so = SecondOrder::new(params, t_max, SWEEP_STEP)?;
    let points = t_grid
        .iter()
        .map(|&t| {
            let f = FunctionalMoments::exact(params, &so, t)?;
            Ok(ErrorPoint {
                t,
                mse: f.pointer_mse(params, t, excitation),
                bound: estimator_bound(params, t, excitation),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let imin = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mse.total_cmp(&b.1.mse))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let g2 = params.gamma().powi(2);
    let window = (1.0 / g2, 0.1 / (params.alpha_norm_sqr() * g2));
    let argmin_t = points[imin].t;
    Ok(EstimatorErrorReport {
        excitation,
        all_within_bound: points.iter().all(|p| p.mse <= p.bound),
        interior_minimum: imin > 0 && imin + 1 < points.len() && window.0 <= argmin_t && argmin_t <= window.1,
        argmin_t,
        window,
        points,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelSpread {
    pub n: u32,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowDemo {
    pub t: f64,
    pub levels: Vec<LevelSpread>,
    /// Smallest adjacent mean gap divided by the largest std.
    pub separation: f64,
    pub resolvable: bool,
}

/// Pointer mean and spread for levels `0..n_levels` from the exact moments.
/// Resolvable iff adjacent means differ by at least `4 max std`.
pub fn window_demo(params: &ModelParams, n_levels: u32, t: f64) -> Result<WindowDemo> {
    if n_levels < 2 {
        return Err(invalid("n_levels", "need at least 2 levels"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be > 0"));
    }
    let so = SecondOrder::new(params, t, SWEEP_STEP)?;
    let f = FunctionalMoments::exact(params, &so, t)?;
    let levels: Vec<LevelSpread> = (0..n_levels)
        .map(|n| {
            let nf = n as f64;
            let (mean, var) = f.pointer(params, t, nf, 2.0 * nf + 1.0);
            LevelSpread { n, mean, std: var.sqrt() }
        })
        .collect();
    let max_std = levels.iter().map(|l| l.std).fold(0.0, f64::max);
    let min_gap = levels
        .windows(2)
        .map(|w| w[1].mean - w[0].mean)
        .fold(f64::INFINITY, f64::min);
    let separation = if max_std > 0.0 { min_gap / max_std } else { f64::INFINITY };
    Ok(WindowDemo {
        t,
        levels,
        separation,
        resolvable: separation >= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::moments;

    #[test]
    fn ensemble_layout_matches_single_paths() {
        let p = ModelParams::real(1.0, 0.3, 0.1).unwrap();
        let grid = TimeGrid::new(2.0, 2000).unwrap();
        let nodes = [0, 500, 2000];
        let ens = simulate_snapshots(&p, &grid, &nodes, 5, 9).unwrap();
        let mut one = Vec::new();
        stream_snapshots(&p, &grid, 9, 3, &nodes, &mut one);
        let col: Vec<Snapshot> = ens.column(2).copied().collect();
        assert_eq!(col[3], one[2]);
        assert_eq!(ens.index_of(0.5), Some(1));
        assert!(simulate_snapshots(&p, &grid, &[0, 2001], 5, 9).is_err());
        assert!(simulate_snapshots(&p, &grid, &[5, 5], 5, 9).is_err());
    }

    #[test]
    fn non_demolition_moments_are_exact() {
        let p = ModelParams::real(1.0, 0.25, 0.0).unwrap();
        let grid = TimeGrid::new(4.0, 400).unwrap();
        let m = estimate_moments(&p, &grid, &[400], 2, 100, 1).unwrap();
        let o = &m[0];
        assert_eq!(o.mean_n.mean, 2.0);
        assert_eq!(o.var_n.mean, 0.0);
        assert_eq!(o.mean_pointer.mean, 2.0);
        let shot = 4.0 / (2.0 * 0.25 * 4.0f64).powi(2);
        assert!((o.var_pointer.mean - shot).abs() < 1e-15);
        assert!(o.var_pointer.within(shot, 3.0));
    }

    #[test]
    fn too_few_paths_rejected() {
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        assert!(matches!(
            estimate_moments(&p, &grid, &[100], 0, 50, 1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn short_time_pointer_is_shot_noise_dominated() {
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let m = estimate_moments(&p, &grid, &[100], 0, 200, 3).unwrap();
        let scaled = m[0].var_pointer.mean * (2.0 * 0.25 * 0.01f64).powi(2);
        assert!((scaled / 0.01 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn moment_estimates_cover_closed_forms() {
        let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
        let grid = TimeGrid::new(2.0, 2000).unwrap();
        let ens = simulate_snapshots(&p, &grid, &[2000], 4000, 17).unwrap();
        let e = moment_estimates(&ens, 0).unwrap();
        let m = moments(&p, 2.0).unwrap();
        assert!(e.exp_eiphi.within(m.exp_eiphi, 4.0));
        assert!(e.mean_z.within(m.mean_z, 4.0));
        assert!(e.mean_zstar_z.within(m.mean_zstar_z, 4.0));
        assert!(e.mean_y0.within(m.mean_y0, 4.0));
    }

    #[test]
    fn window_needs_two_levels() {
        let p = ModelParams::real(1.0, 0.1, 0.01).unwrap();
        assert!(window_demo(&p, 1, 100.0).is_err());
        let w = window_demo(&p, 3, 1000.0).unwrap();
        assert!((w.levels[1].mean - w.levels[0].mean - 1.0).abs() < 1e-12);
    }
}
