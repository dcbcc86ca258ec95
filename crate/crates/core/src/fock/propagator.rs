//! Per-path propagator `U_t = exp(-i phi_t N) D(iw alpha Z_t) exp(-i G_t)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{block_max_abs, block_unitarity_error, CMat, FockSpace};
use crate::error::{invalid, Error, Result};
use crate::functionals::{compute_functionals, PathFunctionals};
use crate::params::{ModelParams, TimeGrid};
use crate::path::sample_path;
use crate::stats::{linear_fit, mean};

#[derive(Debug, Clone)]
pub struct PathPropagator {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    /// `i omega alpha Z_t` at each node.
    pub zeta: Vec<Complex64>,
    pub u: Vec<CMat>,
}

fn u_at(space: &FockSpace, params: &ModelParams, phi: f64, z: Complex64, g: f64) -> Result<(Complex64, CMat)> {
    let zeta = Complex64::new(0.0, params.omega()) * params.alpha() * z;
    let d = space.displacement(zeta)?;
    let u = space.phase(phi) * d * Complex64::from_polar(1.0, -g);
    Ok((zeta, u))
}

/// `U` at the requested grid nodes.
pub fn propagate_path(
    space: &FockSpace,
    functionals: &PathFunctionals,
    params: &ModelParams,
    nodes: &[usize],
) -> Result<PathPropagator> {
    let n = functionals.grid.n_steps();
    if let Some(&bad) = nodes.iter().find(|&&k| k > n) {
        return Err(Error::GridMismatch(format!("node {bad} beyond {n} steps")));
    }
    let mut out = PathPropagator {
        nodes: nodes.to_vec(),
        times: nodes.iter().map(|&k| functionals.grid.time(k)).collect(),
        zeta: Vec::with_capacity(nodes.len()),
        u: Vec::with_capacity(nodes.len()),
    };
    for &k in nodes {
        let (zeta, u) = u_at(space, params, functionals.phi[k], functionals.z[k], functionals.g[k])?;
        out.zeta.push(zeta);
        out.u.push(u);
    }
    Ok(out)
}

impl PathPropagator {
    /// Block error of `U* N U = (a* + conj(zeta))(a + zeta)` at sample `i`.
    pub fn heisenberg_error(&self, space: &FockSpace, i: usize) -> f64 {
        let u = &self.u[i];
        let lhs = u.adjoint() * space.number() * u;
        let id = CMat::identity(space.dim(), space.dim());
        let z = self.zeta[i];
        let rhs = (space.adag() + &id * z.conj()) * (space.a() + &id * z);
        block_max_abs(&(lhs - rhs), space.reliable())
    }

    pub fn unitarity_error(&self, space: &FockSpace, i: usize) -> f64 {
        block_unitarity_error(&self.u[i], space.reliable())
    }

    /// `<n| U_s* N U_s |n>` at each sample.
    pub fn number_expectation(&self, space: &FockSpace, n: usize) -> Vec<f64> {
        self.u
            .iter()
            .map(|u| {
                let col = u.column(n);
                let nu = space.number() * col;
                col.dotc(&nu).re
            })
            .collect()
    }

    /// Pointer accumulated from its slope `2 gamma <n|U_s* N U_s|n>` by the
    /// trapezoid rule over the sample times.
    pub fn accumulated_pointer(&self, space: &FockSpace, params: &ModelParams, n: usize) -> f64 {
        let e = self.number_expectation(space, n);
        let g = 2.0 * params.gamma();
        self.times
            .windows(2)
            .zip(e.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * g * (v[0] + v[1]))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QsdeResidualReport {
    pub dts: Vec<f64>,
    /// Mean over paths of the Frobenius norm of the one-step residual,
    /// restricted to the low-level columns.
    pub mean_residual: Vec<f64>,
    pub loglog_slope: f64,
    pub n_paths: usize,
}

/// One-step Euler residual of
/// `dU = -(iH + Gamma^2/2) U dt - i Gamma U dW`
/// at time `t0`, for steps `dt_fine * f` over `factors`, all driven by the
/// same fine increments.
#[allow(clippy::too_many_arguments)]
pub fn qsde_residual(
    space: &FockSpace,
    params: &ModelParams,
    t0: f64,
    dt_fine: f64,
    factors: &[usize],
    levels: usize,
    n_paths: usize,
    seed: u64,
) -> Result<QsdeResidualReport> {
    if factors.len() < 2 {
        return Err(invalid("factors", "need at least two step sizes"));
    }
    if levels == 0 || levels > space.reliable() {
        return Err(invalid("levels", format!("need 1..={}", space.reliable())));
    }
    let k0 = (t0 / dt_fine).round() as usize;
    let kmax = factors.iter().max().copied().unwrap_or(1);
    let grid = TimeGrid::new((k0 + kmax) as f64 * dt_fine, k0 + kmax)?;
    let h = space.hamiltonian(params);
    let gam = space.coupling(params);
    let i = Complex64::new(0.0, 1.0);
    let drift = &h * i + &gam * &gam * Complex64::new(0.5, 0.0);
    let rows = space.reliable();
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| {
            let path = sample_path(&grid, seed, stream);
            let f = compute_functionals(&path, params)?;
            let (_, u0) = u_at(space, params, f.phi[k0], f.z[k0], f.g[k0])?;
            let du_drift = &drift * &u0;
            let du_noise = &gam * &u0 * i;
            factors
                .iter()
                .map(|&m| {
                    let k = k0 + m;
                    let dt = m as f64 * dt_fine;
                    let dw = f.w[k] - f.w[k0];
                    let (_, u1) = u_at(space, params, f.phi[k], f.z[k], f.g[k])?;
                    let r = &u1 - &u0 + &du_drift * Complex64::new(dt, 0.0) + &du_noise * Complex64::new(dw, 0.0);
                    let mut ss = 0.0_f64;
                    for c in 0..levels {
                        for row in 0..rows {
                            ss += r[(row, c)].norm_sqr();
                        }
                    }
                    Ok(ss.sqrt())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let dts: Vec<f64> = factors.iter().map(|&m| m as f64 * dt_fine).collect();
    let mean_residual: Vec<f64> = (0..factors.len())
        .map(|j| mean(&per_path.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = mean_residual.iter().map(|r| r.ln()).collect();
    Ok(QsdeResidualReport {
        loglog_slope: linear_fit(&lx, &ly)?.slope,
        dts,
        mean_residual,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_origin_and_diagonal_without_alpha() {
        let space = FockSpace::new(16).unwrap();
        let p = ModelParams::real(1.0, 0.5, 0.0).unwrap();
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let f = compute_functionals(&sample_path(&grid, 1, 0), &p).unwrap();
        let prop = propagate_path(&space, &f, &p, &[0, 100, 200]).unwrap();
        let id = CMat::identity(16, 16);
        assert!(block_max_abs(&(&prop.u[0] - &id), 16) < 1e-15);
        for u in &prop.u {
            for j in 0..16 {
                for i in 0..16 {
                    if i != j {
                        assert!(u[(i, j)].norm() < 1e-15);
                    }
                }
            }
        }
        let e = prop.number_expectation(&space, 3);
        assert!(e.iter().all(|&v| (v - 3.0).abs() < 1e-13));
        assert!(propagate_path(&space, &f, &p, &[201]).is_err());
    }

    #[test]
    fn pointer_slope_without_alpha_is_exact() {
        let space = FockSpace::new(16).unwrap();
        let p = ModelParams::real(1.0, 0.5, 0.0).unwrap();
        let grid = TimeGrid::new(4.0, 400).unwrap();
        let f = compute_functionals(&sample_path(&grid, 2, 0), &p).unwrap();
        let nodes: Vec<usize> = (0..=400).step_by(10).collect();
        let prop = propagate_path(&space, &f, &p, &nodes).unwrap();
        for n in 0..5 {
            let q = prop.accumulated_pointer(&space, &p, n);
            assert!((q - 2.0 * 0.5 * n as f64 * 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_identity_on_block() {
        let space = FockSpace::new(64).unwrap();
        let p = ModelParams::new(1.0, 0.5, Complex64::new(0.2, 0.1)).unwrap();
        let grid = TimeGrid::new(5.0, 5000).unwrap();
        let f = compute_functionals(&sample_path(&grid, 3, 1), &p).unwrap();
        let prop = propagate_path(&space, &f, &p, &[0, 1250, 5000]).unwrap();
        for i in 0..3 {
            assert!(prop.heisenberg_error(&space, i) < 1e-6);
            assert!(prop.unitarity_error(&space, i) < 1e-8);
        }
    }
}
