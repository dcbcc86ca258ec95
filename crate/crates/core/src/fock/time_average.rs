//! Time-averaged number operator `(1/T) int_0^T e^{iHt} N e^{-iHt} dt`.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use super::{block_unitarity_error, CMat, FockSpace};
use crate::error::{invalid, Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Serialize)]
pub struct TimeAverageReport {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub block_unitarity_error: f64,
}

/// Eigendecomposition `H = V diag(lambda) V*`, reusable across `T`.
#[derive(Debug, Clone)]
pub struct HamiltonianEigen {
    values: Vec<f64>,
    vectors: CMat,
    /// `V* N V`
    n_eig: CMat,
}

impl HamiltonianEigen {
    pub fn new(space: &FockSpace, params: &ModelParams) -> Self {
        let eig = SymmetricEigen::new(space.hamiltonian(params));
        let vectors = eig.eigenvectors;
        let n_eig = vectors.adjoint() * space.number() * &vectors;
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors,
            n_eig,
        }
    }

    /// `e^{-iHt}`
    pub fn evolution(&self, t: f64) -> CMat {
        let d = self.values.len();
        let mut m = self.vectors.clone();
        for j in 0..d {
            let ph = Complex64::from_polar(1.0, -self.values[j] * t);
            for i in 0..d {
                m[(i, j)] *= ph;
            }
        }
        m * self.vectors.adjoint()
    }

    /// Exact time average: in the eigenbasis the entry `(j, k)` picks up
    /// `(e^{i d T} - 1) / (i d T)` with `d = lambda_j - lambda_k`.
    pub fn averaged_number(&self, t: f64) -> CMat {
        let d = self.values.len();
        let mut m = self.n_eig.clone();
        for k in 0..d {
            for j in 0..d {
                let x = (self.values[j] - self.values[k]) * t;
                let f = if x.abs() < 1e-8 {
                    Complex64::new(1.0, 0.5 * x)
                } else {
                    (Complex64::from_polar(1.0, x) - 1.0) / Complex64::new(0.0, x)
                };
                m[(j, k)] *= f;
            }
        }
        &self.vectors * m * self.vectors.adjoint()
    }
}

/// Trapezoid rule over `m` panels of `e^{iHt} N e^{-iHt}`.
pub fn averaged_number_trapezoid(eig: &HamiltonianEigen, space: &FockSpace, t: f64, m: usize) -> CMat {
    let d = space.dim();
    let mut acc = CMat::zeros(d, d);
    for k in 0..=m {
        let u = eig.evolution(t * k as f64 / m as f64);
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        acc += (u.adjoint() * space.number() * u) * Complex64::new(w / m as f64, 0.0);
    }
    acc
}

/// Whether the dynamics of `|n>` stays inside the reliable block.
pub fn truncation_ok(space: &FockSpace, params: &ModelParams, n: usize) -> bool {
    let r = (n as f64).sqrt() + 2.0 * params.alpha().norm() + 3.0;
    r * r <= space.reliable() as f64
}

/// `N - (conj(alpha) a + alpha a*) + 2|alpha|^2`
pub fn infinite_time_limit(space: &FockSpace, params: &ModelParams) -> CMat {
    let al = params.alpha();
    let id = CMat::identity(space.dim(), space.dim());
    space.number() - space.a() * al.conj() - space.adag() * al + id * Complex64::new(2.0 * params.alpha_norm_sqr(), 0.0)
}

/// Frobenius distance between `N_T` and its infinite-time limit on the reliable block.
pub fn frobenius_gap(eig: &HamiltonianEigen, space: &FockSpace, params: &ModelParams, t: f64) -> f64 {
    let diff = eig.averaged_number(t) - infinite_time_limit(space, params);
    let k = space.reliable();
    diff.view((0, 0), (k, k)).norm()
}

pub fn time_averaged_n(space: &FockSpace, params: &ModelParams, t: f64, n: usize) -> Result<TimeAverageReport> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("T", format!("must be > 0, got {t}")));
    }
    if !truncation_ok(space, params, n) {
        let r = (n as f64).sqrt() + 2.0 * params.alpha().norm() + 3.0;
        return Err(Error::TruncationTooSmall {
            norm_sqr: r * r,
            dim: space.dim(),
            limit: space.reliable() as f64,
        });
    }
    let eig = HamiltonianEigen::new(space, params);
    let nbar = eig.averaged_number(t);
    let col = nbar.column(n);
    let mean = col[n].re;
    let variance = col.dotc(&col).re - mean * mean;
    let a2 = params.alpha_norm_sqr();
    Ok(TimeAverageReport {
        n,
        t,
        mean,
        variance,
        predicted_mean: n as f64 + 2.0 * a2,
        predicted_variance: (2 * n + 1) as f64 * a2,
        block_unitarity_error: block_unitarity_error(&eig.evolution(t), space.reliable()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::block_max_abs;
    use std::f64::consts::PI;

    #[test]
    fn no_drive_is_exact() {
        let space = FockSpace::new(64).unwrap();
        let p = ModelParams::real(1.0, 0.1, 0.0).unwrap();
        let r = time_averaged_n(&space, &p, 7.3, 4).unwrap();
        assert!((r.mean - 4.0).abs() < 1e-12);
        assert!(r.variance.abs() < 1e-12);
    }

    #[test]
    fn evolution_matches_expm() {
        let space = FockSpace::new(24).unwrap();
        let p = ModelParams::new(1.0, 0.1, Complex64::new(0.2, 0.1)).unwrap();
        let eig = HamiltonianEigen::new(&space, &p);
        let t = 1.7;
        let direct = crate::fock::expm(&(space.hamiltonian(&p) * Complex64::new(0.0, -t)));
        assert!(block_max_abs(&(eig.evolution(t) - direct), 24) < 1e-11);
    }

    #[test]
    fn trapezoid_converges_to_exact_filter() {
        let space = FockSpace::new(24).unwrap();
        let p = ModelParams::real(1.0, 0.1, 0.3).unwrap();
        let eig = HamiltonianEigen::new(&space, &p);
        let t = 3.0 * 2.0 * PI + 1.0;
        let exact = eig.averaged_number(t);
        let e1 = block_max_abs(&(averaged_number_trapezoid(&eig, &space, t, 200) - &exact), 12);
        let e2 = block_max_abs(&(averaged_number_trapezoid(&eig, &space, t, 400) - &exact), 12);
        assert!(e2 < 1e-3);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn guard_rejects_high_levels() {
        let space = FockSpace::new(40).unwrap();
        let p = ModelParams::real(1.0, 0.1, 0.2).unwrap();
        assert!(time_averaged_n(&space, &p, 10.0, 1).is_ok());
        assert!(matches!(
            time_averaged_n(&space, &p, 10.0, 4),
            Err(Error::TruncationTooSmall { .. })
        ));
    }
}
