//! Truncated Fock-space realization of the oscillator.
//!
//! Truncation at dimension `D` corrupts the last rows and columns of every
//! operator product; checks are made on the top-left `D/2` block only.

pub mod expm;
pub mod propagator;
pub mod time_average;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use expm::{expm, CMat};
pub use propagator::{
    propagate_path, qsde_residual, PathPropagator, QsdeResidualReport,
};
pub use time_average::{time_averaged_n, TimeAverageReport};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub const DEFAULT_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct FockSpace {
    dim: usize,
    a: CMat,
    adag: CMat,
    n: CMat,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 4 {
            return Err(crate::error::invalid("dim", format!("need at least 4 levels, got {dim}")));
        }
        let mut a = CMat::zeros(dim, dim);
        for k in 1..dim {
            a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
        }
        let adag = a.adjoint();
        let n = CMat::from_diagonal(&nalgebra::DVector::from_fn(dim, |k, _| {
            Complex64::new(k as f64, 0.0)
        }));
        Ok(Self { dim, a, adag, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side of the block on which truncation effects are negligible.
    pub fn reliable(&self) -> usize {
        self.dim / 2
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn adag(&self) -> &CMat {
        &self.adag
    }

    pub fn number(&self) -> &CMat {
        &self.n
    }

    /// `H = omega (N - conj(alpha) a - alpha a*)`
    pub fn hamiltonian(&self, params: &ModelParams) -> CMat {
        let al = params.alpha();
        (&self.n - &self.a * al.conj() - &self.adag * al) * Complex64::new(params.omega(), 0.0)
    }

    /// `Gamma = gamma N`
    pub fn coupling(&self, params: &ModelParams) -> CMat {
        &self.n * Complex64::new(params.gamma(), 0.0)
    }

    /// Largest `|z|^2` accepted by [`FockSpace::displacement`].
    pub fn displacement_limit(&self) -> f64 {
        self.dim as f64 / 4.0
    }

    /// `D(z) = exp(z a* - conj(z) a)`.
    pub fn displacement(&self, z: Complex64) -> Result<CMat> {
        let limit = self.displacement_limit();
        if z.norm_sqr() > limit {
            return Err(Error::TruncationTooSmall {
                norm_sqr: z.norm_sqr(),
                dim: self.dim,
                limit,
            });
        }
        Ok(expm(&(&self.adag * z - &self.a * z.conj())))
    }

    /// `exp(-i theta N)`, diagonal.
    pub fn phase(&self, theta: f64) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_fn(self.dim, |k, _| {
            Complex64::from_polar(1.0, -theta * k as f64)
        }))
    }
}

/// Largest entry modulus of `m` on its top-left `k x k` block.
pub fn block_max_abs(m: &CMat, k: usize) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..k {
        for i in 0..k {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// `max |(U* U - 1)_{ij}|` over the reliable block.
pub fn block_unitarity_error(u: &CMat, k: usize) -> f64 {
    let id = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
    block_max_abs(&(u.adjoint() * u - id), k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_commutator_on_block() {
        let f = FockSpace::new(16).unwrap();
        let comm = f.a() * f.adag() - f.adag() * f.a();
        let id = CMat::identity(16, 16);
        assert!(block_max_abs(&(&comm - &id), 15) < 1e-14);
        // the truncation shows in the last diagonal entry
        assert!((comm[(15, 15)] - c(-15.0, 0.0)).norm() < 1e-12);
        assert!(block_max_abs(&(f.adag() * f.a() - f.number()), 16) < 1e-14);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let f = FockSpace::new(12).unwrap();
        let p = ModelParams::new(1.3, 0.2, c(0.3, -0.2)).unwrap();
        let h = f.hamiltonian(&p);
        assert!(block_max_abs(&(&h - h.adjoint()), 12) == 0.0);
    }

    #[test]
    fn displacement_identities() {
        let f = FockSpace::new(64).unwrap();
        let id = CMat::identity(64, 64);
        assert!(block_max_abs(&(f.displacement(c(0.0, 0.0)).unwrap() - &id), 64) < 1e-15);
        let z = c(0.7, -0.4);
        let prod = f.displacement(z).unwrap() * f.displacement(-z).unwrap();
        assert!(block_max_abs(&(prod - &id), 32) < 1e-12);
        assert!(block_unitarity_error(&f.displacement(z).unwrap(), 32) < 1e-12);
        assert!(matches!(
            f.displacement(c(4.1, 0.0)),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn displacement_composition_phase() {
        let f = FockSpace::new(64).unwrap();
        let (zp, z) = (c(1.0, 0.0), c(0.0, 1.0));
        let lhs = f.displacement(zp).unwrap() * f.displacement(z).unwrap();
        let phase = Complex64::from_polar(1.0, -(zp.conj() * z).im);
        let rhs = f.displacement(zp + z).unwrap() * phase;
        assert!(block_max_abs(&(lhs - rhs), 32) < 1e-8);
    }

    #[test]
    fn coherent_state_column() {
        // <k|D(z)|0> = exp(-|z|^2/2) z^k / sqrt(k!)
        let f = FockSpace::new(40).unwrap();
        let z = c(0.6, 0.8);
        let d = f.displacement(z).unwrap();
        let mut expected = Complex64::from_polar((-0.5 * z.norm_sqr()).exp(), 0.0);
        for k in 0..20 {
            assert!((d[(k, 0)] - expected).norm() < 1e-13, "k={k}");
            expected *= z / ((k + 1) as f64).sqrt();
        }
    }
}
