//! Taylor remainders `R_n(f)(z) = f(z) - sum_{k<=n} f^(k)(0) z^k / k!` for
//! `f = exp` and `f(x) = (x - 1) exp(x)`.
//!
//! Near the origin the direct difference cancels catastrophically, so for
//! `|z| < 0.5` the tail of the series is summed instead.

use num_complex::Complex64;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 20;

/// Which function the remainder is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorFn {
    /// `exp(z)`
    Exp,
    /// `(z - 1) exp(z)`
    ShiftedExp,
}

impl TaylorFn {
    fn eval(self, z: Complex64) -> Complex64 {
        match self {
            TaylorFn::Exp => z.exp(),
            TaylorFn::ShiftedExp => (z - 1.0) * z.exp(),
        }
    }

    /// `k`-th Taylor coefficient at 0.
    fn coeff(self, k: usize, inv_fact: f64) -> f64 {
        match self {
            TaylorFn::Exp => inv_fact,
            TaylorFn::ShiftedExp if k == 0 => -1.0,
            TaylorFn::ShiftedExp => (k as f64 - 1.0) * inv_fact,
        }
    }
}

/// `R_n(f)(z)` for any order `n`. The bounds used elsewhere only hold for
/// `Re z <= 0`, but any `z` is accepted.
pub fn remainder(f: TaylorFn, n: usize, z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        series_tail(f, n, z)
    } else {
        direct(f, n, z)
    }
}

fn series_tail(f: TaylorFn, n: usize, z: Complex64) -> Complex64 {
    let mut inv_fact = 1.0;
    let mut zk = Complex64::new(1.0, 0.0);
    let mut tail = Complex64::new(0.0, 0.0);
    for k in 1..=n + SERIES_TERMS {
        inv_fact /= k as f64;
        zk *= z;
        if k > n {
            tail += zk * f.coeff(k, inv_fact);
        }
    }
    tail
}

fn direct(f: TaylorFn, n: usize, z: Complex64) -> Complex64 {
    let mut inv_fact = 1.0;
    let mut zk = Complex64::new(1.0, 0.0);
    let mut poly = Complex64::new(f.coeff(0, 1.0), 0.0);
    for k in 1..=n {
        inv_fact /= k as f64;
        zk *= z;
        poly += zk * f.coeff(k, inv_fact);
    }
    f.eval(z) - poly
}

/// `R_n(exp)(z)`.
pub fn taylor_remainder(n: usize, z: Complex64) -> Complex64 {
    remainder(TaylorFn::Exp, n, z)
}
