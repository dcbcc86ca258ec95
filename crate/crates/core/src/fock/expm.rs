//! Matrix exponential by scaling and squaring with a degree-13 Pade
//! approximant (Higham 2005).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

const THETA_13: f64 = 5.371920351148152;

const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn one_norm(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &CMat) -> CMat {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);
    let id = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| Complex64::new(x, 0.0);
    let u_inner = &a6 * (&a6 * r(B[13]) + &a4 * r(B[11]) + &a2 * r(B[9]))
        + &a6 * r(B[7])
        + &a4 * r(B[5])
        + &a2 * r(B[3])
        + &id * r(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * r(B[12]) + &a4 * r(B[10]) + &a2 * r(B[8]))
        + &a6 * r(B[6])
        + &a4 * r(B[4])
        + &a2 * r(B[2])
        + &id * r(B[0]);
    let mut x = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is singular");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}
