//! Sweep that produces the frozen constants in `analytic::bounds`.
//!
//! omega = 1 throughout (every ratio is invariant under time rescaling),
//! gamma^2 on a log grid over [1e-3, 1], t on a log grid over
//! [1e-2, 100 / gamma^2]. Prints the supremum of each ratio; the frozen
//! value is `1.05 * sup` rounded up to the next multiple of 0.5.

use qmeter::analytic::{moments, SecondOrder};
use qmeter::ModelParams;

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn main() {
    let mut sup = [0.0_f64; 6];
    let names = ["k_cov", "var_zz", "cov_zz", "var_y0", "prop5_c1", "prop5_c2"];
    for g2 in logspace(1e-3, 1.0, 13) {
        let p = ModelParams::real(1.0, g2.sqrt(), 0.0).unwrap();
        let t_max = 100.0 / g2;
        let so = SecondOrder::new(&p, t_max, 0.02).unwrap();
        let ts = logspace(1e-2, t_max, 200);
        for (i, &t) in ts.iter().enumerate() {
            let k = so.k_cov(t).unwrap().norm();
            let v = so.var_zz(t).unwrap();
            let vy = so.var_y0(t).unwrap();
            let m = moments(&p, t).unwrap();
            let r = [
                k / (g2 * t),
                (v / g2 - 2.0 * g2 * t * t) / t,
                f64::NEG_INFINITY,
                (3.0 * vy / g2 - g2 * t.powi(4)) / t.powi(3),
                m.mean_y1star_y1 / (t * t * (1.0 + g2 * t)),
                (vy + m.mean_y0 * m.mean_y0) / (t * t * (1.0 + (g2 * t).powi(2))),
            ];
            for (j, x) in r.iter().enumerate() {
                sup[j] = sup[j].max(*x);
            }
            for &s in ts[..=i].iter().step_by(4) {
                let cst = so.cov_zz(s, t).unwrap().abs();
                sup[2] = sup[2].max((cst / g2 - 2.0 * g2 * s * s) / s);
            }
        }
        eprintln!("gamma^2 = {g2:.3e}: {sup:?}");
    }
    for (n, s) in names.iter().zip(sup) {
        println!("{n:>10} sup = {s:.6}  frozen = {:.1}", (1.05 * s * 2.0).ceil() / 2.0);
    }
}
