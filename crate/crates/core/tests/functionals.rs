use std::f64::consts::PI;

use num_complex::Complex64;
use qmeter::functionals::increment_decomposition_check;
use qmeter::stats::linear_fit;
use qmeter::{compute_functionals, sample_path, z_via_ito_parts, BrownianPath, ModelParams, TimeGrid};

fn log_slope(dts: &[f64], errs: &[f64]) -> f64 {
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    linear_fit(&x, &y).unwrap().slope
}

/// Mean over paths of `|Z_t(coarse) - Z_t(reference)|` for each coarsening.
fn refinement_errors(p: &ModelParams, fine: &[BrownianPath], factors: &[usize], ito: bool) -> Vec<f64> {
    let reference: Vec<Complex64> = fine
        .iter()
        .map(|b| *compute_functionals(b, p).unwrap().z.last().unwrap())
        .collect();
    factors
        .iter()
        .map(|&f| {
            let tot: f64 = fine
                .iter()
                .zip(&reference)
                .map(|(b, r)| {
                    let c = b.subsample(f).unwrap();
                    let z = if ito {
                        *z_via_ito_parts(&c, p).unwrap().last().unwrap()
                    } else {
                        *compute_functionals(&c, p).unwrap().z.last().unwrap()
                    };
                    (z - r).norm()
                })
                .sum();
            tot / fine.len() as f64
        })
        .collect()
}

#[test]
fn trapezoid_z_converges_at_first_order() {
    let p = ModelParams::real(1.0, 0.5, 0.1).unwrap();
    let grid = TimeGrid::new(5.0, 50_000).unwrap();
    let paths: Vec<_> = (0..64).map(|s| sample_path(&grid, 31, s)).collect();
    let factors = [10, 20, 40, 80];
    let errs = refinement_errors(&p, &paths, &factors, false);
    let dts: Vec<f64> = factors.iter().map(|&f| f as f64 * grid.dt()).collect();
    let slope = log_slope(&dts, &errs);
    assert!((slope - 1.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
}

#[test]
fn ito_route_converges_at_half_order() {
    let p = ModelParams::real(1.0, 0.5, 0.1).unwrap();
    let grid = TimeGrid::new(5.0, 50_000).unwrap();
    let paths: Vec<_> = (0..64).map(|s| sample_path(&grid, 32, s)).collect();
    let factors = [5, 25, 125, 625];
    let errs = refinement_errors(&p, &paths, &factors, true);
    let dts: Vec<f64> = factors.iter().map(|&f| f as f64 * grid.dt()).collect();
    let slope = log_slope(&dts, &errs);
    assert!((slope - 0.5).abs() < 0.15, "slope {slope}, errors {errs:?}");
}

#[test]
fn ito_route_matches_trapezoid_pathwise() {
    let p = ModelParams::real(1.0, 0.5, 0.1).unwrap();
    let grid = TimeGrid::new(2.0, 20_000).unwrap();
    let b = sample_path(&grid, 1, 0);
    let f = compute_functionals(&b, &p).unwrap();
    let z = z_via_ito_parts(&b, &p).unwrap();
    assert_eq!(z[0], Complex64::new(0.0, 0.0));
    let gap = f.z.iter().zip(&z).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 0.05, "max gap {gap}");
}

#[test]
fn deterministic_phase_closes_after_one_period() {
    let p = ModelParams::real(1.0, 0.0, 0.3).unwrap();
    let grid = TimeGrid::new(2.0 * PI, 4000).unwrap();
    let f = compute_functionals(&sample_path(&grid, 0, 0), &p).unwrap();
    assert!(f.z.last().unwrap().norm() < 1e-6);
    let t = 2.0 * PI;
    assert!((f.y0.last().unwrap() - 2.0 * t).abs() < 1e-5, "{}", f.y0.last().unwrap());
    assert!((f.y1.last().unwrap() - Complex64::new(0.0, t)).norm() < 1e-5, "{}", f.y1.last().unwrap());
}

#[test]
fn renewal_decomposition_in_law() {
    let p = ModelParams::real(1.0, 0.5, 0.1).unwrap();
    let grid = TimeGrid::new(3.0, 300).unwrap();
    let paths: Vec<_> = (0..10_000).map(|s| sample_path(&grid, 77, s)).collect();
    let r = increment_decomposition_check(&paths, &p, 1.0, 3.0).unwrap();
    assert!(r.passed, "{r:?}");
    let r0 = increment_decomposition_check(&paths, &p, 0.0, 3.0).unwrap();
    assert!(r0.passed, "{r0:?}");
}

#[test]
fn renewal_decomposition_without_noise_is_exact() {
    let p = ModelParams::real(1.0, 0.0, 0.1).unwrap();
    let grid = TimeGrid::new(3.0, 300).unwrap();
    let paths: Vec<_> = (0..1000).map(|s| sample_path(&grid, 3, s)).collect();
    let r = increment_decomposition_check(&paths, &p, 1.0, 3.0).unwrap();
    assert!(r.passed);
    assert!(r.max_deterministic_gap.unwrap() < 1e-9);
}
