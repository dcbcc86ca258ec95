use qmeter::analytic::bounds::LEMMA2;
use qmeter::analytic::{covariances, moments, regime_asymptotics, variance_bounds, SecondOrder};
use qmeter::montecarlo::{covariance_estimates, moment_estimates, simulate_snapshots};
use qmeter::stats::{linear_fit, MCEstimate};
use qmeter::{ModelParams, Regime, TimeGrid};

#[test]
fn first_moments_against_monte_carlo_at_t10() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let grid = TimeGrid::new(10.0, 5000).unwrap();
    let ens = simulate_snapshots(&p, &grid, &[5000], 100_000, 4101).unwrap();
    let e = moment_estimates(&ens, 0).unwrap();
    let m = moments(&p, 10.0).unwrap();
    assert!(e.exp_eiphi.within(m.exp_eiphi, 3.0), "{:?} vs {}", e.exp_eiphi, m.exp_eiphi);
    assert!(e.mean_z.within(m.mean_z, 3.0));
    assert!(e.mean_zstar_z.within(m.mean_zstar_z, 3.0));
    assert!(e.mean_y1.within(m.mean_y1, 3.0));
    assert!(e.mean_y0.within(m.mean_y0, 3.0));
    assert!(e.mean_y1star_y1.within(m.mean_y1star_y1, 3.0));
}

#[test]
fn phase_modulus_covariance_against_monte_carlo() {
    let p = ModelParams::real(1.0, 0.3, 0.1).unwrap();
    let grid = TimeGrid::new(5.0, 2500).unwrap();
    let ens = simulate_snapshots(&p, &grid, &[2500], 100_000, 4102).unwrap();
    let e = covariance_estimates(&ens, 0).unwrap();
    let c = covariances(&p, 5.0).unwrap();
    assert!(!c.degenerate);
    assert!(e.zz_eiphi.within(c.zz_eiphi, 3.0), "{:?} vs {}", e.zz_eiphi, c.zz_eiphi);
    assert!(e.zbar_eiphi_z.within(c.zbar_eiphi_z, 3.0));
    assert!(e.emiphi_z_z.within(c.emiphi_z_z, 3.0));
}

#[test]
fn modulus_variance_bound_at_t20() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let t = 20.0;
    let b = variance_bounds(&p, t, t).unwrap();
    let g2 = 0.0625;
    assert!((b.var_zz - g2 * (2.0 * g2 * t * t + LEMMA2.var_zz * t)).abs() < 1e-12);

    let grid = TimeGrid::new(t, 10_000).unwrap();
    let ens = simulate_snapshots(&p, &grid, &[10_000], 20_000, 4103).unwrap();
    let zz = ens.samples(0, |s| s.z.norm_sqr());
    let m = MCEstimate::from_samples(&zz, grid.dt()).unwrap();
    let var = m.sample_variance();
    let exact = SecondOrder::with_default_step(&p, t).unwrap().var_zz(t).unwrap();
    let dev: Vec<f64> = zz.iter().map(|x| (x - m.mean).powi(2)).collect();
    let var_se = MCEstimate::from_samples(&dev, grid.dt()).unwrap().se;
    assert!((var - exact).abs() <= 3.0 * var_se, "mc {var} exact {exact} se {var_se}");
    assert!(exact <= b.var_zz && var <= b.var_zz);
}

#[test]
fn variance_growth_is_at_most_quadratic() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let so = SecondOrder::new(&p, 100.0, 0.02).unwrap();
    let ts: Vec<f64> = (0..20).map(|i| 10.0 * 10f64.powf(i as f64 / 19.0)).collect();
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = ts.iter().map(|&t| so.var_zz(t).unwrap().ln()).collect();
    let slope = linear_fit(&x, &y).unwrap().slope;
    assert!(slope <= 2.1, "slope {slope}");
}

#[test]
fn regime_predictions_track_the_exact_heating() {
    let p = ModelParams::real(1.0, 0.1, 0.1).unwrap();
    let a2 = 0.01;
    let h = p.heating_prefactor();

    let late = 100.0 / 0.01;
    let r = regime_asymptotics(&p, late, 0).unwrap();
    assert_eq!(r.regime, Regime::Late);
    assert!((r.instantaneous_excess - a2 * 0.01 * late).abs() < 1e-12);
    assert!((r.pointer_excess - a2 * 0.01 * late / 2.0).abs() < 1e-12);
    let m = moments(&p, late).unwrap();
    assert!((h * m.mean_zstar_z / r.instantaneous_excess - 1.0).abs() < 0.1);
    assert!((h * m.mean_y0 / late / r.pointer_excess - 1.0).abs() < 0.1);

    let early = 0.1;
    let r = regime_asymptotics(&p, early, 0).unwrap();
    assert_eq!(r.regime, Regime::Early);
    assert!((r.pointer_excess * 3.0 - r.instantaneous_excess).abs() < 1e-15);
    let m = moments(&p, early).unwrap();
    assert!((h * m.mean_zstar_z / r.instantaneous_excess - 1.0).abs() < 0.05);
    assert!((h * m.mean_y0 / early / r.pointer_excess - 1.0).abs() < 0.05);

    let mid = std::f64::consts::PI;
    let r = regime_asymptotics(&p, mid, 0).unwrap();
    assert_eq!(r.regime, Regime::Oscillatory);
    assert!((r.instantaneous_excess - 4.0 * a2).abs() < 1e-15);
    let m = moments(&p, mid).unwrap();
    assert!((h * m.mean_zstar_z / r.instantaneous_excess - 1.0).abs() < 0.15);
}
