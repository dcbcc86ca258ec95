use qmeter::analytic::moments;
use qmeter::limits::{scaled_z_samples, state_independence_check, wiener_scaling_check};
use qmeter::stats::{ComplexEstimate, MCEstimate};
use qmeter::ModelParams;

fn params() -> ModelParams {
    ModelParams::real(1.0, 0.5, 0.2).unwrap()
}

#[test]
fn scaled_endpoint_first_and_second_moments() {
    let p = params();
    let (t, eps) = (1.0, 1e-3);
    let ens = scaled_z_samples(&p, t, eps, 0.01, 10_000, 6101).unwrap();

    // at finite eps the mean is sqrt(eps) (exp(ct/eps) - 1)/c, not 0
    let mean = ComplexEstimate::from_samples(&ens.z, ens.dt).unwrap();
    let exact = ens.exact_mean();
    assert!(mean.within(exact, 3.0), "{:?} vs {exact}", mean.mean());
    assert!((exact + eps.sqrt() / p.c()).norm() < 1e-12);

    let m2: Vec<f64> = ens.z.iter().map(|z| z.norm_sqr()).collect();
    let m2 = MCEstimate::from_samples(&m2, ens.dt).unwrap();
    let finite = eps * moments(&p, t / eps).unwrap().mean_zstar_z;
    let limit = 2.0 * ens.limit_component_variance();
    assert!(m2.within(finite, 3.0), "{m2:?} vs {finite}");
    assert!(m2.within(limit, 3.0), "{m2:?} vs {limit}");
    assert!((finite - limit).abs() < 0.01 * limit);
}

#[test]
fn level_dependence_is_eps_n() {
    let p = params();
    let r = state_independence_check(&p, 7.0, &[0.1, 0.01, 0.001], 6, 0.05, 1000, 6102).unwrap();
    for row in &r.rows {
        let exact = row.epsilon * row.n as f64;
        assert!((row.paired_difference - exact).abs() < 1e-12 * exact.max(1.0), "{row:?}");
    }
    let row = r.rows.iter().find(|x| x.epsilon == 0.01 && x.n == 5).unwrap();
    assert!(row.difference.within(0.05, 3.0), "{row:?}");
    assert!((r.slope - 1.0).abs() < 0.05, "slope {}", r.slope);
}

#[test]
fn wiener_scaling_in_law() {
    let r = wiener_scaling_check(&params(), 1.0, 1e-2, 0.01, 5000, 6103).unwrap();
    assert!(r.ks.passes(0.01), "{r:?}");
}

#[test]
fn time_average_carries_half_the_endpoint_heating() {
    let p = params();
    let h = p.heating_prefactor();
    let t = 1.0;
    let ratio = |eps: f64| {
        let m = moments(&p, t / eps).unwrap();
        (eps * eps * h * m.mean_y0 / t) / (eps * h * m.mean_zstar_z)
    };
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|&e| (ratio(e) - 0.5).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 1e-3, "{gaps:?}");
}
