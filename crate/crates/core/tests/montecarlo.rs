use qmeter::analytic::{estimator_bound, exact_observables, SecondOrder};
use qmeter::montecarlo::{estimate_moments, estimator_error, simulate_snapshots, window_demo};
use qmeter::{ModelParams, TimeGrid};

#[test]
fn level_two_observables_at_t20() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let grid = TimeGrid::new(20.0, 5000).unwrap();
    let est = estimate_moments(&p, &grid, &[5000], 2, 100_000, 5101).unwrap();
    let e = &est[0];
    let so = SecondOrder::with_default_step(&p, 20.0).unwrap();
    let x = exact_observables(&p, &so, 20.0, 2).unwrap();
    for (name, m, target) in [
        ("mean_N", &e.mean_n, x.mean_n),
        ("var_N", &e.var_n, x.var_n),
        ("mean_pointer", &e.mean_pointer, x.mean_pointer),
        ("var_pointer", &e.var_pointer, x.var_pointer),
    ] {
        assert!(m.within(target, 3.0), "{name}: {} +- {} vs {target}", m.mean, m.se);
    }
    // the drive only ever heats
    assert!(x.mean_n > 2.0 && x.mean_pointer > 2.0);
}

#[test]
fn snapshots_do_not_depend_on_later_nodes() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let grid = TimeGrid::new(4.0, 4000).unwrap();
    let a = simulate_snapshots(&p, &grid, &[1000], 50, 8).unwrap();
    let b = simulate_snapshots(&p, &grid, &[1000, 2000, 4000], 50, 8).unwrap();
    assert_eq!(a.samples(0, |s| *s), b.samples(0, |s| *s));
    let short = TimeGrid::new(1.0, 1000).unwrap();
    let c = simulate_snapshots(&p, &short, &[1000], 50, 8).unwrap();
    assert_eq!(a.samples(0, |s| *s), c.samples(0, |s| *s));
}

#[test]
fn non_demolition_pointer_is_pure_shot_noise() {
    let p = ModelParams::real(1.0, 0.3, 0.0).unwrap();
    let grid = TimeGrid::new(5.0, 500).unwrap();
    for e in estimate_moments(&p, &grid, &[100, 500], 3, 200, 1).unwrap() {
        assert_eq!(e.mean_n.mean, 3.0);
        assert_eq!(e.var_n.mean, 0.0);
        assert_eq!(e.mean_pointer.mean, 3.0);
        let shot = e.t / (2.0 * 0.3 * e.t).powi(2);
        assert!((e.var_pointer.mean - shot).abs() <= 1e-12 * shot);
    }
}

#[test]
fn estimator_error_has_interior_minimum() {
    let p = ModelParams::real(1.0, 0.25, 0.1).unwrap();
    let g2 = 0.0625;
    let grid: Vec<f64> = (0..=40).map(|i| (1.0 / g2) * 100f64.powf(i as f64 / 40.0) * 0.99).collect();
    let r = estimator_error(&p, 3.0, &grid).unwrap();
    assert!(r.all_within_bound);
    assert!(r.interior_minimum, "argmin {} window {:?}", r.argmin_t, r.window);
    assert!(r.argmin_t > r.window.0 && r.argmin_t < r.window.1);
}

#[test]
fn shot_noise_only_estimator() {
    let p = ModelParams::real(1.0, 0.5, 0.0).unwrap();
    let ts = [1.0, 10.0, 100.0, 1000.0];
    let r = estimator_error(&p, 1.0, &ts).unwrap();
    for q in &r.points {
        let shot = 1.0 / (4.0 * 0.25 * q.t);
        assert!((q.mse - shot).abs() <= 1e-12 * shot);
        assert!(q.mse <= estimator_bound(&p, q.t, 1.0));
    }
    assert!(r.points[3].mse < 1e-2 * r.points[0].mse);
}

#[test]
fn pointer_levels_resolve_only_inside_the_window() {
    // at |alpha| = 0.1 the (2n + 1) <Y1* Y1> term alone spreads level 5
    // far beyond the 1/4 needed at t = 1e3
    let edge = ModelParams::real(1.0, 0.1, 0.1).unwrap();
    let d = window_demo(&edge, 6, 1e3).unwrap();
    assert!(!d.resolvable, "separation {}", d.separation);
    assert!((d.separation - 1.41).abs() < 0.05, "separation {}", d.separation);

    let weak = ModelParams::real(1.0, 0.1, 0.01).unwrap();
    let d = window_demo(&weak, 6, 1e3).unwrap();
    assert!(d.resolvable, "separation {}", d.separation);
    for (i, l) in d.levels.iter().enumerate() {
        assert!((l.mean - i as f64).abs() < 0.01);
    }
    // shot noise before the window, heating spread after it
    assert!(!window_demo(&weak, 6, 10.0).unwrap().resolvable);
    assert!(!window_demo(&weak, 6, 1e6).unwrap().resolvable);
}
