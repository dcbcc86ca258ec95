use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use num_complex::Complex64;
use serde::Serialize;

use qmeter::acceptance::{self, num, tol, AcceptanceOptions, Check, Table, ACCEPTANCE_SEED};
use qmeter::analytic::{covariances, exact_observables, moments, SecondOrder};
use qmeter::config::ExperimentConfig;
use qmeter::fock::{block_max_abs, block_unitarity_error, propagate_path, time_averaged_n, FockSpace, DEFAULT_DIM};
use qmeter::limits::{
    gaussianity_check, limit_cf_check, real_case_check, scaled_z_samples, time_average_extrapolated, LimitObservable,
};
use qmeter::montecarlo::{
    covariance_estimates, estimate_moments, moment_estimates, simulate_snapshots, window_demo, WindowDemo,
};
use qmeter::{compute_functionals, measurement_window, sample_path, ComplexEstimate, MCEstimate, RegimeReport};

use crate::{Common, Failure};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn is_config_error(e: &anyhow::Error) -> bool {
    use qmeter::Error as E;
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<E>(),
            Some(
                E::InvalidParameter { .. }
                    | E::UnderResolved { .. }
                    | E::GridMismatch(_)
                    | E::TruncationTooSmall { .. }
                    | E::Scaling(_)
                    | E::Json(_)
            )
        )
    })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

/// Writes `checks.csv` and `failures.json`; true iff every check passed.
fn finish(out: &Path, checks: &[Check]) -> Result<bool, Failure> {
    let mut t = Table::new("checks", &["check", "value", "target", "tolerance", "passed"]);
    for c in checks {
        t.push(vec![c.name.clone(), num(c.value), num(c.target), c.tolerance.clone(), c.passed.to_string()]);
    }
    t.write_to(out)?;
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    write_json(&out.join("failures.json"), &failed)?;
    for c in &failed {
        eprintln!("FAIL {}: {} vs {} ({})", c.name, c.value, c.target, c.tolerance);
    }
    println!("{} checks, {} failed", checks.len(), failed.len());
    Ok(failed.is_empty())
}

struct Rows {
    table: Table,
    checks: Vec<Check>,
}

impl Rows {
    fn new(name: &str) -> Self {
        Self {
            table: Table::new(name, &["t", "quantity", "part", "estimate", "se", "exact", "z"]),
            checks: Vec::new(),
        }
    }

    fn real(&mut self, t: f64, name: &str, part: &str, est: &MCEstimate, exact: f64) {
        self.table.push(vec![
            num(t),
            name.into(),
            part.into(),
            num(est.mean),
            num(est.se),
            num(exact),
            num(est.z_score(exact)),
        ]);
        self.checks
            .push(Check::within_se(format!("{name}.{part} t={t}"), est.mean, est.se, exact, tol::K_SE));
    }

    fn complex(&mut self, t: f64, name: &str, est: &ComplexEstimate, exact: Complex64) {
        self.real(t, name, "re", &est.re, exact.re);
        self.real(t, name, "im", &est.im, exact.im);
    }
}

pub fn paths(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let nodes = cfg.nodes()?;

    let first = sample_path(&grid, cfg.seed, 0);
    first.write_binary(BufWriter::new(File::create(out.join("path_0.bin")).context("path_0.bin")?))?;
    compute_functionals(&first, &p)?.write_csv(BufWriter::new(File::create(out.join("path_0.csv")).context("path_0.csv")?))?;

    let ens = simulate_snapshots(&p, &grid, &nodes, cfg.n_paths, cfg.seed)?;
    let mut t = Table::new(
        "snapshots",
        &["stream", "t", "w", "re_eiphi", "im_eiphi", "re_z", "im_z", "re_y1", "im_y1", "y0", "g"],
    );
    let columns: Vec<Vec<_>> = (0..ens.times.len()).map(|j| ens.samples(j, |s| *s)).collect();
    for stream in 0..ens.n_paths {
        for (j, &time) in ens.times.iter().enumerate() {
            let s = columns[j][stream];
            t.push(vec![
                stream.to_string(),
                num(time),
                num(s.w),
                num(s.eiphi.re),
                num(s.eiphi.im),
                num(s.z.re),
                num(s.z.im),
                num(s.y1.re),
                num(s.y1.im),
                num(s.y0),
                num(s.g),
            ]);
        }
    }
    t.write_to(out)?;
    finish(out, &[])
}

/// Requested times with `t > 0`, and their nodes.
fn positive_nodes(cfg: &ExperimentConfig) -> Result<Vec<usize>, Failure> {
    let nodes: Vec<usize> = cfg.nodes()?.into_iter().filter(|&k| k > 0).collect();
    if nodes.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!("t_grid: needs at least one time > 0")));
    }
    Ok(nodes)
}

pub fn expect(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let nodes = positive_nodes(cfg)?;
    let ens = simulate_snapshots(&p, &cfg.grid()?, &nodes, cfg.n_paths, cfg.seed)?;
    let h = p.heating_prefactor();
    let mut rows = Rows::new("expect");
    let mut heat = Table::new(
        "heating",
        &["t", "instantaneous_excess", "pointer_excess", "instantaneous_excess_mc", "instantaneous_excess_se", "pointer_excess_mc", "pointer_excess_se"],
    );
    for (j, &t) in ens.times.iter().enumerate() {
        let m = moments(&p, t)?;
        let e = moment_estimates(&ens, j)?;
        rows.complex(t, "exp_i_phi", &e.exp_eiphi, m.exp_eiphi);
        rows.complex(t, "z", &e.mean_z, m.mean_z);
        rows.real(t, "zstar_z", "re", &e.mean_zstar_z, m.mean_zstar_z);
        rows.complex(t, "y1", &e.mean_y1, m.mean_y1);
        rows.real(t, "y0", "re", &e.mean_y0, m.mean_y0);
        rows.real(t, "y1star_y1", "re", &e.mean_y1star_y1, m.mean_y1star_y1);
        heat.push(vec![
            num(t),
            num(h * m.mean_zstar_z),
            num(h * m.mean_y0 / t),
            num(h * e.mean_zstar_z.mean),
            num(h * e.mean_zstar_z.se),
            num(h * e.mean_y0.mean / t),
            num(h * e.mean_y0.se / t),
        ]);
    }
    rows.table.write_to(out)?;
    heat.write_to(out)?;
    finish(out, &rows.checks)
}

pub fn covar(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let nodes = positive_nodes(cfg)?;
    let ens = simulate_snapshots(&p, &cfg.grid()?, &nodes, cfg.n_paths, cfg.seed)?;
    let mut rows = Rows::new("covar");
    for (j, &t) in ens.times.iter().enumerate() {
        let c = covariances(&p, t)?;
        let e = covariance_estimates(&ens, j)?;
        rows.complex(t, "zz_eiphi", &e.zz_eiphi, c.zz_eiphi);
        rows.complex(t, "zbar_eiphi_z", &e.zbar_eiphi_z, c.zbar_eiphi_z);
        rows.complex(t, "emiphi_z_z", &e.emiphi_z_z, c.emiphi_z_z);
    }
    rows.table.write_to(out)?;
    finish(out, &rows.checks)
}

pub fn measure(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let nodes = positive_nodes(cfg)?;
    let est = estimate_moments(&p, &grid, &nodes, cfg.n, cfg.n_paths, cfg.seed)?;
    let t_max = est.iter().map(|e| e.t).fold(0.0, f64::max);
    let so = SecondOrder::with_default_step(&p, t_max)?;
    let n_levels = cfg.n_levels.unwrap_or(0).max(cfg.n + 2);
    let mut t = Table::new(
        "measure",
        &[
            "t",
            "n",
            "mean_N",
            "mean_N_se",
            "var_N",
            "var_N_se",
            "mean_pointer",
            "mean_pointer_se",
            "var_pointer",
            "var_pointer_se",
            "exact_mean_N",
            "exact_var_N",
            "exact_mean_pointer",
            "exact_var_pointer",
            "resolvable",
        ],
    );
    let mut checks = Vec::new();
    for e in &est {
        let x = exact_observables(&p, &so, e.t, cfg.n)?;
        let resolvable = window_demo(&p, n_levels, e.t)?.resolvable;
        t.push(vec![
            num(e.t),
            cfg.n.to_string(),
            num(e.mean_n.mean),
            num(e.mean_n.se),
            num(e.var_n.mean),
            num(e.var_n.se),
            num(e.mean_pointer.mean),
            num(e.mean_pointer.se),
            num(e.var_pointer.mean),
            num(e.var_pointer.se),
            num(x.mean_n),
            num(x.var_n),
            num(x.mean_pointer),
            num(x.var_pointer),
            resolvable.to_string(),
        ]);
        for (name, m, target) in [
            ("mean_N", &e.mean_n, x.mean_n),
            ("var_N", &e.var_n, x.var_n),
            ("mean_pointer", &e.mean_pointer, x.mean_pointer),
            ("var_pointer", &e.var_pointer, x.var_pointer),
        ] {
            checks.push(Check::within_se(format!("{name} t={}", e.t), m.mean, m.se, target, tol::K_SE));
        }
    }
    t.write_to(out)?;
    finish(out, &checks)
}

#[derive(Serialize)]
struct WindowEntry {
    regime: RegimeReport,
    demo: WindowDemo,
}

pub fn window(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let n_levels = cfg.n_levels.unwrap_or(4);
    let times: Vec<f64> = cfg.t_grid.clone().unwrap_or_else(|| vec![cfg.t_end]);
    let mut t = Table::new("window", &["t", "n", "mean", "std", "separation", "resolvable"]);
    let mut report = Vec::new();
    for &time in &times {
        let demo = window_demo(&p, n_levels, time)?;
        for l in &demo.levels {
            t.push(vec![
                num(time),
                l.n.to_string(),
                num(l.mean),
                num(l.std),
                num(demo.separation),
                demo.resolvable.to_string(),
            ]);
        }
        println!("t={time}: separation {:.3}, resolvable {}", demo.separation, demo.resolvable);
        report.push(WindowEntry {
            regime: measurement_window(&p, time)?,
            demo,
        });
    }
    t.write_to(out)?;
    write_json(&out.join("window.json"), &report)?;
    finish(out, &[])
}

#[derive(Serialize)]
struct FockReport {
    dim: usize,
    reliable: usize,
    periods: f64,
    time_average: Vec<qmeter::fock::TimeAverageReport>,
    paths: usize,
    heisenberg_error: f64,
    unitarity_error: f64,
    composition_error: f64,
    checks: Vec<Check>,
}

pub const FOCK_PATHS: usize = 4;
pub const FOCK_PERIODS: f64 = 200.0;

pub fn fock_check(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let space = FockSpace::new(cfg.fock_dim.unwrap_or(DEFAULT_DIM))?;
    let period = 2.0 * std::f64::consts::PI / p.omega();
    let mut checks = Vec::new();
    let mut averages = Vec::new();
    for n in 0..cfg.n_levels.unwrap_or(4) as usize {
        let a = time_averaged_n(&space, &p, FOCK_PERIODS * period, n)?;
        checks.push(Check::relative(format!("time-averaged mean n={n}"), a.mean, a.predicted_mean, tol::FOCK_REL));
        checks.push(Check::relative(
            format!("time-averaged variance n={n}"),
            a.variance,
            a.predicted_variance,
            tol::FOCK_REL,
        ));
        averages.push(a);
    }

    let grid = cfg.grid()?;
    let nodes = cfg.nodes()?;
    let n_paths = cfg.n_paths.min(FOCK_PATHS);
    let (mut worst_h, mut worst_u) = (0.0_f64, 0.0_f64);
    for stream in 0..n_paths as u64 {
        let f = compute_functionals(&sample_path(&grid, cfg.seed, stream), &p)?;
        let prop = propagate_path(&space, &f, &p, &nodes)?;
        for i in 0..nodes.len() {
            worst_h = worst_h.max(prop.heisenberg_error(&space, i));
            worst_u = worst_u.max(prop.unitarity_error(&space, i));
        }
    }
    checks.push(Check::at_most("heisenberg identity".into(), worst_h, tol::HEISENBERG));
    checks.push(Check::at_most("propagator unitarity".into(), worst_u, tol::UNITARITY));

    let (zp, z) = (Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5));
    let lhs = space.displacement(zp)? * space.displacement(z)?;
    let rhs = space.displacement(zp + z)? * Complex64::from_polar(1.0, -(zp.conj() * z).im);
    let comp = block_max_abs(&(lhs - rhs), space.reliable());
    checks.push(Check::at_most("displacement composition".into(), comp, tol::COMPOSITION));
    let du = block_unitarity_error(&space.displacement(zp + z)?, space.reliable());
    checks.push(Check::at_most("displacement unitarity".into(), du, tol::UNITARITY));

    let mut t = Table::new(
        "fock_time_average",
        &["n", "T", "mean", "variance", "predicted_mean", "predicted_variance", "block_unitarity_error"],
    );
    for a in &averages {
        t.push(vec![
            a.n.to_string(),
            num(a.t),
            num(a.mean),
            num(a.variance),
            num(a.predicted_mean),
            num(a.predicted_variance),
            num(a.block_unitarity_error),
        ]);
    }
    t.write_to(out)?;
    write_json(
        &out.join("fock_check.json"),
        &FockReport {
            dim: space.dim(),
            reliable: space.reliable(),
            periods: FOCK_PERIODS,
            time_average: averages,
            paths: n_paths,
            heisenberg_error: worst_h,
            unitarity_error: worst_u,
            composition_error: comp,
            checks: checks.clone(),
        },
    )?;
    finish(out, &checks)
}

pub fn limit(cfg: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let p = cfg.params()?;
    let t = cfg.t_end;
    let dt = cfg.grid()?.dt();
    let mut eps = cfg.epsilon_list.clone().unwrap_or_else(|| vec![1e-2, 1e-3]);
    if eps.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!("epsilon_list: must not be empty")));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let units = cfg.lambda_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let k2t = p.kappa().norm_sqr() * t;
    if !(k2t > 0.0) {
        return Err(Failure::Config(anyhow::anyhow!("alpha, gamma: |kappa|^2 t_end must be > 0")));
    }
    let lambdas: Vec<f64> = units.iter().map(|u| u / k2t).collect();

    let mut gt = Table::new(
        "gaussianity",
        &["epsilon", "part", "mean", "mean_se", "exact_mean", "variance", "variance_se", "target_variance", "ks_p"],
    );
    let mut lt = Table::new("limit", &["observable", "epsilon", "lambda", "empirical", "target", "se"]);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut ensembles = Vec::new();
    for (k, &e) in eps.iter().enumerate() {
        let ens = scaled_z_samples(&p, t, e, dt, cfg.n_paths, cfg.seed.wrapping_add(k as u64 * GOLDEN))?;
        let g = gaussianity_check(&ens, tol::KS_LEVEL, tol::K_SE)?;
        let smallest = k + 1 == eps.len();
        for (part, m, em, v, ks) in [
            ("re", &g.mean.re, g.exact_mean.re, &g.var_re, &g.ks_re),
            ("im", &g.mean.im, g.exact_mean.im, &g.var_im, &g.ks_im),
        ] {
            gt.push(vec![
                num(e),
                part.into(),
                num(m.mean),
                num(m.se),
                num(em),
                num(v.mean),
                num(v.se),
                num(g.target_variance),
                num(ks.p_value),
            ]);
            if smallest {
                checks.push(Check::at_least(format!("ks p-value {part} eps={e}"), ks.p_value, tol::KS_LEVEL));
                checks.push(Check::within_se(
                    format!("component variance {part} eps={e}"),
                    v.mean,
                    v.se,
                    g.target_variance,
                    tol::K_SE,
                ));
            }
        }
        for r in limit_cf_check(&ens, &lambdas)? {
            if smallest && r.observable == LimitObservable::Endpoint {
                checks.push(Check::within_se(
                    format!("endpoint transform eps={e} lambda={}", r.lambda),
                    r.empirical,
                    r.se,
                    r.target,
                    tol::K_SE,
                ));
            }
            rows.push(r);
        }
        ensembles.push(ens);
    }
    if ensembles.len() >= 2 {
        let n = ensembles.len();
        rows.extend(time_average_extrapolated(&ensembles[n - 2], &ensembles[n - 1], &lambdas)?);
    }
    let real_lambdas: Vec<f64> = units.iter().map(|u| u / t).collect();
    for r in real_case_check(t, &real_lambdas, cfg.n_paths, cfg.seed.wrapping_add(eps.len() as u64 * GOLDEN))? {
        checks.push(Check::within_se(format!("real transform lambda={}", r.lambda), r.empirical, r.se, r.target, tol::K_SE));
        rows.push(r);
    }
    for r in &rows {
        lt.push(vec![
            r.observable.name().into(),
            num(r.epsilon),
            num(r.lambda),
            num(r.empirical),
            num(r.target),
            num(r.se),
        ]);
    }
    gt.write_to(out)?;
    lt.write_to(out)?;
    finish(out, &checks)
}

#[derive(Serialize)]
struct CriterionSummary<'a> {
    id: u8,
    title: &'a str,
    passed: bool,
    seconds: f64,
    checks: &'a [Check],
}

pub fn acceptance(c: &Common) -> Result<bool, Failure> {
    let opts = AcceptanceOptions {
        quick: c.quick,
        seed: c.seed.unwrap_or(ACCEPTANCE_SEED),
        paths: c.paths,
    };
    let reports = acceptance::run_acceptance(&opts)?;
    for r in &reports {
        println!(
            "criterion {} ({}): {} [{:.1} s]",
            r.id,
            r.title,
            if r.passed() { "PASS" } else { "FAIL" },
            r.seconds
        );
        for f in r.failures() {
            println!("    failed: {} = {} vs {} ({})", f.name, f.value, f.target, f.tolerance);
        }
    }
    acceptance::write_tables(&c.out, &reports)?;
    let summary: Vec<CriterionSummary> = reports
        .iter()
        .map(|r| CriterionSummary {
            id: r.id,
            title: r.title,
            passed: r.passed(),
            seconds: r.seconds,
            checks: &r.checks,
        })
        .collect();
    write_json(&c.out.join("acceptance.json"), &summary)?;
    let failed = acceptance::failed_checks(&reports);
    write_json(&c.out.join("failures.json"), &failed)?;
    Ok(failed.is_empty())
}
