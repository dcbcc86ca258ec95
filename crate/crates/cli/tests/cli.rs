use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qmeter");

const BASE: &str = r#"{
  "omega": 1.0,
  "gamma": 0.25,
  "alpha": [0.1, 0.0],
  "t_end": 5.0,
  "n_steps": 5000,
  "seed": 7,
  "n_paths": 500,
  "t_grid": [1.0, 5.0]
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args);
    match threads {
        Some(t) => c.env("QMETER_THREADS", t),
        None => c.env_remove("QMETER_THREADS"),
    };
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn missing_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace(r#""gamma": 0.25,"#, ""));
    let out = dir.path().join("out");
    let o = run(&["expect", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(code(&run(&["expect", "--out", out], None)), 2);

    let cfg = write_config(dir.path(), BASE);
    assert_eq!(code(&run(&["expect", "--config", &cfg, "--out", out], Some("none"))), 2);

    let coarse = write_config(dir.path(), &BASE.replace("5000", "10"));
    let o = run(&["expect", "--config", &coarse, "--out", out], None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    // omega t / eps = 10 is below the scaling guard
    let cfg = write_config(dir.path(), &BASE.replace("5.0,", "1.0,").replace("5000", "100"));
    let o = run(&["limit", "--config", &cfg, "--out", out, "--epsilon-list", "0.1"], None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn expect_without_drive_reports_zero_heating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("[0.1, 0.0]", "[0.0, 0.0]"));
    let out = dir.path().join("out");
    let o = run(&["expect", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let heating = fs::read_to_string(out.join("heating.csv")).unwrap();
    let mut lines = heating.lines();
    assert!(lines.next().unwrap().starts_with("t,instantaneous_excess,pointer_excess"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.split(',').skip(1).all(|x| x == "0"), "{r}");
    }
    assert_eq!(fs::read_to_string(out.join("failures.json")).unwrap().trim(), "[]");
}

#[test]
fn discretization_bias_is_reported_as_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("5.0,\n", "1.0,\n")
        .replace("5000", "10")
        .replace("500,", "20000,")
        .replace("[1.0, 5.0]", "[1.0]");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&["expect", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let failures: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("failures.json")).unwrap()).unwrap();
    let names: Vec<&str> = failures.as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"y0.re t=1"), "{names:?}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    for cmd in ["expect", "covar", "measure", "paths"] {
        let a = dir.path().join(format!("{cmd}1"));
        let b = dir.path().join(format!("{cmd}3"));
        assert!(run(&[cmd, "--config", &cfg, "--out", a.to_str().unwrap()], Some("1")).status.success());
        assert!(run(&[cmd, "--config", &cfg, "--out", b.to_str().unwrap()], Some("3")).status.success());
        for f in fs::read_dir(&a).unwrap() {
            let name = f.unwrap().file_name();
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{cmd}: {name:?}");
        }
    }
}

#[test]
fn measure_overrides_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = run(
        &["measure", "--config", &cfg, "--out", out.to_str().unwrap(), "--n", "3", "--t-grid", "2,4"],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("measure.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["t", "n", "mean_N", "mean_N_se"]);
    assert_eq!(*header.last().unwrap(), "resolvable");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[1][1], "3");
}

#[test]
fn fock_check_and_window_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("[0.1, 0.0]", "[0.2, 0.0]").replace("500,", "2,");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&["fock-check", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fock_check.json")).unwrap()).unwrap();
    assert_eq!(report["dim"], 64);
    assert!(report["heisenberg_error"].as_f64().unwrap() < 1e-6);

    let o = run(&["window", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("window.json")).unwrap()).unwrap();
    assert_eq!(w.as_array().unwrap().len(), 2);
}
