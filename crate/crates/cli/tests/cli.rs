use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biot-hdiv"))
        .args(args)
        .output()
        .expect("spawn biot-hdiv")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn conserve_defaults_cover_the_four_material_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["conserve", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("mass_balance.csv")).unwrap();
    assert_eq!(column(&csv, "lambda").len(), 4);
    for v in column(&csv, "delta_m") {
        assert!(v.parse::<f64>().unwrap() <= 1e-11, "{v}");
    }
    assert_eq!(column(&csv, "steps"), vec!["5"; 4]);
}

#[test]
fn convergence_reports_dofs_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["convergence", "--levels", "2..3", "-o", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &Path| fs::read(d.join("convergence_k1.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let csv = String::from_utf8(read(a.path())).unwrap();
    assert_eq!(column(&csv, "dofs"), vec!["352", "1344"]);
    let svg = fs::read_to_string(a.path().join("convergence_k1.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "k = 2\nlevel = 2\nformat = csv\n").unwrap();
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "-k",
        "1",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(column(&csv, "dofs"), vec!["352"]);
    assert!(!dir.path().join("system.mtx").exists());
}

#[test]
fn matrix_dump_is_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--level", "2", "--format", "matrix-dump", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mtx = fs::read_to_string(dir.path().join("system.mtx")).unwrap();
    let mut lines = mtx.lines();
    assert!(lines.next().unwrap().starts_with("%%MatrixMarket matrix coordinate real"));
    let dims = lines.find(|l| !l.starts_with('%')).unwrap();
    assert!(dims.starts_with("352 352 "), "{dims}");
}

#[test]
fn invalid_configurations_fail_with_named_precondition() {
    for (args, needle) in [
        (vec!["solve", "--alpha", "0.9"], "alpha = 1"),
        (vec!["solve", "--theta", "0"], "theta"),
        (vec!["solve", "--mu=-1"], "mu"),
        (vec!["convergence", "-k", "3", "--levels", "2..3"], "time step"),
        (vec!["convergence", "--levels", "1..3"], "level"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}

#[test]
fn check_passes_on_defaults() {
    let out = run(&["check"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 5);
}
