use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use walsh_trunc::spectral::dense_norm;
use walsh_trunc::two_branch;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walsh-trunc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Data rows of a CSV written by the CLI, after its header comments and
/// column names.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# walsh-trunc "), "missing header in {}", path.display());
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn field(row: &[String], i: usize) -> f64 {
    row[i].parse().unwrap()
}

#[test]
fn norm_curve_rows_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["norm-curve", "--nmax", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&dir.path().join("norm_curve.csv"));
    assert_eq!(r.len(), 8);
    assert!((field(&r[3], 1) - 1.366).abs() < 1e-3);
    assert!((field(&r[6], 1) - 1.4739).abs() < 1e-4);
    let svg = fs::read_to_string(dir.path().join("norm_curve.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));

    let again = tempfile::tempdir().unwrap();
    run(&["norm-curve", "--nmax", "8"], again.path());
    for name in ["norm_curve.csv", "norm_curve.svg"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap()
        );
    }
}

#[test]
fn ksweep_norms_match_dense() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ksweep", "--n", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("ksweep.csv"));
    assert_eq!(r.len(), 5);
    for row in &r {
        let k: i64 = row[0].parse().unwrap();
        let k = (k >= 0).then_some(k as u32);
        let d = dense_norm(&two_branch(4, k).unwrap().to_dense(4).unwrap()).unwrap().norm;
        assert!((field(row, 1) - d).abs() < 1e-12);
    }
    assert!(dir.path().join("ksweep.svg").exists());
}

#[test]
fn level_vectors_reduced_norms() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["level-vectors", "--n", "25", "--k", "24,0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let norms = rows(&dir.path().join("level_norms.csv"));
    assert_eq!(norms[0][0], "0");
    assert!((field(&norms[0], 1) - 1.6464).abs() < 5e-4);
    assert!((field(&norms[1], 1) - 1.6468).abs() < 5e-4);
    assert_eq!(rows(&dir.path().join("level_vectors.csv")).len(), 2 * 25);
}

#[test]
fn trim_compare_values() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["trim-compare", "--n", "4"], dir.path()).status.code(), Some(0));
    let r = rows(&dir.path().join("trim_compare.csv"));
    let norms: Vec<f64> = r.iter().map(|row| field(row, 2)).collect();
    assert!((norms[0] - 1.366).abs() < 1e-3);
    assert!((norms[1] - 1.31).abs() < 1e-2);
    assert!((norms[2] - 1.361).abs() < 1e-3);
}

#[test]
fn hunt_records_seed_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["hunt", "--n", "4", "--trials", "200", "--seed", "11"];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    run(&args, b.path());
    let summary = fs::read_to_string(a.path().join("hunt_summary.csv")).unwrap();
    assert!(summary.starts_with("# walsh-trunc ") && summary.lines().next().unwrap().contains("seed=11"));
    for name in ["hunt_summary.csv", "hunt_max_phi.csv", "hunt_violations.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
    assert!(rows(&a.path().join("hunt_violations.csv")).is_empty());
}

#[test]
fn apply_with_full_map_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.csv");
    fs::write(&phi, "k,phi\n0,4\n1,4\n2,4\n3,4\n").unwrap();
    let f = dir.path().join("f.csv");
    fs::write(&f, "# coefficients\nk,c\n0,1.5\n1,-2\n2,0.25\n3,3\n").unwrap();
    let out = run(
        &["apply", "--phi-file", phi.to_str().unwrap(), "--f-file", f.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for row in rows(&dir.path().join("apply.csv")) {
        assert!((field(&row, 1) - field(&row, 2)).abs() < 1e-14);
    }
}

#[test]
fn export_matrix_shapes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["export-matrix", "--kind", "wh", "--n", "3"], dir.path()).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("wh_N3.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 8);
    assert!(data.iter().all(|l| l.split(',').count() == 8));
    assert_eq!(
        run(&["export-matrix", "--kind", "trim", "--n", "4", "--k", "3"], dir.path()).status.code(),
        Some(0)
    );
    assert!(dir.path().join("trim_N4_K3.csv").exists());
    assert_eq!(
        run(&["export-matrix", "--kind", "two-branch", "--n", "4"], dir.path()).status.code(),
        Some(0)
    );
    assert!(dir.path().join("two_branch_N4_Knull.csv").exists());
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["export-matrix", "--kind", "wh", "--n", "20"][..],
        &["export-matrix", "--kind", "cube", "--n", "3"][..],
        &["ksweep", "--n", "1"][..],
        &["hunt", "--n", "11", "--trials", "1", "--seed", "0"][..],
        &["level-vectors", "--n", "5", "--k", "7"][..],
        &["norm-curve"][..],
        &["apply", "--phi-file", "/nonexistent", "--f-file", "/nonexistent"][..],
    ] {
        assert_eq!(run(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let status = Command::new(env!("CARGO_BIN_EXE_walsh-trunc"))
        .args(["norm-curve", "--nmax", "3", "--out"])
        .arg(dir.path())
        .env("WALSH_TRUNC_THREADS", "-1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["hunt", "--n", "5", "--trials", "64", "--seed", "3"];
    run(&args, a.path());
    let status = Command::new(env!("CARGO_BIN_EXE_walsh-trunc"))
        .args(args)
        .arg("--out")
        .arg(b.path())
        .env("WALSH_TRUNC_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        fs::read(a.path().join("hunt_summary.csv")).unwrap(),
        fs::read(b.path().join("hunt_summary.csv")).unwrap()
    );
}
