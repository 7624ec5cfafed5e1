use std::path::Path;
use std::process::{Command, Output};

use lpseries::io::CsvTable;

fn lpseries(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpseries")).args(args).output().expect("spawn lpseries")
}

fn build_coef(dir: &Path, order: &str) -> String {
    let path = dir.join(format!("l1.n{order}.coef"));
    let p = path.to_str().unwrap().to_string();
    let out = lpseries(&["build", "--system", "sun-earth", "--point", "L1", "--order", order, "-o", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn table(text: &str) -> CsvTable {
    CsvTable::parse(text).unwrap()
}

#[test]
fn eta_and_orbit_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let coef = build_coef(dir.path(), "5");
    let head = std::fs::read_to_string(&coef).unwrap();
    assert!(head.starts_with("#crtbp-series v1\n"));

    let out = lpseries(&["eta", "--coef", &coef, "--alpha", "0.16", "0", "0", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.4"), "{text}");

    let out = lpseries(&["orbit", "--coef", &coef, "--alpha", "0", "0", "0", "0", "--frame", "local"]);
    assert!(out.status.success());
    let t = table(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(t.rows.len(), 1);
    assert!(t.rows[0][1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));

    let out = lpseries(&["orbit", "--coef", &coef, "--alpha", "0.16", "0.04", "0", "0", "--eta-near", "1.45", "--samples", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(t.rows.len(), 11);
    assert!(t.comments.iter().any(|c| c.contains("class=") && c.contains("quasihalo")), "{:?}", t.comments);
}

#[test]
fn manifold_writes_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let coef = build_coef(dir.path(), "4");
    let base = dir.path().join("lyap.csv");
    let out = lpseries(&[
        "orbit", "--coef", &coef, "--alpha", "0.05", "0", "0", "0", "--manifold", "unstable", "--epsilon", "1e-3",
        "--samples", "5", "-o", base.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for tag in ["plus", "minus"] {
        let text = std::fs::read_to_string(dir.path().join(format!("lyap.{tag}.csv"))).unwrap();
        let t = table(&text);
        assert_eq!(t.rows.len(), 5);
        assert!(t.comments.iter().any(|c| c.contains("branch=")));
    }
}

#[test]
fn validate_cell_and_residual() {
    let dir = tempfile::tempdir().unwrap();
    let coef = build_coef(dir.path(), "5");
    let out = lpseries(&["validate", "cell", "--coef", &coef, "--alpha1", "0.05", "--alpha2", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&String::from_utf8(out.stdout).unwrap());
    let span = t.rows[0][t.column("span").unwrap()].parse::<f64>().unwrap();
    assert!(span > 0.5 && span <= 2.0 * std::f64::consts::PI, "{span}");

    let out = lpseries(&["validate", "residual", "--coef", &coef, "--orders", "1,3", "--direction", "1", "0", "0", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&String::from_utf8(out.stdout).unwrap());
    let slope = |r: usize| t.rows[r][t.column("slope").unwrap()].parse::<f64>().unwrap();
    assert!(slope(0) > 1.5 && slope(1) > 3.5);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lpseries(&["build", "--point", "L1", "--order", "3", "-o", "x"]).status.code(), Some(2));
    assert_eq!(lpseries(&["orbit", "--coef", "/nonexistent.coef", "--alpha", "0", "0", "0", "0"]).status.code(), Some(4));
    let bad = dir.path().join("bad.coef");
    std::fs::write(&bad, "not a coefficient file\n").unwrap();
    assert_eq!(lpseries(&["eta", "--coef", bad.to_str().unwrap(), "--alpha", "0", "0", "0", "0"]).status.code(), Some(4));
    let out = lpseries(&["build", "--mu", "0.7", "--point", "L1", "--order", "3", "-o", dir.path().join("m.coef").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
