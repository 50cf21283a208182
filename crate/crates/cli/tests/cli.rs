use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracvar(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracvar"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FRACVAR_OUT")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn young_reproduces_pi_k() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracvar(dir.path(), &["young", "--alpha", "0.63", "--kmax", "6", "--n", "65536"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("young/circle.csv"));
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        let k = (i + 1) as f64;
        let computed: f64 = row[1].parse().unwrap();
        assert!((computed - PI * k).abs() / (PI * k) < 1e-2);
    }
    let s = summary(&dir.path().join("young/summary.json"));
    assert_eq!(s["operation"], "young");
    assert_eq!(s["parameters"]["n"], 65536);
}

#[test]
fn koch_ledger_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracvar(dir.path(), &["koch", "--level", "8", "--depth", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("koch/ledger.csv"));
    assert_eq!(rows.len(), 9);
    let a0 = 3f64.sqrt() / 4.0;
    for row in &rows[1..] {
        let k: i32 = row[0].parse().unwrap();
        let mass: f64 = row[3].parse().unwrap();
        let bmass: f64 = row[5].parse().unwrap();
        let m = 3.0 * 4f64.powi(k - 1) * a0 * 3f64.powi(-2 * k);
        let b = 3.0 * 4f64.powi(k - 1) * 3f64.powi(-k);
        assert!((mass - m).abs() <= 1e-12 * m, "k = {k}");
        assert!((bmass - b).abs() <= 1e-12 * b, "k = {k}");
    }
    for f in [
        "indicator.json",
        "indicator.csv",
        "indicator.pgm",
        "boxcount.csv",
        "summary.json",
    ] {
        assert!(dir.path().join("koch").join(f).exists(), "{f}");
    }
}

#[test]
fn identity_degree_has_unit_norm() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracvar(dir.path(), &["degree", "--map", "identity", "--depth", "6", "--p", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("degree/norms.csv"));
    assert_eq!(rows, vec![vec!["1".to_string(), "1".to_string()]]);
}

#[test]
fn certify_reads_koch_ledger() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        fracvar(dir.path(), &["koch", "--level", "6", "--depth", "8", "--kmax", "6"])
            .status
            .success()
    );
    let ledger = dir.path().join("koch/ledger.csv");
    let o = fracvar(dir.path(), &["certify", "--ledger", ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("certify/summary.json"));
    let critical = s["results"]["delta"]["critical"].as_f64().unwrap();
    assert!((critical - 4f64.ln() / 3f64.ln()).abs() < 1e-9);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "degree",
        "--map",
        "winding",
        "--depth",
        "6",
        "--target-depth",
        "7",
        "--p",
        "1.1,2",
    ];
    assert!(fracvar(a.path(), &[&["--threads", "1"], &args[..]].concat())
        .status
        .success());
    assert!(fracvar(b.path(), &[&["--threads", "3"], &args[..]].concat())
        .status
        .success());
    for f in ["degree.csv", "degree.json", "degree.pgm", "norms.csv", "summary.json"] {
        let x = fs::read(a.path().join("degree").join(f)).unwrap();
        let y = fs::read(b.path().join("degree").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fracvar"))
        .args(["young", "--kmax", "2", "--n", "256"])
        .env("FRACVAR_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("young/circle.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracvar(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(fracvar(dir.path(), &["degree", "--p", "abc"]).status.code(), Some(1));
    assert_eq!(
        fracvar(dir.path(), &["degree", "--map", "torus"]).status.code(),
        Some(1)
    );
    assert_eq!(fracvar(dir.path(), &["koch", "--s0", "-1"]).status.code(), Some(2));
    assert_eq!(
        fracvar(dir.path(), &["degree", "--map", "square", "--query", "1,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fracvar(dir.path(), &["pushforward", "--map", "winding", "--oracle"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fracvar(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn pushforward_oracle_gap_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracvar(
        dir.path(),
        &["pushforward", "--oracle", "--depth", "7", "--depths", "5,6,7"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("pushforward/summary.json"));
    let gap = s["results"]["oracle_l1_gap"].as_f64().unwrap();
    assert!(gap < 5e-3, "{gap}");
    assert_eq!(read_csv(&dir.path().join("pushforward/convergence.csv")).len(), 3);
}
