use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abelkern_cli::{execute, RunConfig};

const KERNEL: &str = r#"
job = "kernel"
t = 0.25

[grid]
half_width = 1.0
levels = [3, 4]

[frequencies]
layout = "window"
half_width = 2.0
count = 5

[density]
"#;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn abelkern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abelkern"))
        .args(args)
        .output()
        .unwrap()
}

fn run_text(dir: &Path, text: &str) -> Output {
    let cfg = dir.join("job.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    abelkern(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
}

#[test]
fn version_prints_crate_version() {
    let o = abelkern(&["version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn kernel_job_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), KERNEL);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("kernel_m3.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,x',p_or_dy,re,im"));
    assert_eq!(csv.lines().count(), 1 + 16 * 16 * 5);
    assert!(out.join("density_m4.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "abelkern");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a == "kernel_m4.csv"));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), &KERNEL.replace("t = 0.25", "t = 0.25\nsteps = 4"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = abelkern(&["run", "/nonexistent/abelkern.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn courant_violation_is_a_numerical_guard() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), &format!("{KERNEL}\n[method]\nkind = \"euler\"\ndt = 1.0\n"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("largest admissible dt"));
}

#[test]
fn failing_check_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = "job = \"validate\"\n[grid]\nhalf_width = 1.0\nlevels = [2]\n[tolerances]\ngauge = 0.0\n";
    let o = run_text(dir.path(), text);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn validate_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = abelkern(&["validate", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("validate.json").exists());
}

#[test]
fn tables_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = abelkern_core::SpatialGrid::new(3, 1.0).unwrap();
    let mut coef = String::from("x,sigma2,mu,a,b\n");
    let mut psi = String::from("x1,x2,value\n");
    for k in 0..g.len() {
        let x = g.point(k);
        coef.push_str(&format!("{x},{},0.1,{},0\n", 1.0 + 0.2 * x * x, 0.5 * x));
        psi.push_str(&format!("{x},{x},1\n"));
    }
    std::fs::write(dir.path().join("coef.csv"), coef).unwrap();
    std::fs::write(dir.path().join("psi.csv"), psi).unwrap();
    let text = r#"
job = "dsum"

[grid]
half_width = 1.0
levels = [3]

[coefficients]
family = "table"
table = "coef.csv"

[frequencies]
layout = "explicit"
z = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]]

[dsum]
period = 0.1
periods = 3
psi = "table"
psi_table = "psi.csv"
"#;
    let o = run_text(dir.path(), text);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/dsum_m3.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("p_im"));
}

#[test]
fn execute_is_deterministic_for_shipped_configs() {
    for name in ["kernel", "sup", "dsum"] {
        let cfg = RunConfig::load(&configs().join(format!("{name}.toml"))).unwrap();
        let a = execute(&cfg).unwrap();
        let b = execute(&cfg).unwrap();
        assert!(a.passed, "{name}: {}", a.summary);
        assert_eq!(a.artifacts.names(), b.artifacts.names());
        for n in a.artifacts.names() {
            assert_eq!(a.artifacts.get(&n), b.artifacts.get(&n), "{name}: {n}");
        }
    }
}
