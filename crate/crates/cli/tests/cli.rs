use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dfmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfmc")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_one_csv_per_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ou.toml", "[problem]\ntag = \"OU1D\"\n[simulation]\npaths = 10\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "--out", "run", "simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csvs = fs::read_dir(tmp.path().join("run/trajectories")).unwrap().count();
    assert_eq!(csvs, 10);
    let first = fs::read_to_string(tmp.path().join("run/trajectories/path_000000.csv")).unwrap();
    assert!(first.starts_with("# dfmc trajectory v1 problem=OU1D seed=1 path=0 dt=0.001"));
    assert_eq!(first.lines().count(), 2 + 1001);
    assert!(tmp.path().join("run/simulate_summary.csv").exists());
}

#[test]
fn invalid_exponents_exit_with_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[problem]\ntag = \"OU1D\"\n[inequality]\np = 4.0\nq = 2.0\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("p < q"));
}

#[test]
fn unknown_keys_and_problems_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[simulation]\npath = 10\n");
    assert_eq!(code(&dfmc(tmp.path(), &["--config", &cfg, "simulate"])), 2);
    assert_eq!(code(&dfmc(tmp.path(), &["--problem", "HEAT3D", "simulate"])), 2);
    assert_eq!(code(&dfmc(tmp.path(), &["--config", "missing.toml", "simulate"])), 2);
}

#[test]
fn unstable_step_exits_with_numeric_error_and_step() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dw.toml",
        "[problem]\ntag = \"DW1D\"\n[simulation]\ndt = 10.0\nhorizon = 100.0\npaths = 2\n",
    );
    let out = dfmc(tmp.path(), &["--config", &cfg, "--out", "run", "simulate"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("at step"), "{}", stderr(&out));
}

#[test]
fn gradient_of_a_constant_is_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ou.toml", "[problem]\ntag = \"OU1D\"\n[simulation]\npaths = 4000\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "--out", "run", "gradient", "--f", "const"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = stdout.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[1], 0.0);
    assert!(row[3].abs() <= 3.0 * row[4], "{stdout}");
    let csv = fs::read_to_string(tmp.path().join("run/gradient.csv")).unwrap();
    assert!(csv.starts_with("# dfmc gradient v1"));
    assert!(csv.contains("malliavin") && csv.contains("frechet") && csv.contains("residual"));
}

#[test]
fn gradient_accepts_a_point() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "rot.toml", "[problem]\ntag = \"ROT2D\"\n[simulation]\npaths = 200\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "--out", "run", "gradient", "--f", "x1", "--x", "-0.5,1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = dfmc(tmp.path(), &["--config", &cfg, "gradient", "--f", "x1", "--x", "1"]);
    assert_eq!(code(&out), 2);
    let out = dfmc(tmp.path(), &["--config", &cfg, "gradient", "--f", "nope"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn horizon_beyond_policy_limit_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "pol.toml", "[problem]\ntag = \"OU1D\"\n[inequality]\ngamma0 = 4.0\nt0 = 1.5\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "gradient", "--f", "bump"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("t*"), "{}", stderr(&out));
}

#[test]
fn verify_passes_on_ou() {
    let tmp = TempDir::new().unwrap();
    let out = dfmc(tmp.path(), &["--problem", "OU1D", "--out", "run", "verify"]);
    assert_eq!(code(&out), 0, "{}\n{}", String::from_utf8_lossy(&out.stdout), stderr(&out));
    for file in ["verify_report.md", "checks.csv", "gradient.csv", "inequality.csv"] {
        assert!(tmp.path().join("run").join(file).exists(), "{file}");
    }
    let report = fs::read_to_string(tmp.path().join("run/verify_report.md")).unwrap();
    assert!(report.contains("Overall: PASS"));
}

#[test]
fn verify_passes_on_rotation() {
    let tmp = TempDir::new().unwrap();
    let out = dfmc(tmp.path(), &["--problem", "ROT2D", "--out", "run", "verify"]);
    assert_eq!(code(&out), 0, "{}\n{}", String::from_utf8_lossy(&out.stdout), stderr(&out));
}

#[test]
fn negated_control_is_caught() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ou.toml", "[problem]\ntag = \"OU1D\"\n[simulation]\npaths = 2000\nensemble = 2000\n");
    let out = dfmc(tmp.path(), &["--config", &cfg, "--out", "run", "verify", "--debug-negate-control"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("ibp_identity"), "{}", stderr(&out));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "var.toml",
        "[problem]\ntag = \"VARH2D\"\n[simulation]\npaths = 1000\nensemble = 1000\nseed = 7\n",
    );
    let a = dfmc(tmp.path(), &["--config", &cfg, "--out", "a", "--threads", "1", "verify"]);
    let b = dfmc(tmp.path(), &["--config", &cfg, "--out", "b", "--threads", "3", "verify"]);
    assert_eq!(code(&a), code(&b));
    assert_eq!(a.stdout.len(), b.stdout.len());
    for file in ["verify_report.md", "checks.csv", "gradient.csv", "inequality.csv"] {
        let fa = fs::read(tmp.path().join("a").join(file)).unwrap();
        let fb = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert!(fa == fb, "{file} differs");
    }
    let c = dfmc(tmp.path(), &["--config", &cfg, "--out", "c", "--seed", "8", "verify"]);
    assert_ne!(fs::read(tmp.path().join("a/gradient.csv")).unwrap(), fs::read(tmp.path().join("c/gradient.csv")).unwrap());
    assert!(matches!(code(&c), 0 | 1));
}
