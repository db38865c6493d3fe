use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rem-aging"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
schema_version = 1
master_seed = 1

[[experiment]]
name = "trap"
model = "trap"
n_states = 4096
alpha = 0.5
a_n = 64.0
t = [1.0]
rho = [1.0]
n_env = 2
n_chain = 100

[experiment.tolerance]
abs = 0.5
"#;

fn write_config(dir: &Path) -> String {
    let p = dir.join("c.toml");
    fs::write(&p, CONFIG).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn simulate_writes_results_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("trap"));
    let o = run(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success());
    // same seed from the file and the flag, any thread count
    assert_eq!(fs::read(a.join("correlations.csv")).unwrap(), fs::read(b.join("correlations.csv")).unwrap());
    let header = fs::read_to_string(a.join("correlations.csv")).unwrap();
    assert!(header.starts_with("model,n,beta,eps,scale_kind,t,rho,mode,init,n_env,n_chain,p_hat,ci95,asl_target,seed\n"));
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("r");
    let o = bin()
        .args(["simulate", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("REM_AGING_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let bad = bin().args(["tabulate-walk", "--n", "3"]).env("REM_AGING_THREADS", "many").output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    // a tolerance no estimate can meet
    fs::write(&p, CONFIG.replace("abs = 0.5", "abs = 0.0\nci_mult = 0.0")).unwrap();
    let o = run(&["simulate", "--config", p.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    fs::write(&p, CONFIG.replace("n_chain = 100", "n_chain = 100\nwidth = 3")).unwrap();
    let o = run(&["simulate", "--config", p.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
}

#[test]
fn tabulate_walk_rows_sum_to_one() {
    let o = run(&["tabulate-walk", "--n", "4", "--l-max", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,l,d,p"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4 * 5);
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    for l in 0..=3 {
        let total: f64 = rows.iter().filter(|r| r[1] == l as f64).map(|r| binom[r[2] as usize] * r[3]).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn asl_table_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("asl.csv");
    let o = run(&["limits", "asl", "--alpha", "0.5", "--points", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!((lines[0], lines[1], lines[5]), ("u,asl", "0,0", "1,1"));
    let mid: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!((mid - 0.5).abs() < 1e-12);
    assert!(run(&["limits", "asl", "--alpha", "1.5"]).status.code() == Some(2));
}

#[test]
fn marks_and_overshoot() {
    let o = run(&["limits", "marks", "--alpha", "0.5", "--k", "10", "--seed", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 11);
    let o = run(&["limits", "overshoot", "--alpha", "0.5", "--rho", "1", "--replicas", "2000"]);
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_owned();
    let p: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
    assert!((p - 0.5).abs() < 0.05, "{line}");
}

#[test]
fn conditions_emit_json() {
    let o = run(&["conditions", "--n", "10", "--alpha", "0.5", "--eps", "0.5", "--skeletons", "20"]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["u_grid"].as_array().unwrap().len(), 3);
    assert!(v["pass"]["a0"].is_boolean());
    let o = run(&["conditions", "--n", "10", "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn summarize_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let r = dir.path().join("r");
    assert!(run(&["simulate", "--config", &cfg, "--out", r.to_str().unwrap()]).status.success());
    let csv = r.join("correlations.csv");
    let s = dir.path().join("s");
    let o = run(&["summarize", csv.to_str().unwrap(), csv.to_str().unwrap(), "--out", s.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(s.join("summary.csv").exists() && s.join("checks.csv").exists());
    let o = run(&["compare", csv.to_str().unwrap(), csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("t,rho,p_a,p_b,diff,pooled_se,within\n"));
}
