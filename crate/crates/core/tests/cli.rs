use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vlasov-renorm"));
    c.env_remove("VLASOV_RENORM_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

const SMALL_SIM: &str = "[simulate]\nnx = 64\nns = 32\ndt = 0.05\nhorizon = 0.2\noutput_every = 2\n";

#[test]
fn default_rates_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["rates", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let names = files(dir.path());
    let tag = "theta0.5_kappa0.5_p2_q2_seed0";
    for f in [
        format!("rates_free-streaming_{tag}.csv"),
        format!("rates_electric_{tag}.csv"),
        format!("rates_summary_{tag}.json"),
        "rates_mollify-gradient_theta0.7_kappa0.5_pinf_q2_seed0.csv".to_string(),
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    let csv = std::fs::read_to_string(dir.path().join(format!("rates_electric_{tag}.csv"))).unwrap();
    assert!(csv.starts_with("scale_eps,scale_sigma,value,slope,predicted,residual\n"));
    assert_eq!(csv.lines().count(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("rates_summary_{tag}.json"))).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 0);
    assert_eq!(summary["assertions"].as_array().unwrap().len(), 8);
}

#[test]
fn out_of_range_theta_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[rates]\ntheta = 1.5\n");
    let out = dir.path().join("out");
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rates.theta"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 3\n[rates]\nthetaa = 0.5\n");
    let o = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("config.toml:3:1"), "{msg}");
    assert!(msg.contains("thetaa"), "{msg}");
}

#[test]
fn bad_flag_and_help() {
    assert_eq!(run(&["rates", "--seed", "minus-one"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let help = run(&["rates", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("rates.mollify_points"));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for kind in ["rates", "endpoint", "simulate", "verify"] {
        let o = run(&[kind, "--dry-run", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let plan = String::from_utf8_lossy(&o.stdout);
        assert!(plan.contains(&format!("experiment: {kind}")), "{plan}");
    }
    let endpoint = run(&["endpoint", "--dry-run"]);
    assert!(String::from_utf8_lossy(&endpoint.stdout).contains("criticality: 0"));
    assert!(!out.exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[simulate]\nnx = 16\nns = 16\nhorizon = 0\n");
    let out = dir.path().join("env-out");
    let o = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("VLASOV_RENORM_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("simulate_summary_seed0.json").exists());
}

#[test]
fn zero_horizon_gives_one_checkpoint_and_empty_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[simulate]\nnx = 16\nns = 16\nhorizon = 0\n");
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cps: Vec<String> = files(&out.join("checkpoints")).into_iter().filter(|f| f.ends_with(".vrnf")).collect();
    assert_eq!(cps, vec!["checkpoint_00000000.vrnf"]);
    let drift = std::fs::read_to_string(out.join("simulate_drift_square_seed0.csv")).unwrap();
    assert_eq!(drift, "t1,t2,drift\n");
}

#[test]
fn assertion_failure_exits_two_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[simulate]\nnx = 16\nns = 16\nhorizon = 0.1\ndrift_budget = 1e-300\nmass_budget = 1e-300\n");
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("simulate_summary_seed0.json")).unwrap();
    let s: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(s["status"], "fail");
    assert_eq!(s["exit_code"], 2);
}

#[test]
fn resume_continues_from_the_manifest_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_SIM);
    let first = dir.path().join("a");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cp = first.join("checkpoints/checkpoint_00000004.vrnf");
    assert!(cp.exists(), "{:?}", files(&first.join("checkpoints")));
    let second = dir.path().join("b");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", second.to_str().unwrap(), "--resume", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(second.join("checkpoints/manifest.json")).unwrap()).unwrap();
    let cps = manifest["checkpoints"].as_array().unwrap();
    assert_eq!(cps[0]["step"], 4);
    assert!((cps.last().unwrap()["time"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_SIM);
    let first = dir.path().join("a");
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]).status.code(), Some(0));
    let cp = first.join("checkpoints/checkpoint_00000002.vrnf");
    let mut bytes = std::fs::read(&cp).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&cp, bytes).unwrap();
    let second = dir.path().join("b");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", second.to_str().unwrap(), "--resume", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
    assert!(!second.join("simulate_summary_seed0.json").exists());
}

#[test]
fn verify_is_reproducible_and_prints_a_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 11\n[verify]\nseeds = 2\npoints = 3000\nnx = 64\nns = 64\n");
    let mut texts = Vec::new();
    for (run_dir, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(run_dir);
        let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("lemma/contraction_wtp") && stdout.contains("s12"), "{stdout}");
        texts.push(std::fs::read(out.join("verify_matrix_seed11.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let text = String::from_utf8(texts.remove(0)).unwrap();
    assert!(text.starts_with("group,check,seed,checks,violations,worst,limit,pass\n"));
    assert!(text.contains("lemma,velocity_increment,11,3000,0,"));
}

#[test]
fn reference_lists_keys() {
    let o = run(&["reference"]);
    assert_eq!(o.status.code(), Some(0));
    let page = String::from_utf8_lossy(&o.stdout);
    for key in ["`seed`", "`rates.theta`", "`endpoint.residual_slices`", "`simulate.resume`", "`verify.points`", "VLASOV_RENORM_OUT"] {
        assert!(page.contains(key), "{key}");
    }
}
