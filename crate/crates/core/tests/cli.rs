use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctk::cli::pipeline::RunReport;
use ctk::matched_filter::SnrReport;
use ctk::projection::ProjectionResult;
use ctk::signal_space::MembershipReport;
use ctk::SampledSignal;
use serde_json::Value;

const THREE_TAP: &str = r#"{
    "family": {"kind": "power_exp", "d": 2},
    "grid": {"t0": 0.0, "dt": 0.01, "len": 1024},
    "channel": {"kind": "derivative", "taps": [
        {"order": 0, "delay": 2.0, "gain_re": 1.5, "gain_im": 0.0},
        {"order": 1, "delay": 2.0, "gain_re": -0.7, "gain_im": 0.0},
        {"order": 2, "delay": 2.0, "gain_re": 0.3, "gain_im": 0.0}
    ]},
    "basis": {"k_max": 2, "n_set": [2]}
}"#;

const IDENTITY: &str = r#"{
    "family": {"kind": "damped_exp", "tau": 1.5},
    "grid": {"t0": 0.0, "dt": 0.01, "len": 300},
    "channel": {"kind": "identity"},
    "basis": {"k_max": "auto", "n_set": [2, 3]}
}"#;

const NOISY: &str = r#"{
    "family": {"kind": "power_exp", "d": 2},
    "grid": {"t0": 0.0, "dt": 0.01, "len": 512},
    "channel": {"kind": "derivative", "taps": [
        {"order": 0, "delay": 1.5, "gain_re": 1.0, "gain_im": 0.5}
    ]},
    "noise": {"sigma2": 0.01, "seed": 3},
    "basis": {"k_max": 1, "n_set": [2], "delays": {"mode": "blind", "max_taps": 1}},
    "snr": {"kind": "ar1", "sigma2": 0.01, "rho": 0.5}
}"#;

fn ctk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctk")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn simulate(dir: &Path, config: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, &format!("{out}.json"), config);
    let mut args = vec!["simulate", "--config", &cfg, "--out", out];
    args.extend_from_slice(extra);
    ctk(&args, dir)
}

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(out.stderr.trim_ascii()).expect("stderr carries error json");
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn identity_channel_reproduces_template() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), IDENTITY, "id", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = fs::read(tmp.path().join("id/template.csv")).unwrap();
    let r = fs::read(tmp.path().join("id/received.csv")).unwrap();
    assert_eq!(t, r);
    for name in ["taps.csv", "report.json", "timing.json"] {
        assert!(tmp.path().join("id").join(name).exists(), "{name}");
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(simulate(tmp.path(), NOISY, "a", &[]).status.code(), Some(0));
    assert_eq!(simulate(tmp.path(), NOISY, "b", &[]).status.code(), Some(0));
    for name in ["template.csv", "received.csv", "taps.csv", "report.json"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_override_changes_noise_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(simulate(tmp.path(), NOISY, "base", &[]).status.code(), Some(0));
    assert_eq!(simulate(tmp.path(), NOISY, "over", &["--seed", "99"]).status.code(), Some(0));
    let a = fs::read(tmp.path().join("base/received.csv")).unwrap();
    let b = fs::read(tmp.path().join("over/received.csv")).unwrap();
    assert_ne!(a, b);
    let report: RunReport = serde_json::from_slice(&fs::read(tmp.path().join("over/report.json")).unwrap()).unwrap();
    assert_eq!(report.seeds.noise, Some(99));
    assert_eq!(report.config.noise.seed, Some(99));
}

#[test]
fn three_tap_round_trip_through_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), THREE_TAP, "tap", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: RunReport = serde_json::from_slice(&fs::read(tmp.path().join("tap/report.json")).unwrap()).unwrap();
    let proj = report.decomposition.projection.as_ref().unwrap();
    for (k, rho) in [(0, 1.5), (1, -0.7), (2, 0.3)] {
        let beta = proj.beta_of(k, 2, 2.0).unwrap();
        assert!((beta.re - rho).abs() <= 1e-8 * f64::abs(rho) && beta.im.abs() <= 1e-8, "k={k}: {beta}");
    }
    let echo = serde_json::to_string(&report.config).unwrap();
    assert_eq!(ctk::cli::ExperimentConfig::from_json(&echo).unwrap(), report.config);
    assert_eq!(report.membership.len(), 1);
}

#[test]
fn decompose_reads_received_csv() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(simulate(tmp.path(), THREE_TAP, "sim", &[]).status.code(), Some(0));
    let cfg = write_config(tmp.path(), "three.json", THREE_TAP);
    let out = ctk(&["decompose", "--config", &cfg, "--input", "sim/received.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: ProjectionResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result.numerical_rank, 3);
    assert!((result.beta_of(1, 2, 2.0).unwrap().re + 0.7).abs() <= 1e-8 * 0.7);

    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["columns", "residual", "rank", "dropped"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let to_dir = ctk(&["decompose", "--config", &cfg, "--input", "sim/received.csv", "--out", "dec"], tmp.path());
    assert_eq!(to_dir.status.code(), Some(0));
    assert!(to_dir.stdout.is_empty());
    assert!(tmp.path().join("dec/projection.json").exists());
}

#[test]
fn decompose_rejects_grid_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let s = SampledSignal::from_real(0.0, 0.02, &[0.0; 1024]).unwrap();
    s.write_csv(fs::File::create(tmp.path().join("other.csv")).unwrap()).unwrap();
    let cfg = write_config(tmp.path(), "three.json", THREE_TAP);
    let out = ctk(&["decompose", "--config", &cfg, "--input", "other.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "grid_mismatch");
}

#[test]
fn snr_and_membership_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "noisy.json", NOISY);
    let out = ctk(&["snr", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: SnrReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep.per_n[&2] > 0.0);
    assert_eq!(rep.snr_total, rep.per_n[&2]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["noise_form"], "dense");
    assert!(v["loading_applied"].is_number());

    let silent = write_config(tmp.path(), "three.json", THREE_TAP);
    let out = ctk(&["snr", "--config", &silent], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");

    let out = ctk(&["membership", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let reps: Vec<MembershipReport> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reps.len(), 1);
    assert!(reps[0].saturated && !reps[0].passes.derivative_decay);

    let slow = IDENTITY.replace("\"tau\": 1.5", "\"tau\": 100.0").replace("\"dt\": 0.01", "\"dt\": 0.5");
    let slow = write_config(tmp.path(), "slow.json", &slow);
    let out = ctk(&["membership", "--config", &slow], tmp.path());
    let reps: Vec<MembershipReport> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reps.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
    assert!(reps.iter().all(|r| r.passes.all()), "{reps:?}");
    assert_eq!(reps[0].l0, 4);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ctk(&["bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(ctk(&[], tmp.path()).status.code(), Some(2));

    let out = ctk(&["simulate", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");

    let bad = write_config(tmp.path(), "bad.json", &THREE_TAP.replace("\"k_max\": 2", "\"k_max\": \"often\""));
    let out = ctk(&["simulate", "--config", &bad, "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");

    let unseeded = write_config(tmp.path(), "unseeded.json", &NOISY.replace(", \"seed\": 3", ""));
    let out = ctk(&["simulate", "--config", &unseeded, "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let out = ctk(&["simulate", "--config", "missing.json", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn help_and_version_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ctk(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(ctk(&["--version"], tmp.path()).status.code(), Some(0));
}

#[test]
fn verify_passes_and_fault_injection_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = ctk(&["verify", "--out", "v"], tmp.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let summary: Value = serde_json::from_slice(&fs::read(tmp.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);

    let bad = ctk(&["verify", "--perturb-psi"], tmp.path());
    assert_eq!(bad.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("psi1_minus_cancellation"), "{stderr}");
    let table = String::from_utf8_lossy(&bad.stdout);
    assert_eq!(table.lines().filter(|l| l.starts_with("FAIL")).count(), 1, "{table}");
}

#[test]
fn log_level_only_touches_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "noisy.json", NOISY);
    let quiet = ctk(&["membership", "--config", &cfg], tmp.path());
    let loud = Command::new(env!("CARGO_BIN_EXE_ctk"))
        .args(["membership", "--config", &cfg])
        .env("CTK_LOG", "debug")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(quiet.stdout, loud.stdout);
}

#[test]
fn shipped_configs_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let out = ctk(&["membership", "--config", path.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
