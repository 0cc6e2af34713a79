//! End-to-end tests of the `ermsim` binary: the exit-status contract,
//! output schemas, reproducibility guarantees, and the reference trap
//! mapping, all through real process invocations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ermsim"))
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("test config writes");
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn assert_status(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "exit {:?}, stdout: {}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

/// Manifests differ between runs only in their timing fields.
fn manifest_without_timing(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&read(path)).expect("manifest parses");
    let obj = v.as_object_mut().expect("manifest is an object");
    obj.insert("started_unix_seconds".into(), 0.into());
    obj.insert("wall_seconds".into(), 0.into());
    v
}

const REFERENCE_TRAP: &str = r#"
units = "2pi_hz"

[trap]
secular_freq_hz = 1.0e6
red_detuning_hz = -3600.0
blue_detuning_hz = -4100.0
lamb_dicke = 0.1
rabi_red_hz = 58700.0
rabi_blue_hz = 19600.0
"#;

/// Small, fast model shared by the dynamical tests.
const SMALL_MODEL: &str = r#"
units = "2pi_hz"
seed = 11

[model]
system_size = 6.0
coupling = 1.5
regime = 0.5
energy_scale_hz = 1000.0

[space]
fock_cutoff = 30

[protocol]
tau_f = 3.0

[noise]
motional_dephasing = 400.0
heating = 60.0

[mcwf]
n_traj = 80
samples = 9
"#;

#[test]
fn map_params_reproduces_the_reference_trap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(dir.path(), "trap.toml", REFERENCE_TRAP);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "map-params",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 0);

    let v: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("map_params.json"))).unwrap();
    let model = &v["model"];
    assert!((model["system_size"].as_f64().unwrap() - 15.4).abs() < 1e-9);
    assert!((model["coupling"].as_f64().unwrap() - 3.9905).abs() < 1e-3);
    assert!((model["regime"].as_f64().unwrap() - 0.4994).abs() < 1e-3);
    assert!((model["energy_scale_hz"].as_f64().unwrap() - 981.07).abs() < 0.1);
    assert_eq!(v["feasibility"]["detuning_grade"], "pass");
    assert_eq!(v["feasibility"]["sign_convention_ok"], true);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["subcommand"], "map-params");
    assert_eq!(manifest["outputs"][0], "map_params.json");
}

#[test]
fn zero_duration_ramp_emits_the_initial_witness_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(
        dir.path(),
        "quench.toml",
        "[model]\nsystem_size = 6.0\ncoupling = 1.5\nregime = 0.5\n\
         [space]\nfock_cutoff = 20\n[protocol]\ntau_f = 0.0\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "ramp",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 0);

    // The protocol switches parameters but the state does not move: the
    // witness is a single row carrying the vacuum's exact tuple.
    let witness = read(&out_dir.join("witness.csv"));
    let mut lines = witness.lines();
    assert_eq!(lines.next(), Some("tau,lambda,h_mean,n_mean,jz_mean,p0"));
    assert_eq!(lines.next(), Some("0.0,1.5,-0.5,0.0,-0.5,1.0"));
    assert_eq!(lines.next(), None);

    let summary: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("ramp_summary.json"))).unwrap();
    assert_eq!(summary["p0"], 1.0);
    assert_eq!(summary["jz_mean"], -0.5);
}

#[test]
fn stochastic_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(dir.path(), "mcwf.toml", SMALL_MODEL);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "mcwf",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_status(&out, 0);
    }
    assert_eq!(
        read(&out_a.join("mcwf_series.csv")),
        read(&out_b.join("mcwf_series.csv")),
        "series must not depend on when the run happened"
    );
    assert_eq!(
        read(&out_a.join("mcwf_summary.json")),
        read(&out_b.join("mcwf_summary.json"))
    );
    assert_eq!(
        manifest_without_timing(&out_a.join("manifest.json")),
        manifest_without_timing(&out_b.join("manifest.json"))
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(dir.path(), "mcwf.toml", SMALL_MODEL);
    let out_1 = dir.path().join("w1");
    let out_2 = dir.path().join("w2");
    for (out_dir, workers) in [(&out_1, "1"), (&out_2, "2")] {
        let out = run(&[
            "mcwf",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert_status(&out, 0);
    }
    assert_eq!(
        read(&out_1.join("mcwf_series.csv")),
        read(&out_2.join("mcwf_series.csv")),
        "the ensemble reduction must not depend on the worker count"
    );
    assert_eq!(
        read(&out_1.join("mcwf_summary.json")),
        read(&out_2.join("mcwf_summary.json"))
    );
}

#[test]
fn toml_and_json_configs_produce_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = write_file(
        dir.path(),
        "model.toml",
        "[model]\nsystem_size = 6.0\ncoupling = 1.5\nregime = 0.5\n\
         [space]\nfock_cutoff = 25\n[spectrum]\nlevels = 12\n",
    );
    // The same configuration through the JSON grammar.
    let as_value: serde_json::Value = toml::from_str(&read(&toml_cfg)).unwrap();
    let json_cfg = write_file(
        dir.path(),
        "model.json",
        &serde_json::to_string_pretty(&as_value).unwrap(),
    );

    let out_t = dir.path().join("t");
    let out_j = dir.path().join("j");
    for (cfg, out_dir) in [(&toml_cfg, &out_t), (&json_cfg, &out_j)] {
        let out = run(&[
            "spectrum",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_status(&out, 0);
    }
    assert_eq!(read(&out_t.join("spectrum.csv")), read(&out_j.join("spectrum.csv")));
    assert_eq!(read(&out_t.join("peres.csv")), read(&out_j.join("peres.csv")));
    assert_eq!(
        read(&out_t.join("spectrum_summary.json")),
        read(&out_j.join("spectrum_summary.json"))
    );
}

#[test]
fn unusable_requests_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");

    // Out-of-range physics.
    let bad = write_file(
        dir.path(),
        "bad.toml",
        "[model]\nsystem_size = 8.0\ncoupling = 2.0\nregime = 1.5\n",
    );
    let out = run(&[
        "spectrum",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 2);

    // Trajectories without a seed.
    let noseed = write_file(
        dir.path(),
        "noseed.toml",
        "[model]\nsystem_size = 6.0\ncoupling = 1.5\nregime = 0.5\n\
         [space]\nfock_cutoff = 20\n[protocol]\ntau_f = 1.0\n[mcwf]\nn_traj = 10\n",
    );
    let out = run(&[
        "mcwf",
        "--config",
        noseed.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed mandatory"));

    // Unreadable configuration file.
    let out = run(&[
        "spectrum",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 2);
}

#[test]
fn computation_failures_exit_three_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    // A cutoff far too small for the ramp: Fock-tail pressure aborts the
    // propagation partway through.
    let cfg = write_file(
        dir.path(),
        "pressure.toml",
        "[model]\nsystem_size = 8.0\ncoupling = 2.0\nregime = 0.6\n\
         [space]\nfock_cutoff = 4\n[protocol]\ntau_f = 5.0\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "ramp",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 3);

    let diag: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("diagnostics.json"))).unwrap();
    assert_eq!(diag["subcommand"], "ramp");
    assert!(diag["error"].as_str().unwrap().contains("cutoff pressure"));
    assert_eq!(diag["config"]["space"]["fock_cutoff"], 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["outputs"][0], "diagnostics.json");
}

#[test]
fn validate_reports_violations_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(
        dir.path(),
        "noseed.toml",
        "[model]\nsystem_size = 6.0\ncoupling = 1.5\nregime = 0.5\n\
         [protocol]\ntau_f = 1.0\n[mcwf]\nn_traj = 10\n",
    );
    let report_dir = dir.path().join("report");
    let out = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("VIOLATION"), "stdout: {stdout}");
    assert!(stdout.contains("seed mandatory"));

    let report: serde_json::Value =
        serde_json::from_str(&read(&report_dir.join("validate.json"))).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"] == "mcwf.seed" && c["passed"] == false));

    // A parse failure, by contrast, is an unusable request.
    let broken = write_file(dir.path(), "broken.toml", "[model\nsystem_size = ");
    let out = run(&["validate", "--config", broken.to_str().unwrap()]);
    assert_status(&out, 2);
}

#[test]
fn diagnose_closes_the_loop_on_a_unitary_ramp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(
        dir.path(),
        "diagnose.toml",
        r#"
units = "2pi_hz"

[model]
system_size = 6.0
coupling = 1.5
regime = 0.5
energy_scale_hz = 1000.0

[space]
fock_cutoff = 30

[protocol]
tau_f = 3.0

[diagnose]
drive2_hz = 20000.0
t_max_seconds = 0.002
points = 160
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "diagnose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_status(&out, 0);

    let rabi = read(&out_dir.join("rabi.csv"));
    assert_eq!(rabi.lines().next(), Some("t_seconds,jz_mean,jz_mre"));
    assert_eq!(rabi.lines().count(), 161);

    // The fitted vacuum population must invert the signal back to the
    // state the ramp actually prepared.
    let summary: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("diagnose_summary.json"))).unwrap();
    let fitted = summary["fit"]["p0"].as_f64().unwrap();
    let reference = summary["p0_reference"].as_f64().unwrap();
    assert!(
        (fitted - reference).abs() < 1e-4,
        "fit p0 = {fitted}, prepared p0 = {reference}"
    );
}
