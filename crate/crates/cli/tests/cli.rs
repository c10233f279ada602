//! End-to-end tests of the command-line surface: artifact determinism,
//! pipeline smoke, and the exit-code taxonomy.

use std::path::Path;
use std::process::{Command, Output};

fn icebox() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icebox"))
}

fn run(args: &[&str]) -> Output {
    icebox().args(args).output().expect("spawn icebox")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SIM_CONFIG: &str = r#"
seed = 4242

[simulate]
duration_min = 360.0
"#;

#[test]
fn simulate_is_deterministic_and_artifacts_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, SIM_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for out in [&out_a, &out_b] {
        let result = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_success(&result);
    }

    for name in ["dataset.csv", "truth.json", "states.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // The written dataset ingests cleanly.
    let data = icebox_core::io::read_dataset(&out_a.join("dataset.csv")).unwrap();
    assert_eq!(data.len(), 360);
}

#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let sim_config = dir.path().join("sim.toml");
    write(&sim_config, SIM_CONFIG);
    assert_success(&run(&[
        "simulate",
        "--config",
        sim_config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let dataset = out.join("dataset.csv");
    let truth = out.join("truth.json");

    // Small free set and budget: the smoke test checks plumbing, not
    // estimation quality.
    let fit_config = dir.path().join("fit.toml");
    write(
        &fit_config,
        &format!(
            r#"
seed = 7

[fit]
init_from = "{truth}"
free = ["R_ce", "beta"]

[fit.optimizer]
restarts = 1
max_iters = 150
"#,
            truth = truth.display()
        ),
    );
    let fit_out = run(&[
        "fit",
        "--config",
        fit_config.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&fit_out);
    let fit_report = out.join("fit.json");
    assert!(fit_report.exists());

    let predict_config = dir.path().join("predict.toml");
    write(
        &predict_config,
        &format!(
            r#"
[predict]
params_from = "{report}"
"#,
            report = fit_report.display()
        ),
    );
    let predict_out = run(&[
        "predict",
        "--config",
        predict_config.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&predict_out);
    let stdout = String::from_utf8_lossy(&predict_out.stdout);
    assert!(stdout.contains("RMSE"), "predict did not report an RMSE: {stdout}");
    let predict_csv = std::fs::read_to_string(out.join("predict.csv")).unwrap();
    assert!(predict_csv
        .starts_with("t_min,observed,predicted,lo95,hi95,sigmoid,hypothetical_evap,estimated_T_e"));
    assert_eq!(predict_csv.lines().count(), 361);

    let diagnose_config = dir.path().join("diag.toml");
    write(
        &diagnose_config,
        &format!(
            r#"
[diagnose]
params_from = "{report}"
max_lag = 20
"#,
            report = fit_report.display()
        ),
    );
    assert_success(&run(&[
        "diagnose",
        "--config",
        diagnose_config.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    for artifact in ["acf.csv", "cp.csv", "residuals.csv", "summary.json"] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    // Retune with the default {a, b, C_c, R_cw} free set.
    let retune_config = dir.path().join("retune.toml");
    write(
        &retune_config,
        &format!(
            r#"
seed = 7

[retune]
baseline = "{report}"

[retune.optimizer]
restarts = 1
max_iters = 400
"#,
            report = fit_report.display()
        ),
    );
    let retune_out = run(&[
        "retune",
        "--config",
        retune_config.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&retune_out);
    assert!(out.join("retune.json").exists());
    let changes = std::fs::read_to_string(out.join("changes.csv")).unwrap();
    assert!(changes.starts_with("param,old,new,relative_change"));
    assert_eq!(changes.lines().count(), 5);
}

#[test]
fn fit_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let sim_config = dir.path().join("sim.toml");
    write(&sim_config, SIM_CONFIG);
    assert_success(&run(&[
        "simulate",
        "--config",
        sim_config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));

    let fit_config = dir.path().join("fit.toml");
    write(
        &fit_config,
        &format!(
            r#"
seed = 99

[fit]
init_from = "{truth}"
free = ["R_ce", "alpha"]

[fit.optimizer]
restarts = 2
max_iters = 120
"#,
            truth = out.join("truth.json").display()
        ),
    );
    let mut reports = Vec::new();
    for sub in ["r1", "r2"] {
        let fit_dir = out.join(sub);
        assert_success(&run(&[
            "fit",
            "--config",
            fit_config.to_str().unwrap(),
            "--data",
            out.join("dataset.csv").to_str().unwrap(),
            "--out",
            fit_dir.to_str().unwrap(),
            "--threads",
            if sub == "r1" { "1" } else { "2" },
        ]));
        reports.push(std::fs::read(fit_dir.join("fit.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "fit.json differs between identical configs");
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = run(&["defrost"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("usage"), "{stderr}");
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();

    // Missing config: 3.
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(3));

    // Unknown key in config: 3, message names the key.
    let bad_config = dir.path().join("bad.toml");
    write(&bad_config, "[simulate]\nduration_min = 60.0\nbogus_key = 1\n");
    let out = run(&["simulate", "--config", bad_config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));

    // Missing dataset: 4.
    let ok_config = dir.path().join("ok.toml");
    write(
        &ok_config,
        "[diagnose]\nparams_from = \"nowhere.json\"\n",
    );
    let out = run(&[
        "diagnose",
        "--config",
        ok_config.to_str().unwrap(),
        "--data",
        dir.path().join("missing.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));

    // Corrupt dataset: 4, message carries the line number.
    let bad_data = dir.path().join("bad.csv");
    write(
        &bad_data,
        "t_min,T_c,T_e_in,T_e_out,T_a,m\n0,-80,-76,-74,22,0\n1,-80,-76,-74,22,7\n",
    );
    let out = run(&[
        "diagnose",
        "--config",
        ok_config.to_str().unwrap(),
        "--data",
        bad_data.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
