//! Command-level behavior: artifacts, schema contracts, determinism, sweep.

use std::fs;
use std::path::Path;

use dyninv::Error;
use dyninv_cli::commands::{cmd_generate, cmd_run, cmd_sweep, cmd_tune};
use dyninv_cli::config::ExperimentConfig;

fn mini_config(seed: u64, mode: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{
        "seed": {seed},
        "mode": "{mode}",
        "horizon": 120,
        "plant": {{
            "model": {{"kind": "scalar_tanh", "a": 0.5, "b": 1.0}},
            "n_x": 1,
            "noise_bound": 0.005,
            "noise_law": "uniform_ball"
        }},
        "excitation": {{
            "policy": {{"kind": "grid_sweep", "x_points_per_dim": 24, "u_points": 12}},
            "input_box": [-1.2, 1.2],
            "state_half_widths": [1.8]
        }},
        "kernel": {{"kind": "gaussian", "width": 0.3}},
        "reference": {{"kind": "constant", "value": [0.15]}},
        "initial_state": [0.0],
        "tuning": {{
            "c_gamma_star": 0.8,
            "gamma_delta_bar": 0.1,
            "r_bar": 0.3,
            "n_bar": 150,
            "sigma_margin": 1.25,
            "d0_samples": 1000
        }}
    }}"#
    );
    ExperimentConfig::from_json(&text).unwrap()
}

fn pipeline(cfg: &ExperimentConfig, dir: &Path) -> dyninv::sim::RunSummary {
    let data = cmd_generate(cfg, dir).unwrap();
    let (_, report) = cmd_tune(cfg, &data, dir).unwrap();
    assert!(report.all_passed(), "tuning checks failed: {report:?}");
    cmd_run(cfg, &data, &dir.join("tuning.json"), dir, false).unwrap()
}

#[test]
fn full_pipeline_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(3, "adaptive");
    let summary = pipeline(&cfg, dir.path());
    for name in [
        "training.csv",
        "generate_meta.json",
        "tuning.json",
        "validation.json",
        "trace.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert!(summary.guarantee_held());

    // Summary JSON carries the documented keys.
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "in_ball_fraction",
        "sup_x",
        "x_bar",
        "lambda_fit",
        "mean_abs_tracking_error",
        "empty_slab_count",
        "dict_size_final",
    ] {
        assert!(json.get(key).is_some(), "summary key {key} missing");
    }
}

#[test]
fn both_modes_share_the_trace_schema() {
    for mode in ["static", "adaptive"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = mini_config(5, mode);
        pipeline(&cfg, dir.path());
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        let header = trace.lines().next().unwrap();
        assert_eq!(
            header,
            "t,x_1,r_1,u,dict_size,slab_lo,slab_hi,delta_hat,zeta_hat,gamma_star_hat,gamma_g_hat,gamma_delta_t",
            "mode {mode}"
        );
        assert_eq!(trace.lines().count(), 121, "mode {mode}");
    }
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = mini_config(11, "adaptive");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let data_a = cmd_generate(&cfg, dir_a.path()).unwrap();
    let data_b = cmd_generate(&cfg, dir_b.path()).unwrap();
    assert_eq!(fs::read(&data_a).unwrap(), fs::read(&data_b).unwrap());
    cmd_tune(&cfg, &data_a, dir_a.path()).unwrap();
    cmd_tune(&cfg, &data_b, dir_b.path()).unwrap();
    cmd_run(
        &cfg,
        &data_a,
        &dir_a.path().join("tuning.json"),
        dir_a.path(),
        false,
    )
    .unwrap();
    cmd_run(
        &cfg,
        &data_b,
        &dir_b.path().join("tuning.json"),
        dir_b.path(),
        false,
    )
    .unwrap();
    for name in ["trace.csv", "summary.json", "tuning.json", "validation.json"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn generate_direct_row_count_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mini_config(9, "static");
    cfg.excitation.policy = dyninv::sim::ExcitationKind::UniformRandom { n: 100 };
    let path = cmd_generate(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 101); // header + 100 rows
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("generate_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["n"], serde_json::json!(100));
    assert_eq!(meta["seed"], serde_json::json!(9));
}

#[test]
fn tiny_training_set_flags_degenerate_estimates() {
    // Two duplicate rows: no estimator pair certifies anything, so the
    // estimates come out zero and the report must say so.
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(1, "static");
    let path = dir.path().join("training.csv");
    fs::write(&path, "t,u,x_1,x_next_1\n-2,0.1,0.5,0.3\n-1,0.1,0.5,0.3\n").unwrap();
    let (tuning, report) = cmd_tune(&cfg, &path, dir.path()).unwrap();
    assert_eq!(tuning.gamma_star, cfg.tuning.c_gamma_star); // estimate was zero
    let check = report
        .checks
        .iter()
        .find(|c| c.name == "estimates_nondegenerate")
        .unwrap();
    assert!(!check.passed);
    assert!(!report.all_passed());
}

#[test]
fn missing_tuning_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(2, "static");
    let data = cmd_generate(&cfg, dir.path()).unwrap();
    let err = cmd_run(
        &cfg,
        &data,
        &dir.path().join("nope.json"),
        dir.path(),
        false,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

#[test]
fn corrupt_csv_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(2, "static");
    let path = dir.path().join("training.csv");
    fs::write(&path, "t,u,x_1,x_next_1\n-2,0.1,0.0,0.5\n-1,oops,0.5,0.2\n").unwrap();
    match cmd_tune(&cfg, &path, dir.path()) {
        Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected csv error, got {other:?}"),
    }
}

#[test]
fn run_refuses_mismatched_tuning_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mini_config(8, "static");
    let data = cmd_generate(&cfg, dir.path()).unwrap();
    let (mut tuning, _) = cmd_tune(&cfg, &data, dir.path()).unwrap();
    // Corrupt the tuning so a hypothesis fails.
    tuning.gamma_delta_bar = 10.0;
    let bad_path = dir.path().join("bad_tuning.json");
    fs::write(&bad_path, serde_json::to_string(&tuning).unwrap()).unwrap();
    let err = cmd_run(&cfg, &data, &bad_path, dir.path(), false).unwrap_err();
    assert!(err.to_string().contains("validation failed"));
    // With force the run proceeds and records the override.
    let summary = cmd_run(&cfg, &data, &bad_path, dir.path(), true).unwrap();
    assert_eq!(summary.forced, Some(true));
}

#[test]
fn sweep_runs_every_cell_deterministically() {
    let mut cfg = mini_config(4, "static");
    let mut grid = std::collections::BTreeMap::new();
    grid.insert(
        "seed".to_string(),
        vec![serde_json::json!(1), serde_json::json!(2)],
    );
    grid.insert(
        "tuning.mu_bar".to_string(),
        vec![serde_json::json!(0.85), serde_json::json!(0.9)],
    );
    cfg.sweep = Some(grid);
    let text = serde_json::to_string(&cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let cells = cmd_sweep(&cfg, &text, dir.path()).unwrap();
    assert_eq!(cells.len(), 4);
    for cell in &cells {
        assert!(
            cell.error.is_none(),
            "cell {} failed: {:?}",
            cell.cell,
            cell.error
        );
        assert!(cell.summary.as_ref().unwrap().guarantee_held());
        assert!(dir
            .path()
            .join(format!("cell_{:03}", cell.cell))
            .join("trace.csv")
            .exists());
    }
    assert!(dir.path().join("sweep_summary.json").exists());

    // Same sweep, fresh directory: identical traces per cell.
    let dir2 = tempfile::tempdir().unwrap();
    cmd_sweep(&cfg, &text, dir2.path()).unwrap();
    for i in 0..4 {
        let a = fs::read(dir.path().join(format!("cell_{i:03}/trace.csv"))).unwrap();
        let b = fs::read(dir2.path().join(format!("cell_{i:03}/trace.csv"))).unwrap();
        assert_eq!(a, b, "cell {i} trace differs between sweep invocations");
    }
}
