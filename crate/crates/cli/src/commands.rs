//! The four experiment commands: generate, tune, run, sweep. Each writes its
//! artifacts into the chosen output directory and returns what the caller
//! needs to decide the exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use dyninv::controller::{Controller, ControllerConfig, Mode, TraceRecord};
use dyninv::estimators::{seed_from_training, EstimatorBundle, TrainingEstimates};
use dyninv::setmem::{read_training_csv, write_training_csv, DataPoint};
use dyninv::sim::{generate_training_data, run_closed_loop, RunSummary};
use dyninv::tuning::{
    select_gamma_delta, select_sigma, validate_stability_hypotheses, SigmaSearch, Tuning,
    ValidationContext, ValidationReport,
};
use dyninv::{Error, Result};

use crate::config::{set_json_path, ExperimentConfig};

// Distinct deterministic streams derived from the experiment seed.
const SIGMA_SEED_SALT: u64 = 0x51_6a;
const VALIDATION_SEED_SALT: u64 = 0xfa_11;
const NOISE_SEED_SALT: u64 = 0xc1_05_ed;

#[derive(Debug, Serialize)]
struct GenerateMeta {
    n: usize,
    n_x: usize,
    seed: u64,
    resets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<(usize, usize)>,
}

/// Writes `training.csv` and `generate_meta.json`; validation happens before
/// any file is touched.
pub fn cmd_generate(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let plant = config.plant.build(config.norm)?;
    let generated = generate_training_data(&plant, &config.excitation, config.seed)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("training.csv");
    write_training_csv(&csv_path, &generated.data, generated.n_x)?;
    let meta = GenerateMeta {
        n: generated.data.len(),
        n_x: generated.n_x,
        seed: config.seed,
        resets: generated.resets,
        coverage: generated.coverage,
    };
    write_json(&out_dir.join("generate_meta.json"), &meta)?;
    Ok(csv_path)
}

/// Estimator seeding plus the scalar selections shared by tune and run.
fn build_tuning(
    config: &ExperimentConfig,
    data: &[DataPoint],
) -> Result<(Tuning, EstimatorBundle, TrainingEstimates)> {
    let o = &config.tuning;
    let (bundle, est) = seed_from_training(data, config.plant.n_x, o.n_bar, config.norm)?;
    let mut tuning = Tuning {
        delta: est.delta_hat + o.c_delta,
        gamma_star: est.gamma_star_hat + o.c_gamma_star,
        gamma_g: est.gamma_g_hat + o.c_gamma_g,
        epsilon: est.epsilon_hat + o.c_epsilon,
        zeta: est.zeta_hat,
        sigma: 0.0,
        gamma_delta_bar: o.gamma_delta_bar,
        gamma_delta_t: 0.0,
        lambda1_star: o.lambda1_star,
        lambda2_star: o.lambda2_star,
        beta_star: o.beta_star,
        r_bar: o.r_bar,
        x_bar: 0.0,
        c_delta: o.c_delta,
        c_gamma_star: o.c_gamma_star,
        c_gamma_g: o.c_gamma_g,
        c_epsilon: o.c_epsilon,
        mu_bar: o.mu_bar,
        q: o.q,
        n_bar: o.n_bar,
    };
    let search = SigmaSearch {
        margin: o.sigma_margin,
        samples: o.d0_samples,
        seed: config.seed ^ SIGMA_SEED_SALT,
        ..Default::default()
    };
    let (sigma, x_bar) = select_sigma(data, config.norm, &tuning, o.x_bar_init, &search)?;
    tuning.sigma = sigma;
    tuning.x_bar = x_bar;
    tuning.gamma_delta_t = select_gamma_delta(
        est.gamma_g_hat,
        o.c_gamma_g,
        o.lambda2_star,
        o.gamma_delta_bar,
        o.gamma_delta_fraction,
    )?;
    Ok((tuning, bundle, est))
}

fn validate(config: &ExperimentConfig, data: &[DataPoint], tuning: &Tuning) -> ValidationReport {
    // The slab check runs at the state and reference the closed loop starts from.
    let mut r1 = config.reference.eval(1);
    let r_norm = config.norm.eval(&r1);
    if r_norm > tuning.r_bar && r_norm > 0.0 {
        let scale = tuning.r_bar / r_norm;
        for r in &mut r1 {
            *r *= scale;
        }
    }
    let ctx = ValidationContext {
        data,
        norm: config.norm,
        state_box_radius: config.state_box_radius(),
        x0: &config.initial_state,
        r1: &r1,
        d0_samples: config.tuning.d0_samples,
        d0_seed: config.seed ^ VALIDATION_SEED_SALT,
    };
    validate_stability_hypotheses(tuning, &ctx)
}

/// Seeds the estimators, selects sigma / x_bar / gamma_delta, validates the
/// stability hypotheses, and writes `tuning.json` + `validation.json`.
pub fn cmd_tune(
    config: &ExperimentConfig,
    data_path: &Path,
    out_dir: &Path,
) -> Result<(Tuning, ValidationReport)> {
    let (data, n_x) = read_training_csv(data_path)?;
    if n_x != config.plant.n_x {
        return Err(Error::DimensionMismatch(n_x, config.plant.n_x));
    }
    let (tuning, _, _) = build_tuning(config, &data)?;
    let report = validate(config, &data, &tuning);
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("tuning.json"), &tuning)?;
    write_json(&out_dir.join("validation.json"), &report)?;
    Ok((tuning, report))
}

/// Replays the training data through the controller and runs the closed loop,
/// writing `trace.csv` and `summary.json`. `forced` records that a failed
/// validation was overridden.
pub fn cmd_run(
    config: &ExperimentConfig,
    data_path: &Path,
    tuning_path: &Path,
    out_dir: &Path,
    force: bool,
) -> Result<RunSummary> {
    let started = Instant::now();
    let (data, n_x) = read_training_csv(data_path)?;
    if n_x != config.plant.n_x {
        return Err(Error::DimensionMismatch(n_x, config.plant.n_x));
    }
    let tuning_text = fs::read_to_string(tuning_path)?;
    let tuning: Tuning = serde_json::from_str(&tuning_text)
        .map_err(|e| Error::InvalidParam(format!("tuning file: {e}")))?;

    let report = validate(config, &data, &tuning);
    if !report.all_passed() && !force {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::InvalidParam(format!(
            "tuning validation failed ({}); rerun tune or pass --force",
            failed.join(", ")
        )));
    }

    let bundle = match config.mode {
        Mode::Adaptive => {
            let (bundle, _) = seed_from_training(&data, n_x, config.tuning.n_bar, config.norm)?;
            Some(bundle)
        }
        Mode::Static => None,
    };
    let controller_cfg = ControllerConfig {
        kernel: config.kernel,
        tuning,
        norm: config.norm,
        mode: config.mode,
        strict: config.tuning.strict,
        gamma_delta_fraction: config.tuning.gamma_delta_fraction,
        gamma_delta_override: config.tuning.gamma_delta_override,
    };
    let mut controller = Controller::new(controller_cfg, data, bundle)?;
    controller.replay_training()?;

    let plant = config.plant.build(config.norm)?;
    let outcome = run_closed_loop(
        &plant,
        &mut controller,
        &config.reference,
        config.horizon,
        &config.initial_state,
        config.seed ^ NOISE_SEED_SALT,
    )?;

    fs::create_dir_all(out_dir)?;
    write_trace_csv(&out_dir.join("trace.csv"), &outcome.trace, n_x)?;
    let mut summary = outcome.summary;
    summary.forced = if force { Some(true) } else { None };
    // Every written artifact must be byte-identical across reruns; timing is
    // only reported back to the caller.
    write_json(&out_dir.join("summary.json"), &summary)?;
    summary.wallclock_us = Some(started.elapsed().as_micros() as u64);
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct SweepCell {
    pub cell: usize,
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Cartesian product over the configured parameter lists; each cell runs the
/// full generate/tune/run pipeline in its own directory. Returns the per-cell
/// results, preserving cell order regardless of scheduling.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    config_text: &str,
    out_dir: &Path,
) -> Result<Vec<SweepCell>> {
    let grid = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("config has no sweep section".into()))?;
    if grid.is_empty() {
        return Err(Error::InvalidParam("sweep section is empty".into()));
    }
    let keys: Vec<&String> = grid.keys().collect();
    let lists: Vec<&Vec<serde_json::Value>> = grid.values().collect();
    if lists.iter().any(|l| l.is_empty()) {
        return Err(Error::InvalidParam("sweep lists must be nonempty".into()));
    }
    let total: usize = lists.iter().map(|l| l.len()).product();
    let base: serde_json::Value = serde_json::from_str(config_text)
        .map_err(|e| Error::InvalidParam(format!("config: {e}")))?;

    fs::create_dir_all(out_dir)?;
    let cells: Vec<SweepCell> = (0..total)
        .into_par_iter()
        .map(|cell| {
            let mut idx = cell;
            let mut patched = base.clone();
            let mut params = serde_json::Map::new();
            if let Some(obj) = patched.as_object_mut() {
                obj.remove("sweep");
            }
            for (key, list) in keys.iter().zip(&lists) {
                let value = list[idx % list.len()].clone();
                idx /= list.len();
                params.insert((*key).to_string(), value.clone());
                if let Err(e) = set_json_path(&mut patched, key, value) {
                    return SweepCell {
                        cell,
                        params,
                        summary: None,
                        error: Some(e.to_string()),
                    };
                }
            }
            let cell_dir = out_dir.join(format!("cell_{cell:03}"));
            let run = || -> Result<RunSummary> {
                let cfg = ExperimentConfig::from_json(&patched.to_string())?;
                let data_path = cmd_generate(&cfg, &cell_dir)?;
                cmd_tune(&cfg, &data_path, &cell_dir)?;
                cmd_run(
                    &cfg,
                    &data_path,
                    &cell_dir.join("tuning.json"),
                    &cell_dir,
                    false,
                )
            };
            match run() {
                Ok(summary) => SweepCell {
                    cell,
                    params,
                    summary: Some(summary),
                    error: None,
                },
                Err(e) => SweepCell {
                    cell,
                    params,
                    summary: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    write_json(&out_dir.join("sweep_summary.json"), &cells)?;
    Ok(cells)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParam(format!("serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &[TraceRecord], n_x: usize) -> Result<()> {
    let mut out = dyninv::controller::trace_csv_header(n_x);
    out.push('\n');
    for rec in trace {
        out.push_str(&rec.csv_row());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
