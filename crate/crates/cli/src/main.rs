//! Command-line front end.
//!
//! Exit codes: 0 clean run, 1 stability-guarantee violation observed
//! (empty stability slab, state leaving the guaranteed ball, or a failed
//! hypothesis check), 2 usage or configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dyninv::controller::Mode;
use dyninv::Error;
use dyninv_cli::commands::{cmd_generate, cmd_run, cmd_sweep, cmd_tune};
use dyninv_cli::config::ExperimentConfig;

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "dyninv",
    version,
    about = "Online data-driven inverse controller experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Adaptive,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training data from the configured plant and excitation.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate parameters from training data and validate the tuning.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay training and run the closed loop.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        tuning: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run even if the tuning fails validation (recorded in the summary).
        #[arg(long)]
        force: bool,
    },
    /// Cartesian product over the config's sweep lists, one run per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(
    path: &std::path::Path,
    seed: Option<u64>,
    mode: Option<ModeArg>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = match mode {
            ModeArg::Static => Mode::Static,
            ModeArg::Adaptive => Mode::Adaptive,
        };
    }
    Ok(cfg)
}

fn usage_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = match load_config(&config, seed, None) {
                Ok(c) => c,
                Err(e) => return usage_error(&e),
            };
            match cmd_generate(&cfg, &out) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => usage_error(&e),
            }
        }
        Command::Tune {
            config,
            data,
            out,
            seed,
        } => {
            let cfg = match load_config(&config, seed, None) {
                Ok(c) => c,
                Err(e) => return usage_error(&e),
            };
            match cmd_tune(&cfg, &data, &out) {
                Ok((tuning, report)) => {
                    for check in &report.checks {
                        let status = if check.passed { "pass" } else { "FAIL" };
                        println!("{status}  {}: {}", check.name, check.detail);
                    }
                    println!(
                        "sigma={} x_bar={} gamma_delta_t={}",
                        tuning.sigma, tuning.x_bar, tuning.gamma_delta_t
                    );
                    if report.all_passed() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("tuning validation failed");
                        ExitCode::from(EXIT_VIOLATION)
                    }
                }
                Err(e) => usage_error(&e),
            }
        }
        Command::Run {
            config,
            data,
            tuning,
            out,
            mode,
            seed,
            force,
        } => {
            let cfg = match load_config(&config, seed, mode) {
                Ok(c) => c,
                Err(e) => return usage_error(&e),
            };
            match cmd_run(&cfg, &data, &tuning, &out, force) {
                Ok(summary) => {
                    println!(
                        "steps={} in_ball_fraction={} empty_slabs={} dict={} tracking_error={} wallclock_us={}",
                        summary.steps,
                        summary.in_ball_fraction,
                        summary.empty_slab_count,
                        summary.dict_size_final,
                        summary.mean_abs_tracking_error,
                        summary.wallclock_us.unwrap_or(0)
                    );
                    if summary.guarantee_held() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("stability guarantee violated during the run");
                        ExitCode::from(EXIT_VIOLATION)
                    }
                }
                Err(e @ Error::StabilitySlabEmpty { .. }) => {
                    eprintln!("aborted: {e}");
                    ExitCode::from(EXIT_VIOLATION)
                }
                Err(e) => usage_error(&e),
            }
        }
        Command::Sweep { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return usage_error(&Error::Io(e)),
            };
            let cfg = match ExperimentConfig::from_json(&text) {
                Ok(c) => c,
                Err(e) => return usage_error(&e),
            };
            match cmd_sweep(&cfg, &text, &out) {
                Ok(cells) => {
                    let mut violated = false;
                    for cell in &cells {
                        match (&cell.summary, &cell.error) {
                            (Some(s), _) if s.guarantee_held() => {
                                println!("cell {:03}: ok", cell.cell)
                            }
                            (Some(_), _) => {
                                violated = true;
                                println!("cell {:03}: guarantee violated", cell.cell)
                            }
                            (_, Some(e)) => {
                                violated = true;
                                println!("cell {:03}: error: {e}", cell.cell)
                            }
                            _ => {}
                        }
                    }
                    if violated {
                        ExitCode::from(EXIT_VIOLATION)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => usage_error(&e),
            }
        }
    }
}
