//! Closed-loop execution and empirical stability checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, TraceRecord};
use crate::error::{Error, Result};
use crate::sim::plant::PlantModel;

/// Reference signal specifications; the controller clamps whatever comes out
/// to the r_bar ball.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefSignal {
    Constant {
        value: Vec<f64>,
    },
    PiecewiseConstant {
        values: Vec<Vec<f64>>,
        hold: usize,
    },
    Sinusoid {
        amplitude: Vec<f64>,
        period: f64,
        phase: f64,
    },
}

impl RefSignal {
    pub fn validate(&self, n_x: usize) -> Result<()> {
        let dim_ok = match self {
            RefSignal::Constant { value } => value.len() == n_x,
            RefSignal::PiecewiseConstant { values, hold } => {
                *hold > 0 && !values.is_empty() && values.iter().all(|v| v.len() == n_x)
            }
            RefSignal::Sinusoid {
                amplitude, period, ..
            } => amplitude.len() == n_x && *period > 0.0,
        };
        if dim_ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(
                "reference signal inconsistent with n_x".into(),
            ))
        }
    }

    pub fn eval(&self, t: i64) -> Vec<f64> {
        match self {
            RefSignal::Constant { value } => value.clone(),
            RefSignal::PiecewiseConstant { values, hold } => {
                let idx = (t.max(0) as usize / hold) % values.len();
                values[idx].clone()
            }
            RefSignal::Sinusoid {
                amplitude,
                period,
                phase,
            } => {
                let arg = 2.0 * std::f64::consts::PI * t as f64 / period + phase;
                amplitude.iter().map(|a| a * arg.sin()).collect()
            }
        }
    }
}

/// Empirical finite-gain evidence from one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainCheckReport {
    pub sup_x: f64,
    pub x_bar: f64,
    /// Fraction of steps with the state norm inside the guaranteed ball.
    pub in_ball_fraction: f64,
    /// Least-squares fit of sup||x|| against (sup||r||, sup||e||, 1) over
    /// windows of the run.
    pub lambda_fit: [f64; 3],
}

/// Summary emitted next to the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub in_ball_fraction: f64,
    pub sup_x: f64,
    pub x_bar: f64,
    pub lambda_fit: [f64; 3],
    pub mean_abs_tracking_error: f64,
    pub empty_slab_count: usize,
    pub dict_size_final: usize,
    pub steps: usize,
    /// Set by the front end when validation failures were overridden.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wallclock_us: Option<u64>,
}

impl RunSummary {
    /// A run upholds the guarantee when it never left the ball and never saw
    /// an empty stability slab.
    pub fn guarantee_held(&self) -> bool {
        self.in_ball_fraction >= 1.0 && self.empty_slab_count == 0
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub report: GainCheckReport,
    pub summary: RunSummary,
}

/// Runs `t_steps` of closed loop from `x0`. The controller must have finished
/// its training replay (clock at t = 0). Strict controllers abort on the first
/// empty stability slab; otherwise the event is counted and the run goes on.
pub fn run_closed_loop(
    plant: &PlantModel,
    controller: &mut Controller,
    reference: &RefSignal,
    t_steps: usize,
    x0: &[f64],
    noise_seed: u64,
) -> Result<RunOutcome> {
    if controller.t() != 0 {
        return Err(Error::InvalidParam(format!(
            "controller clock at t={}, expected 0 (replay training first)",
            controller.t()
        )));
    }
    if x0.len() != plant.n_x() || controller.n_x() != plant.n_x() {
        return Err(Error::DimensionMismatch(controller.n_x(), plant.n_x()));
    }
    reference.validate(plant.n_x())?;
    if t_steps == 0 {
        return Err(Error::InvalidParam("horizon must be at least 1".into()));
    }

    let norm = controller.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let x_bar = controller.tuning().x_bar;

    let mut x = x0.to_vec();
    let mut trace = Vec::with_capacity(t_steps);
    let mut noise_norms = Vec::with_capacity(t_steps);
    let mut state_norms = Vec::with_capacity(t_steps);
    let mut ref_norms = Vec::with_capacity(t_steps);
    let mut empty_slab_count = 0usize;
    let mut in_ball = 0usize;

    for t in 0..t_steps {
        let r_next = reference.eval(t as i64 + 1);
        let (u, diag) = controller.control_step(&x, &r_next)?;
        if diag.slab_empty {
            empty_slab_count += 1;
        }
        if diag.x_norm <= x_bar {
            in_ball += 1;
        }
        state_norms.push(diag.x_norm);
        ref_norms.push(norm.eval(&diag.r_effective));

        let drift = plant.eval_map(&x, u);
        let e = plant.sample_noise(&mut rng);
        noise_norms.push(norm.eval(&e));
        let x_next: Vec<f64> = drift.iter().zip(&e).map(|(d, ei)| d + ei).collect();

        trace.push(TraceRecord {
            t: t as i64,
            x: x.clone(),
            r: diag.r_effective.clone(),
            u,
            dict_size: diag.dict_size,
            slab_lo: diag.slab_lo,
            slab_hi: diag.slab_hi,
            delta_hat: diag.delta_hat,
            zeta_hat: diag.zeta_hat,
            gamma_star_hat: diag.gamma_star_hat,
            gamma_g_hat: diag.gamma_g_hat,
            gamma_delta_t: diag.gamma_delta_t,
        });
        x = x_next;
    }

    let sup_x = state_norms.iter().fold(0.0_f64, |a, b| a.max(*b));
    let in_ball_fraction = in_ball as f64 / t_steps as f64;
    let lambda_fit = fit_gains(&state_norms, &ref_norms, &noise_norms);

    // Tracking error pairs x_t with the reference requested for it.
    let start = t_steps - (t_steps / 4).max(1);
    let mut err_sum = 0.0;
    let mut err_count = 0usize;
    for t in start..t_steps {
        if t == 0 {
            continue;
        }
        let diff: Vec<f64> = trace[t]
            .x
            .iter()
            .zip(&trace[t - 1].r)
            .map(|(a, b)| a - b)
            .collect();
        err_sum += norm.eval(&diff);
        err_count += 1;
    }
    let mean_abs_tracking_error = if err_count > 0 {
        err_sum / err_count as f64
    } else {
        0.0
    };

    let report = GainCheckReport {
        sup_x,
        x_bar,
        in_ball_fraction,
        lambda_fit,
    };
    let summary = RunSummary {
        in_ball_fraction,
        sup_x,
        x_bar,
        lambda_fit,
        mean_abs_tracking_error,
        empty_slab_count,
        dict_size_final: controller.dict_size(),
        steps: t_steps,
        forced: None,
        wallclock_us: None,
    };
    Ok(RunOutcome {
        trace,
        report,
        summary,
    })
}

type SupremaColumn = Box<dyn Fn(&(f64, f64, f64)) -> f64>;

/// Least squares of y = l1*a + l2*b + beta over per-window suprema. Constant
/// or absent columns are dropped rather than fitted.
fn fit_gains(state_norms: &[f64], ref_norms: &[f64], noise_norms: &[f64]) -> [f64; 3] {
    let n = state_norms.len();
    let window = (n / 40).max(10).min(n);
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let sup = |v: &[f64]| v[start..end].iter().fold(0.0_f64, |a, b| a.max(*b));
        rows.push((sup(state_norms), sup(ref_norms), sup(noise_norms)));
        start = end;
    }
    let spread = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-12
    };
    let use_r = spread(&|r| r.1);
    let use_e = spread(&|r| r.2);

    // Normal equations over the active columns.
    let mut cols: Vec<SupremaColumn> = Vec::new();
    if use_r {
        cols.push(Box::new(|r| r.1));
    }
    if use_e {
        cols.push(Box::new(|r| r.2));
    }
    cols.push(Box::new(|_| 1.0));
    let m = cols.len();
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for r in &rows {
        for i in 0..m {
            let ci = cols[i](r);
            aty[i] += ci * r.0;
            for j in 0..m {
                ata[i][j] += ci * cols[j](r);
            }
        }
    }
    let sol = solve_small(&mut ata, &mut aty).unwrap_or(vec![0.0; m]);
    let mut out = [0.0; 3];
    let mut k = 0;
    if use_r {
        out[0] = sol[k];
        k += 1;
    }
    if use_e {
        out[1] = sol[k];
        k += 1;
    }
    out[2] = sol[k];
    out
}

/// Gaussian elimination with partial pivoting; None on singular systems.
#[allow(clippy::needless_range_loop)]
fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|i, j| a[*i][col].abs().partial_cmp(&a[*j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}
