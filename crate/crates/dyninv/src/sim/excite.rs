//! Open-loop excitation policies that produce the training data.
//!
//! Every emitted row keeps `u` in the input interval and both the state and
//! its successor inside the state box; transitions that would leave the box
//! are discarded and the rollout restarts from a fresh state, with the event
//! logged. Generation is fully determined by the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Regressor;
use crate::setmem::DataPoint;
use crate::sim::plant::{linspace, PlantModel};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationKind {
    /// Independent uniform inputs along a rollout.
    UniformRandom { n: usize },
    /// Every (state-cell, input-level) combination once; the state teleports.
    GridSweep {
        x_points_per_dim: usize,
        u_points: usize,
    },
    /// Random input level held for a fixed number of steps.
    Multilevel {
        n: usize,
        levels: usize,
        hold: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    pub policy: ExcitationKind,
    /// Input interval U = [lo, hi].
    pub input_box: (f64, f64),
    /// Per-dimension half-widths of the symmetric state box X.
    pub state_half_widths: Vec<f64>,
}

impl ExcitationConfig {
    pub fn validate(&self, n_x: usize) -> Result<()> {
        if self.state_half_widths.len() != n_x {
            return Err(Error::DimensionMismatch(self.state_half_widths.len(), n_x));
        }
        if self.input_box.0 >= self.input_box.1 {
            return Err(Error::InvalidParam(format!(
                "input box [{}, {}] is empty",
                self.input_box.0, self.input_box.1
            )));
        }
        if self.state_half_widths.iter().any(|h| *h <= 0.0) {
            return Err(Error::InvalidParam(
                "state half-widths must be positive".into(),
            ));
        }
        match self.policy {
            ExcitationKind::UniformRandom { n } => {
                if n == 0 {
                    return Err(Error::InvalidParam(
                        "training length must be at least 1".into(),
                    ));
                }
            }
            ExcitationKind::GridSweep {
                x_points_per_dim,
                u_points,
            } => {
                if x_points_per_dim == 0 || u_points == 0 {
                    return Err(Error::InvalidParam("grid sweep needs nonzero grids".into()));
                }
            }
            ExcitationKind::Multilevel { n, levels, hold } => {
                if n == 0 || levels < 2 || hold == 0 {
                    return Err(Error::InvalidParam(
                        "multilevel needs n >= 1, levels >= 2, hold >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Output of a generation run: the rows plus the events the estimator
/// pipelines may care about.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub data: Vec<DataPoint>,
    pub n_x: usize,
    /// Emitted-row indices after which the rollout state was resampled.
    pub resets: Vec<usize>,
    /// Grid coverage: (cells attempted, cells emitted). Grid sweep only.
    pub coverage: Option<(usize, usize)>,
}

fn inside_box(x: &[f64], half_widths: &[f64]) -> bool {
    x.iter().zip(half_widths).all(|(xi, h)| xi.abs() <= *h)
}

fn sample_state(rng: &mut ChaCha8Rng, half_widths: &[f64]) -> Vec<f64> {
    half_widths
        .iter()
        .map(|h| rng.random_range(-h..=*h))
        .collect()
}

/// Rolls the plant out under the excitation policy and returns rows satisfying
/// the data assumptions; time indices run from -N to -1.
pub fn generate_training_data(
    plant: &PlantModel,
    excitation: &ExcitationConfig,
    seed: u64,
) -> Result<GeneratedData> {
    excitation.validate(plant.n_x())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hw = &excitation.state_half_widths;
    let (u_lo, u_hi) = excitation.input_box;

    let mut rows: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut resets = Vec::new();
    let mut coverage = None;

    match excitation.policy {
        ExcitationKind::UniformRandom { n } => {
            rollout(
                plant,
                hw,
                n,
                &mut rng,
                |rng| rng.random_range(u_lo..=u_hi),
                &mut rows,
                &mut resets,
            )?;
        }
        ExcitationKind::Multilevel { n, levels, hold } => {
            let level_values = linspace(u_lo, u_hi, levels);
            let mut step = 0usize;
            let mut current = level_values[0];
            rollout(
                plant,
                hw,
                n,
                &mut rng,
                |rng| {
                    if step.is_multiple_of(hold) {
                        current = level_values[rng.random_range(0..level_values.len())];
                    }
                    step += 1;
                    current
                },
                &mut rows,
                &mut resets,
            )?;
        }
        ExcitationKind::GridSweep {
            x_points_per_dim,
            u_points,
        } => {
            let axes: Vec<Vec<f64>> = hw
                .iter()
                .map(|h| linspace(-h, *h, x_points_per_dim))
                .collect();
            let u_grid = linspace(u_lo, u_hi, u_points);
            let mut attempted = 0usize;
            let mut emitted = 0usize;
            let mut idx = vec![0usize; hw.len()];
            'cells: loop {
                let x: Vec<f64> = idx.iter().zip(&axes).map(|(i, ax)| ax[*i]).collect();
                for u in &u_grid {
                    attempted += 1;
                    let x_next = plant.plant_step(&x, *u, &mut rng);
                    if inside_box(&x_next, hw) {
                        rows.push((*u, x.clone(), x_next));
                        emitted += 1;
                    } else {
                        resets.push(rows.len());
                    }
                }
                let mut d = 0;
                loop {
                    if d == idx.len() {
                        break 'cells;
                    }
                    idx[d] += 1;
                    if idx[d] < axes[d].len() {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
            }
            coverage = Some((attempted, emitted));
        }
    }

    if rows.is_empty() {
        return Err(Error::InvalidParam(
            "excitation produced no admissible training rows".into(),
        ));
    }
    let n = rows.len() as i64;
    let data = rows
        .into_iter()
        .enumerate()
        .map(|(i, (u, x, x_next))| {
            Ok(DataPoint {
                t: -n + i as i64,
                u,
                omega: Regressor::from_parts(&x, &x_next)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedData {
        data,
        n_x: plant.n_x(),
        resets,
        coverage,
    })
}

fn rollout(
    plant: &PlantModel,
    half_widths: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
    mut next_input: impl FnMut(&mut ChaCha8Rng) -> f64,
    rows: &mut Vec<(f64, Vec<f64>, Vec<f64>)>,
    resets: &mut Vec<usize>,
) -> Result<()> {
    let mut x = sample_state(rng, half_widths);
    let mut attempts = 0usize;
    let max_attempts = n.saturating_mul(50).max(1000);
    while rows.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidParam(format!(
                "excitation kept leaving the state box ({} rows after {attempts} attempts); \
                 enlarge the box or calm the plant",
                rows.len()
            )));
        }
        let u = next_input(rng);
        let x_next = plant.plant_step(&x, u, rng);
        if inside_box(&x_next, half_widths) {
            rows.push((u, x.clone(), x_next.clone()));
            x = x_next;
        } else {
            resets.push(rows.len());
            x = sample_state(rng, half_widths);
        }
    }
    Ok(())
}
