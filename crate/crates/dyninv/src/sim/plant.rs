//! Built-in synthetic plants `x_next = g(x, u) + e` with bounded seeded noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setmem::Norm;
use crate::sim::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Uniform on the closed noise ball; saturates the bound.
    UniformBall,
    #[default]
    Zero,
}

/// Plant selector as it appears in experiment configs. Parameters of the
/// built-ins are free-form key/value pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantKind {
    /// x' = a*x + b*tanh(u), one state.
    ScalarTanh { a: f64, b: f64 },
    /// Two states with mild cross terms:
    /// x1' = a11*x1 + a12*x2 + b1*u + c1*tanh(x1*x2)
    /// x2' = a21*x1 + a22*x2 + b2*u + c2*sin(x1)
    TwoStatePolynomial {
        a11: f64,
        a12: f64,
        a21: f64,
        a22: f64,
        b1: f64,
        b2: f64,
        c1: f64,
        c2: f64,
    },
    /// One expression per state component, in `u` and `x1..xN`.
    Custom { exprs: Vec<String> },
}

/// A plant ready to step: parsed map, state dimension, and noise model.
#[derive(Debug, Clone)]
pub struct PlantModel {
    kind: PlantKind,
    custom: Vec<Expr>,
    n_x: usize,
    noise_bound: f64,
    noise_law: NoiseLaw,
    norm: Norm,
}

impl PlantModel {
    pub fn new(
        kind: PlantKind,
        n_x: usize,
        noise_bound: f64,
        noise_law: NoiseLaw,
        norm: Norm,
    ) -> Result<Self> {
        if noise_bound < 0.0 || !noise_bound.is_finite() {
            return Err(Error::InvalidParam(format!(
                "noise bound must be nonnegative finite, got {noise_bound}"
            )));
        }
        let mut custom = Vec::new();
        match &kind {
            PlantKind::ScalarTanh { .. } => {
                if n_x != 1 {
                    return Err(Error::InvalidParam(
                        "scalar_tanh has exactly one state".into(),
                    ));
                }
            }
            PlantKind::TwoStatePolynomial { .. } => {
                if n_x != 2 {
                    return Err(Error::InvalidParam(
                        "two_state_polynomial has exactly two states".into(),
                    ));
                }
            }
            PlantKind::Custom { exprs } => {
                if exprs.len() != n_x {
                    return Err(Error::InvalidParam(format!(
                        "custom plant needs {n_x} expressions, got {}",
                        exprs.len()
                    )));
                }
                for e in exprs {
                    let parsed = Expr::parse(e)?;
                    if let Some(max_idx) = parsed.max_state_index() {
                        if max_idx >= n_x {
                            return Err(Error::InvalidParam(format!(
                                "expression '{e}' references x{} beyond n_x={n_x}",
                                max_idx + 1
                            )));
                        }
                    }
                    custom.push(parsed);
                }
            }
        }
        Ok(Self {
            kind,
            custom,
            n_x,
            noise_bound,
            noise_law,
            norm,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn kind(&self) -> &PlantKind {
        &self.kind
    }

    /// The noiseless map g(x, u).
    pub fn eval_map(&self, x: &[f64], u: f64) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_x);
        match &self.kind {
            PlantKind::ScalarTanh { a, b } => vec![a * x[0] + b * u.tanh()],
            PlantKind::TwoStatePolynomial {
                a11,
                a12,
                a21,
                a22,
                b1,
                b2,
                c1,
                c2,
            } => vec![
                a11 * x[0] + a12 * x[1] + b1 * u + c1 * (x[0] * x[1]).tanh(),
                a21 * x[0] + a22 * x[1] + b2 * u + c2 * x[0].sin(),
            ],
            PlantKind::Custom { .. } => self.custom.iter().map(|e| e.eval(x, u)).collect(),
        }
    }

    /// Draws a disturbance with `||e|| <= noise_bound`.
    pub fn sample_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.noise_law {
            NoiseLaw::Zero => vec![0.0; self.n_x],
            NoiseLaw::UniformBall => {
                let mut e = vec![0.0; self.n_x];
                match self.norm {
                    Norm::Linf => {
                        for v in &mut e {
                            *v = rng.random_range(-self.noise_bound..=self.noise_bound);
                        }
                    }
                    Norm::L2 => {
                        // Direction from Box-Muller normals, radius by U^(1/d).
                        loop {
                            let mut sq = 0.0;
                            for v in &mut e {
                                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                                let u2: f64 = rng.random_range(0.0..1.0);
                                *v = (-2.0 * u1.ln()).sqrt()
                                    * (2.0 * std::f64::consts::PI * u2).cos();
                                sq += *v * *v;
                            }
                            if sq > 0.0 {
                                let scale = self.noise_bound
                                    * rng.random_range(0.0..=1.0_f64).powf(1.0 / self.n_x as f64)
                                    / sq.sqrt();
                                for v in &mut e {
                                    *v *= scale;
                                }
                                break;
                            }
                        }
                    }
                }
                e
            }
        }
    }

    /// One plant transition: g(x, u) plus a sampled disturbance.
    pub fn plant_step(&self, x: &[f64], u: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut next = self.eval_map(x, u);
        let e = self.sample_noise(rng);
        for (n, ei) in next.iter_mut().zip(e) {
            *n += ei;
        }
        next
    }
}

/// Evenly spaced grid over [lo, hi], endpoints included. Doubling via
/// `2n - 1` points keeps grids nested.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Ground-truth Lipschitz constant of the plant with respect to the input,
/// from brute-force grid maximization of the difference quotient.
#[derive(Debug, Clone)]
pub struct GammaOracle {
    pub gamma_g: f64,
    /// State attaining the maximum.
    pub x_star: Vec<f64>,
    /// Per-grid-state maxima behind the overall maximum.
    pub per_state: Vec<(Vec<f64>, f64)>,
}

/// Maximizes `||g(x, u1) - g(x, u2)|| / |u1 - u2|` over grids of the state box
/// and the input interval.
pub fn gamma_oracle(
    plant: &PlantModel,
    input_box: (f64, f64),
    state_half_widths: &[f64],
    points_per_dim: usize,
    norm: Norm,
) -> Result<GammaOracle> {
    if state_half_widths.len() != plant.n_x() {
        return Err(Error::DimensionMismatch(
            state_half_widths.len(),
            plant.n_x(),
        ));
    }
    if points_per_dim < 2 {
        return Err(Error::InvalidParam(
            "oracle grid needs at least 2 points".into(),
        ));
    }
    let u_grid = linspace(input_box.0, input_box.1, points_per_dim);
    let axes: Vec<Vec<f64>> = state_half_widths
        .iter()
        .map(|h| linspace(-h, *h, points_per_dim))
        .collect();

    let mut per_state = Vec::new();
    let mut best = 0.0_f64;
    let mut x_star = vec![0.0; plant.n_x()];
    let mut idx = vec![0usize; plant.n_x()];
    loop {
        let x: Vec<f64> = idx.iter().zip(&axes).map(|(i, ax)| ax[*i]).collect();
        let images: Vec<Vec<f64>> = u_grid.iter().map(|u| plant.eval_map(&x, *u)).collect();
        let mut local = 0.0_f64;
        for i in 0..u_grid.len() {
            for j in (i + 1)..u_grid.len() {
                let du = (u_grid[j] - u_grid[i]).abs();
                if du == 0.0 {
                    continue;
                }
                let dz = norm.distance(&images[i], &images[j]);
                local = local.max(dz / du);
            }
        }
        per_state.push((x.clone(), local));
        if local > best {
            best = local;
            x_star = x;
        }
        // Advance the mixed-radix counter over state cells.
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(GammaOracle {
                    gamma_g: best,
                    x_star,
                    per_state,
                });
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
