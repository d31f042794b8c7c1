//! Set-membership bounds on the optimal inverse.
//!
//! Given training pairs `(u_k, w_k)`, a noise bound `delta` and a Lipschitz
//! constant `gamma`, every function consistent with the data is sandwiched
//! pointwise between
//!
//! ```text
//! upper(w) = min_k (u_k + delta + gamma * ||w - w_k||)
//! lower(w) = max_k (u_k - delta - gamma * ||w - w_k||)
//! ```
//!
//! The controller never computes the inverse itself, only these bounds. The
//! worst-case gap `upper - lower` over the operating region (`D0`) drives the
//! selection of the stability margin `sigma`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Regressor;

/// Vector norm used for bounds, stability checks and estimator distances.
/// One global choice shared by all modules; the kernel stays 2-norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    #[default]
    Linf,
}

impl Norm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |acc, x| acc.max(x.abs())),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Norm::Linf => a
                .iter()
                .zip(b)
                .fold(0.0, |acc, (x, y)| acc.max((x - y).abs())),
        }
    }
}

/// One training measurement: the applied input and the regressor it was
/// applied at.
#[derive(Debug, Clone)]
pub struct DataPoint {
    pub t: i64,
    pub u: f64,
    pub omega: Regressor,
}

/// Frozen training set plus the constants needed to evaluate the bounds.
#[derive(Debug, Clone)]
pub struct BoundsOracle<'a> {
    data: &'a [DataPoint],
    delta: f64,
    gamma: f64,
    norm: Norm,
}

impl<'a> BoundsOracle<'a> {
    pub fn new(data: &'a [DataPoint], delta: f64, gamma: f64, norm: Norm) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if delta < 0.0 || gamma < 0.0 || !delta.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParam(format!(
                "delta and gamma must be nonnegative finite, got {delta}, {gamma}"
            )));
        }
        Ok(Self {
            data,
            delta,
            gamma,
            norm,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn data(&self) -> &[DataPoint] {
        self.data
    }

    /// min_k (u_k + delta + gamma * ||w - w_k||)
    pub fn upper_bound(&self, omega: &Regressor) -> Result<f64> {
        Ok(self.bounds(omega)?.1)
    }

    /// max_k (u_k - delta - gamma * ||w - w_k||)
    pub fn lower_bound(&self, omega: &Regressor) -> Result<f64> {
        Ok(self.bounds(omega)?.0)
    }

    /// Both bounds in a single scan over the data.
    pub fn bounds(&self, omega: &Regressor) -> Result<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for dp in self.data {
            if dp.omega.dim() != omega.dim() {
                return Err(Error::DimensionMismatch(dp.omega.dim(), omega.dim()));
            }
            let d = self.norm.distance(dp.omega.coords(), omega.coords());
            hi = hi.min(dp.u + self.delta + self.gamma * d);
            lo = lo.max(dp.u - self.delta - self.gamma * d);
        }
        Ok((lo, hi))
    }
}

/// Bounds with estimates inflated by user margins: delta = delta_hat + c_delta,
/// gamma = gamma_star_hat + c_gamma_star.
pub fn inflated_bounds(
    data: &[DataPoint],
    norm: Norm,
    delta_hat: f64,
    c_delta: f64,
    gamma_star_hat: f64,
    c_gamma_star: f64,
    omega: &Regressor,
) -> Result<(f64, f64)> {
    if c_delta < 0.0 || c_gamma_star < 0.0 {
        return Err(Error::InvalidParam(
            "inflation constants must be nonnegative".into(),
        ));
    }
    BoundsOracle::new(
        data,
        delta_hat + c_delta,
        gamma_star_hat + c_gamma_star,
        norm,
    )?
    .bounds(omega)
}

/// Time-varying bounds: the frozen inflated noise bound combined with the
/// smaller of the current and initial inflated Lipschitz estimates,
/// gamma = min(gamma_star_t + c, gamma_star_init + c).
#[allow(clippy::too_many_arguments)]
pub fn timevarying_bounds(
    data: &[DataPoint],
    norm: Norm,
    delta_hat_init: f64,
    c_delta: f64,
    gamma_star_t: f64,
    gamma_star_init: f64,
    c_gamma_star: f64,
    omega: &Regressor,
) -> Result<(f64, f64)> {
    if c_delta < 0.0 || c_gamma_star < 0.0 {
        return Err(Error::InvalidParam(
            "inflation constants must be nonnegative".into(),
        ));
    }
    let gamma = (gamma_star_t + c_gamma_star).min(gamma_star_init + c_gamma_star);
    BoundsOracle::new(data, delta_hat_init + c_delta, gamma, norm)?.bounds(omega)
}

/// Seeded Monte-Carlo estimate of `sup (upper - lower)` over the operating
/// region `{(x, r) : ||x|| <= x_bar, ||r|| <= r_bar}`.
///
/// Training regressors inside the region are evaluated as deterministic
/// anchors, so the estimate never misses the `2*delta` floor attained at a
/// stored point. Samples are drawn from one seeded stream: growing `samples`
/// extends the sample set, it never reshuffles it.
pub fn estimate_d0(
    oracle: &BoundsOracle<'_>,
    x_bar: f64,
    r_bar: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if x_bar < 0.0 || r_bar < 0.0 || !x_bar.is_finite() || !r_bar.is_finite() {
        return Err(Error::InvalidParam(format!(
            "region radii must be nonnegative finite, got x_bar={x_bar}, r_bar={r_bar}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParam(
            "sample count must be at least 1".into(),
        ));
    }
    let dim = oracle.data()[0].omega.dim();
    if !dim.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!(
            "regressor dimension must be even, got {dim}"
        )));
    }
    let n_x = dim / 2;
    let norm = oracle.norm();

    let mut best = f64::NEG_INFINITY;
    // Anchors: training regressors inside the region.
    for dp in oracle.data() {
        let x_part = dp.omega.state_part(n_x);
        let tail = dp.omega.tail_part(n_x);
        if norm.eval(x_part) <= x_bar && norm.eval(tail) <= r_bar {
            let (lo, hi) = oracle.bounds(&dp.omega)?;
            best = best.max(hi - lo);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![0.0; dim];
    for _ in 0..samples {
        sample_in_ball(&mut rng, norm, x_bar, &mut coords[..n_x]);
        sample_in_ball(&mut rng, norm, r_bar, &mut coords[n_x..]);
        let omega = Regressor::new(coords.clone())?;
        let (lo, hi) = oracle.bounds(&omega)?;
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Uniform sample from the radius-`r` ball of `norm`, written into `out`.
fn sample_in_ball(rng: &mut ChaCha8Rng, norm: Norm, r: f64, out: &mut [f64]) {
    if r == 0.0 {
        out.fill(0.0);
        return;
    }
    match norm {
        Norm::Linf => {
            for o in out.iter_mut() {
                *o = rng.random_range(-r..=r);
            }
        }
        Norm::L2 => {
            // Gaussian direction scaled by U^(1/d) gives a uniform ball sample.
            let d = out.len();
            loop {
                let mut sq = 0.0;
                for o in out.iter_mut() {
                    // Box-Muller from two uniforms.
                    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.random_range(0.0..1.0);
                    *o = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    sq += *o * *o;
                }
                if sq > 0.0 {
                    let scale =
                        r * rng.random_range(0.0..=1.0_f64).powf(1.0 / d as f64) / sq.sqrt();
                    for o in out.iter_mut() {
                        *o *= scale;
                    }
                    break;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training data CSV: t, u, x_1..x_n, x_next_1..x_next_n
// ---------------------------------------------------------------------------

/// Reads a training CSV, returning the data points and the state dimension.
/// Rows must carry consecutive time indices from -N to -1.
pub fn read_training_csv(path: &Path) -> Result<(Vec<DataPoint>, usize)> {
    let text = fs::read_to_string(path)?;
    parse_training_csv(&text)
}

pub fn parse_training_csv(text: &str) -> Result<(Vec<DataPoint>, usize)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Csv {
        line: 1,
        msg: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[0] != "t" || cols[1] != "u" {
        return Err(Error::Csv {
            line: 1,
            msg: format!("expected header t,u,x_1..,x_next_1.., got '{header}'"),
        });
    }
    let n_x = cols.iter().filter(|c| c.starts_with("x_next_")).count();
    let state_cols = cols.len() - 2 - n_x;
    if n_x == 0 || state_cols != n_x {
        return Err(Error::Csv {
            line: 1,
            msg: format!("header must hold x_1..x_{n_x} and x_next_1..x_next_{n_x}"),
        });
    }

    let mut data = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Csv {
                line: lineno,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Csv {
                line: lineno,
                msg: format!("invalid number '{s}'"),
            })
        };
        let t = fields[0].parse::<i64>().map_err(|_| Error::Csv {
            line: lineno,
            msg: format!("invalid time index '{}'", fields[0]),
        })?;
        let u = parse(fields[1])?;
        let mut coords = Vec::with_capacity(2 * n_x);
        for f in &fields[2..] {
            coords.push(parse(f)?);
        }
        let omega = Regressor::new(coords).map_err(|e| Error::Csv {
            line: lineno,
            msg: e.to_string(),
        })?;
        data.push(DataPoint { t, u, omega });
    }
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len() as i64;
    for (i, dp) in data.iter().enumerate() {
        let expected = -n + i as i64;
        if dp.t != expected {
            return Err(Error::OutOfOrder {
                got: dp.t,
                expected,
            });
        }
    }
    Ok((data, n_x))
}

pub fn write_training_csv(path: &Path, data: &[DataPoint], n_x: usize) -> Result<()> {
    let mut out = String::from("t,u");
    for i in 1..=n_x {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 1..=n_x {
        out.push_str(&format!(",x_next_{i}"));
    }
    out.push('\n');
    for dp in data {
        out.push_str(&format!("{},{}", dp.t, dp.u));
        for c in dp.omega.coords() {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
