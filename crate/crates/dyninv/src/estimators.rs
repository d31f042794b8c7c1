//! Online estimation of noise bounds and Lipschitz constants from streams of
//! noisy samples `z = f(xi) + o`, `||o|| <= eps`.
//!
//! The noise-bound estimator takes half the largest output spread among
//! near-duplicate inputs and keeps a running maximum. The Lipschitz estimator
//! keeps, for every pair in a sliding window, the largest slope certified by
//! the current noise bound `(||z_i - z_j|| - 2*eps_hat) / ||xi_i - xi_j||`,
//! corrects stored slopes downward whenever the noise estimate grows, and
//! carries the best slope seen so far even after its pair leaves the window.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::kernel::Regressor;
use crate::setmem::{DataPoint, Norm};

/// Default sliding-window capacity; caps pair-table memory at desk scale.
pub const DEFAULT_MEMORY_HORIZON: usize = 500;

#[derive(Debug, Clone)]
struct WindowPoint {
    id: u64,
    xi: Vec<f64>,
    z: Vec<f64>,
}

/// Running noise-bound estimate over `(xi, z)` samples.
#[derive(Debug, Clone)]
pub struct NoiseEstimatorState {
    eps_hat: f64,
    rho: f64,
    cap: usize,
    norm: Norm,
    window: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl NoiseEstimatorState {
    pub fn new(rho: f64, cap: usize, norm: Norm) -> Result<Self> {
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::InvalidParam(format!(
                "neighborhood radius must be nonnegative finite, got {rho}"
            )));
        }
        if cap == 0 {
            return Err(Error::InvalidParam(
                "memory horizon must be at least 1".into(),
            ));
        }
        Ok(Self {
            eps_hat: 0.0,
            rho,
            cap,
            norm,
            window: VecDeque::new(),
        })
    }

    pub fn eps_hat(&self) -> f64 {
        self.eps_hat
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Ingests one sample: the output spread against stored neighbors within
    /// `rho` raises the running bound, then the sample enters the window.
    pub fn update(&mut self, xi: &[f64], z: &[f64]) -> Result<()> {
        if let Some((xi0, z0)) = self.window.front() {
            if xi0.len() != xi.len() {
                return Err(Error::DimensionMismatch(xi0.len(), xi.len()));
            }
            if z0.len() != z.len() {
                return Err(Error::DimensionMismatch(z0.len(), z.len()));
            }
        }
        let mut eps_z = 0.0_f64;
        for (xi_k, z_k) in &self.window {
            if self.norm.distance(xi, xi_k) <= self.rho {
                eps_z = eps_z.max(0.5 * self.norm.distance(z, z_k));
            }
        }
        self.eps_hat = self.eps_hat.max(eps_z);
        self.window.push_back((xi.to_vec(), z.to_vec()));
        if self.window.len() > self.cap {
            self.window.pop_front();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct PairCell {
    gamma: f64,
    delta: f64,
}

/// Running Lipschitz-constant estimate over `(xi, z)` samples.
#[derive(Debug, Clone)]
pub struct LipschitzEstimatorState {
    gamma_hat: f64,
    gamma_current: f64,
    delta_current: f64,
    cap: usize,
    norm: Norm,
    next_id: u64,
    window: VecDeque<WindowPoint>,
    /// Certified slope and input distance per in-window pair, keyed by
    /// (older id, newer id).
    pairs: BTreeMap<(u64, u64), PairCell>,
    /// Lexicographically first pair attaining the table maximum.
    max_cache: Option<((u64, u64), f64)>,
}

impl LipschitzEstimatorState {
    pub fn new(cap: usize, norm: Norm) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidParam(
                "memory horizon must be at least 1".into(),
            ));
        }
        Ok(Self {
            gamma_hat: 0.0,
            gamma_current: 0.0,
            delta_current: 0.0,
            cap,
            norm,
            next_id: 0,
            window: VecDeque::new(),
            pairs: BTreeMap::new(),
            max_cache: None,
        })
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    fn rescan_max(&mut self) {
        self.max_cache = None;
        for (key, cell) in &self.pairs {
            match self.max_cache {
                Some((_, best)) if cell.gamma <= best => {}
                _ => self.max_cache = Some((*key, cell.gamma)),
            }
        }
    }

    /// Ingests one sample together with the paired noise estimates before and
    /// after this time step.
    pub fn update(
        &mut self,
        xi: &[f64],
        z: &[f64],
        eps_hat_t: f64,
        eps_hat_prev: f64,
    ) -> Result<()> {
        if !(eps_hat_t >= eps_hat_prev && eps_hat_prev >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise estimates must satisfy eps_t >= eps_prev >= 0, got {eps_hat_t}, {eps_hat_prev}"
            )));
        }
        if let Some(front) = self.window.front() {
            if front.xi.len() != xi.len() {
                return Err(Error::DimensionMismatch(front.xi.len(), xi.len()));
            }
            if front.z.len() != z.len() {
                return Err(Error::DimensionMismatch(front.z.len(), z.len()));
            }
        }

        // New-pair slopes against the stored window, certified by eps_hat_t.
        let mut new_pairs: Vec<((u64, u64), PairCell)> = Vec::with_capacity(self.window.len());
        let id_t = self.next_id;
        for p in &self.window {
            let delta = self.norm.distance(&p.xi, xi);
            let gamma = if delta == 0.0 {
                0.0
            } else {
                let spread = self.norm.distance(&p.z, z);
                if spread > 2.0 * eps_hat_t {
                    (spread - 2.0 * eps_hat_t) / delta
                } else {
                    0.0
                }
            };
            new_pairs.push(((p.id, id_t), PairCell { gamma, delta }));
        }

        // A grown noise bound weakens every previously certified slope.
        let correction = 2.0 * (eps_hat_t - eps_hat_prev);
        if correction > 0.0 {
            for cell in self.pairs.values_mut() {
                if cell.delta != 0.0 {
                    cell.gamma -= correction / cell.delta;
                }
            }
            if self.delta_current != 0.0 {
                self.gamma_current -= correction / self.delta_current;
            }
            self.rescan_max();
        }

        for (key, cell) in new_pairs {
            self.pairs.insert(key, cell);
            match self.max_cache {
                Some((best_key, best))
                    if cell.gamma < best || (cell.gamma == best && key >= best_key) => {}
                _ => self.max_cache = Some((key, cell.gamma)),
            }
        }

        // Merge the windowed maximum with the carried best slope; the estimate
        // is clamped at zero (maximum over a set containing zero). The carried
        // pair distance moves only when the windowed maximum wins outright.
        match self.max_cache {
            Some((key, gamma_tilde)) if gamma_tilde >= self.gamma_current && gamma_tilde >= 0.0 => {
                self.gamma_hat = gamma_tilde;
                self.delta_current = self.pairs[&key].delta;
            }
            _ => {
                self.gamma_hat = self.gamma_current.max(0.0);
            }
        }
        self.gamma_current = self.gamma_hat;

        self.window.push_back(WindowPoint {
            id: id_t,
            xi: xi.to_vec(),
            z: z.to_vec(),
        });
        self.next_id += 1;
        if self.window.len() > self.cap {
            let evicted = self.window.pop_front().expect("cap >= 1");
            let keys: Vec<(u64, u64)> = self
                .pairs
                .range((evicted.id, 0)..(evicted.id + 1, 0))
                .map(|(k, _)| *k)
                .collect();
            for k in keys {
                self.pairs.remove(&k);
            }
            if matches!(self.max_cache, Some(((i, _), _)) if i == evicted.id) {
                self.rescan_max();
            }
        }
        Ok(())
    }
}

/// Estimates taken from the training data at seeding time.
#[derive(Debug, Clone, Copy)]
pub struct TrainingEstimates {
    /// Noise bound on the inverse relation (omega -> u).
    pub delta_hat: f64,
    /// Disturbance bound on the input-to-successor relation (u -> x_next).
    pub zeta_hat: f64,
    /// Disturbance bound on the full plant relation ((x, u) -> x_next).
    pub epsilon_hat: f64,
    pub gamma_star_hat: f64,
    pub gamma_g_hat: f64,
    pub rho_inverse: f64,
    pub rho_plant: f64,
}

/// The four online estimators run side by side by the adaptive controller.
#[derive(Debug, Clone)]
pub struct EstimatorBundle {
    pub delta_est: NoiseEstimatorState,
    pub zeta_est: NoiseEstimatorState,
    pub gamma_star_est: LipschitzEstimatorState,
    pub gamma_g_est: LipschitzEstimatorState,
}

impl EstimatorBundle {
    pub fn new(rho_inverse: f64, rho_plant: f64, cap: usize, norm: Norm) -> Result<Self> {
        Ok(Self {
            delta_est: NoiseEstimatorState::new(rho_inverse, cap, norm)?,
            zeta_est: NoiseEstimatorState::new(rho_plant, cap, norm)?,
            gamma_star_est: LipschitzEstimatorState::new(cap, norm)?,
            gamma_g_est: LipschitzEstimatorState::new(cap, norm)?,
        })
    }

    pub fn delta_hat(&self) -> f64 {
        self.delta_est.eps_hat()
    }

    pub fn zeta_hat(&self) -> f64 {
        self.zeta_est.eps_hat()
    }

    pub fn gamma_star_hat(&self) -> f64 {
        self.gamma_star_est.gamma_hat()
    }

    pub fn gamma_g_hat(&self) -> f64 {
        self.gamma_g_est.gamma_hat()
    }

    /// Feeds one completed inverse sample (omega, u) through the noise-bound
    /// estimator and then the Lipschitz estimator for gamma_star.
    pub fn inverse_pipeline(&mut self, omega: &Regressor, u: f64) -> Result<()> {
        let prev = self.delta_est.eps_hat();
        self.delta_est.update(omega.coords(), &[u])?;
        let cur = self.delta_est.eps_hat();
        self.gamma_star_est.update(omega.coords(), &[u], cur, prev)
    }

    /// Feeds one completed plant sample (u, x_next) through the disturbance
    /// estimator and then the Lipschitz estimator for gamma_g. All state
    /// dependence of the plant is treated as disturbance.
    pub fn gamma_g_pipeline(&mut self, u: f64, x_next: &[f64]) -> Result<()> {
        let prev = self.zeta_est.eps_hat();
        self.zeta_est.update(&[u], x_next)?;
        let cur = self.zeta_est.eps_hat();
        self.gamma_g_est.update(&[u], x_next, cur, prev)
    }
}

/// Picks the neighborhood radius as a fraction of the largest pairwise input
/// distance, the rule of thumb used at seeding. Frozen afterwards.
pub fn default_rho<'a, I>(points: I, norm: Norm) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let pts: Vec<&[f64]> = points.into_iter().collect();
    let mut max_dist = 0.0_f64;
    for (i, a) in pts.iter().enumerate() {
        for b in pts.iter().skip(i + 1) {
            max_dist = max_dist.max(norm.distance(a, b));
        }
    }
    0.01 * max_dist
}

/// Runs all pipelines over the training data in time order and snapshots the
/// resulting estimates. Neighborhood radii are computed from the training
/// inputs first and stay frozen from then on.
pub fn seed_from_training(
    data: &[DataPoint],
    n_x: usize,
    cap: usize,
    norm: Norm,
) -> Result<(EstimatorBundle, TrainingEstimates)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    for w in data.windows(2) {
        if w[1].t <= w[0].t {
            return Err(Error::OutOfOrder {
                got: w[1].t,
                expected: w[0].t + 1,
            });
        }
    }
    let rho_inverse = default_rho(data.iter().map(|d| d.omega.coords()), norm);
    let inputs: Vec<[f64; 1]> = data.iter().map(|d| [d.u]).collect();
    let rho_plant = default_rho(inputs.iter().map(|u| u.as_slice()), norm);

    let mut bundle = EstimatorBundle::new(rho_inverse, rho_plant, cap, norm)?;

    // Plant-noise estimator over joint (x, u) inputs; only needed for the
    // frozen epsilon estimate, so it is not carried in the bundle.
    let joints: Vec<Vec<f64>> = data
        .iter()
        .map(|d| {
            let mut v = d.omega.state_part(n_x).to_vec();
            v.push(d.u);
            v
        })
        .collect();
    let rho_joint = default_rho(joints.iter().map(|j| j.as_slice()), norm);
    let mut eps_est = NoiseEstimatorState::new(rho_joint, cap, norm)?;

    for (dp, joint) in data.iter().zip(&joints) {
        bundle.inverse_pipeline(&dp.omega, dp.u)?;
        bundle.gamma_g_pipeline(dp.u, dp.omega.tail_part(n_x))?;
        eps_est.update(joint, dp.omega.tail_part(n_x))?;
    }

    let estimates = TrainingEstimates {
        delta_hat: bundle.delta_hat(),
        zeta_hat: bundle.zeta_hat(),
        epsilon_hat: eps_est.eps_hat(),
        gamma_star_hat: bundle.gamma_star_hat(),
        gamma_g_hat: bundle.gamma_g_hat(),
        rho_inverse,
        rho_plant,
    };
    Ok((bundle, estimates))
}
