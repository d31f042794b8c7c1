//! Per-step control loop: dictionary growth, weight extension, slab
//! construction, the averaged-projection update, and the control output
//! `u_t = a_t' K(omega_plus, W_t)`.
//!
//! Before t = 0 the loop replays the training data and only designs the
//! controller; from t = 0 on it also drives the plant. In adaptive mode the
//! noise-bound and Lipschitz estimators ingest each completed measurement and
//! the slab parameters follow them; in static mode everything stays at the
//! tuned constants.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::estimators::EstimatorBundle;
use crate::kernel::{Dictionary, KernelSpec, Regressor};
use crate::projlearn::{
    apsm_update, build_measurement_slab, build_stability_slab, extend_weights, Slab, WeightVector,
    MEMBERSHIP_TOL,
};
use crate::setmem::{BoundsOracle, DataPoint, Norm};
use crate::tuning::{select_gamma_delta, Tuning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Adaptive,
}

/// Everything the controller needs besides the training data.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub kernel: KernelSpec,
    pub tuning: Tuning,
    pub norm: Norm,
    pub mode: Mode,
    /// Fail on an empty stability slab (default). With `false` the update
    /// projects onto the midpoint hyperplane instead and the event is
    /// reported in the diagnostics.
    pub strict: bool,
    /// Placement of gamma_delta_t inside its admissible interval.
    pub gamma_delta_fraction: f64,
    /// Bypasses the admissible-interval selection entirely. Only meant for
    /// falsification experiments that deliberately break the tuning rules.
    pub gamma_delta_override: Option<f64>,
}

/// Per-step observability: slab faces, estimator snapshots, and the flags the
/// harness turns into exit codes.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub t: i64,
    pub x_norm: f64,
    pub dict_size: usize,
    pub slab_lo: f64,
    pub slab_hi: f64,
    pub slab_empty: bool,
    pub reference_clamped: bool,
    /// Reference actually targeted after clamping to the r_bar ball.
    pub r_effective: Vec<f64>,
    pub delta_hat: f64,
    pub zeta_hat: f64,
    pub gamma_star_hat: f64,
    pub gamma_g_hat: f64,
    pub gamma_delta_t: f64,
    pub u: f64,
}

impl StepDiagnostics {
    /// The executed input lies between the stability slab faces.
    pub fn robust_inequality_ok(&self) -> bool {
        !self.slab_empty
            && self.u >= self.slab_lo - MEMBERSHIP_TOL
            && self.u <= self.slab_hi + MEMBERSHIP_TOL
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    n_x: usize,
    dict: Dictionary,
    weights: WeightVector,
    /// Frozen training set backing the set-membership bounds.
    data: Vec<DataPoint>,
    bundle: Option<EstimatorBundle>,
    history: VecDeque<DataPoint>,
    prev_omega: Option<Regressor>,
    /// Input applied at the previous online step, waiting for its successor
    /// state to complete the measurement.
    pending: Option<(Vec<f64>, f64)>,
    t: i64,
}

impl Controller {
    pub fn new(
        cfg: ControllerConfig,
        data: Vec<DataPoint>,
        bundle: Option<EstimatorBundle>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let dim = data[0].omega.dim();
        if !dim.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "regressor dimension must be even, got {dim}"
            )));
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
            if dp.omega.dim() != dim {
                return Err(Error::DimensionMismatch(dim, dp.omega.dim()));
            }
        }
        if cfg.mode == Mode::Adaptive && bundle.is_none() {
            return Err(Error::InvalidParam(
                "adaptive mode needs a seeded estimator bundle".into(),
            ));
        }
        if cfg.tuning.q == 0 {
            return Err(Error::InvalidParam(
                "apsm window q must be at least 1".into(),
            ));
        }
        let dict = Dictionary::new(cfg.kernel, cfg.tuning.mu_bar)?;
        let t0 = data[0].t;
        Ok(Self {
            cfg,
            n_x: dim / 2,
            dict,
            weights: WeightVector::zeros(0),
            data,
            bundle,
            history: VecDeque::new(),
            prev_omega: None,
            pending: None,
            t: t0,
        })
    }

    pub fn t(&self) -> i64 {
        self.t
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dict_size(&self) -> usize {
        self.dict.len()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn tuning(&self) -> &Tuning {
        &self.cfg.tuning
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn norm(&self) -> Norm {
        self.cfg.norm
    }

    /// Current controller value f_t(omega) = a_t' K(omega, W_t).
    pub fn f_value(&self, omega: &Regressor) -> Result<f64> {
        let k = self.dict.kernel_vector(omega)?;
        Ok(k.iter()
            .zip(self.weights.as_slice())
            .map(|(ki, ai)| ki * ai)
            .sum())
    }

    fn gamma_delta_t(&self) -> Result<f64> {
        if let Some(g) = self.cfg.gamma_delta_override {
            return Ok(g);
        }
        match (&self.cfg.mode, &self.bundle) {
            (Mode::Adaptive, Some(bundle)) => select_gamma_delta(
                bundle.gamma_g_hat(),
                self.cfg.tuning.c_gamma_g,
                self.cfg.tuning.lambda2_star,
                self.cfg.tuning.gamma_delta_bar,
                self.cfg.gamma_delta_fraction,
            ),
            _ => Ok(self.cfg.tuning.gamma_delta_t),
        }
    }

    /// Dictionary admission, weight extension, slab builds, and the averaged
    /// projection update. Returns the stability slab faces and whether the
    /// slab was empty before any fallback.
    fn update_weights(
        &mut self,
        omega_plus: &Regressor,
        x_norm: f64,
        gamma_delta_t: f64,
        delta_eff: f64,
        lo_f: f64,
        hi_f: f64,
    ) -> Result<(Slab, bool)> {
        self.dict.maybe_add_center(omega_plus.clone())?;
        if let Some(prev) = self.prev_omega.clone() {
            self.dict.maybe_add_center(prev)?;
        }
        self.weights = extend_weights(&self.weights, self.dict.len())?;

        let mut slabs = Vec::with_capacity(self.history.len());
        for dp in &self.history {
            slabs.push(build_measurement_slab(dp, &self.dict, delta_eff)?);
        }
        let stability = build_stability_slab(
            omega_plus,
            x_norm,
            gamma_delta_t,
            self.cfg.tuning.sigma,
            lo_f,
            hi_f,
            &self.dict,
        )?;
        let empty = stability.is_empty();
        let effective = if empty {
            if self.cfg.strict {
                return Err(Error::StabilitySlabEmpty {
                    t: self.t,
                    lo: stability.lo,
                    hi: stability.hi,
                });
            }
            stability.midpoint_hyperplane()
        } else {
            stability.clone()
        };
        self.weights = apsm_update(&self.weights, &slabs, &effective)?;
        Ok((stability, empty))
    }

    fn push_history(&mut self, dp: DataPoint) {
        self.history.push_back(dp);
        while self.history.len() > self.cfg.tuning.q {
            self.history.pop_front();
        }
    }

    /// One design-phase step (t < 0): the regressor pairs the state with its
    /// measured successor, no input is produced.
    pub fn training_step(&mut self, x: &[f64], x_next: &[f64], u: f64) -> Result<()> {
        if self.t >= 0 {
            return Err(Error::InvalidParam(format!(
                "training step at t={} but training ended at t=0",
                self.t
            )));
        }
        if x.len() != self.n_x || x_next.len() != self.n_x {
            return Err(Error::DimensionMismatch(
                self.n_x,
                x.len().max(x_next.len()),
            ));
        }
        let omega = Regressor::from_parts(x, x_next)?;
        let gamma_delta_t = self.gamma_delta_t()?;
        // Design phase runs on the tuned constants in both modes; the
        // time-varying slabs only exist once the training estimates are fixed.
        let oracle = BoundsOracle::new(
            &self.data,
            self.cfg.tuning.delta,
            self.cfg.tuning.gamma_star,
            self.cfg.norm,
        )?;
        let (lo_f, hi_f) = oracle.bounds(&omega)?;
        let x_norm = self.cfg.norm.eval(x);
        let delta_eff = self.cfg.tuning.delta;
        self.update_weights(&omega, x_norm, gamma_delta_t, delta_eff, lo_f, hi_f)?;

        let t = self.t;
        self.push_history(DataPoint {
            t,
            u,
            omega: omega.clone(),
        });
        self.prev_omega = Some(omega);
        self.t += 1;
        Ok(())
    }

    /// Replays the frozen training rows through [`Self::training_step`];
    /// afterwards the controller clock stands at t = 0.
    pub fn replay_training(&mut self) -> Result<()> {
        let rows: Vec<DataPoint> = self.data.clone();
        for dp in rows {
            if dp.t != self.t {
                return Err(Error::OutOfOrder {
                    got: dp.t,
                    expected: self.t,
                });
            }
            let x = dp.omega.state_part(self.n_x).to_vec();
            let x_next = dp.omega.tail_part(self.n_x).to_vec();
            self.training_step(&x, &x_next, dp.u)?;
        }
        Ok(())
    }

    /// One online step (t >= 0): ingest the now-complete previous measurement,
    /// refresh the adaptive parameters, update the weights, and produce the
    /// input for the requested reference.
    pub fn control_step(&mut self, x: &[f64], r_next: &[f64]) -> Result<(f64, StepDiagnostics)> {
        if self.t < 0 {
            return Err(Error::InvalidParam(format!(
                "control step at t={} before training finished",
                self.t
            )));
        }
        if x.len() != self.n_x || r_next.len() != self.n_x {
            return Err(Error::DimensionMismatch(
                self.n_x,
                x.len().max(r_next.len()),
            ));
        }

        // The previous input together with the state measured now forms a
        // complete data point: extend the window and feed the estimators.
        if let Some((x_prev, u_prev)) = self.pending.take() {
            let omega_prev = Regressor::from_parts(&x_prev, x)?;
            if let Some(bundle) = self.bundle.as_mut() {
                bundle.inverse_pipeline(&omega_prev, u_prev)?;
                bundle.gamma_g_pipeline(u_prev, x)?;
            }
            let t_prev = self.t - 1;
            self.push_history(DataPoint {
                t: t_prev,
                u: u_prev,
                omega: omega_prev.clone(),
            });
            self.prev_omega = Some(omega_prev);
        }

        // References are assumed inside the r_bar ball; clamp and flag if not.
        let r_norm = self.cfg.norm.eval(r_next);
        let mut r_eff = r_next.to_vec();
        let clamped = r_norm > self.cfg.tuning.r_bar;
        if clamped && r_norm > 0.0 {
            let scale = self.cfg.tuning.r_bar / r_norm;
            for r in &mut r_eff {
                *r *= scale;
            }
        }

        let gamma_delta_t = self.gamma_delta_t()?;
        let omega_plus = Regressor::from_parts(x, &r_eff)?;

        let (delta_eff, gamma_eff) = match (&self.cfg.mode, &self.bundle) {
            (Mode::Adaptive, Some(bundle)) => (
                bundle.delta_hat(),
                (bundle.gamma_star_hat() + self.cfg.tuning.c_gamma_star)
                    .min(self.cfg.tuning.gamma_star),
            ),
            _ => (self.cfg.tuning.delta, self.cfg.tuning.gamma_star),
        };
        let oracle =
            BoundsOracle::new(&self.data, self.cfg.tuning.delta, gamma_eff, self.cfg.norm)?;
        let (lo_f, hi_f) = oracle.bounds(&omega_plus)?;
        let x_norm = self.cfg.norm.eval(x);

        let (stability, empty) =
            self.update_weights(&omega_plus, x_norm, gamma_delta_t, delta_eff, lo_f, hi_f)?;

        let u: f64 = stability
            .k
            .iter()
            .zip(self.weights.as_slice())
            .map(|(ki, ai)| ki * ai)
            .sum();

        let (delta_hat, zeta_hat, gamma_star_hat, gamma_g_hat) = match &self.bundle {
            Some(b) => (
                b.delta_hat(),
                b.zeta_hat(),
                b.gamma_star_hat(),
                b.gamma_g_hat(),
            ),
            None => (
                self.cfg.tuning.delta,
                self.cfg.tuning.zeta,
                self.cfg.tuning.gamma_star,
                self.cfg.tuning.gamma_g,
            ),
        };
        let diag = StepDiagnostics {
            t: self.t,
            x_norm,
            dict_size: self.dict.len(),
            slab_lo: stability.lo,
            slab_hi: stability.hi,
            slab_empty: empty,
            reference_clamped: clamped,
            r_effective: r_eff,
            delta_hat,
            zeta_hat,
            gamma_star_hat,
            gamma_g_hat,
            gamma_delta_t,
            u,
        };

        self.pending = Some((x.to_vec(), u));
        self.t += 1;
        Ok((u, diag))
    }
}

// ---------------------------------------------------------------------------
// Trace CSV schema (one record per online step)
// ---------------------------------------------------------------------------

/// One emitted trace row; the input is recomputable bit-for-bit from the
/// weights and kernel vector it was produced with.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub t: i64,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub u: f64,
    pub dict_size: usize,
    pub slab_lo: f64,
    pub slab_hi: f64,
    pub delta_hat: f64,
    pub zeta_hat: f64,
    pub gamma_star_hat: f64,
    pub gamma_g_hat: f64,
    pub gamma_delta_t: f64,
}

pub fn trace_csv_header(n_x: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=n_x {
        h.push_str(&format!(",x_{i}"));
    }
    for i in 1..=n_x {
        h.push_str(&format!(",r_{i}"));
    }
    h.push_str(
        ",u,dict_size,slab_lo,slab_hi,delta_hat,zeta_hat,gamma_star_hat,gamma_g_hat,gamma_delta_t",
    );
    h
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        let mut row = format!("{}", self.t);
        for v in &self.x {
            row.push_str(&format!(",{v}"));
        }
        for v in &self.r {
            row.push_str(&format!(",{v}"));
        }
        row.push_str(&format!(
            ",{},{},{},{},{},{},{},{},{}",
            self.u,
            self.dict_size,
            self.slab_lo,
            self.slab_hi,
            self.delta_hat,
            self.zeta_hat,
            self.gamma_star_hat,
            self.gamma_g_hat,
            self.gamma_delta_t
        ));
        row
    }
}
