//! Experiment configuration schema. Unknown keys are rejected at every level
//! that serde supports; reruns with the same file and seed are reproducible
//! byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dyninv::controller::Mode;
use dyninv::kernel::KernelSpec;
use dyninv::setmem::Norm;
use dyninv::sim::{ExcitationConfig, NoiseLaw, PlantKind, PlantModel, RefSignal};
use dyninv::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub model: PlantKind,
    pub n_x: usize,
    #[serde(default)]
    pub noise_bound: f64,
    #[serde(default)]
    pub noise_law: NoiseLaw,
}

impl PlantSection {
    pub fn build(&self, norm: Norm) -> Result<PlantModel> {
        PlantModel::new(
            self.model.clone(),
            self.n_x,
            self.noise_bound,
            self.noise_law,
            norm,
        )
    }
}

/// Scalars the tuner does not learn from data, plus run-behavior knobs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TuningOverrides {
    pub c_delta: f64,
    pub c_gamma_star: f64,
    pub c_gamma_g: f64,
    pub c_epsilon: f64,
    pub lambda1_star: f64,
    pub lambda2_star: f64,
    pub beta_star: f64,
    pub gamma_delta_bar: f64,
    pub gamma_delta_fraction: f64,
    pub r_bar: f64,
    pub mu_bar: f64,
    pub q: usize,
    pub n_bar: usize,
    /// Multiplicative safety factor on the estimated D0/2.
    pub sigma_margin: f64,
    pub d0_samples: usize,
    pub x_bar_init: f64,
    /// Abort on an empty stability slab instead of falling back to the
    /// midpoint projection.
    pub strict: bool,
    /// Bypasses the admissible gamma_delta interval; falsification runs only.
    pub gamma_delta_override: Option<f64>,
}

impl Default for TuningOverrides {
    fn default() -> Self {
        Self {
            c_delta: 0.02,
            c_gamma_star: 0.5,
            c_gamma_g: 0.2,
            c_epsilon: 0.005,
            lambda1_star: 1.1,
            lambda2_star: 1.1,
            beta_star: 0.0,
            gamma_delta_bar: 0.1,
            gamma_delta_fraction: 0.5,
            r_bar: 0.3,
            mu_bar: 0.9,
            q: 10,
            n_bar: 500,
            sigma_margin: 1.05,
            d0_samples: 2000,
            x_bar_init: 0.5,
            strict: true,
            gamma_delta_override: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub norm: Norm,
    pub mode: Mode,
    pub horizon: usize,
    pub plant: PlantSection,
    pub excitation: ExcitationConfig,
    pub kernel: KernelSpec,
    pub reference: RefSignal,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub tuning: TuningOverrides,
    /// Parameter grid for the sweep subcommand: dotted config path to the
    /// list of values the cartesian product ranges over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<serde_json::Value>>>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidParam(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.initial_state.len() != self.plant.n_x {
            return Err(Error::DimensionMismatch(
                self.initial_state.len(),
                self.plant.n_x,
            ));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParam("horizon must be at least 1".into()));
        }
        self.excitation.validate(self.plant.n_x)?;
        self.reference.validate(self.plant.n_x)?;
        self.plant.build(self.norm)?;
        let t = &self.tuning;
        if t.q == 0 || t.n_bar == 0 {
            return Err(Error::InvalidParam("q and n_bar must be at least 1".into()));
        }
        if !(t.mu_bar > 0.0 && t.mu_bar < 1.0) {
            return Err(Error::InvalidParam(format!(
                "mu_bar must lie in (0, 1), got {}",
                t.mu_bar
            )));
        }
        if t.sigma_margin <= 1.0 {
            return Err(Error::InvalidParam(format!(
                "sigma_margin must exceed 1, got {}",
                t.sigma_margin
            )));
        }
        if !(t.gamma_delta_fraction > 0.0 && t.gamma_delta_fraction < 1.0) {
            return Err(Error::InvalidParam(
                "gamma_delta_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Smallest state-box half-width; the radius the guaranteed ball must fit.
    pub fn state_box_radius(&self) -> f64 {
        self.excitation
            .state_half_widths
            .iter()
            .fold(f64::INFINITY, |a, b| a.min(*b))
    }
}

/// Applies `value` at a dotted path inside a JSON tree, creating intermediate
/// objects as needed.
pub fn set_json_path(
    root: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::InvalidParam(format!("sweep path '{path}' crosses a non-object"))
        })?;
        if i == parts.len() - 1 {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(Error::InvalidParam("empty sweep path".into()))
}
