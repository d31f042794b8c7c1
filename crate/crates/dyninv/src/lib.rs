//! Online direct data-driven controller design by approximate dynamics inversion.
//!
//! The controller is a growing kernel expansion `f_t(w) = a_t' K(w, W_t)` whose
//! weights are refined at every step by projections onto hyperslabs: one slab per
//! recent input/state measurement, plus a stability slab derived from
//! set-membership bounds on the unknown optimal inverse. Noise bounds and
//! Lipschitz constants feeding those slabs can themselves be estimated online
//! from the data stream.
//!
//! Module map:
//! - [`kernel`]: Gaussian RBF evaluation, coherence, dictionary growth.
//! - [`setmem`]: interval bounds on the optimal inverse and the D0 gap estimate.
//! - [`projlearn`]: hyperslabs, Euclidean projections, averaged-projection update.
//! - [`estimators`]: online noise-bound and Lipschitz-constant estimation.
//! - [`tuning`]: selection and validation of the stability tuning parameters.
//! - [`controller`]: the per-step control loop tying everything together.
//! - [`sim`]: synthetic plants, excitation policies and the closed-loop harness.

pub mod controller;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod projlearn;
pub mod setmem;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
pub use kernel::{Dictionary, KernelKind, KernelSpec, Regressor};
pub use setmem::{BoundsOracle, DataPoint, Norm};
