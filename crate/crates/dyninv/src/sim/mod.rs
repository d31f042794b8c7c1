//! Synthetic plants, excitation policies, and the closed-loop harness.

pub mod excite;
pub mod expr;
pub mod plant;
pub mod runner;

pub use excite::{generate_training_data, ExcitationConfig, ExcitationKind, GeneratedData};
pub use plant::{gamma_oracle, linspace, GammaOracle, NoiseLaw, PlantKind, PlantModel};
pub use runner::{run_closed_loop, GainCheckReport, RefSignal, RunOutcome, RunSummary};
