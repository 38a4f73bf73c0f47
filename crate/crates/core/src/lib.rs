//! Numerical laboratory for Landau damping on an expanding torus.

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cosmology;
pub mod equilibrium;
pub mod error;
pub mod fit;
pub mod gevrey;
pub mod harness;
pub mod kinetic;
pub mod liouville_green;
pub mod ode;
pub mod penrose;
pub mod quad;
pub mod volterra;

pub use cosmology::{AdmissibilityReport, ExpansionLaw, ScaleFactorModel};
pub use equilibrium::{Equilibrium, InteractionSign, Kernel, ModeKernel};
pub use error::{Error, Result};
pub use penrose::PenroseReport;
pub use volterra::{ResolventTable, TauGrid};
pub use harness::{run_experiment, DecayFit, ExperimentConfig, ExperimentKind};
pub use kinetic::{SimConfig, SimMode, SpectralState};
