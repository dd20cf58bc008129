pub mod analysis;
pub mod closed_form;
pub mod error;
pub mod lattice;
pub mod perturbation;
pub mod response;

mod numeric;

pub use numeric::fit_slope;

pub use error::{Error, Result};
pub use lattice::{
    ChainSpec, DynamicalMatrix, IndexMap, Parity, Quadrature, SqueezingParams, StabilityReason, StabilityReport,
    Sublattice,
};
pub use perturbation::{AssembledSystem, Frame, PerturbationKind, PerturbationSpec};
pub use response::{DriveSpec, ResponseReport};
