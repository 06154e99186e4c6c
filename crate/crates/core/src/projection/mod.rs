//! Negentropy projection pursuit on Gaussian mixtures.

mod basis;
mod entropy;
mod ga;

pub use basis::{angles_from_basis, basis_from_angles, n_angles, AngleGenotype, ProjectionBasis, ANGLE_BOUND};
pub use entropy::{
    entropy, entropy_mc, entropy_ut, gaussian_entropy, negentropy, negentropy_parts, EntropyMethod,
    NegentropyParts,
};
pub use ga::{between_scatter_basis, ga_optimize, ga_optimize_with, GaConfig, PpDocument, PpResult};

use crate::error::Result;
use crate::mixture::MixtureModel;

/// The mixture of `B^T x` when `x` follows `model`.
pub fn project_model(model: &MixtureModel, basis: &ProjectionBasis) -> Result<MixtureModel> {
    model.project(basis.matrix())
}
