//! Parsimonious Gaussian mixture models.

mod em;
mod family;
mod model;
mod select;
mod serial;

pub use em::{bic, default_regularization, em_fit, EmConfig, FitReport};
pub use family::{CovarianceFamily, EigenDecomposedCovariance};
pub use model::MixtureModel;
pub use select::{select_model, GridCell, ModelSelection};
pub use serial::ModelDocument;
