use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CovarianceFamily, FitReport, MixtureModel};
use crate::error::{Error, Result};

/// JSON form of a mixture model, optionally carrying the fit statistics.
///
/// Covariances are stored as full symmetric matrices, each as an array of
/// rows. `bic` follows the `2 log L - nu log n` convention (larger is
/// better). Floats are written in shortest round-trip form, so reading a
/// document back reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n_components: usize,
    pub dim: usize,
    pub family: CovarianceFamily,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub log_likelihood: Option<f64>,
    pub bic: Option<f64>,
    pub n_parameters: Option<usize>,
}

impl ModelDocument {
    pub fn from_model(model: &MixtureModel) -> Self {
        Self {
            n_components: model.n_components(),
            dim: model.dim(),
            family: model.family(),
            weights: model.weights().to_vec(),
            means: model.means().iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: model
                .covariances()
                .iter()
                .map(|c| c.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            log_likelihood: None,
            bic: None,
            n_parameters: None,
        }
    }

    pub fn from_fit(fit: &FitReport) -> Self {
        Self {
            log_likelihood: Some(fit.log_likelihood),
            bic: Some(fit.bic),
            n_parameters: Some(fit.n_parameters),
            ..Self::from_model(&fit.model)
        }
    }

    pub fn to_model(&self) -> Result<MixtureModel> {
        if self.weights.len() != self.n_components {
            return Err(Error::contract("n_components disagrees with weights"));
        }
        let means = self
            .means
            .iter()
            .map(|m| {
                if m.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: m.len() });
                }
                Ok(DVector::from_column_slice(m))
            })
            .collect::<Result<Vec<_>>>()?;
        let covariances = self
            .covariances
            .iter()
            .map(|rows| {
                if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::contract("covariance is not dim x dim"));
                }
                Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureModel::new(self.family, self.weights.clone(), means, covariances)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
