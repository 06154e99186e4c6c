use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sorted_eigen;

/// Covariance structure of a mixture, in the volume/shape/orientation
/// decomposition `Sigma_g = lambda_g U_g Delta_g U_g^T`.
///
/// The first letter describes volume, the second shape, the third
/// orientation; `E` is equal across components, `V` variable, `I` identity.
/// Only families with closed-form M-steps are provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovarianceFamily {
    /// Common covariance, any orientation.
    EEE,
    /// Common diagonal covariance.
    EEI,
    /// Common spherical covariance `lambda I`.
    EII,
    /// Spherical covariance with component-specific volume.
    VII,
    /// Diagonal covariance, component-specific.
    VVI,
    /// Unconstrained.
    VVV,
}

impl CovarianceFamily {
    /// All families in lexicographic order of their names.
    pub const ALL: [CovarianceFamily; 6] = [
        CovarianceFamily::EEE,
        CovarianceFamily::EEI,
        CovarianceFamily::EII,
        CovarianceFamily::VII,
        CovarianceFamily::VVI,
        CovarianceFamily::VVV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CovarianceFamily::EEE => "EEE",
            CovarianceFamily::EEI => "EEI",
            CovarianceFamily::EII => "EII",
            CovarianceFamily::VII => "VII",
            CovarianceFamily::VVI => "VVI",
            CovarianceFamily::VVV => "VVV",
        }
    }

    /// Number of free covariance parameters for `g` components in `p`
    /// dimensions.
    pub fn n_covariance_params(self, g: usize, p: usize) -> usize {
        match self {
            CovarianceFamily::EII => 1,
            CovarianceFamily::VII => g,
            CovarianceFamily::EEI => p,
            CovarianceFamily::VVI => g * p,
            CovarianceFamily::EEE => p * (p + 1) / 2,
            CovarianceFamily::VVV => g * p * (p + 1) / 2,
        }
    }

    /// Total free parameters: mixing weights, means and covariances.
    pub fn n_params(self, g: usize, p: usize) -> usize {
        (g - 1) + g * p + self.n_covariance_params(g, p)
    }

    /// Covariance shared by all components.
    pub fn is_common(self) -> bool {
        matches!(
            self,
            CovarianceFamily::EII | CovarianceFamily::EEI | CovarianceFamily::EEE
        )
    }

    pub fn is_spherical(self) -> bool {
        matches!(self, CovarianceFamily::EII | CovarianceFamily::VII)
    }

    pub fn is_diagonal(self) -> bool {
        !matches!(self, CovarianceFamily::EEE | CovarianceFamily::VVV)
    }

    /// Largest violation of this family's structural constraints by a set of
    /// covariances, relative to the largest entry. Zero means every
    /// constraint holds exactly.
    pub fn constraint_violation(self, covariances: &[DMatrix<f64>]) -> f64 {
        let scale = covariances
            .iter()
            .map(|c| c.amax())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for c in covariances {
            let p = c.nrows();
            for i in 0..p {
                for j in 0..p {
                    if i != j && self.is_diagonal() {
                        worst = worst.max(c[(i, j)].abs());
                    }
                }
                if self.is_spherical() {
                    worst = worst.max((c[(i, i)] - c[(0, 0)]).abs());
                }
            }
        }
        if self.is_common() {
            if let Some(first) = covariances.first() {
                for c in &covariances[1..] {
                    worst = worst.max((c - first).amax());
                }
            }
        }
        worst / scale
    }
}

impl fmt::Display for CovarianceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovarianceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CovarianceFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::contract(format!("unknown covariance family `{s}`")))
    }
}

/// `Sigma = volume * U diag(shape) U^T` with `prod(shape) = 1`.
#[derive(Debug, Clone)]
pub struct EigenDecomposedCovariance {
    pub volume: f64,
    /// Diagonal of the normalised shape matrix, in decreasing order.
    pub shape: DVector<f64>,
    pub orientation: DMatrix<f64>,
}

impl EigenDecomposedCovariance {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let p = cov.nrows();
        let (values, vectors) = sorted_eigen(cov);
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateModel(
                "covariance has a non-positive eigenvalue".into(),
            ));
        }
        let ln_det: f64 = values.iter().map(|v| v.ln()).sum();
        let volume = (ln_det / p as f64).exp();
        Ok(Self {
            volume,
            shape: values / volume,
            orientation: vectors,
        })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let u = &self.orientation;
        u * DMatrix::from_diagonal(&self.shape) * u.transpose() * self.volume
    }
}
