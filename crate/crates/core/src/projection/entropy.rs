//! Differential entropy of Gaussian mixtures and the negentropy index.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};

use super::basis::ProjectionBasis;
use crate::error::{Error, Result};
use crate::linalg::{ln_det_spd, sorted_eigen};
use crate::mixture::MixtureModel;

/// How the mixture entropy `h(z) = -E[log f(z)]` is approximated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyMethod {
    /// Deterministic sigma-point rule, see [`entropy_ut`].
    Unscented,
    /// Plain Monte Carlo average over `n_samples` draws.
    MonteCarlo { n_samples: usize, seed: u64 },
}

/// Entropy of a Gaussian with covariance `cov`: `0.5 log((2 pi e)^d |cov|)`.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
        return Err(Error::contract("covariance must be a non-empty square matrix"));
    }
    let d = cov.nrows() as f64;
    Ok(0.5 * (d * (2.0 * PI * E).ln() + ln_det_spd(cov)?))
}

/// Unscented approximation of the mixture entropy.
///
/// For each component `k` the log mixture density is averaged over the `2d`
/// sigma points `eta_k +/- sqrt(d lambda_j) v_j`, where `(lambda_j, v_j)` are
/// the eigenpairs of `Gamma_k`, and the averages are combined with the
/// mixing weights. The rule integrates quadratics exactly under each
/// component, so it returns the exact entropy of a single Gaussian, and the
/// sigma points rotate with the coordinates, so the value is invariant under
/// orthogonal changes of basis (for distinct eigenvalues).
pub fn entropy_ut(model: &MixtureModel) -> f64 {
    let d = model.dim();
    let mut total = 0.0;
    for k in 0..model.n_components() {
        let (values, vectors) = sorted_eigen(&model.covariances()[k]);
        let mean = &model.means()[k];
        let mut acc = 0.0;
        for j in 0..d {
            let step: DVector<f64> = vectors.column(j) * (d as f64 * values[j].max(0.0)).sqrt();
            acc += model.log_density_at(&(mean + &step));
            acc += model.log_density_at(&(mean - &step));
        }
        total += model.weights()[k] * acc / (2 * d) as f64;
    }
    -total
}

/// Monte Carlo entropy estimate `-(1/n) sum log f(z_i)` with `z_i` drawn from
/// the model. Deterministic for a fixed seed.
pub fn entropy_mc(model: &MixtureModel, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be at least 1"));
    }
    let (points, _) = model.sample(n_samples, seed);
    let logs = model.log_density(&points)?;
    Ok(-logs.iter().sum::<f64>() / n_samples as f64)
}

pub fn entropy(model: &MixtureModel, method: EntropyMethod) -> Result<f64> {
    match method {
        EntropyMethod::Unscented => Ok(entropy_ut(model)),
        EntropyMethod::MonteCarlo { n_samples, seed } => entropy_mc(model, n_samples, seed),
    }
}

/// Negentropy together with the two entropies it is the difference of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegentropyParts {
    pub negentropy: f64,
    /// Approximate entropy of the projected mixture.
    pub entropy: f64,
    /// Entropy of the Gaussian with the projected mixture's mean and covariance.
    pub gaussian_entropy: f64,
}

/// Negentropy of the projection of `model` onto `basis`.
pub fn negentropy_parts(
    model: &MixtureModel,
    basis: &ProjectionBasis,
    method: EntropyMethod,
) -> Result<NegentropyParts> {
    let projected = model.project(basis.matrix())?;
    let (_, cov) = projected.moments();
    let gaussian = gaussian_entropy(&cov)?;
    let h = entropy(&projected, method)?;
    Ok(NegentropyParts {
        negentropy: gaussian - h,
        entropy: h,
        gaussian_entropy: gaussian,
    })
}

/// `J(z) = h(phi(mu_z, Sigma_z)) - h(z)` for `z = B^T x`.
pub fn negentropy(model: &MixtureModel, basis: &ProjectionBasis, method: EntropyMethod) -> Result<f64> {
    negentropy_parts(model, basis, method).map(|p| p.negentropy)
}
