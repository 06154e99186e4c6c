use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LN_2PI;
use crate::mixture::MixtureModel;

/// Relative slack allowed on the density before a decrease counts as a fault.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemConfig {
    /// `c` in the step size `w_t = 1 - exp(-c t)`. `f64::INFINITY` gives the
    /// undamped iteration.
    pub step_rate: f64,
    /// Per-point stop when the relative density change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Merge radius as a fraction of the start points' bounding-box diagonal.
    pub merge_eps: f64,
    pub record_paths: bool,
}

impl Default for MemConfig {
    fn default() -> Self {
        Self {
            step_rate: 0.1,
            tol: 1e-8,
            max_iter: 1000,
            merge_eps: 1e-3,
            record_paths: false,
        }
    }
}

impl MemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_rate > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::contract("step_rate, tol and max_iter must be positive"));
        }
        if !(self.merge_eps > 0.0 && self.merge_eps < 1.0) {
            return Err(Error::contract("merge_eps must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Step size at iteration `t >= 1`.
pub fn step_size(step_rate: f64, t: usize) -> f64 {
    1.0 - (-step_rate * t as f64).exp()
}

fn check_points(model: &MixtureModel, points: &DMatrix<f64>) -> Result<()> {
    if points.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: points.ncols() });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("points contain non-finite values"));
    }
    Ok(())
}

/// Closed-form M-step maximiser for every row of `points`, computed in one
/// batch from the rows' responsibilities.
pub fn mem_proposal(model: &MixtureModel, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_points(model, points)?;
    let resp = model.responsibilities(points)?;
    let d = model.dim();
    let k = model.n_components();
    let shifted: Vec<DVector<f64>> = (0..k).map(|j| model.precision(j) * &model.means()[j]).collect();
    let mut out = DMatrix::zeros(points.nrows(), d);
    for i in 0..points.nrows() {
        let mut a = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for j in 0..k {
            let z = resp[(i, j)];
            if z == 0.0 {
                continue;
            }
            a += model.precision(j) * z;
            b.axpy(z, &shifted[j], 1.0);
        }
        let chol = a.cholesky().ok_or_else(|| {
            Error::AlgorithmFault(format!("weighted precision sum is not positive definite at row {}", i + 1))
        })?;
        out.set_row(i, &chol.solve(&b).transpose());
    }
    Ok(out)
}

/// `Q(z) = sum_k zeta_k log phi(z; eta_k, Gamma_k)` for fixed weights `zeta`.
pub fn m_step_objective(model: &MixtureModel, zeta: &[f64], z: &DVector<f64>) -> f64 {
    let d = model.dim() as f64;
    zeta.iter()
        .enumerate()
        .map(|(k, w)| {
            let ln_det = 2.0 * model.cholesky(k).diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let r = z - &model.means()[k];
            let q = r.dot(&(model.precision(k) * &r));
            w * -0.5 * (d * LN_2PI + ln_det + q)
        })
        .sum()
}

/// `grad Q(z) = -sum_k zeta_k Gamma_k^{-1} (z - eta_k)`.
pub fn m_step_gradient(model: &MixtureModel, zeta: &[f64], z: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(model.dim());
    for (k, w) in zeta.iter().enumerate() {
        g -= model.precision(k) * (z - &model.means()[k]) * *w;
    }
    g
}

/// Converged end points of Modal EM ascent, before modes are merged.
#[derive(Debug, Clone)]
pub struct Ascent {
    pub points: DMatrix<f64>,
    pub log_densities: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Iterates `z^(0), ..., z^(T)` per point when paths are recorded.
    pub paths: Option<Vec<Vec<DVector<f64>>>>,
    /// Log density at each recorded iterate.
    pub log_density_paths: Option<Vec<Vec<f64>>>,
}

/// Run damped Modal EM from every row of `start`.
///
/// All unfinished rows advance together; a row is frozen once its relative
/// density change drops below `config.tol` or after `config.max_iter`
/// iterations.
pub fn mem_ascend(model: &MixtureModel, start: &DMatrix<f64>, config: &MemConfig) -> Result<Ascent> {
    config.validate()?;
    check_points(model, start)?;
    let n = start.nrows();
    let mut points = start.clone();
    let mut log_f = model.log_density(start)?;
    let mut iterations = vec![0; n];
    let mut converged = vec![false; n];
    let mut paths = config
        .record_paths
        .then(|| (0..n).map(|i| vec![start.row(i).transpose()]).collect::<Vec<_>>());
    let mut log_paths = config
        .record_paths
        .then(|| log_f.iter().map(|&v| vec![v]).collect::<Vec<_>>());

    let mut active: Vec<usize> = (0..n).collect();
    let mut t = 0;
    while !active.is_empty() && t < config.max_iter {
        t += 1;
        let w = step_size(config.step_rate, t);
        let current = points.select_rows(active.iter());
        let proposal = mem_proposal(model, &current)?;
        let next = &current * (1.0 - w) + &proposal * w;
        let next_log_f = model.log_density(&next)?;

        let mut still = Vec::with_capacity(active.len());
        for (row, &i) in active.iter().enumerate() {
            let (old, new) = (log_f[i], next_log_f[row]);
            if new < old + (-MONOTONE_SLACK).ln_1p() {
                return Err(Error::AlgorithmFault(format!(
                    "density decreased at point {} iteration {}: log f {} -> {}",
                    i + 1,
                    t,
                    old,
                    new
                )));
            }
            points.set_row(i, &next.row(row));
            log_f[i] = new;
            iterations[i] = t;
            if let (Some(p), Some(lp)) = (paths.as_mut(), log_paths.as_mut()) {
                p[i].push(next.row(row).transpose());
                lp[i].push(new);
            }
            if (new - old).exp_m1().abs() < config.tol {
                converged[i] = true;
            } else {
                still.push(i);
            }
        }
        active = still;
    }
    Ok(Ascent {
        points,
        log_densities: log_f,
        iterations,
        converged,
        paths,
        log_density_paths: log_paths,
    })
}
