//! Maximum-likelihood fitting of parsimonious Gaussian mixtures by EM.
//!
//! Every supported family has a closed-form M-step computed from the
//! weighted scatter matrices `W_g = sum_i z_ig (x_i - mu_g)(x_i - mu_g)^T`:
//!
//! | family | covariance update |
//! |--------|-------------------|
//! | EII | `lambda I`, `lambda = tr(W) / (n p)` |
//! | VII | `lambda_g I`, `lambda_g = tr(W_g) / (n_g p)` |
//! | EEI | `diag(W) / n` |
//! | VVI | `diag(W_g) / n_g` |
//! | EEE | `W / n` |
//! | VVV | `W_g / n_g` |
//!
//! with `W = sum_g W_g`. A ridge of `regularization` is added to every
//! covariance diagonal; that keeps each family's structure intact.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::normalize_log_rows;
use super::{CovarianceFamily, MixtureModel};
use crate::error::{Error, Result};

/// Settings for [`em_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    /// Independent k-means++ initialisations; the best final likelihood wins.
    pub n_starts: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal ridge. `None` means `1e-8` times the mean diagonal of the
    /// total-data covariance.
    pub regularization: Option<f64>,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            n_starts: 10,
            tol: 1e-5,
            max_iter: 1000,
            regularization: None,
            seed: 0,
        }
    }
}

/// Result of one EM fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    /// `2 log L - nu log n`; larger is better.
    pub bic: f64,
    pub n_parameters: usize,
    pub n_observations: usize,
    pub n_iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the initial parameters followed by one entry per
    /// EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

/// `2 log L - nu log n`.
pub fn bic(log_likelihood: f64, n_parameters: usize, n_observations: usize) -> f64 {
    2.0 * log_likelihood - n_parameters as f64 * (n_observations as f64).ln()
}

/// Default ridge for `data`: `1e-8` times the mean diagonal of its covariance.
pub fn default_regularization(data: &DMatrix<f64>) -> f64 {
    let n = data.nrows() as f64;
    let p = data.ncols();
    let mut total = 0.0;
    for col in data.column_iter() {
        let mean = col.mean();
        total += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    }
    let r = 1e-8 * total / p as f64;
    if r > 0.0 {
        r
    } else {
        1e-12
    }
}

/// Fit a `n_components` mixture of the given family to the rows of `data`.
pub fn em_fit(
    data: &DMatrix<f64>,
    n_components: usize,
    family: CovarianceFamily,
    config: &EmConfig,
) -> Result<FitReport> {
    let (n, p) = data.shape();
    if n_components == 0 {
        return Err(Error::contract("n_components must be at least 1"));
    }
    if n <= n_components {
        return Err(Error::contract(format!(
            "need more observations ({n}) than components ({n_components})"
        )));
    }
    if p == 0 {
        return Err(Error::contract("data has no columns"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("data contains non-finite values"));
    }
    if config.max_iter == 0 || config.n_starts == 0 || !(config.tol > 0.0) {
        return Err(Error::contract("max_iter, n_starts and tol must be positive"));
    }
    let reg = config
        .regularization
        .unwrap_or_else(|| default_regularization(data));

    let starts = if n_components == 1 { 1 } else { config.n_starts };
    let runs: Vec<Result<FitReport>> = (0..starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(start as u64);
            let labels = kmeans_pp_labels(data, n_components, &mut rng);
            let mut resp = DMatrix::zeros(n, n_components);
            for (i, &l) in labels.iter().enumerate() {
                resp[(i, l)] = 1.0;
            }
            run_em(data, resp, family, reg, config)
        })
        .collect();

    let mut best: Option<FitReport> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best
                    .as_ref()
                    .is_none_or(|b| fit.log_likelihood > b.log_likelihood)
                {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start ran"))
}

fn run_em(
    data: &DMatrix<f64>,
    mut resp: DMatrix<f64>,
    family: CovarianceFamily,
    reg: f64,
    config: &EmConfig,
) -> Result<FitReport> {
    let n = data.nrows();
    let g = resp.ncols();
    let mut model = m_step(data, &resp, family, reg)?;
    let (r, mut ll) = e_step(&model, data);
    resp = r;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let next = m_step(data, &resp, family, reg)?;
        let (r, next_ll) = e_step(&next, data);
        model = next;
        resp = r;
        trace.push(next_ll);
        let change = (next_ll - ll).abs() / next_ll.abs().max(f64::MIN_POSITIVE);
        ll = next_ll;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    if !ll.is_finite() {
        return Err(Error::DegenerateModel("log-likelihood is not finite".into()));
    }
    let nu = family.n_params(g, data.ncols());
    Ok(FitReport {
        bic: bic(ll, nu, n),
        model,
        log_likelihood: ll,
        n_parameters: nu,
        n_observations: n,
        n_iterations: iterations,
        converged,
        log_likelihood_trace: trace,
    })
}

/// Responsibilities and total log-likelihood under `model`.
fn e_step(model: &MixtureModel, data: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let terms = model.weighted_log_terms(data);
    let (resp, norms) = normalize_log_rows(terms);
    (resp, norms.iter().sum())
}

fn m_step(
    data: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    family: CovarianceFamily,
    reg: f64,
) -> Result<MixtureModel> {
    let (n, p) = data.shape();
    let g = resp.ncols();
    let sizes: Vec<f64> = (0..g).map(|k| resp.column(k).sum()).collect();
    for (k, &nk) in sizes.iter().enumerate() {
        if !(nk > f64::EPSILON * n as f64) {
            return Err(Error::ComponentCollapse {
                component: k + 1,
                reason: "no observations assigned".into(),
            });
        }
    }
    let weights: Vec<f64> = {
        let total: f64 = sizes.iter().sum();
        sizes.iter().map(|s| s / total).collect()
    };
    let means: Vec<DVector<f64>> = (0..g)
        .map(|k| data.tr_mul(&resp.column(k)) / sizes[k])
        .collect();

    let smallest = || {
        sizes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    };

    let raw: Vec<DMatrix<f64>> = if family.is_diagonal() {
        // per-component weighted squared deviations, coordinate by coordinate
        let diags: Vec<DVector<f64>> = (0..g)
            .map(|k| {
                DVector::from_fn(p, |j, _| {
                    (0..n)
                        .map(|i| resp[(i, k)] * (data[(i, j)] - means[k][j]).powi(2))
                        .sum()
                })
            })
            .collect();
        let pooled = || diags.iter().fold(DVector::zeros(p), |acc, w| acc + w) / n as f64;
        match family {
            CovarianceFamily::EII => {
                let lambda = pooled().sum() / p as f64;
                vec![DMatrix::identity(p, p) * lambda; g]
            }
            CovarianceFamily::VII => (0..g)
                .map(|k| DMatrix::identity(p, p) * (diags[k].sum() / (sizes[k] * p as f64)))
                .collect(),
            CovarianceFamily::EEI => vec![DMatrix::from_diagonal(&pooled()); g],
            _ => (0..g)
                .map(|k| DMatrix::from_diagonal(&(&diags[k] / sizes[k])))
                .collect(),
        }
    } else {
        let scatters: Vec<DMatrix<f64>> = (0..g)
            .map(|k| {
                let mut w = data.clone();
                for i in 0..n {
                    let s = resp[(i, k)].sqrt();
                    for j in 0..p {
                        w[(i, j)] = s * (data[(i, j)] - means[k][j]);
                    }
                }
                w.tr_mul(&w)
            })
            .collect();
        match family {
            CovarianceFamily::EEE => {
                let pooled = scatters.iter().fold(DMatrix::zeros(p, p), |acc, w| acc + w) / n as f64;
                vec![pooled; g]
            }
            _ => (0..g).map(|k| &scatters[k] / sizes[k]).collect(),
        }
    };

    // the ridge must not be what keeps a covariance invertible: every raw
    // eigenvalue must reach `reg`, and every regularised one `1e-12`
    let floor = reg.max(1e-12 - reg);
    let mut covariances: Vec<DMatrix<f64>> = Vec::with_capacity(g);
    for (k, c) in raw.into_iter().enumerate() {
        let shared = family.is_common() && k > 0;
        let ok = shared
            || if family.is_diagonal() {
                c.diagonal().min() >= floor
            } else {
                let mut shifted = c.clone();
                for i in 0..p {
                    shifted[(i, i)] -= floor;
                }
                shifted.cholesky().is_some()
            };
        if !ok {
            let min_eig = c.clone().symmetric_eigenvalues().min();
            let component = if family.is_common() { smallest() + 1 } else { k + 1 };
            return Err(Error::ComponentCollapse {
                component,
                reason: format!(
                    "{family} covariance eigenvalue {min_eig:.3e} below regularization floor {reg:.3e}"
                ),
            });
        }
        if shared {
            covariances.push(covariances[0].clone());
            continue;
        }
        let mut c = c;
        for i in 0..p {
            c[(i, i)] += reg;
        }
        covariances.push(c);
    }
    MixtureModel::new(family, weights, means, covariances)
}

/// Hard labels from k-means++ seeding followed by a few Lloyd iterations.
fn kmeans_pp_labels<R: Rng>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = data.nrows();
    if k == 1 {
        return vec![0; n];
    }
    let rows: Vec<DVector<f64>> = data.row_iter().map(|r| r.transpose()).collect();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = rows.iter().map(|x| (x - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[next].clone());
        for (i, x) in rows.iter().enumerate() {
            dist[i] = dist[i].min((x - &centers[centers.len() - 1]).norm_squared());
        }
    }

    let mut labels = vec![0; n];
    for _ in 0..20 {
        let mut changed = false;
        for (i, x) in rows.iter().enumerate() {
            let best = centers
                .iter()
                .enumerate()
                .map(|(c, m)| (c, (x - m).norm_squared()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap_or(0);
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            if !members.is_empty() {
                *center = members.iter().fold(DVector::zeros(data.ncols()), |a, x| a + *x)
                    / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn gaussian_data(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn single_component_recovers_sample_moments() {
        let data = gaussian_data(500, 2, 3);
        let fit = em_fit(&data, 1, CovarianceFamily::EII, &EmConfig::default()).unwrap();
        let m = &fit.model;
        for j in 0..2 {
            assert!((m.means()[0][j] - data.column(j).mean()).abs() < 1e-12);
        }
        let n = data.nrows() as f64;
        let mut var = 0.0;
        for j in 0..2 {
            let c = data.column(j);
            let mu = c.mean();
            var += c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        }
        var /= 2.0;
        let lambda = m.covariances()[0][(0, 0)];
        assert!((lambda - var).abs() < 1e-6, "{lambda} vs {var}");
        assert!(fit.converged);
        assert!(fit.n_iterations <= 2);
    }

    #[test]
    fn rejects_too_few_observations() {
        let data = gaussian_data(3, 2, 1);
        assert!(matches!(
            em_fit(&data, 3, CovarianceFamily::VVV, &EmConfig::default()),
            Err(Error::Contract(_))
        ));
        let mut bad = gaussian_data(10, 2, 1);
        bad[(0, 0)] = f64::NAN;
        assert!(em_fit(&bad, 1, CovarianceFamily::VVV, &EmConfig::default()).is_err());
    }

    #[test]
    fn rank_deficient_component_is_reported_as_collapse() {
        // 3 points in 5 dimensions: VVV scatter has rank 2
        let data = gaussian_data(3, 5, 9);
        let err = em_fit(&data, 1, CovarianceFamily::VVV, &EmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ComponentCollapse { component: 1, .. }), "{err}");
    }

    #[test]
    fn bic_identity_holds() {
        let data = gaussian_data(200, 3, 5);
        for family in CovarianceFamily::ALL {
            let fit = em_fit(&data, 2, family, &EmConfig::default()).unwrap();
            assert_eq!(fit.bic, 2.0 * fit.log_likelihood - fit.n_parameters as f64 * 200f64.ln());
            assert_eq!(fit.n_parameters, 1 + 2 * 3 + family.n_covariance_params(2, 3));
            assert!(family.constraint_violation(fit.model.covariances()) <= 1e-8);
            for w in fit.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "{family}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = DMatrix::from_fn(400, 2, |i, _| {
            let z: f64 = rng.sample(StandardNormal);
            if i < 200 { 5.0 + z } else { -5.0 + z }
        });
        let fit = em_fit(&data, 2, CovarianceFamily::VII, &EmConfig::default()).unwrap();
        let m = &fit.model;
        let first = if m.means()[0][0] > 0.0 { 0 } else { 1 };
        for (k, rows, centre) in [(first, 0..200, 5.0), (1 - first, 200..400, -5.0)] {
            assert!((m.weights()[k] - 0.5).abs() < 0.05);
            for j in 0..2 {
                let sample_mean = rows.clone().map(|i| data[(i, j)]).sum::<f64>() / 200.0;
                assert!((m.means()[k][j] - centre).abs() < 0.2);
                assert!((m.means()[k][j] - sample_mean).abs() < 1e-6, "{} vs {sample_mean}", m.means()[k][j]);
            }
        }
    }
}
