use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::CovarianceFamily;
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, relative_asymmetry, symmetrize, LN_2PI};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const ASYMMETRY_TOL: f64 = 1e-12;

/// Cached factorisation of one component covariance.
#[derive(Debug, Clone)]
struct Factor {
    /// Lower Cholesky factor `L` with `L L^T = Sigma`.
    chol: DMatrix<f64>,
    /// `L^{-1}`, so the Mahalanobis form is `|L^{-1} (x - mu)|^2`.
    chol_inv: DMatrix<f64>,
    precision: DMatrix<f64>,
    /// `-0.5 (d log(2 pi) + log|Sigma|)`.
    log_norm: f64,
    /// Every factor above is diagonal.
    diagonal: bool,
}

impl Factor {
    fn new(cov: &DMatrix<f64>, component: usize) -> Result<Self> {
        let d = cov.nrows();
        if is_diagonal(cov) {
            let diag = cov.diagonal();
            if diag.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::DegenerateModel(format!(
                    "covariance of component {} is not positive definite",
                    component + 1
                )));
            }
            let ln_det: f64 = diag.iter().map(|v| v.ln()).sum();
            return Ok(Self {
                chol: DMatrix::from_diagonal(&diag.map(f64::sqrt)),
                chol_inv: DMatrix::from_diagonal(&diag.map(|v| 1.0 / v.sqrt())),
                precision: DMatrix::from_diagonal(&diag.map(|v| 1.0 / v)),
                log_norm: -0.5 * (d as f64 * LN_2PI + ln_det),
                diagonal: true,
            });
        }
        let chol = cov.clone().cholesky().ok_or_else(|| {
            Error::DegenerateModel(format!("covariance of component {} is not positive definite", component + 1))
        })?;
        let l = chol.l();
        let mut chol_inv = DMatrix::identity(d, d);
        if !l.solve_lower_triangular_mut(&mut chol_inv) {
            return Err(Error::DegenerateModel(format!("singular Cholesky factor in component {}", component + 1)));
        }
        let ln_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !ln_det.is_finite() {
            return Err(Error::DegenerateModel(format!(
                "covariance of component {} has a non-finite log-determinant",
                component + 1
            )));
        }
        let precision = symmetrize(&chol_inv.tr_mul(&chol_inv));
        Ok(Self {
            chol: l,
            chol_inv,
            precision,
            log_norm: -0.5 * (d as f64 * LN_2PI + ln_det),
            diagonal: false,
        })
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    (0..d).all(|j| (0..d).all(|i| i == j || m[(i, j)] == 0.0))
}

/// A finite mixture of multivariate Gaussian densities.
///
/// Immutable once constructed; construction checks every invariant (positive
/// weights summing to one, conforming shapes, symmetric positive-definite
/// covariances) and caches the Cholesky factors used for evaluation.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    family: CovarianceFamily,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    factors: Vec<Factor>,
    log_weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(
        family: CovarianceFamily,
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let g = weights.len();
        if g == 0 {
            return Err(Error::contract("a mixture needs at least one component"));
        }
        if means.len() != g || covariances.len() != g {
            return Err(Error::contract(format!(
                "{} weights, {} means and {} covariances",
                g,
                means.len(),
                covariances.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::contract("mixing weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::contract(format!("mixing weights sum to {total}, not 1")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::contract("dimension must be positive"));
        }
        let mut sym = Vec::with_capacity(g);
        for (k, (mu, cov)) in means.iter().zip(&covariances).enumerate() {
            if mu.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: mu.len() });
            }
            if cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: cov.nrows().max(cov.ncols()) });
            }
            if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("component {} has non-finite parameters", k + 1)));
            }
            if relative_asymmetry(cov) > ASYMMETRY_TOL {
                return Err(Error::contract(format!("covariance of component {} is not symmetric", k + 1)));
            }
            sym.push(symmetrize(cov));
        }
        let mut factors: Vec<Factor> = Vec::with_capacity(g);
        for (k, c) in sym.iter().enumerate() {
            let factor = match k {
                0 => Factor::new(c, k)?,
                _ if *c == sym[k - 1] => factors[k - 1].clone(),
                _ => Factor::new(c, k)?,
            };
            factors.push(factor);
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            family,
            weights,
            means,
            covariances: sym,
            factors,
            log_weights,
        })
    }

    /// A one-component mixture.
    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(CovarianceFamily::VVV, vec![1.0], vec![mean], vec![covariance])
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn family(&self) -> CovarianceFamily {
        self.family
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Precision matrix `Sigma_k^{-1}` of component `k`.
    pub fn precision(&self, k: usize) -> &DMatrix<f64> {
        &self.factors[k].precision
    }

    pub(crate) fn cholesky(&self, k: usize) -> &DMatrix<f64> {
        &self.factors[k].chol
    }

    fn check_points(&self, points: &DMatrix<f64>) -> Result<()> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: points.ncols() });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("points contain non-finite values"));
        }
        Ok(())
    }

    /// `log(tau_k) + log phi(x_i; mu_k, Sigma_k)` for every row `i` and
    /// component `k`, as an `n x K` matrix.
    pub fn weighted_component_log_densities(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_points(points)?;
        Ok(self.weighted_log_terms(points))
    }

    pub(crate) fn weighted_log_terms(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d) = points.shape();
        let mut out = DMatrix::zeros(n, self.n_components());
        let mut centered = points.clone();
        for (k, f) in self.factors.iter().enumerate() {
            let mu = &self.means[k];
            for j in 0..d {
                for i in 0..n {
                    centered[(i, j)] = points[(i, j)] - mu[j];
                }
            }
            let base = self.log_weights[k] + f.log_norm;
            if f.diagonal {
                for i in 0..n {
                    out[(i, k)] = base;
                }
                for j in 0..d {
                    let s = f.chol_inv[(j, j)];
                    for i in 0..n {
                        out[(i, k)] -= 0.5 * (centered[(i, j)] * s).powi(2);
                    }
                }
            } else {
                // rows of (X - 1 mu^T) L^{-T} are the whitened residuals
                let white = &centered * f.chol_inv.transpose();
                for i in 0..n {
                    out[(i, k)] = base - 0.5 * white.row(i).norm_squared();
                }
            }
        }
        out
    }

    /// Log mixture density of each row of `points` (an `n x dim` matrix),
    /// accumulated in log space.
    pub fn log_density(&self, points: &DMatrix<f64>) -> Result<Vec<f64>> {
        let terms = self.weighted_component_log_densities(points)?;
        Ok(row_log_sum_exp(&terms))
    }

    /// Log density at a single point. The point must have length `dim`.
    pub fn log_density_at(&self, point: &DVector<f64>) -> f64 {
        debug_assert_eq!(point.len(), self.dim());
        let mut terms = Vec::with_capacity(self.n_components());
        for (k, f) in self.factors.iter().enumerate() {
            let q = (&f.chol_inv * (point - &self.means[k])).norm_squared();
            terms.push(self.log_weights[k] + f.log_norm - 0.5 * q);
        }
        log_sum_exp(&terms)
    }

    /// Posterior component probabilities, an `n x K` matrix whose rows sum
    /// to one. Normalisation happens in log space, so points far in the
    /// tails of every component still get well-defined rows.
    pub fn responsibilities(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let terms = self.weighted_component_log_densities(points)?;
        Ok(normalize_log_rows(terms).0)
    }

    /// Draw `n` points by ancestral sampling. Labels are 1-based component
    /// indices. Deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let k = self.draw_component(rng);
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.means[k] + &self.factors[k].chol * z;
            out.set_row(i, &x.transpose());
            labels.push(k + 1);
        }
        (out, labels)
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }

    /// Mixture of the linearly mapped variable `B^T x`: same weights, means
    /// `B^T mu_g` and covariances `B^T Sigma_g B`. The result is tagged VVV
    /// since a general map does not preserve constrained families.
    pub fn project(&self, basis: &DMatrix<f64>) -> Result<MixtureModel> {
        if basis.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: basis.nrows() });
        }
        let bt = basis.transpose();
        let means = self.means.iter().map(|m| &bt * m).collect();
        let covs = self
            .covariances
            .iter()
            .map(|c| symmetrize(&(&bt * c * basis)))
            .collect();
        MixtureModel::new(CovarianceFamily::VVV, self.weights.clone(), means, covs)
    }

    /// Overall mean and covariance of the mixture distribution,
    /// `sum_g tau_g Sigma_g + sum_g tau_g (mu_g - mu)(mu_g - mu)^T`.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut mean = DVector::zeros(d);
        for (w, m) in self.weights.iter().zip(&self.means) {
            mean.axpy(*w, m, 1.0);
        }
        let mut cov = DMatrix::zeros(d, d);
        for ((w, m), c) in self.weights.iter().zip(&self.means).zip(&self.covariances) {
            let dev = m - &mean;
            cov += c * *w;
            cov.ger(*w, &dev, &dev, 1.0);
        }
        (mean, symmetrize(&cov))
    }
}

pub(crate) fn row_log_sum_exp(terms: &DMatrix<f64>) -> Vec<f64> {
    let k = terms.ncols();
    (0..terms.nrows())
        .map(|i| {
            let max = (0..k).map(|j| terms[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return max;
            }
            max + (0..k).map(|j| (terms[(i, j)] - max).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// Exponentiate and normalise each row of a matrix of log weights. Returns
/// the normalised matrix and the per-row log normalisers.
pub(crate) fn normalize_log_rows(mut terms: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (n, k) = terms.shape();
    let mut norms = Vec::with_capacity(n);
    for i in 0..n {
        let max = (0..k).map(|j| terms[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            norms.push(max);
            for j in 0..k {
                terms[(i, j)] = 1.0 / k as f64;
            }
            continue;
        }
        let mut sum = 0.0;
        for j in 0..k {
            let e = (terms[(i, j)] - max).exp();
            terms[(i, j)] = e;
            sum += e;
        }
        for j in 0..k {
            terms[(i, j)] /= sum;
        }
        norms.push(max + sum.ln());
    }
    (terms, norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn normal_pdf(x: f64, mu: f64, var: f64) -> f64 {
        (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    fn one_d(weights: &[f64], means: &[f64], vars: &[f64]) -> MixtureModel {
        MixtureModel::new(
            CovarianceFamily::VVV,
            weights.to_vec(),
            means.iter().map(|&m| DVector::from_element(1, m)).collect(),
            vars.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn standard_bivariate_at_mode() {
        let m = MixtureModel::single(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let v = m.log_density(&DMatrix::zeros(1, 2)).unwrap()[0];
        assert!((v + (2.0 * PI).ln()).abs() < 1e-12);
        assert!((v + 1.837877).abs() < 1e-6);
    }

    #[test]
    fn identical_components_collapse() {
        let single = one_d(&[1.0], &[0.7], &[2.0]);
        let double = one_d(&[0.5, 0.5], &[0.7, 0.7], &[2.0, 2.0]);
        let pts = DMatrix::from_column_slice(4, 1, &[-3.0, 0.0, 0.7, 5.5]);
        let a = single.log_density(&pts).unwrap();
        let b = double.log_density(&pts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn one_d_two_component_matches_hand_pdf() {
        let m = one_d(&[0.3, 0.7], &[-1.0, 2.0], &[1.0, 4.0]);
        let expected = (0.3 * normal_pdf(0.0, -1.0, 1.0) + 0.7 * normal_pdf(0.0, 2.0, 4.0)).ln();
        let v = m.log_density(&DMatrix::zeros(1, 1)).unwrap()[0];
        assert!((v - expected).abs() < 1e-13, "{v} vs {expected}");
        assert!((m.log_density_at(&DVector::zeros(1)) - expected).abs() < 1e-13);
    }

    #[test]
    fn responsibilities_edge_cases() {
        let k1 = one_d(&[1.0], &[0.0], &[1.0]);
        let pts = DMatrix::from_column_slice(3, 1, &[-2.0, 0.0, 40.0]);
        assert!(k1.responsibilities(&pts).unwrap().iter().all(|&r| r == 1.0));

        let same = one_d(&[0.25, 0.75], &[1.0, 1.0], &[2.0, 2.0]);
        let r = same.responsibilities(&pts).unwrap();
        for i in 0..3 {
            assert!((r[(i, 0)] - 0.25).abs() < 1e-14);
            assert!((r[(i, 1)] - 0.75).abs() < 1e-14);
        }

        let sym = one_d(&[0.5, 0.5], &[-2.0, 2.0], &[1.0, 1.0]);
        let r = sym.responsibilities(&DMatrix::zeros(1, 1)).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn responsibilities_survive_underflow() {
        let m = one_d(&[0.5, 0.5], &[-1.0, 1.0], &[1e-4, 1e-4]);
        let pts = DMatrix::from_column_slice(2, 1, &[1e4, -1e4]);
        let r = m.responsibilities(&pts).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        assert!((r[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((r[(1, 0)] - 1.0).abs() < 1e-12);
        assert!(m.log_density(&pts).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = MixtureModel::single(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            m.log_density(&DMatrix::zeros(3, 3)),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mu = vec![DVector::zeros(1), DVector::zeros(1)];
        let cov = vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)];
        assert!(MixtureModel::new(CovarianceFamily::VVV, vec![0.5, 0.6], mu.clone(), cov.clone()).is_err());
        assert!(MixtureModel::new(CovarianceFamily::VVV, vec![1.0, 0.0], mu.clone(), cov).is_err());
        let bad = vec![DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0)];
        assert!(matches!(
            MixtureModel::new(CovarianceFamily::VVV, vec![0.5, 0.5], mu, bad),
            Err(Error::DegenerateModel(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert!(MixtureModel::single(DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn projection_identity_and_marginal() {
        let m = MixtureModel::new(
            CovarianceFamily::VVV,
            vec![0.4, 0.6],
            vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-1.0, 0.5])],
            vec![
                DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
                DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 0.5]),
            ],
        )
        .unwrap();
        let same = m.project(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(same.weights(), m.weights());
        for k in 0..2 {
            assert_eq!(same.means()[k], m.means()[k]);
            assert_eq!(same.covariances()[k], m.covariances()[k]);
        }

        let g = MixtureModel::single(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let p = g.project(&e1).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.covariances()[0][(0, 0)], 4.0);
        assert_eq!(p.family(), CovarianceFamily::VVV);
        assert!(g.project(&DMatrix::identity(3, 1)).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_centred() {
        let m = MixtureModel::single(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let (a, la) = m.sample(100_000, 11);
        let (b, lb) = m.sample(100_000, 11);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert!(la.iter().all(|&l| l == 1));
        for j in 0..2 {
            assert!(a.column(j).mean().abs() < 0.02);
        }
    }

    #[test]
    fn moments_of_two_point_mixture() {
        let m = one_d(&[0.5, 0.5], &[-3.0, 3.0], &[1.0, 1.0]);
        let (mu, cov) = m.moments();
        assert!(mu[0].abs() < 1e-15);
        assert!((cov[(0, 0)] - 10.0).abs() < 1e-13);
    }
}
