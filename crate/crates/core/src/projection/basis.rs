//! Orthonormal bases parametrised by Givens rotation angles.
//!
//! A `p x d` basis is encoded by `d p - d (d + 1) / 2` angles, one for each
//! coordinate pair `(i, j)` with `i < d` and `i < j < p`, ordered by `i` then
//! `j`. Writing `G(i, j, t)` for the rotation that maps rows `(i, j)` of a
//! matrix to `(c x_i + s x_j, -s x_i + c x_j)` and `R_i` for the product
//! `G(i, i+1) G(i, i+2) ... G(i, p-1)`, the basis is
//!
//! ```text
//! B = R_0 R_1 ... R_{d-1} E
//! ```
//!
//! where `E` holds the first `d` columns of the identity. With every angle in
//! `[-pi/2, pi/2]` the first column covers the half-sphere with
//! non-negative first coordinate, which reaches every line through the
//! origin; recursing on the orthogonal complement reaches every
//! `d`-dimensional subspace. For `p = 2`, `d = 1` and angle `t` the basis is
//! `(cos t, -sin t)^T`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::orthonormality_error;

/// Every angle lies in `[-ANGLE_BOUND, ANGLE_BOUND]`.
pub const ANGLE_BOUND: f64 = FRAC_PI_2;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Number of angles needed for a `p x d` basis.
pub fn n_angles(p: usize, d: usize) -> usize {
    d * p - d * (d + 1) / 2
}

/// A `p x d` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    matrix: DMatrix<f64>,
}

impl ProjectionBasis {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 || matrix.ncols() > matrix.nrows() {
            return Err(Error::contract(format!(
                "basis must be p x d with 1 <= d <= p, got {} x {}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let err = orthonormality_error(&matrix);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::contract(format!("basis columns are not orthonormal (error {err:.3e})")));
        }
        Ok(Self { matrix })
    }

    /// First `d` columns of the `p x p` identity.
    pub fn leading_axes(p: usize, d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(p, d))
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Flip column signs so that each column's largest-magnitude entry is
    /// positive. The spanned subspace is unchanged.
    pub fn canonicalized(&self) -> Self {
        let mut m = self.matrix.clone();
        for mut col in m.column_iter_mut() {
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);
            if pivot < 0.0 {
                col.neg_mut();
            }
        }
        Self { matrix: m }
    }

    /// Projected data `X B` for an `n x p` data matrix.
    pub fn project_data(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), found: data.ncols() });
        }
        Ok(data * &self.matrix)
    }
}

/// Real-valued angle vector encoding a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGenotype {
    angles: Vec<f64>,
}

impl AngleGenotype {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.iter().any(|a| !(a.abs() <= ANGLE_BOUND)) {
            return Err(Error::contract("angles must lie in [-pi/2, pi/2]"));
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let (xi, xj) = (m[(i, k)], m[(j, k)]);
        m[(i, k)] = c * xi + s * xj;
        m[(j, k)] = -s * xi + c * xj;
    }
}

/// Decode angles into a `p x d` orthonormal basis.
pub fn basis_from_angles(genotype: &AngleGenotype, p: usize, d: usize) -> Result<ProjectionBasis> {
    if d == 0 || d > p {
        return Err(Error::contract(format!("need 1 <= d <= p, got d={d}, p={p}")));
    }
    let expected = n_angles(p, d);
    if genotype.angles.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: genotype.angles.len() });
    }
    let mut m = DMatrix::identity(p, d);
    // apply R_{d-1} first, and within R_i the right-most rotation first
    let mut idx = expected;
    for i in (0..d).rev() {
        for j in ((i + 1)..p).rev() {
            idx -= 1;
            let (s, c) = genotype.angles[idx].sin_cos();
            rotate_rows(&mut m, i, j, c, s);
        }
    }
    Ok(ProjectionBasis { matrix: m })
}

/// Angles reproducing the subspace of `basis`. Decoding the result gives
/// back the same columns up to sign.
pub fn angles_from_basis(basis: &ProjectionBasis) -> AngleGenotype {
    let (p, d) = (basis.rows(), basis.cols());
    let mut m = basis.matrix.clone();
    let mut angles = Vec::with_capacity(n_angles(p, d));
    for i in 0..d {
        if m[(i, i)] < 0.0 {
            m.column_mut(i).neg_mut();
        }
        for j in (i + 1)..p {
            let (xi, xj) = (m[(i, i)], m[(j, i)]);
            let theta = if xi > 0.0 {
                (-xj / xi).atan()
            } else if xj != 0.0 {
                -xj.signum() * ANGLE_BOUND
            } else {
                0.0
            };
            // inverse rotation: (c x_i - s x_j, s x_i + c x_j)
            let (s, c) = theta.sin_cos();
            rotate_rows(&mut m, i, j, c, -s);
            angles.push(theta);
        }
    }
    AngleGenotype { angles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zero_angles_give_leading_axes() {
        let g = AngleGenotype::new(vec![0.0; n_angles(5, 2)]).unwrap();
        let b = basis_from_angles(&g, 5, 2).unwrap();
        assert_eq!(b.matrix(), &DMatrix::identity(5, 2));
    }

    #[test]
    fn single_rotation_in_the_plane() {
        let g = AngleGenotype::new(vec![FRAC_PI_4]).unwrap();
        let b = basis_from_angles(&g, 2, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.matrix()[(0, 0)] - h).abs() < 1e-15);
        assert!((b.matrix()[(1, 0)] + h).abs() < 1e-15);
    }

    #[test]
    fn length_and_bounds_are_checked() {
        let g = AngleGenotype::new(vec![0.1; 3]).unwrap();
        assert!(basis_from_angles(&g, 4, 2).is_err());
        assert!(AngleGenotype::new(vec![2.0]).is_err());
        assert!(ProjectionBasis::new(DMatrix::from_element(2, 1, 1.0)).is_err());
    }

    #[test]
    fn canonical_sign_makes_largest_entry_positive() {
        let b = ProjectionBasis::new(DMatrix::from_column_slice(3, 2, &[0.0, -1.0, 0.0, 0.6, 0.0, -0.8])).unwrap();
        let c = b.canonicalized();
        assert_eq!(c.matrix().column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        assert_eq!(c.matrix().column(1).iter().copied().collect::<Vec<_>>(), vec![-0.6, 0.0, 0.8]);
    }

    fn genotype_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..9)
            .prop_flat_map(|p| (Just(p), 1..=p))
            .prop_flat_map(|(p, d)| {
                (Just(p), Just(d), proptest::collection::vec(-ANGLE_BOUND..=ANGLE_BOUND, n_angles(p, d)))
            })
    }

    proptest! {
        #[test]
        fn decoded_bases_are_orthonormal((p, d, angles) in genotype_strategy()) {
            let b = basis_from_angles(&AngleGenotype::new(angles).unwrap(), p, d).unwrap();
            prop_assert!(orthonormality_error(b.matrix()) <= 1e-12);
        }

        #[test]
        fn encoding_recovers_columns_up_to_sign((p, d, angles) in genotype_strategy()) {
            let b = basis_from_angles(&AngleGenotype::new(angles).unwrap(), p, d).unwrap();
            let back = basis_from_angles(&angles_from_basis(&b), p, d).unwrap();
            for k in 0..d {
                let dot = b.matrix().column(k).dot(&back.matrix().column(k));
                prop_assert!((dot.abs() - 1.0).abs() < 1e-10, "column {} dot {}", k, dot);
            }
        }
    }
}
