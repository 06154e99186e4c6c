//! Synthetic designs with known cluster structure.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{numbered_names, LabeledDataset};

/// Side lengths of the rectangular block whose corners carry the eight
/// cluster means in [`gen_block_clusters`].
pub const BLOCK_CORNERS: [f64; 3] = [8.0, 7.0, 6.0];

/// 100 x 50 two-group design. Rows 1-85 (class 1) are standard Gaussian.
/// Rows 86-100 (class 2) have their first 15 attributes drawn with mean 1.5
/// and standard deviation 0.2; the other 35 are standard Gaussian.
pub fn gen_two_group(seed: u64) -> LabeledDataset {
    const N1: usize = 85;
    const N2: usize = 15;
    const P: usize = 50;
    const P0: usize = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::zeros(N1 + N2, P);
    let mut labels = Vec::with_capacity(N1 + N2);
    for i in 0..N1 + N2 {
        let second = i >= N1;
        for j in 0..P {
            let z: f64 = rng.sample(StandardNormal);
            data[(i, j)] = if second && j < P0 { 1.5 + 0.2 * z } else { z };
        }
        labels.push(if second { 2 } else { 1 });
    }
    LabeledDataset {
        data,
        labels: Some(labels),
        feature_names: numbered_names("X", P),
    }
}

/// 400 x 8 design: the first three variables come from an equal-weight
/// mixture of eight unit-covariance Gaussians centred at the corners of the
/// block `[0, a] x [0, b] x [0, c]` with sides [`BLOCK_CORNERS`], 50 rows
/// per corner; variables 4-8 are standard Gaussian noise. Class `k`
/// (1..=8) is the corner whose binary digits `(bit0, bit1, bit2)` select
/// the far side on axes 1, 2 and 3.
pub fn gen_block_clusters(seed: u64) -> LabeledDataset {
    const PER: usize = 50;
    const P: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::zeros(8 * PER, P);
    let mut labels = Vec::with_capacity(8 * PER);
    for corner in 0..8 {
        for r in 0..PER {
            let i = corner * PER + r;
            for j in 0..P {
                let z: f64 = rng.sample(StandardNormal);
                let shift = if j < 3 && (corner >> j) & 1 == 1 { BLOCK_CORNERS[j] } else { 0.0 };
                data[(i, j)] = shift + z;
            }
            labels.push(corner + 1);
        }
    }
    LabeledDataset {
        data,
        labels: Some(labels),
        feature_names: numbered_names("X", P),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_group_shape_and_counts() {
        let ds = gen_two_group(7);
        assert_eq!(ds.data.shape(), (100, 50));
        let labels = ds.labels.as_ref().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 85);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 15);
        let g2_mean: f64 = (85..100).map(|i| ds.data[(i, 0)]).sum::<f64>() / 15.0;
        assert!((g2_mean - 1.5).abs() < 3.0 * 0.2 / 15f64.sqrt(), "{g2_mean}");
        assert_eq!(ds, gen_two_group(7));
        assert_ne!(ds.data, gen_two_group(8).data);
    }

    #[test]
    fn block_shape_counts_and_noise() {
        let ds = gen_block_clusters(7);
        assert_eq!(ds.data.shape(), (400, 8));
        let labels = ds.labels.as_ref().unwrap();
        for k in 1..=8 {
            assert_eq!(labels.iter().filter(|&&l| l == k).count(), 50);
        }
        for j in 3..8 {
            // CLT band 3 / sqrt(400)
            assert!(ds.data.column(j).mean().abs() < 0.15);
        }
        assert_eq!(ds, gen_block_clusters(7));
    }
}
