//! Adjusted Rand index (Hubert and Arabie) from the contingency table.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Pair counts underlying the Rand family of indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs grouped together in both partitions: `sum_ij C(n_ij, 2)`.
    pub together_both: u64,
    /// `sum_i C(a_i, 2)` over the row margins.
    pub together_a: u64,
    /// `sum_j C(b_j, 2)` over the column margins.
    pub together_b: u64,
    /// `C(n, 2)`.
    pub total: u64,
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

pub fn pair_counts(a: &[usize], b: &[usize]) -> Result<PairCounts> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    Ok(PairCounts {
        together_both: cells.values().map(|&c| choose2(c)).sum(),
        together_a: rows.values().map(|&c| choose2(c)).sum(),
        together_b: cols.values().map(|&c| choose2(c)).sum(),
        total: choose2(a.len() as u64),
    })
}

/// Adjusted Rand index between two labelings of the same points.
///
/// Symmetric and invariant to relabeling; 1 for identical partitions. When
/// the chance-corrected denominator vanishes (both partitions a single block,
/// or both all singletons) identical partitions score 1 and anything else is
/// an error.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::contract("need at least two points"));
    }
    let c = pair_counts(a, b)?;
    let index = c.together_both as f64;
    let sa = c.together_a as f64;
    let sb = c.together_b as f64;
    let expected = sa * sb / c.total as f64;
    let max_index = 0.5 * (sa + sb);
    let denom = max_index - expected;
    if denom == 0.0 {
        return if c.together_both == c.together_a && c.together_both == c.together_b {
            Ok(1.0)
        } else {
            Err(Error::DegeneratePartition("ARI denominator is zero for differing partitions".into()))
        };
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_permuted() {
        let a = [1, 1, 2, 2, 3];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_value() {
        // contingency [[2,1,0],[0,1,2]]: index 2, sa 6, sb 3, total 15
        let v = adjusted_rand_index(&[1, 1, 1, 2, 2, 2], &[1, 1, 2, 2, 3, 3]).unwrap();
        let expected = (2.0 - 6.0 * 3.0 / 15.0) / (4.5 - 6.0 * 3.0 / 15.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.24242424242424243).abs() < 1e-15);
    }

    #[test]
    fn degenerate_partitions() {
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[5, 5, 5]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[3, 1, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[1, 2, 3]).unwrap(), 0.0);
        assert!(adjusted_rand_index(&[1, 2], &[1]).is_err());
        assert!(adjusted_rand_index(&[1], &[1]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_relabel_invariant(
            pairs in proptest::collection::vec((1usize..5, 1usize..5), 2..80),
            shift in 1usize..10,
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            if let Ok(v) = adjusted_rand_index(&a, &b) {
                prop_assert!((v - adjusted_rand_index(&b, &a).unwrap()).abs() < 1e-12);
                let relabeled: Vec<usize> = a.iter().map(|x| (x * 7 + shift) % 31 + 1).collect();
                prop_assert!((v - adjusted_rand_index(&relabeled, &b).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_labelings_average_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut draw = || -> Vec<usize> { (0..1000).map(|_| rng.random_range(1..=4)).collect() };
        let mean = (0..200).map(|_| adjusted_rand_index(&draw(), &draw()).unwrap()).sum::<f64>() / 200.0;
        assert!(mean.abs() <= 0.02, "{mean}");
    }
}
