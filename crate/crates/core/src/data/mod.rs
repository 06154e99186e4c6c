//! Datasets: synthetic generators, CSV ingestion/export and partition
//! agreement.

mod ari;
mod csv_io;
mod generators;

pub use ari::{adjusted_rand_index, pair_counts, PairCounts};
pub use csv_io::{labels_to_csv, load_csv, load_labels, matrix_to_csv, parse_csv, parse_labels};
pub use generators::{gen_block_clusters, gen_two_group, BLOCK_CORNERS};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n x p` data matrix with optional class labels (integers >= 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(data: DMatrix<f64>, labels: Option<Vec<usize>>, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != data.ncols() {
            return Err(Error::DimensionMismatch { expected: data.ncols(), found: feature_names.len() });
        }
        if let Some(l) = &labels {
            if l.len() != data.nrows() {
                return Err(Error::DimensionMismatch { expected: data.nrows(), found: l.len() });
            }
            if l.contains(&0) {
                return Err(Error::contract("labels must be >= 1"));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("data contains non-finite values"));
        }
        Ok(Self { data, labels, feature_names })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    /// CSV text with the feature names as header and, when labels are
    /// present, a trailing `class` column.
    pub fn to_csv(&self) -> String {
        let mut names = self.feature_names.clone();
        let mut table = self.data.clone();
        if let Some(labels) = &self.labels {
            names.push("class".into());
            table = table.insert_column(self.data.ncols(), 0.0);
            for (i, &l) in labels.iter().enumerate() {
                table[(i, self.data.ncols())] = l as f64;
            }
        }
        matrix_to_csv(&table, &names)
    }
}

/// `prefix1, prefix2, ..., prefixN`.
pub fn numbered_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
