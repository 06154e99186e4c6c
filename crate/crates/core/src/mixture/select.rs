use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::em::{em_fit, EmConfig, FitReport};
use super::CovarianceFamily;
use crate::error::{Error, FitFailure, Result};

/// One cell of a BIC grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub n_components: usize,
    pub family: CovarianceFamily,
    pub outcome: std::result::Result<FitReport, String>,
}

/// All fits of a grid search together with the BIC winner.
#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub best: FitReport,
    pub cells: Vec<GridCell>,
}

impl ModelSelection {
    pub fn failures(&self) -> Vec<FitFailure> {
        self.cells
            .iter()
            .filter_map(|c| {
                c.outcome.as_ref().err().map(|reason| FitFailure {
                    n_components: c.n_components,
                    family: c.family,
                    reason: reason.clone(),
                })
            })
            .collect()
    }

    /// Best successful fit with at least `min_components` components.
    pub fn best_with_min_components(&self, min_components: usize) -> Option<&FitReport> {
        self.cells
            .iter()
            .filter(|c| c.n_components >= min_components)
            .filter_map(|c| c.outcome.as_ref().ok())
            .min_by(|a, b| rank(a, b))
    }
}

/// Order fits best-first: larger BIC, then fewer parameters, then family name.
fn rank(a: &FitReport, b: &FitReport) -> Ordering {
    let scale = a.bic.abs().max(b.bic.abs()).max(1.0);
    if (a.bic - b.bic).abs() > 1e-9 * scale {
        return b.bic.total_cmp(&a.bic);
    }
    a.n_parameters
        .cmp(&b.n_parameters)
        .then(a.model.family().cmp(&b.model.family()))
        .then(a.model.n_components().cmp(&b.model.n_components()))
}

/// Fit every `(G, family)` combination and return the maximal-BIC model.
/// Cells that fail (collapse, too few observations) are skipped and kept in
/// [`ModelSelection::cells`] with their reason.
pub fn select_model(
    data: &DMatrix<f64>,
    components: &[usize],
    families: &[CovarianceFamily],
    config: &EmConfig,
) -> Result<ModelSelection> {
    if components.is_empty() || families.is_empty() {
        return Err(Error::contract("model grid must have at least one G and one family"));
    }
    let grid: Vec<(usize, CovarianceFamily)> = components
        .iter()
        .flat_map(|&g| families.iter().map(move |&f| (g, f)))
        .collect();
    let cells: Vec<GridCell> = grid
        .par_iter()
        .map(|&(g, family)| GridCell {
            n_components: g,
            family,
            outcome: em_fit(data, g, family, config).map_err(|e| e.to_string()),
        })
        .collect();

    let best = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok())
        .min_by(|a, b| rank(a, b))
        .cloned();
    match best {
        Some(best) => Ok(ModelSelection { best, cells }),
        None => Err(Error::NoModel(
            cells
                .into_iter()
                .map(|c| FitFailure {
                    n_components: c.n_components,
                    family: c.family,
                    reason: c.outcome.err().unwrap_or_default(),
                })
                .collect(),
        )),
    }
}
