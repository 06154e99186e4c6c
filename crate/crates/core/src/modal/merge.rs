use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ascent::{mem_ascend, MemConfig};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

/// Modes found by Modal EM and the per-point cluster assignments.
#[derive(Debug, Clone)]
pub struct ModalResult {
    /// `m x d`, one distinct mode per row.
    pub modes: DMatrix<f64>,
    /// 1-based mode index per point.
    pub assignments: Vec<usize>,
    pub n_modes: usize,
    pub density_at_modes: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Iterates per point, when recorded.
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

/// Group converged points by single linkage with link distance `radius`.
/// Each group's mode is its highest-density member; groups are numbered in
/// order of their first member. `log_densities` are log `f` at the points.
pub fn merge_modes(converged: &DMatrix<f64>, log_densities: &[f64], radius: f64) -> Result<ModalResult> {
    let n = converged.nrows();
    if log_densities.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: log_densities.len() });
    }
    if converged.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("converged points must be finite"));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = radius * radius;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2 = (converged.row(i) - converged.row(j)).norm_squared();
            if dist2 <= r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut group_of_root = vec![usize::MAX; n];
    let mut assignments = Vec::with_capacity(n);
    let mut champions: Vec<usize> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if group_of_root[root] == usize::MAX {
            group_of_root[root] = champions.len();
            champions.push(i);
        }
        let g = group_of_root[root];
        if log_densities[i] > log_densities[champions[g]] {
            champions[g] = i;
        }
        assignments.push(g + 1);
    }
    let modes = converged.select_rows(champions.iter());
    Ok(ModalResult {
        n_modes: champions.len(),
        density_at_modes: champions.iter().map(|&i| log_densities[i].exp()).collect(),
        modes,
        assignments,
        iterations: vec![0; n],
        paths: None,
    })
}

/// Diagonal of the axis-aligned bounding box of the rows of `points`.
fn bounding_box_diagonal(points: &DMatrix<f64>) -> f64 {
    points
        .column_iter()
        .map(|c| (c.max() - c.min()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Modal clustering: ascend from every point, then merge end points closer
/// than `merge_eps` times the bounding-box diagonal of `points`.
pub fn modal_cluster(model: &MixtureModel, points: &DMatrix<f64>, config: &MemConfig) -> Result<ModalResult> {
    if points.nrows() == 0 {
        return Err(Error::contract("no points to cluster"));
    }
    let ascent = mem_ascend(model, points, config)?;
    let diag = bounding_box_diagonal(points);
    let radius = config.merge_eps * if diag > 0.0 { diag } else { 1.0 };
    let mut result = merge_modes(&ascent.points, &ascent.log_densities, radius)?;
    result.iterations = ascent.iterations;
    result.paths = ascent
        .paths
        .map(|ps| ps.into_iter().map(|p| p.into_iter().map(|z| z.iter().copied().collect()).collect()).collect());
    Ok(result)
}

/// MAP assignment: 1-based index of the component with the largest
/// posterior probability; ties go to the smaller index.
pub fn map_assign(model: &MixtureModel, points: &DMatrix<f64>) -> Result<Vec<usize>> {
    let terms = model.weighted_component_log_densities(points)?;
    Ok(terms
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best + 1
        })
        .collect())
}

/// JSON form of a [`ModalResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalDocument {
    pub modes: Vec<Vec<f64>>,
    pub n_modes: usize,
    pub density_at_modes: Vec<f64>,
    pub assignments: Vec<usize>,
    pub iterations: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

impl ModalDocument {
    pub fn from_result(r: &ModalResult) -> Self {
        Self {
            modes: r.modes.row_iter().map(|row| row.iter().copied().collect()).collect(),
            n_modes: r.n_modes,
            density_at_modes: r.density_at_modes.clone(),
            assignments: r.assignments.clone(),
            iterations: r.iterations.clone(),
            paths: r.paths.clone(),
        }
    }
}
