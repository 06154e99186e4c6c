//! The fit, project, cluster and evaluate stages composed end to end.
//!
//! Each stage takes its seed from [`PipelineConfig::seed`] through
//! [`stage_seed`], so running the stages one at a time reproduces a full run.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{adjusted_rand_index, LabeledDataset};
use crate::error::{Error, Result};
use crate::mixture::{select_model, CovarianceFamily, EmConfig, FitReport, ModelSelection};
use crate::modal::{modal_cluster, MemConfig, ModalResult};
use crate::projection::{ga_optimize, GaConfig, PpResult};

/// Settings shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Centre and scale every column to unit sample variance first.
    pub standardize: bool,
    /// Numbers of components tried by both model searches.
    pub components: Vec<usize>,
    pub families: Vec<CovarianceFamily>,
    /// Projection dimensions; more than one value runs a sweep.
    pub dims: Vec<usize>,
    pub em: EmConfig,
    pub ga: GaConfig,
    pub mem: MemConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            standardize: true,
            components: (1..=9).collect(),
            families: CovarianceFamily::ALL.to_vec(),
            dims: vec![2],
            em: EmConfig::default(),
            ga: GaConfig::default(),
            mem: MemConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fit,
    Project,
    Cluster,
}

pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    seed.wrapping_add(match stage {
        Stage::Fit => 0,
        Stage::Project => 1,
        Stage::Cluster => 2,
    })
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.components.contains(&0) {
            return Err(Error::contract("components must be a non-empty list of positive integers"));
        }
        if self.families.is_empty() {
            return Err(Error::contract("families must not be empty"));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::contract("dims must be a non-empty list of positive integers"));
        }
        self.ga.validate()?;
        self.mem.validate()
    }

    fn em_for(&self, stage: Stage) -> EmConfig {
        EmConfig { seed: stage_seed(self.seed, stage), ..self.em.clone() }
    }
}

/// Column centring and scaling applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Zero mean and unit sample (n - 1) variance per column. Constant columns
/// are rejected.
pub fn standardize(data: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::contract("standardization needs at least two rows"));
    }
    let mut out = data.clone();
    let mut means = Vec::with_capacity(data.ncols());
    let mut scales = Vec::with_capacity(data.ncols());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= 1e-12 * mean.abs() {
            return Err(Error::contract(format!("column {} has zero variance", j + 1)));
        }
        col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        means.push(mean);
        scales.push(sd);
    }
    Ok((out, Standardization { means, scales }))
}

/// The data the model stages see: standardized or as given.
pub fn prepare_data(data: &DMatrix<f64>, config: &PipelineConfig) -> Result<DMatrix<f64>> {
    if config.standardize {
        Ok(standardize(data)?.0)
    } else {
        Ok(data.clone())
    }
}

#[derive(Debug, Clone)]
pub struct FitStage {
    pub selection: ModelSelection,
    /// The model handed to projection pursuit: the BIC winner, or the best
    /// fit with at least two components when the winner is a single
    /// Gaussian (whose negentropy vanishes in every direction).
    pub projection_model: FitReport,
}

pub fn fit_stage(data: &DMatrix<f64>, config: &PipelineConfig) -> Result<FitStage> {
    config.validate()?;
    let selection = select_model(data, &config.components, &config.families, &config.em_for(Stage::Fit))?;
    let projection_model = if selection.best.model.n_components() == 1 {
        selection.best_with_min_components(2).unwrap_or(&selection.best).clone()
    } else {
        selection.best.clone()
    };
    Ok(FitStage { selection, projection_model })
}

#[derive(Debug, Clone)]
pub struct ProjectStage {
    pub pursuit: PpResult,
    /// `data * B`, one row per observation.
    pub projected: DMatrix<f64>,
}

pub fn project_stage(
    data: &DMatrix<f64>,
    model: &crate::mixture::MixtureModel,
    d: usize,
    config: &PipelineConfig,
) -> Result<ProjectStage> {
    let ga = GaConfig { seed: stage_seed(config.seed, Stage::Project), ..config.ga.clone() };
    let pursuit = ga_optimize(model, d, &ga)?;
    let projected = pursuit.basis.project_data(data)?;
    Ok(ProjectStage { pursuit, projected })
}

#[derive(Debug, Clone)]
pub struct ClusterStage {
    pub selection: ModelSelection,
    pub modal: ModalResult,
}

/// Fits a mixture to the projected data by BIC and runs Modal EM from every
/// observation.
pub fn cluster_stage(projected: &DMatrix<f64>, config: &PipelineConfig) -> Result<ClusterStage> {
    config.validate()?;
    let selection = select_model(projected, &config.components, &config.families, &config.em_for(Stage::Cluster))?;
    let modal = modal_cluster(&selection.best.model, projected, &config.mem)?;
    Ok(ClusterStage { selection, modal })
}

/// Every stage of one pipeline run at a single projection dimension.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub d: usize,
    pub project: ProjectStage,
    pub cluster: ClusterStage,
    /// Agreement with the dataset's labels, when it has any.
    pub ari: Option<f64>,
}

/// Runs fit once, then project, cluster and evaluate for every dimension in
/// `config.dims`.
pub fn run_pipeline(dataset: &LabeledDataset, config: &PipelineConfig) -> Result<(FitStage, Vec<PipelineRun>)> {
    config.validate()?;
    let data = prepare_data(&dataset.data, config)?;
    let fit = fit_stage(&data, config)?;
    let runs = config
        .dims
        .iter()
        .map(|&d| {
            let project = project_stage(&data, &fit.projection_model.model, d, config)?;
            let cluster = cluster_stage(&project.projected, config)?;
            let ari = match &dataset.labels {
                Some(truth) => Some(adjusted_rand_index(truth, &cluster.modal.assignments)?),
                None => None,
            };
            Ok(PipelineRun { d, project, cluster, ari })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, runs))
}
