use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ppmem::data::{
    adjusted_rand_index, gen_block_clusters, gen_two_group, labels_to_csv, load_csv, load_labels, matrix_to_csv,
    numbered_names, parse_csv, LabeledDataset,
};
use ppmem::mixture::ModelDocument;
use ppmem::modal::ModalDocument;
use ppmem::pipeline::{
    cluster_stage, fit_stage, prepare_data, project_stage, stage_seed, ClusterStage, PipelineConfig, ProjectStage,
    Stage,
};
use ppmem::projection::PpDocument;
use serde::Serialize;

use crate::args::{EvaluateArgs, Generator, RunArgs, SimulateArgs};
use crate::config::{resolve, RunConfig};
use crate::output::{bic_grid_csv, to_json, write_atomic};
use crate::CliError;

#[derive(Serialize)]
struct StageSeeds {
    fit: u64,
    project: u64,
    cluster: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    input: String,
    output_dir: String,
    model: Option<String>,
    label_column: Option<&'a str>,
    seed: u64,
    stage_seeds: StageSeeds,
    config: &'a PipelineConfig,
}

fn write_manifest(command: &str, args: &RunArgs, input: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.pipeline.seed;
    let manifest = Manifest {
        tool: "ppmem",
        version: env!("CARGO_PKG_VERSION"),
        command,
        input: input.display().to_string(),
        output_dir: args.output_dir.display().to_string(),
        model: (command == "project").then(|| model_path(args).display().to_string()),
        label_column: cfg.label_column.as_deref(),
        seed,
        stage_seeds: StageSeeds {
            fit: stage_seed(seed, Stage::Fit),
            project: stage_seed(seed, Stage::Project),
            cluster: stage_seed(seed, Stage::Cluster),
        },
        config: &cfg.pipeline,
    };
    write_atomic(&args.output_dir.join("run-manifest.json"), &to_json(&manifest)?)
}

fn required_input(args: &RunArgs) -> Result<&Path, CliError> {
    args.input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))
}

fn model_path(args: &RunArgs) -> PathBuf {
    args.model.clone().unwrap_or_else(|| args.output_dir.join("pp_model.json"))
}

fn load_dataset(path: &Path, cfg: &RunConfig) -> Result<LabeledDataset, CliError> {
    Ok(load_csv(path, cfg.label_column.as_deref())?)
}

/// Output directory for dimension `d`: the run directory itself, or a
/// `d<k>` subdirectory during a sweep.
fn dim_dir(args: &RunArgs, cfg: &RunConfig, d: usize) -> PathBuf {
    if cfg.pipeline.dims.len() == 1 {
        args.output_dir.clone()
    } else {
        args.output_dir.join(format!("d{d}"))
    }
}

fn write_project(dir: &Path, stage: &ProjectStage) -> Result<(), CliError> {
    write_atomic(&dir.join("pp_result.json"), &to_json(&PpDocument::from_result(&stage.pursuit))?)?;
    let names = numbered_names("PP", stage.projected.ncols());
    write_atomic(&dir.join("projected.csv"), &matrix_to_csv(&stage.projected, &names))
}

fn write_cluster(dir: &Path, stage: &ClusterStage) -> Result<(), CliError> {
    write_atomic(&dir.join("cluster_bic_grid.csv"), &bic_grid_csv(&stage.selection))?;
    write_atomic(&dir.join("cluster_model.json"), &ModelDocument::from_fit(&stage.selection.best).to_json()?)?;
    write_atomic(&dir.join("modal.json"), &to_json(&ModalDocument::from_result(&stage.modal))?)?;
    write_atomic(&dir.join("labels.csv"), &labels_to_csv("cluster", &stage.modal.assignments))
}

fn projection_sweep_row(out: &mut String, d: usize, stage: &ProjectStage) {
    let r = &stage.pursuit;
    write!(out, "{d},{},{},{},{}", r.negentropy, r.entropy, r.gaussian_entropy, r.generations_run).unwrap();
}

const SWEEP_HEADER: &str = "d,negentropy,entropy,gaussian_entropy,generations_run";

pub fn fit(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let input = required_input(args)?;
    let dataset = load_dataset(input, &cfg)?;
    let data = prepare_data(&dataset.data, &cfg.pipeline)?;
    let stage = fit_stage(&data, &cfg.pipeline)?;
    write_atomic(&args.output_dir.join("bic_grid.csv"), &bic_grid_csv(&stage.selection))?;
    write_atomic(&args.output_dir.join("model.json"), &ModelDocument::from_fit(&stage.selection.best).to_json()?)?;
    write_atomic(&args.output_dir.join("pp_model.json"), &ModelDocument::from_fit(&stage.projection_model).to_json()?)?;
    write_manifest("fit", args, input, &cfg)?;
    let best = &stage.selection.best;
    println!(
        "selected G={} {} (BIC {:.4}); projection model G={} {}",
        best.model.n_components(),
        best.model.family(),
        best.bic,
        stage.projection_model.model.n_components(),
        stage.projection_model.model.family()
    );
    Ok(())
}

pub fn project(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let input = required_input(args)?;
    let dataset = load_dataset(input, &cfg)?;
    let data = prepare_data(&dataset.data, &cfg.pipeline)?;
    let path = model_path(args);
    let text = std::fs::read_to_string(&path)
        .map_err(|source| ppmem::Error::Io { path: path.display().to_string(), source })?;
    let model = ModelDocument::from_json(&text)?.to_model()?;
    let mut sweep = format!("{SWEEP_HEADER}\n");
    for &d in &cfg.pipeline.dims {
        let stage = project_stage(&data, &model, d, &cfg.pipeline)?;
        write_project(&dim_dir(args, &cfg, d), &stage)?;
        projection_sweep_row(&mut sweep, d, &stage);
        sweep.push('\n');
        println!("d={d}: negentropy {:.4}", stage.pursuit.negentropy);
    }
    if cfg.pipeline.dims.len() > 1 {
        write_atomic(&args.output_dir.join("sweep.csv"), &sweep)?;
    }
    write_manifest("project", args, input, &cfg)
}

pub fn cluster(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let input = args.input.clone().unwrap_or_else(|| args.output_dir.join("projected.csv"));
    let projected = load_csv(&input, None)?.data;
    let stage = cluster_stage(&projected, &cfg.pipeline)?;
    write_cluster(&args.output_dir, &stage)?;
    write_manifest("cluster", args, &input, &cfg)?;
    println!("{} modes", stage.modal.n_modes);
    Ok(())
}

pub fn pipeline(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let input = required_input(args)?;
    let dataset = load_dataset(input, &cfg)?;
    let data = prepare_data(&dataset.data, &cfg.pipeline)?;
    let fit = fit_stage(&data, &cfg.pipeline)?;
    write_atomic(&args.output_dir.join("bic_grid.csv"), &bic_grid_csv(&fit.selection))?;
    write_atomic(&args.output_dir.join("model.json"), &ModelDocument::from_fit(&fit.selection.best).to_json()?)?;
    write_atomic(&args.output_dir.join("pp_model.json"), &ModelDocument::from_fit(&fit.projection_model).to_json()?)?;

    let mut sweep = format!("{SWEEP_HEADER},n_modes,ari\n");
    for &d in &cfg.pipeline.dims {
        let dir = dim_dir(args, &cfg, d);
        let project = project_stage(&data, &fit.projection_model.model, d, &cfg.pipeline)?;
        write_project(&dir, &project)?;
        let cluster = cluster_stage(&project.projected, &cfg.pipeline)?;
        write_cluster(&dir, &cluster)?;
        let ari = match &dataset.labels {
            Some(truth) => Some(adjusted_rand_index(truth, &cluster.modal.assignments)?),
            None => None,
        };
        if let Some(ari) = ari {
            #[derive(Serialize)]
            struct Evaluation {
                ari: f64,
                n_modes: usize,
            }
            let eval = Evaluation { ari, n_modes: cluster.modal.n_modes };
            write_atomic(&dir.join("evaluation.json"), &to_json(&eval)?)?;
        }
        projection_sweep_row(&mut sweep, d, &project);
        let ari_text = ari.map(|a| a.to_string()).unwrap_or_else(|| "NA".into());
        writeln!(sweep, ",{},{ari_text}", cluster.modal.n_modes).unwrap();
        match ari {
            Some(a) => println!(
                "d={d}: negentropy {:.4}, {} modes, ARI {a:.4}",
                project.pursuit.negentropy, cluster.modal.n_modes
            ),
            None => println!("d={d}: negentropy {:.4}, {} modes", project.pursuit.negentropy, cluster.modal.n_modes),
        }
    }
    if cfg.pipeline.dims.len() > 1 {
        write_atomic(&args.output_dir.join("sweep.csv"), &sweep)?;
    }
    write_manifest("pipeline", args, input, &cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let dataset = match args.generator {
        Generator::TwoGroup => gen_two_group(args.seed),
        Generator::Block8 => gen_block_clusters(args.seed),
    };
    let text = dataset.to_csv();
    match &args.output {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Single-column files are read as label lists; wider files contribute the
/// named label column.
fn read_labels(path: &Path, column: &str) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ppmem::Error::Io { path: path.display().to_string(), source })?;
    let first = text.lines().next().unwrap_or("");
    if !first.contains(',') {
        return Ok(load_labels(path)?);
    }
    let ds = parse_csv(&text, Some(column), &path.display().to_string())?;
    Ok(ds.labels.expect("label column requested"))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let a = read_labels(&args.labels_a, &args.label_column)?;
    let b = read_labels(&args.labels_b, &args.label_column)?;
    if a.len() != b.len() {
        return Err(CliError::Usage(format!(
            "label files differ in length: {} has {}, {} has {}",
            args.labels_a.display(),
            a.len(),
            args.labels_b.display(),
            b.len()
        )));
    }
    println!("{:.4}", adjusted_rand_index(&a, &b)?);
    Ok(())
}

