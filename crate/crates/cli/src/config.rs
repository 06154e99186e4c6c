use std::path::Path;

use ppmem::mixture::CovarianceFamily;
use ppmem::pipeline::PipelineConfig;

use crate::args::RunArgs;
use crate::CliError;

/// Everything a run needs beyond the numeric pipeline settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub label_column: Option<String>,
}

/// Defaults, then the config file, then command-line flags.
pub fn resolve(args: &RunArgs) -> Result<RunConfig, CliError> {
    let (mut pipeline, mut label_column) = match &args.config {
        Some(path) => read_config_file(path)?,
        None => (PipelineConfig::default(), None),
    };
    if let Some(seed) = args.seed {
        pipeline.seed = seed;
    }
    if let Some(dim) = &args.dim {
        pipeline.dims = parse_list(dim, "--dim")?;
    }
    if args.no_standardize {
        pipeline.standardize = false;
    }
    if let Some(c) = &args.components {
        pipeline.components = parse_list(c, "--components")?;
    }
    if let Some(f) = &args.families {
        pipeline.families = parse_families(f)?;
    }
    if args.record_paths {
        pipeline.mem.record_paths = true;
    }
    if args.label_column.is_some() {
        label_column = args.label_column.clone();
    }
    pipeline.validate().map_err(CliError::Core)?;
    Ok(RunConfig { pipeline, label_column })
}

fn read_config_file(path: &Path) -> Result<(PipelineConfig, Option<String>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?;
    let label_column = match table.remove("label_column") {
        None => None,
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::Usage("label_column must be a string".into())),
    };
    let pipeline: PipelineConfig = table
        .try_into()
        .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?;
    Ok((pipeline, label_column))
}

/// `3`, `1..5`, `1-5` (inclusive ranges) or `1,2,4`.
pub fn parse_list(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("{flag}: cannot parse {text:?}; use N, A..B or a comma list"));
    let text = text.trim();
    let range = text.split_once("..").or_else(|| text.split_once('-'));
    if let Some((a, b)) = range {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

pub fn parse_families(text: &str) -> Result<Vec<CovarianceFamily>, CliError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(CovarianceFamily::ALL.to_vec());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--families: unknown family {s:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("3", "x").unwrap(), vec![3]);
        assert_eq!(parse_list("1..4", "x").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_list("1..=2", "x").unwrap(), vec![1, 2]);
        assert_eq!(parse_list("2-3", "x").unwrap(), vec![2, 3]);
        assert_eq!(parse_list("1, 5", "x").unwrap(), vec![1, 5]);
        assert!(parse_list("5..1", "x").is_err());
        assert!(parse_list("a", "x").is_err());
    }

    #[test]
    fn families() {
        assert_eq!(parse_families("all").unwrap().len(), 6);
        assert_eq!(parse_families("eii,VVV").unwrap(), vec![CovarianceFamily::EII, CovarianceFamily::VVV]);
        assert!(parse_families("XYZ").is_err());
    }
}
