use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ppmem::mixture::ModelSelection;
use serde::Serialize;

use crate::CliError;

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Core(ppmem::Error::Io { path: path.display().to_string(), source: e });
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    text.push('\n');
    Ok(text)
}

/// One row per grid cell: `G,family,logL,nu,BIC,converged`; failed cells
/// carry `NA`.
pub fn bic_grid_csv(selection: &ModelSelection) -> String {
    let mut out = String::from("G,family,logL,nu,BIC,converged\n");
    for cell in &selection.cells {
        match &cell.outcome {
            Ok(fit) => writeln!(
                out,
                "{},{},{},{},{},{}",
                cell.n_components, cell.family, fit.log_likelihood, fit.n_parameters, fit.bic, fit.converged
            ),
            Err(_) => writeln!(out, "{},{},NA,NA,NA,false", cell.n_components, cell.family),
        }
        .unwrap();
    }
    out
}
