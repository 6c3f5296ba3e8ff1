//! Experiment plumbing: parameter sweeps over seeds and schemes, convergence
//! traces, the brute-force subcarrier oracle and CSV output.

pub mod oracle;
pub mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::scenario::ConfigError;
use crate::solvers::SolverError;

pub use oracle::{oracle_p2_grid, OracleResult};
pub use sweep::{
    convergence_trace, run_sweep, summarize, Measure, SummaryRow, SweepParam, SweepRow, SweepSpec, TraceRow,
    WORKERS_ENV,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Writes rows with a header line; columns follow the field order of `T`.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(rows, BufWriter::new(File::create(path)?))
}
