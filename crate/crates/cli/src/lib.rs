//! Load-factor sweep benchmark for the tombstone quotient filter: workload runner,
//! CSV persistence, and a static SVG comparison plot.

use std::path::PathBuf;

use graveyard_core::FilterError;

pub mod csv_io;
pub mod plot;
pub mod shape;
pub mod workload;

pub use csv_io::{emit_csv, read_csv, write_csv, CSV_HEADER};
pub use plot::{emit_plot, render_svg};
pub use shape::{insert_shape, ShapeRow};
pub use workload::{run_contender, run_workload, BenchSample, OpKind, WorkloadKind, WorkloadSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}:{line}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },
}
