//! File formats, model artifacts, the JSON prediction service and the
//! command-line driver around `wqnet-core`.

pub mod artifact;
pub mod cli;
pub mod io;
pub mod report;
pub mod service;

pub use artifact::{load_artifact, save_artifact, ArtifactError};
pub use io::{load_csv, write_csv, CsvError};
