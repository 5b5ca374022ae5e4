//! Configuration parsing and deterministic serialization of trajectories,
//! compatibility reports, snapshots, and run manifests.

mod config;
mod manifest;
mod snapshot;
mod timeseries;

pub use config::{
    parse_config, ConfigError, ConfigErrors, DomainConfig, ExperimentConfig, FlowConfig,
    InitialDataConfig, OutputConfig, RunConfig, ValidatedRun,
};
pub use manifest::{checksum_file, sha256_hex, RunManifest};
pub use snapshot::{read_snapshot, snapshot_from_bytes, snapshot_to_bytes, write_snapshot,
    SNAPSHOT_SPHERE_TOL};
pub use timeseries::{parse_timeseries, timeseries_to_string, write_timeseries,
    TIMESERIES_HEADER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl IoError {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        IoError::File { path: path.display().to_string(), source }
    }
}
