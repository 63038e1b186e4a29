//! File formats: binary timestamp streams, histogram and point CSVs, and
//! TOML experiment configurations.

mod config;
mod histogram_csv;
mod points;
mod timestamps;

pub use config::{parse_config, read_config, CorrelatorConfig, ExperimentConfig};
pub use histogram_csv::{parse_histogram_csv, read_histogram_csv, render_histogram_csv, write_histogram_csv};
pub use points::{parse_points, read_points, render_points, write_points, PointColumns};
pub use timestamps::{
    decode_timestamps, encode_timestamps, read_timestamps, write_timestamps, FORMAT_VERSION, MAGIC, RECORD_BYTES,
};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
