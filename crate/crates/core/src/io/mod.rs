//! File formats, configuration, synthetic datasets and the end-to-end
//! pipeline.

mod cfr_file;
mod config;
mod dataset;
mod lane;
mod pipeline;

pub use cfr_file::{apply_sign_fix, read_cfr, write_cfr, CfrHeader, CfrReader, CfrWriter, SIGN_FIX_RANGE};
pub use config::PipelineConfig;
pub use dataset::{generate_dataset, load_trace_dir, split, DatasetSpec, LabeledTrace};
pub use lane::{lane_traces, AntennaLane};
pub use pipeline::{run_pipeline, PipelineInput, PipelineOptions, PipelineOutput, Until, WindowLabel};

use std::path::Path;

use crate::sim::Scenario;
use crate::{Error, Result};

/// Parses a scenario file: top-level keys plus `[[paths]]` tables, with
/// optional `[ofdm]` and `[offsets]` tables.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}
