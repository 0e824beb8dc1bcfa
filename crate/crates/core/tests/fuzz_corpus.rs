//! Replays the fuzz seed corpus through the parsers. Seeds named
//! `truncated*` must be rejected; every other seed must load.

use std::path::{Path, PathBuf};

use doppler_har::classify::Model;
use doppler_har::doppler::read_trace_csv;
use doppler_har::io::{parse_scenario, read_cfr, PipelineConfig};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let bytes = std::fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn check<T, E: std::fmt::Display>(target: &str, parse: impl Fn(&[u8]) -> Result<T, E>) {
    for (path, bytes) in seeds(target) {
        let name = path.file_name().unwrap().to_string_lossy();
        match (parse(&bytes), name.starts_with("truncated")) {
            (Ok(_), false) | (Err(_), true) => {}
            (Ok(_), true) => panic!("{name} should be rejected"),
            (Err(e), false) => panic!("{name}: {e}"),
        }
    }
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn cfr_file_seeds() {
    // first byte selects the sign fix, as in the fuzz target
    check("cfr_file", |b| read_cfr(&b[1..], b[0] & 1 == 1));
}

#[test]
fn config_seeds() {
    check("config_toml", |b| PipelineConfig::from_toml(text(b)));
}

#[test]
fn scenario_seeds() {
    check("scenario_toml", |b| parse_scenario(text(b)));
}

#[test]
fn trace_csv_seeds() {
    check("trace_csv", |b| read_trace_csv(b));
}

#[test]
fn checkpoint_seeds() {
    check("checkpoint", |b| Model::read(b));
}
