//! Threaded end-to-end run: packets → per-antenna lanes → fusion.
//!
//! A reader thread feeds one bounded queue per antenna; each lane sanitizes,
//! builds Doppler traces and (optionally) classifies them, then reports to
//! the fusion stage on the calling thread.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};

use serde::Serialize;

use super::cfr_file::CfrReader;
use super::lane::AntennaLane;
use super::PipelineConfig;
use crate::classify::{fuse, ActivityVector, FusionRule, Model};
use crate::doppler::{write_trace_csv, write_trace_pgm, DopplerProcessor, DopplerTrace};
use crate::sanitize::Sanitizer;
use crate::sim::{simulate, CfrPacket, OfdmConfig, Scenario};
use crate::{Error, Result};

const QUEUE_DEPTH: usize = 64;

pub enum PipelineInput {
    Scenario(Scenario),
    File { path: PathBuf, sign_fix: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Until {
    Doppler,
    Fuse,
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub until: Until,
    /// Directory for CSV and PGM exports of the classified traces.
    pub export: Option<PathBuf>,
}

/// Fused decision for one window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowLabel {
    pub start_packet: u64,
    /// `start_packet · T_c`, seconds.
    pub timestamp: f64,
    pub label: usize,
    pub class_name: String,
    pub rule: FusionRule,
    pub antenna_labels: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineOutput {
    pub labels: Vec<WindowLabel>,
    /// Traces selected for classification/export, summed over antennas.
    pub traces: usize,
    pub exported: Vec<PathBuf>,
}

struct LaneReport {
    antenna: usize,
    start_packet: u64,
    activity: Option<ActivityVector>,
    exported: Vec<PathBuf>,
}

enum Source {
    Scenario(Scenario),
    File(CfrReader<BufReader<File>>),
}

fn open_input(input: PipelineInput) -> Result<(OfdmConfig, usize, Source)> {
    match input {
        PipelineInput::Scenario(scenario) => {
            scenario.validate().map_err(|e| e.in_stage("simulate"))?;
            Ok((scenario.ofdm.clone(), scenario.n_antennas, Source::Scenario(scenario)))
        }
        PipelineInput::File { path, sign_fix } => {
            let file = File::open(&path).map_err(|e| Error::from(e).in_stage("ingest"))?;
            let reader = CfrReader::new(BufReader::new(file), sign_fix).map_err(|e| e.in_stage("ingest"))?;
            let ofdm = reader.header().ofdm();
            let n_ant = reader.header().n_antennas as usize;
            Ok((ofdm, n_ant, Source::File(reader)))
        }
    }
}

/// Reader stage. Stops early (without error) when a lane has hung up,
/// which only happens after that lane failed.
fn feed(source: Source, lanes: Vec<SyncSender<CfrPacket>>) -> Result<()> {
    let send = |p: CfrPacket| -> bool {
        match lanes.get(p.antenna_index as usize) {
            Some(tx) => tx.send(p).is_ok(),
            None => false,
        }
    };
    match source {
        Source::Scenario(scenario) => {
            for p in simulate(&scenario).map_err(|e| e.in_stage("simulate"))? {
                if !send(p) {
                    break;
                }
            }
        }
        Source::File(reader) => {
            for p in reader {
                if !send(p.map_err(|e| e.in_stage("ingest"))?) {
                    break;
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_lane(
    antenna: usize,
    rx: Receiver<CfrPacket>,
    sanitizer: &Sanitizer,
    processor: DopplerProcessor,
    model: Option<&Model>,
    every: usize,
    export: Option<&Path>,
    tx: SyncSender<Result<LaneReport>>,
) {
    let mut lane = AntennaLane::new(sanitizer, processor);
    let mut index = 0usize;
    for packet in rx {
        let trace = match lane.push(&packet) {
            Ok(Some(t)) => t,
            Ok(None) => continue,
            Err(e) => {
                let _ = tx.send(Err(e));
                return;
            }
        };
        let selected = index.is_multiple_of(every);
        index += 1;
        if !selected {
            continue;
        }
        let report = classify_trace(antenna, &trace, model, export);
        let failed = report.is_err();
        if tx.send(report).is_err() || failed {
            return;
        }
    }
}

fn classify_trace(
    antenna: usize,
    trace: &DopplerTrace,
    model: Option<&Model>,
    export: Option<&Path>,
) -> Result<LaneReport> {
    let mut exported = Vec::new();
    if let Some(dir) = export {
        let stem = format!("trace_a{antenna}_p{:08}", trace.start_packet);
        let csv = dir.join(format!("{stem}.csv"));
        write_trace_csv(BufWriter::new(File::create(&csv)?), trace)?;
        let pgm = dir.join(format!("{stem}.pgm"));
        write_trace_pgm(BufWriter::new(File::create(&pgm)?), trace)?;
        exported.extend([csv, pgm]);
    }
    let activity = match model {
        Some(m) => {
            let input: Vec<f32> = trace.unit_scaled().into_iter().map(|v| v as f32).collect();
            Some(m.network.predict(&input).map_err(|e| e.in_stage("classify"))?)
        }
        None => None,
    };
    Ok(LaneReport {
        antenna,
        start_packet: trace.start_packet,
        activity,
        exported,
    })
}

pub fn run_pipeline(
    cfg: &PipelineConfig,
    input: PipelineInput,
    model: Option<&Model>,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let model = match options.until {
        Until::Doppler => None,
        Until::Fuse => {
            let model = model.ok_or_else(|| Error::invalid("model", "required unless stopping at doppler"))?;
            let spec = model.network.spec();
            if (spec.input_rows, spec.input_cols) != (cfg.trace_len, cfg.fft_len) {
                return Err(Error::ShapeMismatch {
                    expected: format!("model input {}×{}", spec.input_rows, spec.input_cols),
                    found: format!("traces {}×{}", cfg.trace_len, cfg.fft_len),
                });
            }
            Some(model)
        }
    };
    if let Some(dir) = &options.export {
        std::fs::create_dir_all(dir)?;
    }
    let (ofdm, n_ant, source) = open_input(input)?;
    let sanitizer = Sanitizer::new(&ofdm, cfg.sanitizer()).map_err(|e| e.in_stage("sanitize"))?;
    let processor = DopplerProcessor::new(cfg.doppler())?;
    let every = cfg.classify_every();

    std::thread::scope(|s| {
        let (report_tx, report_rx) = sync_channel::<Result<LaneReport>>(QUEUE_DEPTH);
        let mut lanes = Vec::with_capacity(n_ant);
        for antenna in 0..n_ant {
            let (tx, rx) = sync_channel::<CfrPacket>(QUEUE_DEPTH);
            lanes.push(tx);
            let report_tx = report_tx.clone();
            let (sanitizer, processor) = (&sanitizer, processor.clone());
            let export = options.export.as_deref();
            s.spawn(move || run_lane(antenna, rx, sanitizer, processor, model, every, export, report_tx));
        }
        drop(report_tx);
        let reader = s.spawn(move || feed(source, lanes));

        let fused = fusion_stage(report_rx, n_ant, model, cfg.estimate_interval);
        let read = reader.join().expect("reader panicked");
        // a lane failure usually explains a reader hang-up, so report it first
        let out = fused?;
        read?;
        Ok(out)
    })
}

/// Single join point: gathers one report per antenna per window and fuses.
fn fusion_stage(
    rx: Receiver<Result<LaneReport>>,
    n_ant: usize,
    model: Option<&Model>,
    estimate_interval: f64,
) -> Result<PipelineOutput> {
    let mut out = PipelineOutput::default();
    let mut pending: BTreeMap<u64, Vec<(usize, ActivityVector)>> = BTreeMap::new();
    for report in rx {
        let report = report?;
        out.traces += 1;
        out.exported.extend(report.exported);
        let (Some(activity), Some(model)) = (report.activity, model) else {
            continue;
        };
        let slot = pending.entry(report.start_packet).or_default();
        slot.push((report.antenna, activity));
        if slot.len() == n_ant {
            let mut votes = pending.remove(&report.start_packet).unwrap_or_default();
            votes.sort_by_key(|(a, _)| *a);
            let vectors: Vec<ActivityVector> = votes.into_iter().map(|(_, v)| v).collect();
            let fused = fuse(&vectors).map_err(|e| e.in_stage("fuse"))?;
            out.labels.push(WindowLabel {
                start_packet: report.start_packet,
                timestamp: report.start_packet as f64 * estimate_interval,
                label: fused.label,
                class_name: model.class_names[fused.label].clone(),
                rule: fused.rule_used,
                antenna_labels: vectors.iter().map(|v| v.label).collect(),
            });
        }
    }
    out.labels.sort_by_key(|l| l.start_packet);
    out.exported.sort();
    Ok(out)
}
