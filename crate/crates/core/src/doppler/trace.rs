use std::collections::VecDeque;

use super::{threshold_and_scale, window_matrix, DbVector, DopplerProcessor, DopplerVector};
use crate::sanitize::SanitizedCfr;
use crate::{Error, Result};

/// `N_w × N_D` stack of thresholded Doppler vectors in dB (floor at
/// `-threshold_db`, peak of each row at 0 dB).
#[derive(Clone, Debug, PartialEq)]
pub struct DopplerTrace {
    pub rows: usize,
    pub cols: usize,
    /// First packet of the first window in the trace.
    pub start_packet: u64,
    pub threshold_db: f64,
    pub data: Vec<f64>,
}

impl DopplerTrace {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Values mapped linearly from `[-threshold_db, 0]` dB to `[0, 1]`.
    pub fn unit_scaled(&self) -> Vec<f64> {
        if self.threshold_db == 0.0 {
            return self.data.iter().map(|&v| if v >= 0.0 { 1.0 } else { 0.0 }).collect();
        }
        self.data
            .iter()
            .map(|&v| ((v + self.threshold_db) / self.threshold_db).clamp(0.0, 1.0))
            .collect()
    }
}

/// Sliding stack of the last `N_w` vectors; emits a trace on every push once
/// full.
#[derive(Clone, Debug)]
pub struct TraceBuilder {
    trace_len: usize,
    threshold_db: f64,
    rows: VecDeque<(u64, DbVector)>,
}

impl TraceBuilder {
    pub fn new(trace_len: usize, threshold_db: f64) -> Self {
        TraceBuilder {
            trace_len,
            threshold_db,
            rows: VecDeque::with_capacity(trace_len + 1),
        }
    }

    pub fn push(&mut self, start_packet: u64, vector: &DopplerVector) -> Option<DopplerTrace> {
        self.push_scaled(start_packet, threshold_and_scale(vector, self.threshold_db))
    }

    pub fn push_scaled(&mut self, start_packet: u64, vector: DbVector) -> Option<DopplerTrace> {
        self.rows.push_back((start_packet, vector));
        if self.rows.len() > self.trace_len {
            self.rows.pop_front();
        }
        if self.rows.len() < self.trace_len {
            return None;
        }
        let cols = self.rows[0].1.values.len();
        Some(DopplerTrace {
            rows: self.trace_len,
            cols,
            start_packet: self.rows[0].0,
            threshold_db: self.threshold_db,
            data: self.rows.iter().flat_map(|(_, v)| v.values.iter().copied()).collect(),
        })
    }
}

/// Per-antenna stage turning sanitized packets into Doppler vectors over a
/// sliding window of `N` packets advanced by `stride`.
#[derive(Clone, Debug)]
pub struct DopplerStream {
    processor: DopplerProcessor,
    buffer: VecDeque<SanitizedCfr>,
    pending: usize,
}

impl DopplerStream {
    pub fn new(processor: DopplerProcessor) -> Self {
        DopplerStream {
            processor,
            buffer: VecDeque::new(),
            pending: 0,
        }
    }

    /// Returns `(first packet of window, vector)` when a window completes.
    pub fn push(&mut self, packet: SanitizedCfr) -> Result<Option<(u64, DopplerVector)>> {
        if let Some(last) = self.buffer.back() {
            if packet.packet_index != last.packet_index + 1 {
                return Err(Error::NonContiguousWindow {
                    expected: last.packet_index + 1,
                    found: packet.packet_index,
                });
            }
        }
        let params = self.processor.params();
        self.buffer.push_back(packet);
        if self.buffer.len() > params.window_len {
            self.buffer.pop_front();
            self.pending += 1;
        }
        if self.buffer.len() < params.window_len {
            return Ok(None);
        }
        if !self.pending.is_multiple_of(params.stride) {
            return Ok(None);
        }
        let window = window_matrix(self.buffer.make_contiguous())?;
        let vector = self.processor.doppler_vector(&window)?;
        Ok(Some((window.start_packet, vector)))
    }
}
