use crate::doppler::{DopplerProcessor, DopplerStream, DopplerTrace, TraceBuilder};
use crate::sanitize::{PathDecomposition, Sanitizer};
use crate::sim::CfrPacket;
use crate::{Error, Result};

/// One antenna's chain: sanitize → Doppler vector per window → trace.
/// Solves are warm-started from the previous packet.
#[derive(Debug)]
pub struct AntennaLane<'a> {
    sanitizer: &'a Sanitizer,
    stream: DopplerStream,
    traces: TraceBuilder,
    warm: Option<PathDecomposition>,
}

impl<'a> AntennaLane<'a> {
    pub fn new(sanitizer: &'a Sanitizer, processor: DopplerProcessor) -> Self {
        let params = processor.params().clone();
        AntennaLane {
            sanitizer,
            stream: DopplerStream::new(processor),
            traces: TraceBuilder::new(params.trace_len, params.threshold_db),
            warm: None,
        }
    }

    /// Returns a trace whenever a new Doppler vector completes one.
    pub fn push(&mut self, packet: &CfrPacket) -> Result<Option<DopplerTrace>> {
        let (clean, dec) = self
            .sanitizer
            .sanitize_warm(packet, self.warm.as_ref())
            .map_err(|e| e.in_stage("sanitize"))?;
        self.warm = Some(dec);
        let Some((start, vector)) = self.stream.push(clean).map_err(|e| e.in_stage("doppler"))? else {
            return Ok(None);
        };
        Ok(self.traces.push(start, &vector))
    }
}

/// Runs a lane over a packet stream and returns every trace.
pub fn lane_traces<I>(sanitizer: &Sanitizer, processor: DopplerProcessor, packets: I) -> Result<Vec<DopplerTrace>>
where
    I: IntoIterator<Item = Result<CfrPacket>>,
{
    let mut lane = AntennaLane::new(sanitizer, processor);
    let mut out = Vec::new();
    for p in packets {
        if let Some(t) = lane.push(&p.map_err(|e: Error| e.in_stage("ingest"))?)? {
            out.push(t);
        }
    }
    Ok(out)
}
