//! Native binary CFR stream format.
//!
//! ```text
//! magic "CFRF" | version u16 (1) | K u16
//! n_used u16 | used sub-channel indices n_used × i16 (sorted)
//! N_ant u16 | T f64 | T_c f64 | f_c f64 | record count u64
//! records: packet index u32 | antenna u16 | n_used × (re f32, im f32)
//! ```
//! Little-endian throughout.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::sim::{CfrPacket, OfdmConfig};
use crate::{Complex64, Error, Result};

const MAGIC: &[u8; 4] = b"CFRF";
const VERSION: u16 = 1;

/// Sub-channels whose sign is inverted by some capture tools.
pub const SIGN_FIX_RANGE: std::ops::RangeInclusive<i32> = -63..=122;

#[derive(Clone, Debug, PartialEq)]
pub struct CfrHeader {
    pub subchannels: u16,
    pub used_subchannels: Vec<i32>,
    pub n_antennas: u16,
    pub symbol_time: f64,
    pub estimate_interval: f64,
    pub carrier_freq: f64,
    pub records: u64,
}

impl CfrHeader {
    pub fn from_ofdm(cfg: &OfdmConfig, n_antennas: usize, records: u64) -> Self {
        CfrHeader {
            subchannels: cfg.subchannels as u16,
            used_subchannels: cfg.used_subchannels.clone(),
            n_antennas: n_antennas as u16,
            symbol_time: cfg.symbol_time,
            estimate_interval: cfg.estimate_interval,
            carrier_freq: cfg.carrier_freq,
            records,
        }
    }

    /// OFDM numerology described by the header. The cyclic prefix is not
    /// stored and is taken as `T/4`.
    pub fn ofdm(&self) -> OfdmConfig {
        OfdmConfig {
            subchannels: self.subchannels as usize,
            symbol_time: self.symbol_time,
            cyclic_prefix: self.symbol_time / 4.0,
            carrier_freq: self.carrier_freq,
            estimate_interval: self.estimate_interval,
            used_subchannels: self.used_subchannels.clone(),
        }
    }

    pub fn record_len(&self) -> usize {
        4 + 2 + 8 * self.used_subchannels.len()
    }

    fn validate(&self) -> Result<()> {
        if self.used_subchannels.is_empty() {
            return Err(Error::Format("empty sub-channel list".into()));
        }
        if self.used_subchannels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("sub-channel list not strictly increasing".into()));
        }
        if self.n_antennas == 0 {
            return Err(Error::Format("zero antennas".into()));
        }
        for (name, v) in [
            ("symbol time", self.symbol_time),
            ("estimate interval", self.estimate_interval),
            ("carrier frequency", self.carrier_freq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Format(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        self.validate()?;
        let n_used = u16::try_from(self.used_subchannels.len())
            .map_err(|_| Error::invalid("sub-channels", "more than 65535"))?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&self.subchannels.to_le_bytes())?;
        out.write_all(&n_used.to_le_bytes())?;
        for &k in &self.used_subchannels {
            let k = i16::try_from(k).map_err(|_| Error::invalid("sub-channel", format!("{k} out of i16 range")))?;
            out.write_all(&k.to_le_bytes())?;
        }
        out.write_all(&self.n_antennas.to_le_bytes())?;
        out.write_all(&self.symbol_time.to_le_bytes())?;
        out.write_all(&self.estimate_interval.to_le_bytes())?;
        out.write_all(&self.carrier_freq.to_le_bytes())?;
        out.write_all(&self.records.to_le_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let magic: [u8; 4] = take(input, "header")?;
        if &magic != MAGIC {
            return Err(Error::Format("not a CFR file (bad magic)".into()));
        }
        let version = u16::from_le_bytes(take(input, "header")?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported CFR file version {version}")));
        }
        let subchannels = u16::from_le_bytes(take(input, "header")?);
        let n_used = u16::from_le_bytes(take(input, "header")?) as usize;
        let mut used_subchannels = Vec::with_capacity(n_used);
        for _ in 0..n_used {
            used_subchannels.push(i16::from_le_bytes(take(input, "header")?) as i32);
        }
        let header = CfrHeader {
            subchannels,
            used_subchannels,
            n_antennas: u16::from_le_bytes(take(input, "header")?),
            symbol_time: f64::from_le_bytes(take(input, "header")?),
            estimate_interval: f64::from_le_bytes(take(input, "header")?),
            carrier_freq: f64::from_le_bytes(take(input, "header")?),
            records: u64::from_le_bytes(take(input, "header")?),
        };
        header.validate()?;
        Ok(header)
    }
}

fn take<const N: usize, R: Read>(input: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("{what} truncated")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

/// Streaming writer; checks the record count against the header on
/// [`CfrWriter::finish`].
pub struct CfrWriter<W: Write> {
    out: W,
    header: CfrHeader,
    written: u64,
    buf: Vec<u8>,
}

impl<W: Write> CfrWriter<W> {
    pub fn new(mut out: W, header: CfrHeader) -> Result<Self> {
        header.write(&mut out)?;
        Ok(CfrWriter {
            out,
            buf: Vec::with_capacity(header.record_len()),
            header,
            written: 0,
        })
    }

    pub fn write(&mut self, packet: &CfrPacket) -> Result<()> {
        let n_used = self.header.used_subchannels.len();
        if packet.values.len() != n_used {
            return Err(Error::ShapeMismatch {
                expected: format!("{n_used} values"),
                found: packet.values.len().to_string(),
            });
        }
        if packet.antenna_index >= self.header.n_antennas {
            return Err(Error::invalid(
                "antenna index",
                format!("{} ≥ {}", packet.antenna_index, self.header.n_antennas),
            ));
        }
        let index = u32::try_from(packet.packet_index).map_err(|_| Error::invalid("packet index", "exceeds u32"))?;
        if self.written >= self.header.records {
            return Err(Error::invalid("record count", "more records than declared"));
        }
        self.buf.clear();
        self.buf.extend_from_slice(&index.to_le_bytes());
        self.buf.extend_from_slice(&packet.antenna_index.to_le_bytes());
        for v in &packet.values {
            self.buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            self.buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.records {
            return Err(Error::Truncated {
                expected: self.header.records,
                found: self.written,
            });
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader yielding packets in file order.
pub struct CfrReader<R: Read> {
    input: R,
    header: CfrHeader,
    read: u64,
    sign_fix: bool,
    seen: HashSet<(u64, u16)>,
    buf: Vec<u8>,
    failed: bool,
}

impl<R: Read> CfrReader<R> {
    /// With `sign_fix`, values on sub-channels −63..=122 are negated as they
    /// are loaded (compatibility with captures from the common extraction
    /// tool).
    pub fn new(mut input: R, sign_fix: bool) -> Result<Self> {
        let header = CfrHeader::read(&mut input)?;
        Ok(CfrReader {
            input,
            buf: vec![0; header.record_len()],
            header,
            read: 0,
            sign_fix,
            seen: HashSet::new(),
            failed: false,
        })
    }

    pub fn header(&self) -> &CfrHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<CfrPacket> {
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.input.read(&mut self.buf[filled..]) {
                Ok(0) => {
                    return Err(Error::Truncated {
                        expected: self.header.records,
                        found: self.read,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let b = &self.buf;
        let packet_index = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as u64;
        let antenna_index = u16::from_le_bytes([b[4], b[5]]);
        if antenna_index >= self.header.n_antennas {
            return Err(Error::Format(format!("antenna {antenna_index} outside header range")));
        }
        if !self.seen.insert((packet_index, antenna_index)) {
            return Err(Error::DuplicateRecord {
                packet: packet_index,
                antenna: antenna_index,
            });
        }
        let f = |i: usize| f32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]) as f64;
        let values = self
            .header
            .used_subchannels
            .iter()
            .enumerate()
            .map(|(j, k)| {
                let v = Complex64::new(f(6 + 8 * j), f(10 + 8 * j));
                if self.sign_fix && SIGN_FIX_RANGE.contains(k) {
                    -v
                } else {
                    v
                }
            })
            .collect();
        self.read += 1;
        Ok(CfrPacket {
            packet_index,
            antenna_index,
            values,
        })
    }
}

impl<R: Read> Iterator for CfrReader<R> {
    type Item = Result<CfrPacket>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.read >= self.header.records {
            return None;
        }
        let item = self.next_record();
        self.failed = item.is_err();
        Some(item)
    }
}

/// Reads a whole file into memory.
pub fn read_cfr<R: Read>(input: R, sign_fix: bool) -> Result<(CfrHeader, Vec<CfrPacket>)> {
    let reader = CfrReader::new(input, sign_fix)?;
    let header = reader.header().clone();
    let packets = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, packets))
}

pub fn write_cfr<W: Write>(out: W, header: &CfrHeader, packets: &[CfrPacket]) -> Result<W> {
    let header = CfrHeader {
        records: packets.len() as u64,
        ..header.clone()
    };
    let mut w = CfrWriter::new(out, header)?;
    for p in packets {
        w.write(p)?;
    }
    w.finish()
}

/// Negates the values on sub-channels −63..=122 in place. Applying it twice
/// restores the input.
pub fn apply_sign_fix(packet: &mut CfrPacket, used_subchannels: &[i32]) {
    for (v, k) in packet.values.iter_mut().zip(used_subchannels) {
        if SIGN_FIX_RANGE.contains(k) {
            *v = -*v;
        }
    }
}
