//! Trace export: CSV with a parameter header, and 8-bit grayscale PGM.

use std::io::{BufRead, Write};

use super::DopplerTrace;
use crate::{Error, Result};

/// Header line `# rows=..,cols=..,start_packet=..,threshold_db=..`, then one
/// comma-separated line of dB values per Doppler vector.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &DopplerTrace) -> Result<()> {
    writeln!(
        out,
        "# rows={},cols={},start_packet={},threshold_db={}",
        trace.rows, trace.cols, trace.start_packet, trace.threshold_db
    )?;
    for r in 0..trace.rows {
        let line: Vec<String> = trace.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_trace_csv<R: BufRead>(input: R) -> Result<DopplerTrace> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty trace file".into()))??;
    let body = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing trace header".into()))?;
    let (mut rows, mut cols, mut start, mut thr) = (None, None, None, None);
    for field in body.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header field {field:?}")))?;
        let bad = || Error::Format(format!("bad value for {key}"));
        match key.trim() {
            "rows" => rows = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
            "cols" => cols = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
            "start_packet" => start = Some(value.trim().parse::<u64>().map_err(|_| bad())?),
            "threshold_db" => thr = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
            other => return Err(Error::Format(format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks {k}"));
    let rows = rows.ok_or_else(|| missing("rows"))?;
    let cols = cols.ok_or_else(|| missing("cols"))?;
    let start_packet = start.ok_or_else(|| missing("start_packet"))?;
    let threshold_db = thr.ok_or_else(|| missing("threshold_db"))?;
    if rows.checked_mul(cols).is_none_or(|n| n > 1 << 26) {
        return Err(Error::Format("trace too large".into()));
    }
    let mut data = Vec::with_capacity((rows * cols).min(1 << 16));
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i >= rows {
            return Err(Error::Format("more rows than declared".into()));
        }
        let before = data.len();
        for v in line.split(',') {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {v:?} on row {i}")))?;
            if !x.is_finite() {
                return Err(Error::Format(format!("non-finite value on row {i}")));
            }
            data.push(x);
        }
        if data.len() - before != cols {
            return Err(Error::Format(format!(
                "row {i} has {} values, expected {cols}",
                data.len() - before
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Format(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Ok(DopplerTrace {
        rows,
        cols,
        start_packet,
        threshold_db,
        data,
    })
}

/// Binary PGM, one pixel per bin, one image row per Doppler vector; the dB
/// range `[-threshold_db, 0]` maps linearly to `[0, 255]`.
pub fn write_trace_pgm<W: Write>(mut out: W, trace: &DopplerTrace) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", trace.cols, trace.rows)?;
    let pixels: Vec<u8> = trace.unit_scaled().iter().map(|v| (v * 255.0).round() as u8).collect();
    out.write_all(&pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> DopplerTrace {
        DopplerTrace {
            rows: 2,
            cols: 3,
            start_packet: 9,
            threshold_db: 12.0,
            data: vec![0.0, -12.0, -3.25, -6.0, 0.0, -12.0],
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace()).unwrap();
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), trace());
    }

    #[test]
    fn csv_rejects_short_rows() {
        let text = "# rows=2,cols=3,start_packet=0,threshold_db=12\n0,0,0\n0,0\n";
        assert!(read_trace_csv(text.as_bytes()).is_err());
        let text = "# rows=2,cols=3,start_packet=0,threshold_db=12\n0,0,0\n";
        assert!(read_trace_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn pgm_maps_floor_to_black() {
        let mut buf = Vec::new();
        write_trace_pgm(&mut buf, &trace()).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[255, 0, 186, 128, 255, 0]);
    }
}
