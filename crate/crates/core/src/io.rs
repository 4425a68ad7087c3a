//! Artifact files: atomic writes, CSV traces and JSON documents.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

/// 17 significant digits, enough to reproduce any double exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text of a trace: a `time` column followed by every channel, one row per
/// sample, LF line endings.
pub fn trace_to_csv(tr: &Trace) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend(tr.names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let cols: Vec<&[f64]> = tr.channels().map(|(_, c)| c).collect();
    for k in 0..tr.len() {
        let mut row = Vec::with_capacity(cols.len() + 1);
        row.push(fmt_f64(tr.time(k)));
        row.extend(cols.iter().map(|c| fmt_f64(c[k])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Scenario {
        path: "csv".into(),
        message: e.to_string(),
    }
}

pub fn write_trace_csv(tr: &Trace, path: &Path) -> Result<()> {
    write_atomic(path, &trace_to_csv(tr)?)
}

/// Reads a trace written by [`write_trace_csv`]. The sample time is taken from
/// the first two time stamps (1 when there is a single row).
pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let text = std::fs::read(path)?;
    parse_trace_csv(&text, &path.display().to_string())
}

pub fn parse_trace_csv(bytes: &[u8], origin: &str) -> Result<Trace> {
    let bad = |m: String| Error::Scenario {
        path: origin.to_string(),
        message: m,
    };
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.first().map(String::as_str) != Some("time") {
        return Err(bad("first column must be `time`".into()));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 2)))?;
            cols[i].push(v);
        }
    }
    let time = &cols[0];
    let t_s = if time.len() >= 2 { time[1] - time[0] } else { 1.0 };
    let t0 = time.first().copied().unwrap_or(0.0);
    let mut tr = Trace::with_start(t_s, t0)?;
    for (name, col) in header.into_iter().zip(cols).skip(1) {
        tr.push_channel(name, col)?;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let mut tr = Trace::new(0.1).unwrap();
        tr.push_channel("x1", vec![]).unwrap();
        assert_eq!(trace_to_csv(&tr).unwrap(), b"time,x1\n");
    }

    #[test]
    fn two_sample_golden() {
        let mut tr = Trace::new(0.05).unwrap();
        tr.push_channel("x1", vec![0.0, -0.1]).unwrap();
        tr.push_channel("u", vec![1.0 / 3.0, 2.0]).unwrap();
        let text = String::from_utf8(trace_to_csv(&tr).unwrap()).unwrap();
        assert_eq!(
            text,
            "time,x1,u\n\
             0.0000000000000000e0,0.0000000000000000e0,3.3333333333333331e-1\n\
             5.0000000000000003e-2,-1.0000000000000001e-1,2.0000000000000000e0\n"
        );
    }

    #[test]
    fn round_trip_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut tr = Trace::new(0.02).unwrap();
        tr.push_channel("a", vec![0.1, 1e-300, -7.25, f64::MAX]).unwrap();
        write_trace_csv(&tr, &p).unwrap();
        let back = read_trace_csv(&p).unwrap();
        assert_eq!(back.channel("a").unwrap(), tr.channel("a").unwrap());
    }
}
