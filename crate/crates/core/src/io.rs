//! Reading and writing observation files.
//!
//! Input is either CSV with header `t,x` or JSON lines `{"t": .., "x": ..}`.
//! The format is picked from the first non-blank line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::binning::{BinnedDataset, TimedObservation};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no observations")]
    Empty,
    #[error("write: {0}")]
    Write(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Deserialize)]
struct Record {
    t: f64,
    x: f64,
}

fn check_finite(line: usize, r: Record) -> Result<TimedObservation, IoError> {
    if !r.t.is_finite() || !r.x.is_finite() {
        return Err(IoError::Parse { line, message: "non-finite value".into() });
    }
    Ok(TimedObservation::new(r.t, r.x))
}

fn parse_csv(text: &str) -> Result<Vec<TimedObservation>, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::Parse { line: 1, message: e.to_string() })?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "x" {
        return Err(IoError::Parse { line: 1, message: format!("expected header `t,x`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
    }
    // The reader skips blank lines, so record i sits on the (i + 2)-th
    // nonblank physical line.
    let lines: Vec<usize> =
        text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1).skip(1).collect();
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = lines.get(i).copied().unwrap_or(0);
        let rec = rec.map_err(|e| IoError::Parse { line, message: e.to_string() })?;
        let parsed: Record =
            rec.deserialize(Some(&headers)).map_err(|e| IoError::Parse { line, message: e.to_string() })?;
        out.push(check_finite(line, parsed)?);
    }
    Ok(out)
}

fn parse_jsonl(text: &str) -> Result<Vec<TimedObservation>, IoError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| IoError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(check_finite(i + 1, rec)?);
    }
    Ok(out)
}

/// Parse observations from text. Errors on empty input.
pub fn parse_observations(text: &str) -> Result<Vec<TimedObservation>, IoError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let first = text.lines().find(|l| !l.trim().is_empty());
    let obs = match first {
        None => return Err(IoError::Empty),
        Some(l) if l.trim_start().starts_with('{') => parse_jsonl(text)?,
        Some(_) => parse_csv(text)?,
    };
    if obs.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(obs)
}

pub fn read_observations(path: &Path) -> Result<Vec<TimedObservation>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    parse_observations(&text)
}

/// CSV `t,x` in bin order. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_observations_csv<W: Write>(obs: impl IntoIterator<Item = TimedObservation>, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"])?;
    for o in obs {
        w.write_record([o.t.to_string(), o.x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv<W: Write>(data: &BinnedDataset, out: W) -> Result<(), IoError> {
    write_observations_csv(data.observations().copied(), out)
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::bin_observations;

    #[test]
    fn csv_and_jsonl_agree() {
        let a = parse_observations("t,x\n0.5,1\n1.5, 2.25\n").unwrap();
        let b = parse_observations("{\"t\":0.5,\"x\":1}\n\n{\"t\":1.5,\"x\":2.25}\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1], TimedObservation::new(1.5, 2.25));
        let c = parse_observations("{\"t\": 0.30000000000000004, \"x\": 0.19835385928206506}").unwrap();
        assert_eq!(c[0], TimedObservation::new(0.1 + 0.2, 0.19835385928206506));
    }

    #[test]
    fn empty_inputs() {
        for text in ["", "\n  \n", "t,x\n"] {
            let e = parse_observations(text).unwrap_err();
            assert_eq!(e.to_string(), "no observations");
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_observations("t,x\n1,2\n1,abc\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 3, .. }), "{e}");
        let e = parse_observations("{\"t\":1,\"x\":2}\n{\"t\":1}\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 2, .. }), "{e}");
        let e = parse_observations("a,b\n1,2\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 1, .. }), "{e}");
        let e = parse_observations("t,x\n1,2\n\n1,inf\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 4, .. }), "{e}");
        let e = parse_observations("t,x\n1,2\n1,inf\n").unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn round_trip_is_exact() {
        let obs = vec![TimedObservation::new(0.1 + 0.2, 1.0 / 3.0), TimedObservation::new(2.0, 7.0)];
        let data = bin_observations(&obs, 2).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let back = parse_observations(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(bin_observations(&back, 2).unwrap(), data);
    }
}
