use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GazeSample, GazeTrace};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_hz: Option<f64>,
}

/// Reads a JSON Lines trace: a `{"session_id":...}` header, then one
/// `{"t":..,"x":..,"y":..}` per line.
pub fn read_trace(path: &Path) -> Result<GazeTrace> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate().filter(|(_, l)| match l {
        Ok(s) => !s.trim().is_empty(),
        Err(_) => true,
    });
    let parse_err = |n: usize, e: serde_json::Error| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1));
    let header: Header = match lines.next() {
        Some((n, line)) => serde_json::from_str(&line?).map_err(|e| parse_err(n, e))?,
        None => return Err(Error::Parse(format!("{}: missing header line", path.display()))),
    };
    let mut samples = Vec::new();
    for (n, line) in lines {
        let s: GazeSample = serde_json::from_str(&line?).map_err(|e| parse_err(n, e))?;
        samples.push(s);
    }
    let trace = GazeTrace { session_id: header.session_id, samples, rate_hz: header.rate_hz };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace(path: &Path, trace: &GazeTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = Header { session_id: trace.session_id.clone(), rate_hz: trace.rate_hz };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for s in &trace.samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
