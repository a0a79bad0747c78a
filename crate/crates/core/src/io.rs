//! File formats for inverse data and results.
//!
//! Response data is a JSON header naming a CSV block with one row per
//! `(probe, channel)` pair. Spectral data is a CSV with one row per
//! eigenvalue followed by the boundary trace components.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bcinverse::{ResponseData, SpectralData};
use crate::error::{invalid, Error, Result};
use crate::greensys::BoundarySource;

pub const RESPONSE_FORMAT: &str = "response-data/1";

/// Header of a response data file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseHeader {
    pub format: String,
    pub horizon: f64,
    pub dt: f64,
    pub channels: usize,
    pub nodes: usize,
    /// Controls whose connecting operator the data resolve.
    pub basis: Vec<BoundarySource>,
    pub probes: Vec<BoundarySource>,
    /// CSV block, relative to the header.
    pub data: String,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`; returns the header path.
pub fn write_response(dir: &Path, stem: &str, rd: &ResponseData, basis: &[BoundarySource]) -> Result<PathBuf> {
    rd.validate()?;
    let data = format!("{stem}.csv");
    let mut wr = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(&data))?));
    let nodes = rd.nodes();
    let mut head = vec!["probe".to_string(), "channel".to_string()];
    head.extend((0..nodes).map(|j| format!("t{j}")));
    wr.write_record(&head)?;
    for (p, r) in rd.responses.iter().enumerate() {
        for c in 0..rd.channels {
            let mut rec = vec![p.to_string(), c.to_string()];
            rec.extend(r.row(c).iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    let header = ResponseHeader {
        format: RESPONSE_FORMAT.into(),
        horizon: rd.horizon,
        dt: rd.dt,
        channels: rd.channels,
        nodes,
        basis: basis.to_vec(),
        probes: rd.probes.clone(),
        data,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

/// Reads response data and its basis from a header written by [`write_response`].
pub fn read_response(header_path: &Path) -> Result<(ResponseData, Vec<BoundarySource>)> {
    let h: ResponseHeader = read_json(header_path)?;
    if h.format != RESPONSE_FORMAT {
        return invalid(format!("unsupported response format {:?}", h.format));
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let mut rd = csv::Reader::from_reader(BufReader::new(File::open(dir.join(&h.data))?));
    let mut responses = vec![DMatrix::zeros(h.channels, h.nodes); h.probes.len()];
    let mut seen = vec![false; h.probes.len() * h.channels];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Invalid(format!("response CSV row {}: {what}", line + 2));
        if rec.len() != h.nodes + 2 {
            return Err(bad(&format!("expected {} fields, got {}", h.nodes + 2, rec.len())));
        }
        let p: usize = rec[0].trim().parse().map_err(|_| bad("bad probe index"))?;
        let c: usize = rec[1].trim().parse().map_err(|_| bad("bad channel index"))?;
        if p >= h.probes.len() || c >= h.channels {
            return Err(bad("index out of range"));
        }
        for j in 0..h.nodes {
            responses[p][(c, j)] = rec[j + 2].trim().parse().map_err(|_| bad("bad sample"))?;
        }
        seen[p * h.channels + c] = true;
    }
    if seen.iter().any(|s| !s) {
        return invalid("response CSV is missing rows");
    }
    let data = ResponseData { horizon: h.horizon, dt: h.dt, channels: h.channels, probes: h.probes, responses };
    data.validate()?;
    if data.nodes() != h.nodes {
        return invalid("node count does not match horizon and dt");
    }
    Ok((data, h.basis))
}

/// Spectral data as CSV: `lambda, trace_0, trace_1, ...`.
pub fn write_spectral(path: &Path, sigma: &SpectralData) -> Result<()> {
    sigma.validate()?;
    let mut wr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut head = vec!["lambda".to_string()];
    head.extend((0..sigma.traces.ncols()).map(|c| format!("trace_{c}")));
    wr.write_record(&head)?;
    for (k, l) in sigma.eigenvalues.iter().enumerate() {
        let mut rec = vec![format!("{l:e}")];
        rec.extend(sigma.traces.row(k).iter().map(|v| format!("{v:e}")));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_spectral(path: &Path) -> Result<SpectralData> {
    let mut rd = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let width = rd.headers()?.len();
    if width < 2 {
        return invalid("spectral CSV needs at least one trace column");
    }
    let mut eigenvalues = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return invalid(format!("spectral CSV row {}: expected {width} fields", line + 2));
        }
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::Invalid(format!("spectral CSV row {}: {e}", line + 2)))?;
        eigenvalues.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    let traces = DMatrix::from_fn(rows.len(), width - 1, |i, j| rows[i][j]);
    let sigma = SpectralData { eigenvalues, traces };
    sigma.validate()?;
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::Template;

    #[test]
    fn response_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let probe = BoundarySource::channel(2, 1, Template::Bump { center: 0.2, half_width: 0.1, order: 0 });
        let rd = ResponseData {
            horizon: 0.4,
            dt: 0.1,
            channels: 2,
            probes: vec![probe.clone()],
            responses: vec![DMatrix::from_fn(2, 5, |c, j| (c * 10 + j) as f64 * 0.125)],
        };
        let p = write_response(dir.path(), "r", &rd, &[probe]).unwrap();
        let (back, basis) = read_response(&p).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(back.responses[0], rd.responses[0]);
    }

    #[test]
    fn spectral_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sigma = SpectralData { eigenvalues: vec![1.0, 4.0], traces: DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 1.0, 1.0]) };
        let p = dir.path().join("s.csv");
        write_spectral(&p, &sigma).unwrap();
        let back = read_spectral(&p).unwrap();
        assert_eq!(back.eigenvalues, sigma.eigenvalues);
        assert_eq!(back.traces, sigma.traces);
    }
}
