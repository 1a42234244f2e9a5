//! Text formats: traces, envelopes, feature matrices, scan reports, forecasts
//! and ground-truth labels.
//!
//! Timestamps are ISO-8601 UTC with microseconds (`2021-02-03T04:05:06.000000Z`).
//! Numbers use the shortest representation that parses back to the same `f64`,
//! so writing and re-reading any file is lossless.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use evtcast_core::envelope::EnvelopeIndexSeries;
use evtcast_core::evt::ThresholdSelection;
use evtcast_core::forecast::ForecastPoint;
use evtcast_core::preprocess::CovariateMatrix;
use evtcast_core::synth::Phase;
use evtcast_core::trace::{BandSpec, SeismicTrace};
use evtcast_core::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {msg}")]
    Data { path: String, msg: String },
}

pub type IoResult<T> = Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), msg: msg.into() }
}

fn data_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Data { path: path.display().to_string(), msg: msg.into() }
}

pub fn format_time(t: Timestamp) -> String {
    let dt = DateTime::<Utc>::from_timestamp_micros(t.as_micros()).expect("timestamp within chrono range");
    dt.to_rfc3339_opts(SecondsFormat::Micros, true)
}

pub fn parse_time(s: &str) -> Option<Timestamp> {
    let dt = DateTime::parse_from_rfc3339(s.trim()).ok()?;
    Some(Timestamp::from_micros(dt.with_timezone(&Utc).timestamp_micros()))
}

/// Shortest round-trip representation.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn create(path: &Path) -> IoResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_all(path: &Path, text: &str) -> IoResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn open_lines(path: &Path) -> IoResult<impl Iterator<Item = IoResult<(usize, String)>> + '_> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(BufReader::new(f)
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(io_err(path))))
}

/// Read a trace CSV, optionally checking its sample rate.
pub fn load_trace(path: &Path, expected_rate: Option<f64>) -> IoResult<SeismicTrace> {
    let mut rate = None;
    let mut start = None;
    let mut band = BandSpec::Raw;
    let mut samples = Vec::new();
    for line in open_lines(path)? {
        let (no, line) = line?;
        if let Some(header) = line.strip_prefix('#') {
            if !samples.is_empty() {
                return Err(format_err(path, format!("line {no}: header after samples")));
            }
            let Some((key, value)) = header.split_once('=') else { continue };
            let value = value.trim();
            match key.trim() {
                "sample_rate_hz" => {
                    let r = value.parse::<f64>().map_err(|_| format_err(path, format!("line {no}: bad sample_rate_hz `{value}`")))?;
                    rate = Some(r);
                }
                "start_time" => {
                    start = Some(parse_time(value).ok_or_else(|| format_err(path, format!("line {no}: bad start_time `{value}`")))?);
                }
                "band" => band = value.parse().map_err(|e| format_err(path, format!("line {no}: {e}")))?,
                other => log::debug!("{}: ignoring header `{other}`", path.display()),
            }
            continue;
        }
        let text = line.trim();
        if text.is_empty() {
            return Err(data_err(path, format!("line {no}: empty sample (gaps are not supported)")));
        }
        let v: f64 = text.parse().map_err(|_| data_err(path, format!("line {no}: unparsable sample `{text}`")))?;
        if !v.is_finite() {
            return Err(data_err(path, format!("line {no}: non-finite sample")));
        }
        samples.push(v);
    }
    let rate = rate.ok_or_else(|| format_err(path, "missing `sample_rate_hz` header"))?;
    let start = start.ok_or_else(|| format_err(path, "missing `start_time` header"))?;
    if let Some(e) = expected_rate {
        if e != rate {
            return Err(format_err(path, format!("sample rate {rate} Hz, expected {e} Hz")));
        }
    }
    SeismicTrace::new(samples, rate, start, band).map_err(|e| data_err(path, e.to_string()))
}

pub fn write_trace(path: &Path, trace: &SeismicTrace) -> IoResult<()> {
    let mut w = create(path)?;
    let mut emit = |s: &str| w.write_all(s.as_bytes()).map_err(io_err(path));
    emit(&format!("# sample_rate_hz={}\n", format_real(trace.sample_rate_hz())))?;
    emit(&format!("# start_time={}\n", format_time(trace.start_time())))?;
    emit(&format!("# band={}\n", trace.band()))?;
    let mut buf = String::with_capacity(16 * 4096);
    for chunk in trace.samples().chunks(4096) {
        buf.clear();
        for &v in chunk {
            buf.push_str(&format_real(v));
            buf.push('\n');
        }
        emit(&buf)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_envelope(path: &Path, index: &EnvelopeIndexSeries) -> IoResult<()> {
    let mut out = String::from("timestamp,envelope,index_db\n");
    for (i, t) in index.timestamps().enumerate() {
        let _ = writeln!(out, "{},{},{}", format_time(t), format_real(index.envelope()[i]), format_real(index.index_db()[i]));
    }
    write_all(path, &out)
}

fn split_csv(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Read an envelope CSV as an index series; rows must be evenly spaced.
pub fn load_envelope(path: &Path) -> IoResult<EnvelopeIndexSeries> {
    let mut lines = open_lines(path)?;
    let header = lines.next().transpose()?.ok_or_else(|| format_err(path, "empty file"))?.1;
    if split_csv(&header) != ["timestamp", "envelope", "index_db"] {
        return Err(format_err(path, "expected header `timestamp,envelope,index_db`"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let (no, line) = line?;
        let cells = split_csv(&line);
        if cells.len() != 3 {
            return Err(data_err(path, format!("line {no}: expected 3 cells")));
        }
        let t = parse_time(cells[0]).ok_or_else(|| data_err(path, format!("line {no}: bad timestamp")))?;
        let y: f64 = cells[2].parse().map_err(|_| data_err(path, format!("line {no}: bad index_db")))?;
        times.push(t);
        values.push(y);
    }
    if times.len() < 2 {
        return Err(data_err(path, "an index series needs at least two rows"));
    }
    let step = times[1].as_micros() - times[0].as_micros();
    if step <= 0 || times.windows(2).any(|w| w[1].as_micros() - w[0].as_micros() != step) {
        return Err(data_err(path, "timestamps are not evenly spaced"));
    }
    EnvelopeIndexSeries::from_index(values, times[0], 1e6 / step as f64).map_err(|e| data_err(path, e.to_string()))
}

pub fn write_features(path: &Path, m: &CovariateMatrix) -> IoResult<()> {
    let mut out = String::from("timestamp");
    for n in m.names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, &t) in m.timestamps().iter().enumerate() {
        out.push_str(&format_time(t));
        for &v in m.row(i) {
            out.push(',');
            out.push_str(&format_real(v));
        }
        out.push('\n');
    }
    write_all(path, &out)
}

pub fn load_features(path: &Path) -> IoResult<CovariateMatrix> {
    let mut lines = open_lines(path)?;
    let header = lines.next().transpose()?.ok_or_else(|| format_err(path, "empty file"))?.1;
    let cells = split_csv(&header);
    if cells.first() != Some(&"timestamp") {
        return Err(format_err(path, "first column must be `timestamp`"));
    }
    let names: Vec<String> = cells[1..].iter().map(|s| s.to_string()).collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let (no, line) = line?;
        let cells = split_csv(&line);
        if cells.len() != names.len() + 1 {
            return Err(data_err(path, format!("line {no}: expected {} cells", names.len() + 1)));
        }
        times.push(parse_time(cells[0]).ok_or_else(|| data_err(path, format!("line {no}: bad timestamp")))?);
        for c in &cells[1..] {
            values.push(c.parse::<f64>().map_err(|_| data_err(path, format!("line {no}: bad value `{c}`")))?);
        }
    }
    CovariateMatrix::new(times, names, values).map_err(|e| data_err(path, e.to_string()))
}

pub fn write_scan_report(path: &Path, sel: &ThresholdSelection) -> IoResult<()> {
    let mut out = String::from("threshold,n_exceed,p_ad,p_cvm,chosen_flag\n");
    for p in &sel.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_real(p.threshold),
            p.n_exceed,
            format_opt(p.p_ad),
            format_opt(p.p_cvm),
            u8::from(p.threshold == sel.chosen)
        );
    }
    write_all(path, &out)
}

/// Column label of a tail probability at excess level `z`.
pub fn tail_column(z: f64) -> String {
    format!("tail_{}", format_real(z))
}

pub fn write_forecast(path: &Path, z_list: &[f64], points: &[ForecastPoint]) -> IoResult<()> {
    let mut out = String::from("issue_time,target_time,phi,nu");
    for &z in z_list {
        out.push(',');
        out.push_str(&tail_column(z));
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{},{},{},{}", format_time(p.issue_time), format_time(p.target_time), format_real(p.phi), format_real(p.nu));
        for &(_, v) in &p.tail {
            out.push(',');
            out.push_str(&format_real(v));
        }
        out.push('\n');
    }
    write_all(path, &out)
}

pub fn write_truth(path: &Path, trace: &SeismicTrace, phases: &[Phase]) -> IoResult<()> {
    let mut out = String::from("timestamp,phase\n");
    for (i, p) in phases.iter().enumerate() {
        let _ = writeln!(out, "{},{}", format_time(trace.time_of(i)), p);
    }
    write_all(path, &out)
}

/// Plain CSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> IoResult<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_all(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> IoResult<()> {
    write_all(path, text)
}
