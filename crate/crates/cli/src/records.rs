//! One CSV row per solver run, shaped like the result tables: best and
//! average makespan, average time to best, and deviation from a reference.

use std::io::Write;

use anyhow::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub method: String,
    pub sigma: usize,
    /// Seconds, or `inf`.
    pub t_hat_s: String,
    pub seed: u64,
    pub runs: usize,
    pub best_t_max: Option<f64>,
    pub avg_t_max: Option<f64>,
    /// Empty when timing is omitted for byte-stable output.
    pub avg_time_s: Option<f64>,
    pub feasible: bool,
    pub n_lo: Option<usize>,
    pub n_hi: Option<usize>,
    pub reference: Option<f64>,
    pub deviation_pct: Option<f64>,
}

pub fn format_t_hat(t: f64) -> String {
    if t.is_infinite() {
        "inf".to_string()
    } else {
        format!("{t}")
    }
}

pub fn deviation_pct(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference
}

/// Rounds to 2 decimals for stable, table-like output.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl RunRecord {
    pub fn with_reference(mut self, reference: Option<f64>) -> Self {
        self.reference = reference;
        self.deviation_pct = match (self.best_t_max, reference) {
            (Some(v), Some(r)) if r != 0.0 => Some(round2(deviation_pct(v, r))),
            _ => None,
        };
        self
    }
}

/// Header row written even when there are no records.
pub const HEADER: &str = "instance,method,sigma,t_hat_s,seed,runs,best_t_max,avg_t_max,avg_time_s,feasible,n_lo,n_hi,reference,deviation_pct";

pub fn write_records<W: Write>(out: W, records: &[RunRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends to `path`, writing the header first when the file is new or empty.
pub fn append_records(path: &std::path::Path, records: &[RunRecord]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    write_records(file, records, fresh)
}

pub fn read_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        RunRecord {
            instance: "T4".into(),
            method: "vns".into(),
            sigma: 1,
            t_hat_s: "inf".into(),
            seed: 0,
            runs: 1,
            best_t_max: Some(20.0),
            avg_t_max: Some(20.0),
            avg_time_s: None,
            feasible: true,
            n_lo: None,
            n_hi: None,
            reference: None,
            deviation_pct: None,
        }
    }

    #[test]
    fn deviation_against_reference() {
        let r = record().with_reference(Some(16.0));
        assert_eq!(r.deviation_pct, Some(25.0));
        assert_eq!(record().with_reference(None).deviation_pct, None);
    }

    #[test]
    fn header_only_when_empty() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[], true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{HEADER}\n"));
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[record()], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_records(&text).unwrap(), vec![record()]);
        assert!(text.lines().nth(1).unwrap().starts_with("T4,vns,1,inf,0,1,20.0,20.0,,true,,,,"));
    }
}
