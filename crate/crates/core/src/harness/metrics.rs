use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Allocator;
use crate::error::{Error, Result};

/// Totals gathered from one test episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeOutcome {
    /// Sum of V2N rates over links and steps, bits/s.
    pub v2n_rate_sum: f64,
    /// Number of (link, step) rate samples in `v2n_rate_sum`.
    pub v2n_samples: usize,
    pub delivered_links: usize,
    pub total_links: usize,
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub payload_bytes: u64,
    #[serde(rename = "M")]
    pub m: usize,
    pub allocator: Allocator,
    #[serde(rename = "avg_v2n_rate_bps")]
    pub avg_v2n_rate: f64,
    pub delivery_probability: f64,
    pub episodes: usize,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "payload_bytes,M,allocator,avg_v2n_rate_bps,delivery_probability,episodes,seed";

/// Pools episode totals: the V2N average weights every (link, step) sample
/// equally, the delivery probability every V2V link equally.
pub fn compute_metrics(
    payload_bytes: u64,
    m: usize,
    allocator: Allocator,
    seed: u64,
    outcomes: &[EpisodeOutcome],
) -> MetricsRecord {
    let rate_sum: f64 = outcomes.iter().map(|o| o.v2n_rate_sum).sum();
    let samples: usize = outcomes.iter().map(|o| o.v2n_samples).sum();
    let delivered: usize = outcomes.iter().map(|o| o.delivered_links).sum();
    let links: usize = outcomes.iter().map(|o| o.total_links).sum();
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    MetricsRecord {
        payload_bytes,
        m,
        allocator,
        avg_v2n_rate: ratio(rate_sum, samples),
        delivery_probability: ratio(delivered as f64, links),
        episodes: outcomes.len(),
        seed,
    }
}

pub fn write_csv<W: io::Write>(writer: W, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string(records: &[MetricsRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::InvalidConfig(format!(
            "unexpected results header {:?}",
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn save_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    fs::write(path, to_csv_string(records)?).map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
