//! Per-(scheme, power) statistics and their CSV/JSON export.
//!
//! Columns: `scheme`, `P_dBm`, `mean_EE` and `std_EE` (bits/Joule),
//! `mean_WSR` and `std_WSR` (bits/s), `n` (successful records). Standard
//! deviations are unbiased; a single record has deviation 0. Rows are sorted
//! by scheme, then by power.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Scheme;
use super::run::ResultRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    #[serde(rename = "P_dBm")]
    pub p_dbm: f64,
    #[serde(rename = "mean_EE")]
    pub mean_ee: f64,
    #[serde(rename = "std_EE")]
    pub std_ee: f64,
    #[serde(rename = "mean_WSR")]
    pub mean_wsr: f64,
    #[serde(rename = "std_WSR")]
    pub std_wsr: f64,
    pub n: usize,
}

pub const HEADER: [&str; 7] = ["scheme", "P_dBm", "mean_EE", "std_EE", "mean_WSR", "std_WSR", "n"];

/// Sample mean and unbiased standard deviation.
pub fn mean_std(x: &[f64]) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Total order on floats that sorts like the numbers themselves.
pub(crate) fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

/// Groups successful records by (scheme, power). Failed records are left
/// out; a group with no successful record produces no row.
pub fn aggregate(records: &[ResultRecord]) -> Result<Vec<Aggregate>> {
    let mut groups: BTreeMap<(Scheme, u64), (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let g = groups
            .entry((r.scheme, order_key(r.p_dbm)))
            .or_insert_with(|| (r.p_dbm, Vec::new(), Vec::new()));
        g.1.push(r.ee);
        g.2.push(r.wsr);
    }
    groups
        .into_iter()
        .map(|((scheme, _), (p_dbm, ee, wsr))| {
            let (mean_ee, std_ee) = mean_std(&ee)?;
            let (mean_wsr, std_wsr) = mean_std(&wsr)?;
            Ok(Aggregate {
                scheme,
                p_dbm,
                mean_ee,
                std_ee,
                mean_wsr,
                std_wsr,
                n: ee.len(),
            })
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes the CSV table; an empty list gives a header-only file.
pub fn write_csv(path: &Path, rows: &[Aggregate]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<Aggregate>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_json(path: &Path, rows: &[Aggregate]) -> Result<()> {
    let text = serde_json::to_string_pretty(rows).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Vec<Aggregate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
