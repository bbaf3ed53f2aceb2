//! Results directory layout.
//!
//! | file | contents |
//! |---|---|
//! | `config.toml` | the resolved experiment configuration |
//! | `params.json` | system parameters for every sweep point |
//! | `records.csv` | one row per (drop, power, realization, scheme) |
//! | `timings.csv` | wall time per record and per asymptotic optimization |
//! | `aggregates.csv`, `aggregates.json` | see [`super::aggregate`] |
//! | `asymptotic_params.json` | long-term parameters per (drop, power) |
//! | `conventional_trace.csv` | outer-loop log of every conventional solve |
//! | `run_stats.json` | optimizer invocation counts |
//!
//! Everything except `timings.csv` is a deterministic function of the
//! configuration. In `records.csv` the `sinr` column joins the per-user
//! SINRs (linear) with `;`, `EE` is in bits/Joule, `WSR` in bits/s and
//! `total_power` in W.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::aggregate::{self, Aggregate};
use super::config::{ExperimentConfig, Scheme};
use super::run::{AsymptoticEntry, ExperimentOutput, ResultRecord, RunStats};
use crate::conventional;
use crate::error::{Error, Result};
use crate::model::SystemParams;

pub const RECORDS: &str = "records.csv";
pub const TIMINGS: &str = "timings.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";
pub const AGGREGATES_JSON: &str = "aggregates.json";
pub const ASYMPTOTIC: &str = "asymptotic_params.json";
pub const TRACE: &str = "conventional_trace.csv";
pub const STATS: &str = "run_stats.json";
pub const CONFIG: &str = "config.toml";
pub const PARAMS: &str = "params.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordRow {
    scheme: Scheme,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    drop_id: usize,
    realization_id: usize,
    #[serde(rename = "EE")]
    ee: f64,
    #[serde(rename = "WSR")]
    wsr: f64,
    total_power: f64,
    outer_iterations: usize,
    inner_iterations: usize,
    params_hash: String,
    sinr: String,
    error: String,
}

impl From<&ResultRecord> for RecordRow {
    fn from(r: &ResultRecord) -> Self {
        Self {
            scheme: r.scheme,
            p_dbm: r.p_dbm,
            drop_id: r.drop_id,
            realization_id: r.realization_id,
            ee: r.ee,
            wsr: r.wsr,
            total_power: r.total_power,
            outer_iterations: r.outer_iterations,
            inner_iterations: r.inner_iterations,
            params_hash: r.params_hash.clone(),
            sinr: r.sinr.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            error: r.error.clone(),
        }
    }
}

impl RecordRow {
    fn into_record(self) -> std::result::Result<ResultRecord, std::num::ParseFloatError> {
        let sinr = if self.sinr.is_empty() {
            Vec::new()
        } else {
            self.sinr.split(';').map(str::parse).collect::<std::result::Result<_, _>>()?
        };
        Ok(ResultRecord {
            scheme: self.scheme,
            p_dbm: self.p_dbm,
            drop_id: self.drop_id,
            realization_id: self.realization_id,
            ee: self.ee,
            wsr: self.wsr,
            total_power: self.total_power,
            sinr,
            outer_iterations: self.outer_iterations,
            inner_iterations: self.inner_iterations,
            params_hash: self.params_hash,
            error: self.error,
            wall_time_s: f64::NAN,
        })
    }
}

#[derive(Serialize)]
struct TimingRow<'a> {
    kind: &'a str,
    scheme: String,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    drop_id: usize,
    realization_id: String,
    wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    power_sweep: Vec<PowerPoint>,
}

#[derive(Serialize, Deserialize)]
struct PowerPoint {
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    params: SystemParams,
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

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(RecordRow::from(r)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `records.csv`; wall times are not stored there and come back NaN.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<RecordRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(path, e))?;
            row.into_record().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_timings(path: &Path, out: &ExperimentOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for a in &out.asymptotic {
        w.serialize(TimingRow {
            kind: "asymptotic-optimizer",
            scheme: Scheme::EeAsymptotic.to_string(),
            p_dbm: a.p_dbm,
            drop_id: a.drop_id,
            realization_id: String::new(),
            wall_time_s: a.wall_time_s,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    for r in &out.records {
        w.serialize(TimingRow {
            kind: "record",
            scheme: r.scheme.to_string(),
            p_dbm: r.p_dbm,
            drop_id: r.drop_id,
            realization_id: r.realization_id.to_string(),
            wall_time_s: r.wall_time_s,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_trace(path: &Path, out: &ExperimentOutput) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<(String, conventional::OuterStep)> = out
        .conventional_traces
        .iter()
        .map(|t| (format!("{},{},{},", t.p_dbm, t.drop_id, t.realization_id), t.step))
        .collect();
    let mut w = BufWriter::new(file);
    conventional::write_trace_csv(&mut w, "P_dBm,drop_id,realization_id,", &rows).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every output file of a run into `dir` (created if missing) and
/// returns the aggregates.
pub fn write_results(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<Vec<Aggregate>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);

    let config_path = path(CONFIG);
    std::fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    let doc = ParamsDoc {
        power_sweep: cfg
            .power_sweep_dbm
            .iter()
            .map(|&p| Ok(PowerPoint { p_dbm: p, params: cfg.system_params(p)? }))
            .collect::<Result<_>>()?,
    };
    write_json(&path(PARAMS), &doc)?;

    write_records(&path(RECORDS), &out.records)?;
    write_timings(&path(TIMINGS), out)?;
    let agg = aggregate::aggregate(&out.records)?;
    if cfg.output.format.csv() {
        aggregate::write_csv(&path(AGGREGATES_CSV), &agg)?;
    }
    if cfg.output.format.json() {
        aggregate::write_json(&path(AGGREGATES_JSON), &agg)?;
    }
    if !out.asymptotic.is_empty() {
        write_json(&path(ASYMPTOTIC), &out.asymptotic)?;
    }
    if cfg.output.conventional_trace && cfg.schemes.contains(&Scheme::EeConventional) {
        write_trace(&path(TRACE), out)?;
    }
    write_json(&path(STATS), &out.stats)?;
    Ok(agg)
}

/// A results directory read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub records: Vec<ResultRecord>,
    pub asymptotic: Vec<AsymptoticEntry>,
    pub stats: RunStats,
}

pub fn load_results(dir: &Path) -> Result<LoadedRun> {
    let asym_path = dir.join(ASYMPTOTIC);
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config: ExperimentConfig::load(&dir.join(CONFIG))?,
        records: read_records(&dir.join(RECORDS))?,
        asymptotic: if asym_path.exists() { read_json(&asym_path)? } else { Vec::new() },
        stats: read_json(&dir.join(STATS))?,
    })
}
