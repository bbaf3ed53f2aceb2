//! CSV series for the standard plots, built from one or more results
//! directories.
//!
//! - `fig2_convergence.csv`: inner-layer objective per iteration of the
//!   asymptotic optimizer at its final `η`, per (drop, power).
//! - `fig3_ee_vs_power.csv`: mean and std of EE and WSR per scheme and power.
//! - `fig4_asymptotic_gap.csv`: asymptotic over conventional mean EE per power.
//! - `fig5_correlation.csv`: mean EE per correlation coefficient, scheme and
//!   power, one block per input run.
//! - `fig6_deterministic.csv`: deterministic EE against Monte Carlo mean and
//!   std of the reconstructed beams, per (antennas, drop, power).
//!
//! EE is in bits/Joule throughout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::aggregate::{self, mean_std, order_key};
use super::config::Scheme;
use super::output::{load_results, LoadedRun};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct ConvergenceRow {
    antennas: usize,
    users_per_cell: usize,
    drop_id: usize,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    iteration: usize,
    objective: f64,
    rel_change: f64,
}

#[derive(Serialize)]
struct EeRow {
    correlation: f64,
    antennas: usize,
    users_per_cell: usize,
    scheme: Scheme,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    #[serde(rename = "mean_EE")]
    mean_ee: f64,
    #[serde(rename = "std_EE")]
    std_ee: f64,
    #[serde(rename = "mean_WSR")]
    mean_wsr: f64,
    #[serde(rename = "std_WSR")]
    std_wsr: f64,
    n: usize,
}

#[derive(Serialize)]
struct GapRow {
    antennas: usize,
    users_per_cell: usize,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    mean_ee_asymptotic: f64,
    mean_ee_conventional: f64,
    ratio: f64,
    gap_percent: f64,
}

#[derive(Serialize)]
struct DetRow {
    antennas: usize,
    users_per_cell: usize,
    drop_id: usize,
    #[serde(rename = "P_dBm")]
    p_dbm: f64,
    eta_det: f64,
    mean_ee: f64,
    std_ee: f64,
    n: usize,
    rel_dev: f64,
    within_one_std: bool,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path).map_err(err)?;
    if rows.is_empty() {
        w.write_record(header).map_err(err)?;
    }
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn ee_rows(run: &LoadedRun) -> Result<Vec<EeRow>> {
    let s = &run.config.scenario;
    Ok(aggregate::aggregate(&run.records)?
        .into_iter()
        .map(|a| EeRow {
            correlation: s.correlation,
            antennas: s.antennas,
            users_per_cell: s.users_per_cell,
            scheme: a.scheme,
            p_dbm: a.p_dbm,
            mean_ee: a.mean_ee,
            std_ee: a.std_ee,
            mean_wsr: a.mean_wsr,
            std_wsr: a.std_wsr,
            n: a.n,
        })
        .collect())
}

fn convergence_rows(run: &LoadedRun) -> Vec<ConvergenceRow> {
    let s = &run.config.scenario;
    let mut rows = Vec::new();
    for a in &run.asymptotic {
        for (i, &g) in a.inner_trace.iter().enumerate() {
            let rel_change = match i {
                0 => f64::NAN,
                _ => (g - a.inner_trace[i - 1]).abs() / g.abs(),
            };
            rows.push(ConvergenceRow {
                antennas: s.antennas,
                users_per_cell: s.users_per_cell,
                drop_id: a.drop_id,
                p_dbm: a.p_dbm,
                iteration: i + 1,
                objective: g,
                rel_change,
            });
        }
    }
    rows
}

fn gap_rows(run: &LoadedRun) -> Result<Vec<GapRow>> {
    let s = &run.config.scenario;
    let agg = aggregate::aggregate(&run.records)?;
    let mean = |scheme: Scheme, p: f64| {
        agg.iter()
            .find(|a| a.scheme == scheme && a.p_dbm == p)
            .map(|a| a.mean_ee)
    };
    let mut rows = Vec::new();
    for &p in &run.config.power_sweep_dbm {
        if let (Some(a), Some(c)) = (mean(Scheme::EeAsymptotic, p), mean(Scheme::EeConventional, p)) {
            rows.push(GapRow {
                antennas: s.antennas,
                users_per_cell: s.users_per_cell,
                p_dbm: p,
                mean_ee_asymptotic: a,
                mean_ee_conventional: c,
                ratio: a / c,
                gap_percent: 100.0 * (c - a) / c,
            });
        }
    }
    Ok(rows)
}

fn det_rows(run: &LoadedRun) -> Result<Vec<DetRow>> {
    let s = &run.config.scenario;
    let mut groups: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    for r in run.records.iter().filter(|r| r.is_ok() && r.scheme == Scheme::EeAsymptotic) {
        groups.entry((r.drop_id, order_key(r.p_dbm))).or_default().push(r.ee);
    }
    let mut rows = Vec::new();
    for a in &run.asymptotic {
        let (Some(eta), Some(ee)) = (a.eta_det, groups.get(&(a.drop_id, order_key(a.p_dbm)))) else {
            continue;
        };
        let (m, sd) = mean_std(ee)?;
        rows.push(DetRow {
            antennas: s.antennas,
            users_per_cell: s.users_per_cell,
            drop_id: a.drop_id,
            p_dbm: a.p_dbm,
            eta_det: eta,
            mean_ee: m,
            std_ee: sd,
            n: ee.len(),
            rel_dev: (eta - m) / m,
            within_one_std: (eta - m).abs() <= sd,
        });
    }
    Ok(rows)
}

/// Writes every series for the runs in `dirs` into `out_dir` and returns the
/// written paths.
pub fn write_figures(dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if dirs.is_empty() {
        return Err(Error::Config("no results directories given".into()));
    }
    let runs: Vec<LoadedRun> = dirs.iter().map(|d| load_results(d)).collect::<Result<_>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut conv = Vec::new();
    let mut ee = Vec::new();
    let mut gap = Vec::new();
    let mut det = Vec::new();
    for run in &runs {
        conv.extend(convergence_rows(run));
        ee.extend(ee_rows(run)?);
        gap.extend(gap_rows(run)?);
        det.extend(det_rows(run)?);
    }
    let mut by_corr: Vec<&EeRow> = ee.iter().collect();
    by_corr.sort_by(|a, b| {
        (a.scheme, order_key(a.p_dbm), order_key(a.correlation)).cmp(&(b.scheme, order_key(b.p_dbm), order_key(b.correlation)))
    });

    let ee_header = [
        "correlation", "antennas", "users_per_cell", "scheme", "P_dBm", "mean_EE", "std_EE", "mean_WSR", "std_WSR", "n",
    ];
    let files = [
        "fig2_convergence.csv",
        "fig3_ee_vs_power.csv",
        "fig4_asymptotic_gap.csv",
        "fig5_correlation.csv",
        "fig6_deterministic.csv",
    ];
    let paths: Vec<PathBuf> = files.iter().map(|f| out_dir.join(f)).collect();
    write_rows(
        &paths[0],
        &conv,
        &["antennas", "users_per_cell", "drop_id", "P_dBm", "iteration", "objective", "rel_change"],
    )?;
    write_rows(&paths[1], &ee, &ee_header)?;
    write_rows(
        &paths[2],
        &gap,
        &[
            "antennas",
            "users_per_cell",
            "P_dBm",
            "mean_ee_asymptotic",
            "mean_ee_conventional",
            "ratio",
            "gap_percent",
        ],
    )?;
    write_rows(&paths[3], &by_corr, &ee_header)?;
    write_rows(
        &paths[4],
        &det,
        &[
            "antennas",
            "users_per_cell",
            "drop_id",
            "P_dBm",
            "eta_det",
            "mean_ee",
            "std_ee",
            "n",
            "rel_dev",
            "within_one_std",
        ],
    )?;
    Ok(paths)
}
