//! Drops × power sweep × realizations × schemes.
//!
//! Drop `d` uses seed `child_seed(seed, d)` for both user placement and fast
//! fading, so every scheme and every power level sees the same channels. The
//! asymptotic optimizer runs once per (drop, power) and its parameters are
//! reused for every realization of that cell.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use crate::asymptotic::{self, AsymptoticParams};
use crate::baselines;
use crate::conventional::{self, OuterStep};
use crate::error::{Error, Result};
use crate::model::{self, ChannelSet, Correlation, SystemParams, UserDrop};
use crate::rng::child_seed;

/// One scheme on one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scheme: Scheme,
    pub p_dbm: f64,
    pub drop_id: usize,
    pub realization_id: usize,
    /// bits/Joule.
    pub ee: f64,
    /// Weighted sum rate in bits/s.
    pub wsr: f64,
    /// Consumed power in W; `ee == wsr / total_power`.
    pub total_power: f64,
    pub sinr: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Hash of the long-term parameters used (asymptotic scheme only).
    pub params_hash: String,
    /// Empty on success.
    pub error: String,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Long-term parameters computed for one (drop, power) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEntry {
    pub drop_id: usize,
    pub p_dbm: f64,
    pub params: Option<AsymptoticParams>,
    pub params_hash: String,
    /// Deterministic EE in bits/Joule.
    pub eta_det: Option<f64>,
    pub outer_iterations: usize,
    /// Inner-layer objective per iteration at the final `η`.
    pub inner_trace: Vec<f64>,
    pub error: String,
    /// Kept out of the JSON cache; written to `timings.csv` instead.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub asymptotic_optimizer_calls: usize,
    pub conventional_optimizer_calls: usize,
    pub records: usize,
    pub failures: usize,
}

/// Outer-loop log of one conventional solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub p_dbm: f64,
    pub drop_id: usize,
    pub realization_id: usize,
    pub step: OuterStep,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub asymptotic: Vec<AsymptoticEntry>,
    pub conventional_traces: Vec<TraceEntry>,
    pub stats: RunStats,
}

#[derive(Default)]
struct Counters {
    asymptotic: AtomicUsize,
    conventional: AtomicUsize,
}

struct Outcome {
    beams: model::BeamformerSet,
    outer_iterations: usize,
    inner_iterations: usize,
    trace: Vec<OuterStep>,
}

impl Outcome {
    fn closed_form(beams: model::BeamformerSet) -> Self {
        Self {
            beams,
            outer_iterations: 0,
            inner_iterations: 0,
            trace: Vec::new(),
        }
    }
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    params: SystemParams,
    p_dbm: f64,
    drop_id: usize,
    asym: Option<&'a AsymptoticEntry>,
    counters: &'a Counters,
}

impl Cell<'_> {
    fn solve(&self, scheme: Scheme, ch: &ChannelSet) -> Result<Outcome> {
        let params = &self.params;
        let solver = &self.cfg.solver;
        match scheme {
            Scheme::Mrt => baselines::mrt(ch, params).map(Outcome::closed_form),
            Scheme::Zfbf => baselines::zfbf(ch, params).map(|z| Outcome::closed_form(z.beams)),
            Scheme::Vsinr => baselines::vsinr(ch, params).map(Outcome::closed_form),
            Scheme::WmmseSr => {
                let init = baselines::mrt(ch, params)?;
                let out =
                    baselines::wmmse_sum_rate(ch, params, &init, solver.inner_tol, solver.sum_rate_max_iters)?;
                Ok(Outcome {
                    beams: out.beams,
                    outer_iterations: 0,
                    inner_iterations: out.iterations,
                    trace: Vec::new(),
                })
            }
            Scheme::EeConventional => {
                let init = baselines::mrt(ch, params)?;
                self.counters.conventional.fetch_add(1, Ordering::Relaxed);
                let out = conventional::dinkelbach_solve(ch, &params.weights, params, &init, &solver.conventional())?;
                Ok(Outcome {
                    beams: out.beams,
                    outer_iterations: out.outer_iterations,
                    inner_iterations: out.inner_iterations,
                    trace: out.trace,
                })
            }
            Scheme::EeAsymptotic => {
                let entry = self.asym.expect("asymptotic cache is filled for every cell");
                let ap = entry
                    .params
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("asymptotic optimizer failed: {}", entry.error)))?;
                Ok(Outcome {
                    beams: asymptotic::reconstruct_beamformers(ch, ap)?,
                    outer_iterations: entry.outer_iterations,
                    inner_iterations: entry.inner_trace.len(),
                    trace: Vec::new(),
                })
            }
        }
    }

    fn record(&self, scheme: Scheme, ch: &ChannelSet, realization_id: usize) -> (ResultRecord, Vec<OuterStep>) {
        let start = Instant::now();
        let params = &self.params;
        let solved = self.solve(scheme, ch).and_then(|o| {
            if !o.beams.is_finite() {
                return Err(Error::NonFinite("beamformers"));
            }
            let sinr = model::sinr_all(ch, &o.beams, params.noise_power)?;
            Ok((o, sinr))
        });
        let mut rec = ResultRecord {
            scheme,
            p_dbm: self.p_dbm,
            drop_id: self.drop_id,
            realization_id,
            ee: f64::NAN,
            wsr: f64::NAN,
            total_power: f64::NAN,
            sinr: Vec::new(),
            outer_iterations: 0,
            inner_iterations: 0,
            params_hash: match (scheme, self.asym) {
                (Scheme::EeAsymptotic, Some(e)) => e.params.as_ref().map(|p| p.params_hash()).unwrap_or_default(),
                _ => String::new(),
            },
            error: String::new(),
            wall_time_s: 0.0,
        };
        let trace = match solved {
            Ok((o, sinr)) => {
                let wsr: f64 = sinr.iter().zip(&params.weights).map(|(s, w)| w * (1.0 + s).log2()).sum();
                rec.wsr = wsr * params.bandwidth_hz;
                rec.total_power = model::total_power(&o.beams, params);
                rec.ee = rec.wsr / rec.total_power;
                rec.sinr = sinr;
                rec.outer_iterations = o.outer_iterations;
                rec.inner_iterations = o.inner_iterations;
                o.trace
            }
            Err(e) => {
                log::warn!(
                    "{scheme} failed at P={} dBm, drop {}, realization {realization_id}: {e}",
                    self.p_dbm,
                    self.drop_id
                );
                rec.error = e.to_string();
                Vec::new()
            }
        };
        rec.wall_time_s = start.elapsed().as_secs_f64();
        (rec, trace)
    }
}

fn optimize_cell(
    drop: &UserDrop,
    drop_id: usize,
    p_dbm: f64,
    params: &SystemParams,
    corr: &Correlation,
    cfg: &ExperimentConfig,
    counters: &Counters,
) -> AsymptoticEntry {
    let start = Instant::now();
    counters.asymptotic.fetch_add(1, Ordering::Relaxed);
    let mut entry = AsymptoticEntry {
        drop_id,
        p_dbm,
        params: None,
        params_hash: String::new(),
        eta_det: None,
        outer_iterations: 0,
        inner_trace: Vec::new(),
        error: String::new(),
        wall_time_s: 0.0,
    };
    match asymptotic::outer_layer(&drop.epsilon, corr, params, &cfg.solver.asymptotic()) {
        Ok(out) => {
            entry.params_hash = out.params.params_hash();
            entry.eta_det = Some(out.params.eta * params.bandwidth_hz);
            entry.outer_iterations = out.trace.len();
            entry.inner_trace = out.inner_trace;
            entry.params = Some(out.params);
        }
        Err(e) => {
            log::warn!("asymptotic optimizer failed at P={p_dbm} dBm, drop {drop_id}: {e}");
            entry.error = e.to_string();
        }
    }
    entry.wall_time_s = start.elapsed().as_secs_f64();
    entry
}

/// Runs the experiment on the current rayon pool. The output does not
/// depend on the number of threads, except for the wall times.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let corr = Arc::new(Correlation::exponential(s.correlation, s.antennas)?);
    let drops: Vec<UserDrop> = (0..cfg.n_drops)
        .map(|d| model::generate_user_drop(&cfg.geometry, s.cells, s.users_per_cell, child_seed(cfg.seed, d as u64)))
        .collect::<Result<_>>()?;
    let counters = Counters::default();
    let wants_asym = cfg.schemes.contains(&Scheme::EeAsymptotic);

    let cells: Vec<(usize, f64)> = (0..cfg.n_drops)
        .flat_map(|d| cfg.power_sweep_dbm.iter().map(move |&p| (d, p)))
        .collect();
    let per_cell: Vec<(Option<AsymptoticEntry>, Vec<(ResultRecord, Vec<OuterStep>)>)> = cells
        .par_iter()
        .map(|&(drop_id, p_dbm)| -> Result<_> {
            let drop = &drops[drop_id];
            let params = cfg.system_params(p_dbm)?;
            let asym = wants_asym.then(|| optimize_cell(drop, drop_id, p_dbm, &params, &corr, cfg, &counters));
            let cell = Cell {
                cfg,
                params,
                p_dbm,
                drop_id,
                asym: asym.as_ref(),
                counters: &counters,
            };
            let seed = child_seed(cfg.seed, drop_id as u64);
            let rows: Vec<Vec<_>> = (0..cfg.n_realizations)
                .into_par_iter()
                .map(|r| -> Result<Vec<_>> {
                    let ch = model::generate_channels_with(drop, &corr, seed, r as u64)?;
                    Ok(cfg.schemes.iter().map(|&sc| cell.record(sc, &ch, r)).collect())
                })
                .collect::<Result<_>>()?;
            Ok((asym, rows.into_iter().flatten().collect()))
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentOutput {
        records: Vec::new(),
        asymptotic: Vec::new(),
        conventional_traces: Vec::new(),
        stats: RunStats::default(),
    };
    for (asym, rows) in per_cell {
        out.asymptotic.extend(asym);
        for (rec, trace) in rows {
            out.conventional_traces.extend(trace.into_iter().map(|step| TraceEntry {
                p_dbm: rec.p_dbm,
                drop_id: rec.drop_id,
                realization_id: rec.realization_id,
                step,
            }));
            out.records.push(rec);
        }
    }
    out.stats = RunStats {
        asymptotic_optimizer_calls: counters.asymptotic.load(Ordering::Relaxed),
        conventional_optimizer_calls: counters.conventional.load(Ordering::Relaxed),
        records: out.records.len(),
        failures: out.records.iter().filter(|r| !r.is_ok()).count(),
    };
    Ok(out)
}

/// [`run_experiment`] on a dedicated pool of `jobs` threads (`None` uses
/// rayon's default).
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}
