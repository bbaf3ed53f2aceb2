//! Large-system EE optimizer. The beam parameters `(β, λ, p)` are optimized
//! on the deterministic gain matrix, which depends only on pathlosses and
//! the transmit correlation, and are then turned into beamformers from each
//! BS's local instantaneous channels.
//!
//! As in [`crate::conventional`], `η` is in bits per channel use per watt and
//! the regularizer is `λ_j = ln2 · η ζ + μ_j`.

use std::f64::consts::LN_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines;
use crate::conventional::power_multiplier;
use crate::deteq::{self, DetGainMatrix};
use crate::error::{Error, Result};
use crate::model::{BeamformerSet, ChannelSet, Correlation, SystemParams};

/// Relative floor on `λ_j` against `Σ_i ε_{j,i} β_i` when `ln2 η ζ + μ_j = 0`.
pub const LAMBDA_FLOOR_REL: f64 = 1e-12;

/// The inner layer stops when the objective drops by more than this
/// fraction; smaller dips are tolerated and the best iterate is kept.
pub const DECREASE_GUARD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticOptions {
    pub outer_rel_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub power_tol: f64,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            outer_rel_tol: 1e-4,
            max_outer: 60,
            inner_tol: 1e-6,
            max_inner: 100,
            power_tol: 1e-10,
        }
    }
}

/// Long-term beam parameters. `beta` and `p` are flat over users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    /// Deterministic EE `η°` of these parameters, bits per channel use per W.
    pub eta: f64,
    /// Identifies the statistics the parameters were computed for.
    pub scenario_hash: String,
}

impl AsymptoticParams {
    /// SHA-256 over the bit patterns of `β`, `λ` and `p`.
    pub fn params_hash(&self) -> String {
        let mut h = Sha256::new();
        for x in self.beta.iter().chain(&self.lambda).chain(&self.p) {
            h.update(x.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// SHA-256 over the system parameters and the pathloss table.
pub fn scenario_hash(epsilon: &[f64], params: &SystemParams) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params).expect("parameters serialize"));
    for e in epsilon {
        h.update(e.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// `Σ w log2(1 + P_j ε_{j,j,k} N_t / σ²) / Σ_j (N_t P_c + P_0)`, using
/// `||h_{j,j,k}||² ≈ ε_{j,j,k} N_t`.
pub fn eta_max_det(epsilon: &[f64], params: &SystemParams) -> f64 {
    let (kk, mk) = (params.users_per_cell, params.num_users());
    let n = params.antennas as f64;
    let mut num = 0.0;
    for j in 0..params.cells {
        for k in 0..kk {
            let i = j * kk + k;
            let eps = epsilon[j * mk + i];
            num += params.weights[i] * (1.0 + params.power_budget[j] * eps * n / params.noise_power).log2();
        }
    }
    num / params.idle_power()
}

/// Receivers `u = sqrt(g_{jk,jk} p_jk) / (Σ_b g_{b,jk} p_b + σ²)`, weights
/// `s = 1 + SINR°` and loadings `β = w u² s`.
pub fn det_update_receivers(
    gains: &DetGainMatrix,
    p: &[f64],
    weights: &[f64],
    sigma2: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mk = gains.num_users();
    if p.len() != mk || weights.len() != mk {
        return Err(Error::param("power/weight vectors do not match the user count"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::param("noise power must be positive"));
    }
    let mut u = Vec::with_capacity(mk);
    let mut s = Vec::with_capacity(mk);
    let mut beta = Vec::with_capacity(mk);
    for i in 0..mk {
        let rest = gains.interference(p, i, sigma2);
        let own = gains.g[(i, i)] * p[i];
        let ui = own.sqrt() / (own + rest);
        let si = (own + rest) / rest;
        u.push(ui);
        s.push(si);
        beta.push(weights[i] * ui * ui * si);
    }
    Ok((u, s, beta))
}

/// Power update `p_jk = (w s u sqrt(g_{jk,jk}) / (Σ_{mn} w s u² g_{jk,mn} + λ_j))²`
/// with `λ_j = ln2 η ζ + μ_j` and `μ_j` the smallest multiplier meeting `P_j`.
pub fn det_update_power(
    gains: &DetGainMatrix,
    u: &[f64],
    s: &[f64],
    weights: &[f64],
    eta: f64,
    params: &SystemParams,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mk = gains.num_users();
    if u.len() != mk || s.len() != mk || weights.len() != mk {
        return Err(Error::param("receiver vectors do not match the user count"));
    }
    let kk = gains.users_per_cell;
    let base = LN_2 * eta * params.amp_inefficiency;
    let coef: Vec<f64> = (0..mk).map(|i| weights[i] * s[i] * u[i] * u[i]).collect();
    let mut p = vec![0.0; mk];
    let mut lambda = Vec::with_capacity(gains.cells);
    for j in 0..gains.cells {
        let users = j * kk..(j + 1) * kk;
        let num: Vec<f64> = users
            .clone()
            .map(|b| weights[b] * s[b] * u[b] * gains.g[(b, b)].sqrt())
            .collect();
        let den: Vec<f64> = users
            .clone()
            .map(|b| (0..mk).map(|i| coef[i] * gains.g[(b, i)]).sum())
            .collect();
        let power = |mu: f64| -> f64 {
            num.iter()
                .zip(&den)
                .map(|(a, d)| {
                    let q = a / (d + base + mu);
                    if q.is_finite() {
                        q * q
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        let mu = power_multiplier(power, params.power_budget[j], tol);
        let lam = base + mu;
        for (k, b) in users.enumerate() {
            let q = num[k] / (den[k] + lam);
            p[b] = if q.is_finite() { q * q } else { 0.0 };
        }
        lambda.push(lam);
    }
    Ok((p, lambda))
}

/// `λ_j` with the floor applied when the regularizer vanishes.
fn floored_lambda(lambda: &[f64], beta: &[f64], epsilon: &[f64]) -> Vec<f64> {
    let mk = beta.len();
    lambda
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            if l > 0.0 {
                return l;
            }
            let load: f64 = (0..mk).map(|i| epsilon[j * mk + i] * beta[i]).sum();
            if load > 0.0 {
                LAMBDA_FLOOR_REL * load
            } else {
                1.0
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct InnerLayerOutcome {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    /// `R°_Σ − η ζ Σ p` on the gains of the returned parameters.
    pub objective: f64,
    /// `objective − η Σ_j (N_t P_c + P_0)`.
    pub f_value: f64,
    /// Deterministic EE of the returned parameters.
    pub eta_det: f64,
    pub wsr_det: f64,
    pub iterations: usize,
    /// The relative change of the objective fell below the tolerance.
    pub converged: bool,
    /// The objective dropped by more than the tolerance and the best
    /// iterate was kept.
    pub stopped_on_decrease: bool,
    /// Objective after every iteration.
    pub trace: Vec<f64>,
    /// Deterministic weighted sum rate after every iteration.
    pub wsr_trace: Vec<f64>,
}

/// Deterministic inner loop at fixed `η`: receivers and loadings, gain
/// rebuild, power and regularizer update, until the objective settles.
///
/// Starts from `β = w`, `p_jk = P_j / K` and `λ_j = max(ln2 η ζ, σ² / P_j)`.
/// The gains are rebuilt again after `λ` changes so the objective is always
/// evaluated on the gains of the current parameters.
pub fn inner_layer(
    eta: f64,
    epsilon: &[f64],
    corr: &Correlation,
    params: &SystemParams,
    tol: f64,
    max_iters: usize,
    power_tol: f64,
) -> Result<InnerLayerOutcome> {
    if !(eta >= 0.0) {
        return Err(Error::param("eta must be nonnegative"));
    }
    let kk = params.users_per_cell;
    let w = &params.weights;
    let sigma2 = params.noise_power;
    let zeta = params.amp_inefficiency;

    let mut beta = w.clone();
    let init: Vec<f64> = (0..params.cells)
        .map(|j| (LN_2 * eta * zeta).max(sigma2 / params.power_budget[j]))
        .collect();
    let mut lambda = floored_lambda(&init, &beta, epsilon);
    let mut p: Vec<f64> = (0..params.num_users())
        .map(|i| params.power_budget[i / kk] / kk as f64)
        .collect();
    let mut gains = deteq::build_det_gain_matrix(&beta, &lambda, epsilon, corr, params)?;

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut wsr_trace = Vec::new();
    let (mut converged, mut stopped_on_decrease) = (false, false);
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let (u, s, new_beta) = det_update_receivers(&gains, &p, w, sigma2)?;
        beta = new_beta;
        gains = deteq::build_det_gain_matrix(&beta, &lambda, epsilon, corr, params)?;
        let (new_p, new_lambda) = det_update_power(&gains, &u, &s, w, eta, params, power_tol)?;
        p = new_p;
        lambda = floored_lambda(&new_lambda, &beta, epsilon);
        gains = deteq::build_det_gain_matrix(&beta, &lambda, epsilon, corr, params)?;

        let perf = deteq::det_performance(&gains, &p, w, params)?;
        let objective = perf.wsr - eta * zeta * p.iter().sum::<f64>();
        trace.push(objective);
        wsr_trace.push(perf.wsr);
        let prev = best.as_ref().map(|b| b.0);
        if prev.is_none_or(|b| objective >= b) {
            best = Some((objective, beta.clone(), lambda.clone(), p.clone()));
        }
        if let Some(&[a, b]) = trace.last_chunk::<2>() {
            let scale = b.abs().max(f64::MIN_POSITIVE);
            if (b - a).abs() <= tol * scale {
                converged = true;
                break;
            }
            if b < a - DECREASE_GUARD * scale {
                stopped_on_decrease = true;
                break;
            }
        }
    }
    let (_, beta, lambda, p) = best.expect("at least one iteration");
    let gains = deteq::build_det_gain_matrix(&beta, &lambda, epsilon, corr, params)?;
    let perf = deteq::det_performance(&gains, &p, w, params)?;
    let objective = perf.wsr - eta * zeta * p.iter().sum::<f64>();
    Ok(InnerLayerOutcome {
        f_value: objective - eta * params.idle_power(),
        objective,
        eta_det: perf.eta,
        wsr_det: perf.wsr,
        beta,
        lambda,
        p,
        iterations,
        converged,
        stopped_on_decrease,
        trace,
        wsr_trace,
    })
}

/// One outer bisection step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterLayerStep {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta: f64,
    pub f_value: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct OuterLayerOutcome {
    pub params: AsymptoticParams,
    pub eta_min: f64,
    pub eta_max: f64,
    pub trace: Vec<OuterLayerStep>,
    /// Inner-layer objective per iteration for the returned parameters.
    pub inner_trace: Vec<f64>,
}

/// Bisection on `η` over `[0, η°_max]` using the sign of `F°(η)`; returns the
/// parameters of the last `η` with `F°(η) > 0`.
pub fn outer_layer(
    epsilon: &[f64],
    corr: &Correlation,
    params: &SystemParams,
    opts: &AsymptoticOptions,
) -> Result<OuterLayerOutcome> {
    params.validate()?;
    if epsilon.len() != params.cells * params.num_users() {
        return Err(Error::param("pathloss table has the wrong size"));
    }
    if !(opts.outer_rel_tol > 0.0) {
        return Err(Error::param("outer tolerance must be positive"));
    }
    let top = eta_max_det(epsilon, params);
    let delta = opts.outer_rel_tol * top;
    let (mut lo, mut hi) = (0.0, top);
    let mut best: Option<InnerLayerOutcome> = None;
    let mut trace = Vec::new();
    let inner = |eta| {
        inner_layer(
            eta,
            epsilon,
            corr,
            params,
            opts.inner_tol,
            opts.max_inner,
            opts.power_tol,
        )
    };
    while hi - lo > delta && trace.len() < opts.max_outer {
        let eta = 0.5 * (lo + hi);
        let out = inner(eta)?;
        trace.push(OuterLayerStep {
            eta_min: lo,
            eta_max: hi,
            eta,
            f_value: out.f_value,
            inner_iterations: out.iterations,
            inner_converged: out.converged,
        });
        if out.f_value <= 0.0 {
            hi = eta;
        } else {
            lo = eta;
            best = Some(out);
        }
    }
    let best = match best {
        Some(b) => b,
        None => inner(lo)?,
    };
    Ok(OuterLayerOutcome {
        inner_trace: best.trace,
        params: AsymptoticParams {
            eta: best.eta_det,
            beta: best.beta,
            lambda: best.lambda,
            p: best.p,
            scenario_hash: scenario_hash(epsilon, params),
        },
        eta_min: lo,
        eta_max: hi,
        trace,
    })
}

/// Beamformers from local CSI: `v_{j,k} = sqrt(p_jk) v̄_{j,k}` with `v̄` the
/// normalized parametric direction built from BS `j`'s channels only.
pub fn reconstruct_beamformers(channels: &ChannelSet, params: &AsymptoticParams) -> Result<BeamformerSet> {
    baselines::parametric_beams(channels, &params.beta, &params.lambda, &params.p)
}
