//! Per-realization EE maximization: Dinkelbach bisection on the ratio
//! parameter `η` around a WMMSE inner loop with per-BS power multipliers.
//!
//! Units: `η` is in bits per channel use per watt, the same unit as
//! [`crate::model::ee_per_hz`]. The WMMSE equivalence behind the updates holds
//! for rates in nats, so the power penalty that enters the beamformer
//! regularizer is `ln 2 · η ζ`; with that scaling the alternating updates
//! ascend `Σ w log2(1 + SINR) − η ζ Σ ||v||²` exactly.

use std::f64::consts::LN_2;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CVec, C64};
use crate::model::{self, BeamformerSet, ChannelSet, SystemParams};

/// Relative size of the regularization floor used when the regularizer
/// `ln2 η ζ + μ` vanishes, measured against `tr(B)/N_t`.
pub const REG_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionalOptions {
    /// Outer bisection stops when the bracket is narrower than this fraction
    /// of the initial upper bound.
    pub outer_rel_tol: f64,
    pub max_outer: usize,
    /// Relative change of the inner objective that ends the inner loop.
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Relative power tolerance of the multiplier bisection.
    pub mu_tol: f64,
}

impl Default for ConventionalOptions {
    fn default() -> Self {
        Self {
            outer_rel_tol: 1e-4,
            max_outer: 60,
            inner_tol: 1e-6,
            max_inner: 200,
            mu_tol: 1e-10,
        }
    }
}

/// Iterate of the alternating minimization.
#[derive(Debug, Clone)]
pub struct WmmseState {
    /// Receive scalars `u_{j,k}`.
    pub u: Vec<C64>,
    /// MSE weights `s_{j,k}`.
    pub s: Vec<f64>,
    pub v: BeamformerSet,
    /// Per-BS power multipliers `μ_j`.
    pub mu: Vec<f64>,
    pub eta: f64,
}

/// MMSE receivers `u = h^H v / (Σ |h^H v|² + σ²)` and weights
/// `s = 1 / (1 − u* h^H v)`, which equals `1 + SINR` for the fresh `u`.
pub fn update_receivers(
    channels: &ChannelSet,
    v: &BeamformerSet,
    sigma2: f64,
) -> Result<(Vec<C64>, Vec<f64>)> {
    if !(sigma2 > 0.0) {
        return Err(Error::param("noise power must be positive"));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("beamformers"));
    }
    let kk = channels.users_per_cell;
    let mk = channels.num_users();
    let mut u = Vec::with_capacity(mk);
    let mut s = Vec::with_capacity(mk);
    for j in 0..channels.cells {
        for k in 0..kk {
            let own = linalg::inner(channels.get(j, j, k), v.get(j, k));
            let mut rest = sigma2;
            for m in 0..channels.cells {
                let h = channels.get(m, j, k);
                for n in 0..kk {
                    if (m, n) != (j, k) {
                        rest += linalg::inner(h, v.get(m, n)).norm_sqr();
                    }
                }
            }
            let total = rest + own.norm_sqr();
            let uk = own / total;
            // 1 − u* h^H v = (total − |h^H v|²) / total, formed without cancellation.
            let sk = total / rest;
            debug_assert!(sk.is_finite() && sk >= 1.0);
            u.push(uk);
            s.push(sk);
        }
    }
    Ok((u, s))
}

/// Spectral form of one BS's beamformer family
/// `v_k(μ) = (B + (c + μ) I)^{-1} b_k`.
struct BsFamily {
    eig: Vec<f64>,
    basis: linalg::CMat,
    /// `U^H b_k` per user of the cell.
    proj: Vec<CVec>,
    base: f64,
}

impl BsFamily {
    fn power(&self, mu: f64) -> f64 {
        let lam = self.base + mu;
        self.proj
            .iter()
            .map(|y| {
                y.iter()
                    .zip(&self.eig)
                    .map(|(yi, d)| yi.norm_sqr() / (d + lam).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    fn beams(&self, mu: f64) -> Vec<CVec> {
        let lam = self.base + mu;
        self.proj
            .iter()
            .map(|y| {
                let scaled = CVec::from_iterator(
                    y.len(),
                    y.iter().zip(&self.eig).map(|(yi, d)| yi / (d + lam)),
                );
                &self.basis * scaled
            })
            .collect()
    }
}

/// Finds the smallest multiplier that brings `power(μ)` under `budget`.
/// Returns `0` when the unconstrained point is feasible; otherwise bisects
/// on `[0, hi]` (with `hi` found by doubling from 1) and returns the feasible
/// end of the bracket once `|power − budget| ≤ tol · budget`.
pub(crate) fn power_multiplier(power: impl Fn(f64) -> f64, budget: f64, tol: f64) -> f64 {
    if power(0.0) <= budget {
        return 0.0;
    }
    let mut hi = 1.0;
    while power(hi) > budget {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if budget - power(hi) <= tol * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Beamformer update with per-BS multipliers:
/// `v_{j,k} = w s u (Σ_{m,n} w s |u|² h_{j,m,n} h_{j,m,n}^H + (ln2 η ζ + μ_j) I)^{-1} h_{j,j,k}`.
pub fn update_beamformers(
    channels: &ChannelSet,
    u: &[C64],
    s: &[f64],
    weights: &[f64],
    eta: f64,
    params: &SystemParams,
    mu_tol: f64,
) -> Result<(BeamformerSet, Vec<f64>)> {
    let mk = channels.num_users();
    if u.len() != mk || s.len() != mk || weights.len() != mk {
        return Err(Error::param("receiver/weight vectors do not match the user count"));
    }
    if s.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::param("MSE weights must be positive"));
    }
    let n = channels.antennas;
    let kk = channels.users_per_cell;
    let beta: Vec<f64> = (0..mk).map(|i| weights[i] * s[i] * u[i].norm_sqr()).collect();
    let base = LN_2 * eta * params.amp_inefficiency;

    let mut out = BeamformerSet::zeros(channels.cells, kk, n);
    let mut mus = Vec::with_capacity(channels.cells);
    for j in 0..channels.cells {
        let from_j = channels.from_bs(j);
        let gram = linalg::weighted_gram(n, beta.iter().copied().zip(from_j));
        let trace = gram.trace().re;
        let (eig, basis) = linalg::hermitian_eigen(&gram);
        let adj = basis.adjoint();
        let proj = (0..kk)
            .map(|k| {
                let i = j * kk + k;
                &adj * channels.get(j, j, k) * (u[i] * (weights[i] * s[i]))
            })
            .collect();
        let mut fam = BsFamily {
            eig: eig.iter().map(|d| d.max(0.0)).collect(),
            basis,
            proj,
            base,
        };
        if base <= 0.0 {
            let floor = REG_FLOOR_REL * trace / n as f64;
            fam.base = if floor > 0.0 { floor } else { 1.0 };
        }
        let mu = power_multiplier(|m| fam.power(m), params.power_budget[j], mu_tol);
        for (k, v) in fam.beams(mu).into_iter().enumerate() {
            out.v[j * kk + k] = v;
        }
        mus.push(mu);
    }
    Ok((out, mus))
}

/// `G(v) = Σ w R − η ζ Σ ||v||²` (rates in bits per channel use).
pub fn inner_objective(
    channels: &ChannelSet,
    v: &BeamformerSet,
    weights: &[f64],
    eta: f64,
    params: &SystemParams,
) -> Result<f64> {
    let wsr = model::weighted_sum_rate(channels, v, weights, params.noise_power)?;
    Ok(wsr - eta * params.amp_inefficiency * v.total_power())
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub state: WmmseState,
    /// Final `G(v)`.
    pub objective: f64,
    /// `F(η) = G(v) − η (M N_t P_c + M P_0)`; nonnegative iff `EE(v) ≥ η`.
    pub f_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `G` at the initial point followed by one entry per iteration.
    pub trace: Vec<f64>,
}

/// Alternates receiver and beamformer updates from `init` until the inner
/// objective changes by less than `tol` (relative) or `max_iters` is hit.
pub fn inner_solve(
    channels: &ChannelSet,
    weights: &[f64],
    eta: f64,
    params: &SystemParams,
    init: &BeamformerSet,
    tol: f64,
    max_iters: usize,
    mu_tol: f64,
) -> Result<InnerOutcome> {
    if !channels.is_finite() {
        return Err(Error::NonFinite("channels"));
    }
    let mut v = init.clone();
    let mut objective = inner_objective(channels, &v, weights, eta, params)?;
    let mut trace = vec![objective];
    let mut u = vec![C64::new(0.0, 0.0); channels.num_users()];
    let mut s = vec![1.0; channels.num_users()];
    let mut mu = vec![0.0; channels.cells];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        (u, s) = update_receivers(channels, &v, params.noise_power)?;
        (v, mu) = update_beamformers(channels, &u, &s, weights, eta, params, mu_tol)?;
        let next = inner_objective(channels, &v, weights, eta, params)?;
        trace.push(next);
        let change = (next - objective).abs();
        objective = next;
        if change <= tol * objective.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("inner WMMSE loop hit {max_iters} iterations at eta={eta:e}");
    }
    Ok(InnerOutcome {
        f_value: objective - eta * params.idle_power(),
        objective,
        iterations,
        converged,
        trace,
        state: WmmseState { u, s, v, mu, eta },
    })
}

/// `Σ w log2(1 + P_j ||h_{j,j,k}||² / σ²) / Σ_j (N_t P_c + P_0)`: no beam
/// set can exceed this ratio.
pub fn eta_upper_bound(channels: &ChannelSet, weights: &[f64], params: &SystemParams) -> f64 {
    let kk = channels.users_per_cell;
    let mut num = 0.0;
    for j in 0..channels.cells {
        for k in 0..kk {
            let gain = channels.get(j, j, k).norm_squared();
            num += weights[j * kk + k]
                * (1.0 + params.power_budget[j] * gain / params.noise_power).log2();
        }
    }
    num / params.idle_power()
}

/// One outer bisection step, for the convergence log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterStep {
    pub iteration: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta: f64,
    pub f_value: f64,
    pub inner_iterations: usize,
    pub inner_objective: f64,
}

#[derive(Debug, Clone)]
pub struct DinkelbachOutcome {
    /// Final bracket; the returned beams achieve at least `eta_min`.
    pub eta_min: f64,
    pub eta_max: f64,
    pub beams: BeamformerSet,
    /// Ratio achieved by `beams`, bits per channel use per W.
    pub ee: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub trace: Vec<OuterStep>,
}

impl DinkelbachOutcome {
    pub fn eta(&self) -> f64 {
        0.5 * (self.eta_min + self.eta_max)
    }
}

/// Bisection on `F(η) = 0` over `[0, η_max]`. Every inner solve starts from
/// `init`. The beams of the last `η` with `F(η) > 0` are returned.
pub fn dinkelbach_solve(
    channels: &ChannelSet,
    weights: &[f64],
    params: &SystemParams,
    init: &BeamformerSet,
    opts: &ConventionalOptions,
) -> Result<DinkelbachOutcome> {
    if !(opts.outer_rel_tol > 0.0) {
        return Err(Error::param("outer tolerance must be positive"));
    }
    let top = eta_upper_bound(channels, weights, params);
    let delta = opts.outer_rel_tol * top;
    let (mut lo, mut hi) = (0.0, top);
    let mut best: Option<BeamformerSet> = None;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    while hi - lo > delta && trace.len() < opts.max_outer {
        let eta = 0.5 * (lo + hi);
        let out = inner_solve(
            channels,
            weights,
            eta,
            params,
            init,
            opts.inner_tol,
            opts.max_inner,
            opts.mu_tol,
        )?;
        inner_total += out.iterations;
        trace.push(OuterStep {
            iteration: trace.len() + 1,
            eta_min: lo,
            eta_max: hi,
            eta,
            f_value: out.f_value,
            inner_iterations: out.iterations,
            inner_objective: out.objective,
        });
        if out.f_value <= 0.0 {
            hi = eta;
        } else {
            lo = eta;
            best = Some(out.state.v);
        }
    }
    let beams = match best {
        Some(b) => b,
        None => {
            let out = inner_solve(
                channels,
                weights,
                lo,
                params,
                init,
                opts.inner_tol,
                opts.max_inner,
                opts.mu_tol,
            )?;
            inner_total += out.iterations;
            out.state.v
        }
    };
    let ee = model::ee_per_hz(channels, &beams, weights, params)?;
    Ok(DinkelbachOutcome {
        eta_min: lo,
        eta_max: hi,
        beams,
        ee,
        outer_iterations: trace.len(),
        inner_iterations: inner_total,
        trace,
    })
}

/// Writes the outer-loop log as CSV with a header row.
pub fn write_trace_csv<W: Write>(
    mut out: W,
    prefix_header: &str,
    rows: &[(String, OuterStep)],
) -> std::io::Result<()> {
    writeln!(
        out,
        "{prefix_header}iteration,eta_min,eta_max,eta,f_value,inner_iterations,inner_objective"
    )?;
    for (prefix, s) in rows {
        writeln!(
            out,
            "{prefix}{},{},{},{},{},{},{}",
            s.iteration, s.eta_min, s.eta_max, s.eta, s.f_value, s.inner_iterations, s.inner_objective
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines;
    use crate::model::testutil::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn zero_beams_give_trivial_receivers() {
        let (params, ch) = random_instance(2, 2, 4, 10.0, 1);
        let (u, s) = update_receivers(&ch, &BeamformerSet::zeros(2, 2, 4), params.noise_power).unwrap();
        assert!(u.iter().all(|z| z.norm() == 0.0));
        assert!(s.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_user_weight_is_one_plus_snr() {
        let (params, ch) = random_instance(1, 1, 4, 10.0, 2);
        let h = ch.get(0, 0, 0).clone();
        let p: f64 = 10.0;
        let v = BeamformerSet {
            cells: 1,
            users_per_cell: 1,
            v: vec![&h * C64::new(p.sqrt() / h.norm(), 0.0)],
        };
        let (_, s) = update_receivers(&ch, &v, params.noise_power).unwrap();
        let expect = 1.0 + p * h.norm_squared() / params.noise_power;
        assert!((s[0] - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn weights_minus_one_equal_sinr() {
        for seed in 0..20 {
            let (params, ch) = random_instance(2, 3, 4, 5.0, 100 + seed);
            let mut rng = substream(seed, Purpose::Test, 1, 0);
            let v = random_beams(&mut rng, 2, 3, 4, 5.0);
            let (_, s) = update_receivers(&ch, &v, params.noise_power).unwrap();
            let sinrs = model::sinr_all(&ch, &v, params.noise_power).unwrap();
            for (si, gi) in s.iter().zip(&sinrs) {
                assert!(((si - 1.0) - gi).abs() <= 1e-10 * gi.max(1e-300), "{si} vs {gi}");
            }
        }
    }

    #[test]
    fn single_user_zero_eta_is_full_power_matched_filter() {
        let (params, ch) = random_instance(1, 1, 4, 10.0, 3);
        let mrt = baselines::mrt(&ch, &params).unwrap();
        let (u, s) = update_receivers(&ch, &mrt, params.noise_power).unwrap();
        let (v, mu) = update_beamformers(&ch, &u, &s, &params.weights, 0.0, &params, 1e-12).unwrap();
        assert!(mu[0] > 0.0);
        assert!((v.bs_power(0) - 10.0).abs() < 1e-9 * 10.0);
        let h = ch.get(0, 0, 0);
        let align = linalg::inner(h, &v.v[0]).norm() / (h.norm() * v.v[0].norm());
        assert!((align - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beamformer_update_is_feasible() {
        for seed in 0..30 {
            let (params, ch) = random_instance(3, 2, 4, 2.0, 200 + seed);
            let mut rng = substream(seed, Purpose::Test, 2, 0);
            let v = random_beams(&mut rng, 3, 2, 4, 2.0);
            let (u, s) = update_receivers(&ch, &v, params.noise_power).unwrap();
            for eta in [0.0, 0.01, 0.3, 5.0] {
                let (nv, mu) =
                    update_beamformers(&ch, &u, &s, &params.weights, eta, &params, 1e-10).unwrap();
                assert!(nv.is_feasible(&params.power_budget, 1e-9));
                for j in 0..3 {
                    let slack = params.power_budget[j] - nv.bs_power(j);
                    assert!(mu[j] >= 0.0);
                    assert!(mu[j] * slack <= 1e-6 * params.power_budget[j] * mu[j].max(1.0));
                }
            }
        }
    }

    #[test]
    fn beam_power_strictly_decreases_in_multiplier() {
        let (params, ch) = random_instance(2, 2, 4, 5.0, 7);
        let mut rng = substream(7, Purpose::Test, 3, 0);
        let v = random_beams(&mut rng, 2, 2, 4, 5.0);
        let (u, s) = update_receivers(&ch, &v, params.noise_power).unwrap();
        let n = ch.antennas;
        let beta: Vec<f64> = (0..4).map(|i| params.weights[i] * s[i] * u[i].norm_sqr()).collect();
        let gram = linalg::weighted_gram(n, beta.iter().copied().zip(ch.from_bs(0)));
        let power = |mu: f64| -> f64 {
            let a = &gram + linalg::CMat::identity(n, n) * C64::new(0.1 + mu, 0.0);
            let inv = a.try_inverse().unwrap();
            (0..2)
                .map(|k| (&inv * ch.get(0, 0, k) * (u[k] * params.weights[k] * s[k])).norm_squared())
                .sum()
        };
        let grid: Vec<f64> = (0..60).map(|i| 10f64.powf(-6.0 + i as f64 * 0.2)).collect();
        let values: Vec<f64> = grid.iter().map(|&m| power(m)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    fn scalar_objective(ch: &ChannelSet, v: &BeamformerSet, params: &SystemParams, eta: f64) -> f64 {
        // Direct re-computation, independent of the received-power table.
        let mut g = 0.0;
        let mut p = 0.0;
        for j in 0..ch.cells {
            for k in 0..ch.users_per_cell {
                let mut num = 0.0;
                let mut den = params.noise_power;
                for m in 0..ch.cells {
                    for n in 0..ch.users_per_cell {
                        let h = ch.get(m, j, k);
                        let b = v.get(m, n);
                        let mut acc = C64::new(0.0, 0.0);
                        for t in 0..h.len() {
                            acc += h[t].conj() * b[t];
                        }
                        if (m, n) == (j, k) {
                            num = acc.norm_sqr();
                        } else {
                            den += acc.norm_sqr();
                        }
                    }
                }
                g += params.weights[j * ch.users_per_cell + k] * (1.0 + num / den).log2();
                p += v.get(j, k).norm_squared();
            }
        }
        g - eta * params.amp_inefficiency * p
    }

    #[test]
    fn inner_objective_matches_scalar_oracle() {
        let (params, ch) = random_instance(2, 2, 3, 4.0, 8);
        let mut rng = substream(8, Purpose::Test, 4, 0);
        let v = random_beams(&mut rng, 2, 2, 3, 4.0);
        for eta in [0.0, 0.7] {
            let got = inner_objective(&ch, &v, &params.weights, eta, &params).unwrap();
            let want = scalar_objective(&ch, &v, &params, eta);
            assert!((got - want).abs() <= 1e-10 * want.abs());
        }
        let wsr = model::weighted_sum_rate(&ch, &v, &params.weights, params.noise_power).unwrap();
        assert_eq!(inner_objective(&ch, &v, &params.weights, 0.0, &params).unwrap(), wsr);
        let zero = BeamformerSet::zeros(2, 2, 3);
        assert_eq!(inner_objective(&ch, &zero, &params.weights, 0.4, &params).unwrap(), 0.0);
    }

    #[test]
    fn inner_loop_ascends_on_random_instances() {
        for seed in 0..100 {
            let (params, ch) = random_instance(2, 2, 4, 10.0, 300 + seed);
            let init = baselines::vsinr(&ch, &params).unwrap();
            let eta = 0.05 * (1 + seed % 5) as f64;
            let out = inner_solve(&ch, &params.weights, eta, &params, &init, 1e-8, 200, 1e-12).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn f_sign_at_extremes() {
        let (params, ch) = random_instance(2, 2, 4, 10.0, 9);
        let init = baselines::vsinr(&ch, &params).unwrap();
        let f0 = inner_solve(&ch, &params.weights, 0.0, &params, &init, 1e-6, 200, 1e-10).unwrap();
        assert!(f0.f_value >= 0.0);
        let top = eta_upper_bound(&ch, &params.weights, &params);
        let fhi = inner_solve(&ch, &params.weights, 2.0 * top, &params, &init, 1e-6, 200, 1e-10).unwrap();
        assert!(fhi.f_value < 0.0);
    }

    #[test]
    fn single_user_dinkelbach_matches_grid_search() {
        for seed in 0..5 {
            let (mut params, ch) = random_instance(1, 1, 4, 40.0, 400 + seed);
            params.weights = vec![1.0];
            let gain = ch.get(0, 0, 0).norm_squared();
            let grid_best = (1..=200_000)
                .map(|i| {
                    let p = 40.0 * i as f64 / 200_000.0;
                    (1.0 + p * gain / params.noise_power).log2()
                        / (params.amp_inefficiency * p + params.idle_power())
                })
                .fold(0.0, f64::max);
            let init = baselines::vsinr(&ch, &params).unwrap();
            let out = dinkelbach_solve(&ch, &params.weights, &params, &init, &Default::default()).unwrap();
            assert!((out.ee - grid_best).abs() <= 0.01 * grid_best, "{} vs {grid_best}", out.ee);
            assert!(out.beams.is_feasible(&params.power_budget, 1e-9));
            assert!(out.ee >= out.eta_min);
        }
    }

    #[test]
    fn dinkelbach_beats_sum_rate_design_at_high_power() {
        let p = 10f64.powf((46.0 - 30.0) / 10.0);
        for seed in 0..3 {
            let (params, ch) = random_instance(3, 3, 4, p, 500 + seed);
            let init = baselines::vsinr(&ch, &params).unwrap();
            let ee = dinkelbach_solve(&ch, &params.weights, &params, &init, &Default::default()).unwrap();
            let sr = baselines::wmmse_sum_rate(&ch, &params, &init, 1e-6, 200).unwrap();
            let ee_sr = model::ee_per_hz(&ch, &sr.beams, &params.weights, &params).unwrap();
            assert!(ee.ee >= ee_sr, "{} < {}", ee.ee, ee_sr);
            assert!(ee.beams.is_feasible(&params.power_budget, 1e-9));
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let step = OuterStep {
            iteration: 1,
            eta_min: 0.0,
            eta_max: 2.0,
            eta: 1.0,
            f_value: -0.5,
            inner_iterations: 7,
            inner_objective: 3.0,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, "realization,", &[("4,".into(), step)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "realization,iteration,eta_min,eta_max,eta,f_value,inner_iterations,inner_objective");
        assert_eq!(lines[1], "4,1,0,2,1,-0.5,7,3");
    }
}
