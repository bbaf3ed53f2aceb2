//! Deterministic equivalents of the parametric beam family
//! `v̄_{j,k} ∝ (Σ β h_{j,m,n} h_{j,m,n}^H + λ_j I)^{-1} h_{j,j,k}`.
//!
//! Normalization convention: every trace below is the normalized trace
//! `tr_N(A) = tr(A) / N_t`. For a loading set `S = {s_i}` and `ρ = λ / N_t`,
//!
//! ```text
//! φ(S, ρ)  = ((1/N_t) Σ s_i R / (1 + e_i) + ρ I)^{-1},   e_i = s_i tr_N(R φ)
//! φ'(S, ρ) = φ (I + (1/N_t) Σ s_i e'_i R / (1 + e_i)²) φ,  e' = (I − J)^{-1} v
//! J_ij     = s_i s_j tr_N(R φ R φ) / (N_t (1 + e_j)²),     v_i = s_i tr_N(R φ²)
//! ```
//!
//! and the gain entries for beam `(j,k)` and user `(m,n)` are
//!
//! ```text
//! m_jk  = ε_jjk tr_N(R φ(L_jk)),            Ψ_jk  = ε_jjk tr_N(R φ'(L_jk))
//! m_x   = ε_jmn tr_N(R φ(L_jkmn)),          Ψ_x   = ε_jjk ε_jmn tr_N(R φ_R(L_jkmn))
//! D°    = N_t m_jk² / Ψ_jk,                 I°    = Ψ_x / ((1 + β_mn m_x)² Ψ_jk)
//! ```
//!
//! where `φ_R = φ (R + (1/N_t) Σ s_i f_i R / (1 + e_i)²) φ` with
//! `f = (I − J)^{-1} v_R`, `v_R,i = s_i tr_N(R φ R φ)`, is the deterministic
//! equivalent of `Q R Q`; it coincides with `φ'` when `R = I`.
//!
//! All loadings share one `R`, so `φ` is diagonal in the eigenbasis of `R` and
//! depends on the loadings only through `c = (1/N_t) Σ s_i / (1 + e_i)`. The
//! fixed point then reduces to `e_i = s_i t` for a scalar `t`, and `J` has
//! rank one.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{Correlation, SystemParams};

/// Damping of the reference fixed-point iteration.
pub const DAMPING: f64 = 0.5;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITERS: usize = 10_000;

/// Loadings `s_i = ε_i β_i` with regularizer `ρ = λ / N_t`.
#[derive(Debug, Clone)]
pub struct LoadingSet<'a> {
    pub s: Vec<f64>,
    pub rho: f64,
    pub corr: &'a Correlation,
}

impl<'a> LoadingSet<'a> {
    pub fn new(s: Vec<f64>, rho: f64, corr: &'a Correlation) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param("regularizer rho must be positive"));
        }
        if s.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::param("loadings must be finite and nonnegative"));
        }
        Ok(Self { s, rho, corr })
    }

    fn n(&self) -> f64 {
        self.corr.dim() as f64
    }

    fn spectrum(&self) -> Spectrum<'_> {
        Spectrum {
            r: &self.corr.eigenvalues,
            rho: self.rho,
        }
    }

    /// `c = (1/N_t) Σ s_i / (1 + e_i)`.
    fn load(&self, e: &[f64]) -> f64 {
        self.s.iter().zip(e).map(|(s, e)| s / (1.0 + e)).sum::<f64>() / self.n()
    }
}

/// Normalized traces of `φ = U diag(1 / (c r + ρ)) U^H` against powers of `R`.
#[derive(Clone, Copy)]
struct Spectrum<'a> {
    r: &'a [f64],
    rho: f64,
}

impl Spectrum<'_> {
    fn mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.r.iter().map(|&r| f(r)).sum::<f64>() / self.r.len() as f64
    }

    /// `tr_N(R φ)`.
    fn r_phi(&self, c: f64) -> f64 {
        self.mean(|r| r / (c * r + self.rho))
    }

    /// `tr_N(R φ²)`.
    fn r_phi2(&self, c: f64) -> f64 {
        self.mean(|r| r / (c * r + self.rho).powi(2))
    }

    /// `tr_N(R φ R φ)`.
    fn r_phi_r_phi(&self, c: f64) -> f64 {
        self.mean(|r| (r / (c * r + self.rho)).powi(2))
    }

    /// `tr_N(R φ (I + c' R) φ)`.
    fn r_phi_prime(&self, c: f64, c_prime: f64) -> f64 {
        self.mean(|r| r * (1.0 + c_prime * r) / (c * r + self.rho).powi(2))
    }
}

/// `max_i |e_i − s_i tr_N(R φ(e))| / (1 + e_i)`.
pub fn fixed_point_residual(loading: &LoadingSet, e: &[f64]) -> f64 {
    let t = loading.spectrum().r_phi(loading.load(e));
    loading
        .s
        .iter()
        .zip(e)
        .map(|(s, e)| (e - s * t).abs() / (1.0 + e))
        .fold(0.0, f64::max)
}

/// Damped iteration `e ← (1 − α) e + α s tr_N(R φ(e))` from `e = 1`.
pub fn solve_fixed_point(loading: &LoadingSet, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let spec = loading.spectrum();
    let mut e = vec![1.0; loading.s.len()];
    if e.is_empty() {
        return Ok(e);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let t = spec.r_phi(loading.load(&e));
        residual = 0.0;
        for (ei, si) in e.iter_mut().zip(&loading.s) {
            let rhs = si * t;
            residual = f64::max(residual, (*ei - rhs).abs() / (1.0 + *ei));
            *ei = (1.0 - DAMPING) * *ei + DAMPING * rhs;
        }
        if residual <= tol {
            return Ok(e);
        }
    }
    Err(Error::FixedPointDiverged {
        iterations: max_iters,
        residual,
    })
}

/// Scalar root of `t = tr_N(R φ)` where `c(t) = (1/N_t) Σ s / (1 + s t)`.
///
/// `sums(t)` returns `(Σ s / (1 + s t), Σ s² / (1 + s t)², max s / (1 + s t))`.
/// Safeguarded Newton on `h(t) = t − tr_N(R φ(c(t)))`, bracketed by
/// `h(0) ≤ 0 ≤ h(tr_N(R) / ρ)`.
fn solve_scalar(
    spec: Spectrum,
    n: f64,
    sums: impl Fn(f64) -> (f64, f64, f64),
    t0: f64,
    tol: f64,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = spec.r_phi(0.0);
    let mut t = if t0 > lo && t0 < hi { t0 } else { 0.5 * hi };
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let (s1, s2, smax) = sums(t);
        let c = s1 / n;
        let h = t - spec.r_phi(c);
        residual = h.abs() * smax;
        if residual <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(t);
        }
        if h < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // h'(t) = 1 − tr_N(RφRφ) Σ s² / (N (1 + s t)²) = 1 − ρ(J) > 0.
        let slope = 1.0 - spec.r_phi_r_phi(c) * s2 / n;
        let newton = t - h / slope;
        t = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::FixedPointDiverged {
        iterations: 200,
        residual,
    })
}

/// Same fixed point as [`solve_fixed_point`], solved through the scalar
/// reduction `e_i = s_i t`.
pub fn solve_fixed_point_scalar(loading: &LoadingSet, tol: f64) -> Result<Vec<f64>> {
    if loading.s.is_empty() {
        return Ok(Vec::new());
    }
    let s = &loading.s;
    let t = solve_scalar(loading.spectrum(), loading.n(), |t| sums(s.iter().copied(), t), 1.0, tol)?;
    Ok(s.iter().map(|si| si * t).collect())
}

fn sums(s: impl Iterator<Item = f64>, t: f64) -> (f64, f64, f64) {
    let mut acc = (0.0, 0.0, 0.0);
    for si in s {
        let q = si / (1.0 + si * t);
        acc.0 += q;
        acc.1 += q * q;
        acc.2 = f64::max(acc.2, q);
    }
    acc
}

/// `φ(S, ρ)` for the given fixed-point values.
pub fn phi_matrix(loading: &LoadingSet, e: &[f64]) -> CMat {
    let c = loading.load(e);
    let r = &loading.corr.eigenvalues;
    linalg::from_spectrum(&loading.corr.eigenvectors, |i| 1.0 / (c * r[i] + loading.rho))
}

/// Solves `(I − J) e' = v`. `J` is rank one, `J = a s q^T` with
/// `a = tr_N(RφRφ) / N_t` and `q_j = s_j / (1 + e_j)²`, so the solve is a
/// Sherman–Morrison update and the spectral radius is `a q^T s`.
pub fn solve_e_prime(loading: &LoadingSet, e: &[f64]) -> Result<Vec<f64>> {
    let c = loading.load(e);
    let spec = loading.spectrum();
    let v_scale = spec.r_phi2(c);
    rank_one_solve(loading, e, spec.r_phi_r_phi(c) / loading.n(), v_scale)
}

/// `(I − a s q^T)^{-1} (v_scale s)`.
fn rank_one_solve(loading: &LoadingSet, e: &[f64], a: f64, v_scale: f64) -> Result<Vec<f64>> {
    let qs: f64 = loading.s.iter().zip(e).map(|(s, e)| (s / (1.0 + e)).powi(2)).sum();
    let radius = a * qs;
    if !(radius < 1.0 - 1e-12) {
        return Err(Error::IllConditioned {
            spectral_radius: radius,
        });
    }
    Ok(loading.s.iter().map(|s| s * v_scale / (1.0 - radius)).collect())
}

/// Dense `J` and `v` of the derivative system, for inspection and testing.
pub fn derivative_system(loading: &LoadingSet, e: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let c = loading.load(e);
    let spec = loading.spectrum();
    let (a, b) = (spec.r_phi_r_phi(c), spec.r_phi2(c));
    let n = loading.n();
    let s = &loading.s;
    let j = DMatrix::from_fn(s.len(), s.len(), |i, k| s[i] * s[k] * a / (n * (1.0 + e[k]).powi(2)));
    (j, s.iter().map(|si| si * b).collect())
}

/// `φ'(S, ρ)`.
pub fn phi_prime_matrix(loading: &LoadingSet, e: &[f64], e_prime: &[f64]) -> CMat {
    let c = loading.load(e);
    let c_prime = c_weighted(loading, e, e_prime);
    let r = &loading.corr.eigenvalues;
    let rho = loading.rho;
    linalg::from_spectrum(&loading.corr.eigenvectors, |i| {
        (1.0 + c_prime * r[i]) / (c * r[i] + rho).powi(2)
    })
}

/// `(1/N_t) Σ s_i x_i / (1 + e_i)²`.
fn c_weighted(loading: &LoadingSet, e: &[f64], x: &[f64]) -> f64 {
    loading
        .s
        .iter()
        .zip(e)
        .zip(x)
        .map(|((s, e), x)| s * x / (1.0 + e).powi(2))
        .sum::<f64>()
        / loading.n()
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub e: Vec<f64>,
    pub e_prime: Vec<f64>,
    pub phi: CMat,
    pub phi_prime: CMat,
}

/// Fixed point, derivative and both matrices for one loading set, using the
/// reference damped iteration.
pub fn resolvent(loading: &LoadingSet) -> Result<ResolventSolution> {
    let e = solve_fixed_point(loading, FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS)?;
    let e_prime = solve_e_prime(loading, &e)?;
    Ok(ResolventSolution {
        phi: phi_matrix(loading, &e),
        phi_prime: phi_prime_matrix(loading, &e, &e_prime),
        e,
        e_prime,
    })
}

/// Writes `index,s,e,e_prime` rows for one loading set.
pub fn write_resolvent_csv<W: Write>(mut out: W, loading: &LoadingSet, sol: &ResolventSolution) -> std::io::Result<()> {
    writeln!(out, "index,s,e,e_prime")?;
    for (i, ((s, e), ep)) in loading.s.iter().zip(&sol.e).zip(&sol.e_prime).enumerate() {
        writeln!(out, "{i},{s},{e},{ep}")?;
    }
    Ok(())
}

/// Deterministic gains of the parametric beams.
///
/// Row index is the beam `(j,k)`, column index the receiving user `(m,n)`,
/// both flat; entry `[(j,k), (m,n)]` is the limit of `|h_{j,m,n}^H v̄_{j,k}|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetGainMatrix {
    pub cells: usize,
    pub users_per_cell: usize,
    pub g: DMatrix<f64>,
    pub m_direct: Vec<f64>,
    pub psi_direct: Vec<f64>,
    /// Cross quantities `m°_{j,k,m,n}`; the diagonal is unused and zero.
    pub m_cross: DMatrix<f64>,
    pub psi_cross: DMatrix<f64>,
}

struct Row {
    m: f64,
    psi: f64,
    gains: Vec<f64>,
    m_cross: Vec<f64>,
    psi_cross: Vec<f64>,
}

/// Leave-one/two-out view of a BS's loading vector.
fn leave_out(all: &[f64], a: usize, b: usize) -> impl Iterator<Item = f64> + '_ {
    all.iter()
        .enumerate()
        .filter(move |&(i, _)| i != a && i != b)
        .map(|(_, &s)| s)
}

/// Builds `G°` for loadings `β` (flat users), regularizers `λ` (per BS) and
/// pathlosses `ε` (flat `(bs * M + cell) * K + k`).
pub fn build_det_gain_matrix(
    beta: &[f64],
    lambda: &[f64],
    epsilon: &[f64],
    corr: &Correlation,
    params: &SystemParams,
) -> Result<DetGainMatrix> {
    let (cells, kk) = (params.cells, params.users_per_cell);
    let mk = cells * kk;
    if beta.len() != mk || lambda.len() != cells || epsilon.len() != cells * mk {
        return Err(Error::param("beta/lambda/epsilon sizes do not match the system"));
    }
    if corr.dim() != params.antennas {
        return Err(Error::param("correlation size differs from the antenna count"));
    }
    if beta.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
        return Err(Error::param("beta must be finite and nonnegative"));
    }
    if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::param("lambda must be positive"));
    }
    let n = params.antennas as f64;
    let loads: Vec<Vec<f64>> = (0..cells)
        .map(|j| (0..mk).map(|i| epsilon[j * mk + i] * beta[i]).collect())
        .collect();

    let rows: Vec<Row> = (0..mk)
        .into_par_iter()
        .map(|own| {
            let j = own / kk;
            let all = &loads[j];
            let eps = &epsilon[j * mk..(j + 1) * mk];
            let spec = Spectrum {
                r: &corr.eigenvalues,
                rho: lambda[j] / n,
            };
            let solve = |skip: usize, t0: f64| -> Result<(f64, f64, f64)> {
                let t = solve_scalar(spec, n, |t| sums(leave_out(all, own, skip), t), t0, 1e-14)?;
                let (s1, s2, _) = sums(leave_out(all, own, skip), t);
                Ok((t, s1 / n, s2))
            };
            let derivative = |c: f64, s2: f64, scale: f64| -> Result<f64> {
                // (1/N) Σ s x / (1 + e)² for x = (I − J)^{-1}(scale · s).
                let radius = spec.r_phi_r_phi(c) * s2 / n;
                if !(radius < 1.0 - 1e-12) {
                    return Err(Error::IllConditioned {
                        spectral_radius: radius,
                    });
                }
                Ok(scale * s2 / (n * (1.0 - radius)))
            };

            let (t_own, c, s2) = solve(own, 1.0)?;
            let m = eps[own] * spec.r_phi(c);
            let c_prime = derivative(c, s2, spec.r_phi2(c))?;
            let psi = eps[own] * spec.r_phi_prime(c, c_prime);
            let mut row = Row {
                m,
                psi,
                gains: vec![0.0; mk],
                m_cross: vec![0.0; mk],
                psi_cross: vec![0.0; mk],
            };
            row.gains[own] = if psi > 0.0 { n * m * m / psi } else { 0.0 };
            for other in (0..mk).filter(|&i| i != own) {
                let (_, c, s2) = solve(other, t_own)?;
                let tau2 = spec.r_phi_r_phi(c);
                let m_x = eps[other] * spec.r_phi(c);
                let c_r = derivative(c, s2, tau2)?;
                let psi_x = eps[own] * eps[other] * (1.0 + c_r) * tau2;
                row.m_cross[other] = m_x;
                row.psi_cross[other] = psi_x;
                row.gains[other] = if psi > 0.0 {
                    psi_x / ((1.0 + beta[other] * m_x).powi(2) * psi)
                } else {
                    0.0
                };
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut out = DetGainMatrix {
        cells,
        users_per_cell: kk,
        g: DMatrix::zeros(mk, mk),
        m_direct: Vec::with_capacity(mk),
        psi_direct: Vec::with_capacity(mk),
        m_cross: DMatrix::zeros(mk, mk),
        psi_cross: DMatrix::zeros(mk, mk),
    };
    for (b, row) in rows.into_iter().enumerate() {
        out.m_direct.push(row.m);
        out.psi_direct.push(row.psi);
        for u in 0..mk {
            out.g[(b, u)] = row.gains[u];
            out.m_cross[(b, u)] = row.m_cross[u];
            out.psi_cross[(b, u)] = row.psi_cross[u];
        }
    }
    if out.g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("deterministic gain matrix"));
    }
    Ok(out)
}

impl DetGainMatrix {
    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    /// Interference-plus-noise at user `u`: `Σ_{b≠u} g[b,u] p_b + σ²`.
    pub fn interference(&self, p: &[f64], u: usize, sigma2: f64) -> f64 {
        (0..self.num_users())
            .filter(|&b| b != u)
            .map(|b| self.g[(b, u)] * p[b])
            .sum::<f64>()
            + sigma2
    }

    /// Writes `beam,user,m,psi,gain` rows; diagonal rows carry the direct
    /// quantities.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "beam,user,m,psi,gain")?;
        let mk = self.num_users();
        for b in 0..mk {
            for u in 0..mk {
                let (m, psi) = if b == u {
                    (self.m_direct[b], self.psi_direct[b])
                } else {
                    (self.m_cross[(b, u)], self.psi_cross[(b, u)])
                };
                writeln!(out, "{b},{u},{m},{psi},{}", self.g[(b, u)])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetPerformance {
    pub sinr: Vec<f64>,
    /// `Σ w log2(1 + SINR°)`, bits per channel use.
    pub wsr: f64,
    /// `wsr / (ζ Σ p + M N_t P_c + M P_0)`, bits per channel use per W.
    pub eta: f64,
}

/// Deterministic SINR, weighted sum rate and EE for powers `p`.
pub fn det_performance(
    gains: &DetGainMatrix,
    p: &[f64],
    weights: &[f64],
    params: &SystemParams,
) -> Result<DetPerformance> {
    let mk = gains.num_users();
    if p.len() != mk || weights.len() != mk {
        return Err(Error::param("power/weight vectors do not match the user count"));
    }
    if p.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::param("powers must be nonnegative"));
    }
    let sinr: Vec<f64> = (0..mk)
        .map(|u| gains.g[(u, u)] * p[u] / gains.interference(p, u, params.noise_power))
        .collect();
    let wsr: f64 = sinr.iter().zip(weights).map(|(s, w)| w * (1.0 + s).log2()).sum();
    let consumed = params.amp_inefficiency * p.iter().sum::<f64>() + params.idle_power();
    Ok(DetPerformance {
        sinr,
        wsr,
        eta: wsr / consumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::model::testutil;
    use crate::rng::{substream, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    fn identity(n: usize) -> Correlation {
        Correlation::exponential(0.0, n).unwrap()
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Root of `e = s / ((1/N) s / (1 + e) + ρ)` (R = I), by plain bisection.
    fn scalar_e(s: f64, n: f64, rho: f64) -> f64 {
        bisect(|e| e - s / (s / (n * (1.0 + e)) + rho), 0.0, s / rho + 1.0)
    }

    fn hermitian_err(m: &CMat) -> f64 {
        (m - m.adjoint()).norm()
    }

    fn min_eig(m: &CMat) -> f64 {
        linalg::hermitian_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn empty_set() {
        let corr = identity(4);
        let l = LoadingSet::new(vec![], 0.25, &corr).unwrap();
        let sol = resolvent(&l).unwrap();
        assert!(sol.e.is_empty() && sol.e_prime.is_empty());
        assert!((sol.phi - CMat::identity(4, 4) * C64::new(4.0, 0.0)).norm() < 1e-12);
        assert!((sol.phi_prime - CMat::identity(4, 4) * C64::new(16.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_loading_identity_matches_scalar_root() {
        let corr = identity(8);
        for (s, rho) in [(0.5, 0.1), (2.0, 0.01), (1.0, 1.0)] {
            let l = LoadingSet::new(vec![s], rho, &corr).unwrap();
            let e = solve_fixed_point(&l, 1e-12, 100_000).unwrap();
            let want = scalar_e(s, 8.0, rho);
            assert!((e[0] - want).abs() < 1e-9 * (1.0 + want), "{} vs {want}", e[0]);
        }
    }

    #[test]
    fn e_prime_matches_finite_difference() {
        let corr = identity(8);
        for (s, rho) in [(0.5, 0.1), (2.0, 0.05), (1.0, 1.0)] {
            let l = LoadingSet::new(vec![s], rho, &corr).unwrap();
            let e = solve_fixed_point_scalar(&l, 1e-15).unwrap();
            let ep = solve_e_prime(&l, &e).unwrap();
            let h = 1e-6 * rho;
            let fd = -(scalar_e(s, 8.0, rho + h) - scalar_e(s, 8.0, rho - h)) / (2.0 * h);
            assert!((ep[0] - fd).abs() < 1e-5 * fd.abs(), "{} vs {fd}", ep[0]);
        }
    }

    #[test]
    fn equal_loadings_identity_give_equal_e_and_isotropic_phi() {
        let corr = identity(6);
        let l = LoadingSet::new(vec![0.7; 5], 0.2, &corr).unwrap();
        let sol = resolvent(&l).unwrap();
        assert!(sol.e.iter().all(|&x| (x - sol.e[0]).abs() < 1e-12));
        for m in [&sol.phi, &sol.phi_prime] {
            let d = m[(0, 0)];
            assert!((m - CMat::identity(6, 6) * d).norm() < 1e-12);
        }
    }

    fn random_loading(seed: u64, n: usize, len: usize, rho_corr: f64) -> (Correlation, Vec<f64>, f64) {
        let mut rng = substream(seed, Purpose::Test, 77, 0);
        let corr = Correlation::exponential(rho_corr, n).unwrap();
        let s = (0..len).map(|_| rng.random_range(0.0..3.0)).collect();
        (corr, s, rng.random_range(0.01..1.0))
    }

    #[test]
    fn scalar_and_damped_solvers_agree() {
        for seed in 0..20 {
            let (corr, s, rho) = random_loading(seed, 8, 12, 0.6);
            let l = LoadingSet::new(s, rho, &corr).unwrap();
            let a = solve_fixed_point(&l, 1e-12, 100_000).unwrap();
            let b = solve_fixed_point_scalar(&l, 1e-14).unwrap();
            assert!(fixed_point_residual(&l, &b) <= 1e-12);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + y));
            }
        }
    }

    #[test]
    fn phi_matches_direct_inverse() {
        let (corr, s, rho) = random_loading(3, 6, 9, 0.5);
        let l = LoadingSet::new(s.clone(), rho, &corr).unwrap();
        let e = solve_fixed_point(&l, 1e-12, 100_000).unwrap();
        let mut a = CMat::identity(6, 6) * C64::new(rho, 0.0);
        for (si, ei) in s.iter().zip(&e) {
            a += &corr.matrix * C64::new(si / (6.0 * (1.0 + ei)), 0.0);
        }
        let direct = a.try_inverse().unwrap();
        assert!((phi_matrix(&l, &e) - &direct).norm() < 1e-10 * direct.norm());
        // e_i = s_i tr_N(R φ) with the explicit matrix.
        let t = (&corr.matrix * &direct).trace().re / 6.0;
        for (si, ei) in s.iter().zip(&e) {
            assert!((ei - si * t).abs() < 1e-10 * (1.0 + ei));
        }
    }

    #[test]
    fn e_prime_matches_dense_solve() {
        for seed in 0..10 {
            let (corr, s, rho) = random_loading(seed + 50, 8, 10, 0.7);
            let l = LoadingSet::new(s, rho, &corr).unwrap();
            let e = solve_fixed_point_scalar(&l, 1e-14).unwrap();
            let ep = solve_e_prime(&l, &e).unwrap();
            let (j, v) = derivative_system(&l, &e);
            let m = DMatrix::identity(v.len(), v.len()) - &j;
            let dense = m.clone().lu().solve(&nalgebra::DVector::from_vec(v.clone())).unwrap();
            for (x, y) in ep.iter().zip(dense.iter()) {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-300));
            }
            let resid = &m * nalgebra::DVector::from_vec(ep.clone()) - nalgebra::DVector::from_vec(v.clone());
            assert!(resid.norm() <= 1e-10 * nalgebra::DVector::from_vec(v).norm());
        }
    }

    #[test]
    fn phi_prime_is_derivative_of_phi() {
        let (corr, s, rho) = random_loading(9, 6, 8, 0.4);
        let at = |rho: f64| {
            let l = LoadingSet::new(s.clone(), rho, &corr).unwrap();
            let e = solve_fixed_point_scalar(&l, 1e-15).unwrap();
            phi_matrix(&l, &e)
        };
        let h = 1e-6 * rho;
        let fd = (at(rho - h) - at(rho + h)) / C64::new(2.0 * h, 0.0);
        let l = LoadingSet::new(s.clone(), rho, &corr).unwrap();
        let e = solve_fixed_point_scalar(&l, 1e-15).unwrap();
        let ep = solve_e_prime(&l, &e).unwrap();
        let pp = phi_prime_matrix(&l, &e, &ep);
        assert!((&pp - &fd).norm() < 1e-5 * pp.norm());
    }

    #[test]
    fn ill_conditioned_derivative_is_reported() {
        let corr = identity(2);
        let l = LoadingSet::new(vec![1.0], 1e-6, &corr).unwrap();
        // With e = 0 a single dominant loading gives J a spectral radius near N_t.
        let e = vec![0.0];
        assert!(matches!(solve_e_prime(&l, &e), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn rejects_bad_loadings() {
        let corr = identity(2);
        assert!(LoadingSet::new(vec![1.0], 0.0, &corr).is_err());
        assert!(LoadingSet::new(vec![-1.0], 0.1, &corr).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn resolvent_invariants(
            s in prop::collection::vec(0.0f64..5.0, 0..16),
            rho in 0.005f64..2.0,
            rc in 0.0f64..0.95,
        ) {
            let corr = Correlation::exponential(rc, 6).unwrap();
            let l = LoadingSet::new(s, rho, &corr).unwrap();
            let sol = resolvent(&l).unwrap();
            prop_assert!(sol.e.iter().all(|&x| x >= 0.0));
            prop_assert!(sol.e_prime.iter().all(|&x| x >= 0.0));
            prop_assert!(fixed_point_residual(&l, &sol.e) <= FIXED_POINT_TOL);
            prop_assert!(hermitian_err(&sol.phi) <= 1e-12 * sol.phi.norm());
            prop_assert!(hermitian_err(&sol.phi_prime) <= 1e-12 * sol.phi_prime.norm());
            prop_assert!(min_eig(&sol.phi) > 0.0);
            prop_assert!(min_eig(&sol.phi_prime) >= -1e-10 * sol.phi_prime.norm());
            let top = linalg::hermitian_eigen(&sol.phi).0.into_iter().fold(0.0, f64::max);
            prop_assert!(top <= (1.0 + 1e-12) / rho);
            let phi2 = &sol.phi * &sol.phi;
            prop_assert!(sol.phi_prime.trace().re >= phi2.trace().re * (1.0 - 1e-12));
        }
    }

    fn small_system(m: usize, k: usize, n: usize) -> SystemParams {
        testutil::params(m, k, n, 1.0)
    }

    #[test]
    fn zero_beta_gives_matched_filter_gains() {
        let params = small_system(2, 2, 8);
        let corr = identity(8);
        let eps: Vec<f64> = (0..8).map(|i| 0.5 + 0.25 * i as f64).collect();
        let g = build_det_gain_matrix(&[0.0; 4], &[0.3, 0.7], &eps, &corr, &params).unwrap();
        for b in 0..4 {
            let j = b / 2;
            // ‖h‖² → N ε for the direct term, h_other^H h / ‖h‖ → ε_other.
            assert!((g.g[(b, b)] - 8.0 * eps[j * 4 + b]).abs() < 1e-12 * g.g[(b, b)]);
            for u in (0..4).filter(|&u| u != b) {
                assert!((g.g[(b, u)] - eps[j * 4 + u]).abs() < 1e-12 * eps[j * 4 + u]);
            }
        }
    }

    #[test]
    fn relabeling_permutes_gain_matrix() {
        let params = small_system(1, 4, 6);
        let corr = Correlation::exponential(0.5, 6).unwrap();
        let beta = [0.2, 1.0, 3.0, 0.5];
        let eps = [1.0, 0.5, 2.0, 1.5];
        let g = build_det_gain_matrix(&beta, &[0.4], &eps, &corr, &params).unwrap();
        let perm = [2, 0, 3, 1];
        let beta_p: Vec<f64> = perm.iter().map(|&i| beta[i]).collect();
        let eps_p: Vec<f64> = perm.iter().map(|&i| eps[i]).collect();
        let gp = build_det_gain_matrix(&beta_p, &[0.4], &eps_p, &corr, &params).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let want = g.g[(perm[a], perm[b])];
                assert!((gp.g[(a, b)] - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn gain_entries_are_positive() {
        let params = small_system(3, 3, 4);
        let corr = Correlation::exponential(0.9, 4).unwrap();
        let mut rng = substream(5, Purpose::Test, 78, 0);
        let beta: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..4.0)).collect();
        let eps: Vec<f64> = (0..27).map(|_| rng.random_range(0.01..1.0)).collect();
        let g = build_det_gain_matrix(&beta, &[0.05, 1.0, 3.0], &eps, &corr, &params).unwrap();
        assert!(g.g.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn direct_terms_match_reference_resolvent() {
        let params = small_system(2, 3, 5);
        let corr = Correlation::exponential(0.7, 5).unwrap();
        let beta = [0.3, 1.1, 2.0, 0.9, 0.4, 1.7];
        let eps: Vec<f64> = (0..12).map(|i| 0.2 + 0.1 * i as f64).collect();
        let lambda = [0.6, 0.2];
        let g = build_det_gain_matrix(&beta, &lambda, &eps, &corr, &params).unwrap();
        let own = 4;
        let j = 1;
        let s: Vec<f64> = (0..6).filter(|&i| i != own).map(|i| eps[j * 6 + i] * beta[i]).collect();
        let l = LoadingSet::new(s, lambda[j] / 5.0, &corr).unwrap();
        let sol = resolvent(&l).unwrap();
        let m = eps[j * 6 + own] * (&corr.matrix * &sol.phi).trace().re / 5.0;
        let psi = eps[j * 6 + own] * (&corr.matrix * &sol.phi_prime).trace().re / 5.0;
        assert!((g.m_direct[own] - m).abs() < 1e-9 * m);
        assert!((g.psi_direct[own] - psi).abs() < 1e-9 * psi);
        assert!((g.g[(own, own)] - 5.0 * m * m / psi).abs() < 1e-8 * g.g[(own, own)]);
    }

    #[test]
    fn cross_term_with_identity_uses_phi_prime() {
        let params = small_system(1, 3, 6);
        let corr = identity(6);
        let beta = [0.5, 1.5, 1.0];
        let eps = [1.0, 0.8, 1.2];
        let g = build_det_gain_matrix(&beta, &[0.3], &eps, &corr, &params).unwrap();
        let (own, other) = (0, 2);
        let l = LoadingSet::new(vec![eps[1] * beta[1]], 0.05, &corr).unwrap();
        let sol = resolvent(&l).unwrap();
        let psi_x = eps[own] * eps[other] * sol.phi_prime.trace().re / 6.0;
        let m_x = eps[other] * sol.phi.trace().re / 6.0;
        assert!((g.psi_cross[(own, other)] - psi_x).abs() < 1e-9 * psi_x);
        assert!((g.m_cross[(own, other)] - m_x).abs() < 1e-9 * m_x);
        let want = psi_x / ((1.0 + beta[other] * m_x).powi(2) * g.psi_direct[own]);
        assert!((g.g[(own, other)] - want).abs() < 1e-9 * want);
    }

    #[test]
    fn performance_basics() {
        let params = small_system(1, 1, 4);
        let corr = identity(4);
        let g = build_det_gain_matrix(&[1.0], &[0.5], &[2.0], &corr, &params).unwrap();
        let zero = det_performance(&g, &[0.0], &[1.0], &params).unwrap();
        assert_eq!(zero.sinr, vec![0.0]);
        assert_eq!(zero.wsr, 0.0);
        assert_eq!(zero.eta, 0.0);
        let p = 0.3;
        let perf = det_performance(&g, &[p], &[1.0], &params).unwrap();
        let snr = g.g[(0, 0)] * p / params.noise_power;
        assert!((perf.sinr[0] - snr).abs() < 1e-12 * snr);
        let eta = (1.0 + snr).log2() / (params.amp_inefficiency * p + params.idle_power());
        assert!((perf.eta - eta).abs() < 1e-12 * eta);
    }

    #[test]
    fn csv_dumps_have_headers() {
        let params = small_system(1, 2, 4);
        let corr = identity(4);
        let g = build_det_gain_matrix(&[1.0, 1.0], &[0.5], &[1.0, 1.0], &corr, &params).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beam,user,m,psi,gain\n"));
        assert_eq!(text.lines().count(), 5);

        let l = LoadingSet::new(vec![1.0, 2.0], 0.1, &corr).unwrap();
        let sol = resolvent(&l).unwrap();
        let mut buf = Vec::new();
        write_resolvent_csv(&mut buf, &l, &sol).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
