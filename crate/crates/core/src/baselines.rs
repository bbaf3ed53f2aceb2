//! Reference transmit strategies: MRT, ZFBF, VSINR and WMMSE sum-rate.
//!
//! MRT, ZFBF and VSINR split each BS budget equally over its users.

use nalgebra::linalg::SVD;

use crate::conventional;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{BeamformerSet, ChannelSet, SystemParams};

fn check_shape(channels: &ChannelSet, params: &SystemParams) -> Result<()> {
    if channels.cells != params.cells
        || channels.users_per_cell != params.users_per_cell
        || channels.antennas != params.antennas
    {
        return Err(Error::param("channel set does not match system dimensions"));
    }
    Ok(())
}

fn scaled_unit(x: CVec, power: f64) -> CVec {
    let norm = x.norm();
    x * C64::new(power.sqrt() / norm, 0.0)
}

/// `v_{j,k} = sqrt(P_j / K) h_{j,j,k} / ||h_{j,j,k}||`.
pub fn mrt(channels: &ChannelSet, params: &SystemParams) -> Result<BeamformerSet> {
    check_shape(channels, params)?;
    let kk = channels.users_per_cell;
    let mut out = BeamformerSet::zeros(channels.cells, kk, channels.antennas);
    for j in 0..channels.cells {
        let share = params.power_budget[j] / kk as f64;
        for k in 0..kk {
            let h = channels.get(j, j, k);
            if !(h.norm() > 0.0) {
                return Err(Error::ZeroChannel { bs: j, cell: j, user: k });
            }
            out.v[j * kk + k] = scaled_unit(h.clone(), share);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ZfbfOutcome {
    pub beams: BeamformerSet,
    /// Set when some BS has at least `N_t` unintended users, so exact nulling
    /// is impossible and a regularized least-squares direction is used.
    pub dimension_deficient: bool,
}

/// Relative ridge used for best-effort nulling when exact nulling is impossible.
const ZF_RIDGE: f64 = 1e-6;

/// Zero-forcing: each beam is the own channel projected onto the null space
/// of every other user's channel seen from the serving BS (own and other
/// cells).
pub fn zfbf(channels: &ChannelSet, params: &SystemParams) -> Result<ZfbfOutcome> {
    check_shape(channels, params)?;
    let n = channels.antennas;
    let kk = channels.users_per_cell;
    let mk = channels.num_users();
    let deficient = mk - 1 >= n;
    let mut out = BeamformerSet::zeros(channels.cells, kk, n);
    for j in 0..channels.cells {
        let from_j = channels.from_bs(j);
        let share = params.power_budget[j] / kk as f64;
        for k in 0..kk {
            let own = j * kk + k;
            let h = &from_j[own];
            if !(h.norm() > 0.0) {
                return Err(Error::ZeroChannel { bs: j, cell: j, user: k });
            }
            let others: Vec<CVec> = (0..mk).filter(|&i| i != own).map(|i| from_j[i].clone()).collect();
            let dir = if others.is_empty() {
                h.clone()
            } else if !deficient {
                null_space_projection(&others, h)
            } else {
                ridge_nulling(n, &others, h)
            };
            if !(dir.norm() > 0.0) {
                return Err(Error::ZeroChannel { bs: j, cell: j, user: k });
            }
            out.v[own] = scaled_unit(dir, share);
        }
    }
    Ok(ZfbfOutcome {
        beams: out,
        dimension_deficient: deficient,
    })
}

/// `(I − Q Q^H) h` with `Q` an orthonormal basis of the span of `others`.
fn null_space_projection(others: &[CVec], h: &CVec) -> CVec {
    let a = CMat::from_columns(others);
    let svd = SVD::new(a, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = h.clone();
    for (c, &sv) in svd.singular_values.iter().enumerate() {
        if sv > 1e-12 * smax {
            let q = u.column(c);
            let coef = q.dotc(h);
            out -= q * coef;
        }
    }
    out
}

/// `(Σ h_o h_o^H + δ I)^{-1} h`, the minimizer of `Σ|h_o^H v|² + δ||v||² − 2 Re(h^H v)`.
fn ridge_nulling(n: usize, others: &[CVec], h: &CVec) -> CVec {
    let gram = linalg::weighted_gram(n, others.iter().map(|x| (1.0, x)));
    let delta = ZF_RIDGE * gram.trace().re / n as f64;
    let (eig, u) = linalg::hermitian_eigen(&gram);
    let y = u.adjoint() * h;
    let scaled = CVec::from_iterator(n, y.iter().zip(&eig).map(|(yi, d)| yi / (d.max(0.0) + delta)));
    u * scaled
}

/// Unit-norm directions `(Σ_{m,n} β_{m,n} h_{j,m,n} h_{j,m,n}^H + λ_j I)^{-1} h_{j,j,k}`
/// scaled to `sqrt(p_{j,k})`. Only BS-`j` channels enter the beams of BS `j`.
///
/// `beta` and `p` are flat over users, `lambda` is per BS.
pub fn parametric_beams(
    channels: &ChannelSet,
    beta: &[f64],
    lambda: &[f64],
    p: &[f64],
) -> Result<BeamformerSet> {
    let mk = channels.num_users();
    if beta.len() != mk || p.len() != mk || lambda.len() != channels.cells {
        return Err(Error::param("parameter lengths do not match the system"));
    }
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::param("lambda must be positive"));
    }
    if beta.iter().chain(p).any(|&x| !(x >= 0.0)) {
        return Err(Error::param("beta and p must be nonnegative"));
    }
    let n = channels.antennas;
    let kk = channels.users_per_cell;
    let mut out = BeamformerSet::zeros(channels.cells, kk, n);
    for j in 0..channels.cells {
        let gram = linalg::weighted_gram(n, beta.iter().copied().zip(channels.from_bs(j)));
        let a = gram + CMat::identity(n, n) * C64::new(lambda[j], 0.0);
        let chol = a
            .cholesky()
            .ok_or(Error::param("regularized gram is not positive definite"))?;
        for k in 0..kk {
            let i = j * kk + k;
            let h = channels.get(j, j, k);
            if !(h.norm() > 0.0) {
                return Err(Error::ZeroChannel { bs: j, cell: j, user: k });
            }
            out.v[i] = scaled_unit(chol.solve(h), p[i]);
        }
    }
    Ok(out)
}

/// Virtual-SINR beams: `β ≡ 1`, `λ_j = σ² / P_j`, equal power.
pub fn vsinr(channels: &ChannelSet, params: &SystemParams) -> Result<BeamformerSet> {
    check_shape(channels, params)?;
    let kk = params.users_per_cell;
    let beta = vec![1.0; params.num_users()];
    let lambda: Vec<f64> = params.power_budget.iter().map(|p| params.noise_power / p).collect();
    let p: Vec<f64> = (0..params.num_users())
        .map(|i| params.power_budget[i / kk] / kk as f64)
        .collect();
    parametric_beams(channels, &beta, &lambda, &p)
}

#[derive(Debug, Clone)]
pub struct SumRateOutcome {
    pub beams: BeamformerSet,
    /// Weighted sum rate at the initial point and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// WMMSE weighted-sum-rate maximization: the inner EE loop at `η = 0`.
pub fn wmmse_sum_rate(
    channels: &ChannelSet,
    params: &SystemParams,
    init: &BeamformerSet,
    tol: f64,
    max_iters: usize,
) -> Result<SumRateOutcome> {
    check_shape(channels, params)?;
    let out = conventional::inner_solve(
        channels,
        &params.weights,
        0.0,
        params,
        init,
        tol,
        max_iters,
        conventional::ConventionalOptions::default().mu_tol,
    )?;
    Ok(SumRateOutcome {
        beams: out.state.v,
        trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}
