//! Scenario geometry, channel generation and finite-dimension link metrics.
//!
//! Indexing conventions used throughout the crate:
//! - user `(j, k)` (user `k` of cell `j`) has flat index `j * K + k`;
//! - the channel from BS `m` to user `(j, k)` has flat index `(m * M + j) * K + k`.
//!
//! All quantities are linear scale (watts, linear pathloss). Rates are in
//! bits per channel use; [`energy_efficiency`] converts to bits/Joule with the
//! configured bandwidth.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::rng::{self, Purpose};

/// Static description of the coordinated cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of cells `M`.
    pub cells: usize,
    /// Users per cell `K`.
    pub users_per_cell: usize,
    /// Transmit antennas per BS `N_t`.
    pub antennas: usize,
    /// Per-BS transmit power budgets `P_j` in W.
    pub power_budget: Vec<f64>,
    /// Circuit power per antenna `P_c` in W.
    pub circuit_power: f64,
    /// Static power per BS `P_0` in W.
    pub static_power: f64,
    /// Power-amplifier inefficiency `ζ ≥ 1`.
    pub amp_inefficiency: f64,
    /// Noise power `σ²` in W.
    pub noise_power: f64,
    /// User weights `w_{j,k}`, flat `j * K + k`.
    pub weights: Vec<f64>,
    /// Exponential transmit-correlation coefficient `ρ ∈ [0, 1)`.
    pub correlation: f64,
    /// System bandwidth in Hz, used only when reporting EE in bits/Joule.
    pub bandwidth_hz: f64,
}

/// `10^((dBm − 30) / 10)` W.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

impl SystemParams {
    /// Reference scenario: `P_j` = 46 dBm, `P_c` = 30 dBm, `P_0` = 40 dBm,
    /// `ζ = 2`, `σ²` = -94 dBm, 20 MHz, unit weights, no correlation.
    pub fn standard(cells: usize, users_per_cell: usize, antennas: usize) -> Self {
        Self {
            cells,
            users_per_cell,
            antennas,
            power_budget: vec![dbm_to_watts(46.0); cells],
            circuit_power: dbm_to_watts(30.0),
            static_power: dbm_to_watts(40.0),
            amp_inefficiency: 2.0,
            noise_power: dbm_to_watts(-94.0),
            weights: vec![1.0; cells * users_per_cell],
            correlation: 0.0,
            bandwidth_hz: 20e6,
        }
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    #[inline]
    pub fn user(&self, cell: usize, k: usize) -> usize {
        cell * self.users_per_cell + k
    }

    /// Power drawn with every beam switched off: `M N_t P_c + M P_0`.
    pub fn idle_power(&self) -> f64 {
        self.cells as f64 * (self.antennas as f64 * self.circuit_power + self.static_power)
    }

    /// Copy with every BS budget set to `watts`.
    pub fn with_power_budget(&self, watts: f64) -> Self {
        let mut p = self.clone();
        p.power_budget = vec![watts; self.cells];
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.users_per_cell == 0 || self.antennas == 0 {
            return Err(Error::param("M, K and N_t must all be at least 1"));
        }
        if self.power_budget.len() != self.cells {
            return Err(Error::param(format!(
                "expected {} power budgets, got {}",
                self.cells,
                self.power_budget.len()
            )));
        }
        if self.weights.len() != self.num_users() {
            return Err(Error::param(format!(
                "expected {} weights, got {}",
                self.num_users(),
                self.weights.len()
            )));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.power_budget.iter().all(|&p| positive(p)) {
            return Err(Error::param("power budgets must be positive"));
        }
        if !positive(self.circuit_power) || !positive(self.static_power) {
            return Err(Error::param("circuit and static power must be positive"));
        }
        if !positive(self.noise_power) {
            return Err(Error::param("noise power must be positive"));
        }
        if !(self.amp_inefficiency.is_finite() && self.amp_inefficiency >= 1.0) {
            return Err(Error::param("amplifier inefficiency must be >= 1"));
        }
        if !self.weights.iter().all(|&w| positive(w)) {
            return Err(Error::param("user weights must be positive"));
        }
        if !positive(self.bandwidth_hz) {
            return Err(Error::param("bandwidth must be positive"));
        }
        check_correlation(self.correlation)
    }
}

fn check_correlation(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::param(format!("correlation coefficient {rho} outside [0, 1)")))
    }
}

/// Exponential correlation matrix `[R]_{ij} = ρ^{|i-j|}`.
pub fn correlation_matrix(rho: f64, antennas: usize) -> Result<CMat> {
    check_correlation(rho)?;
    Ok(CMat::from_fn(antennas, antennas, |i, j| {
        C64::new(rho.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

/// A transmit correlation matrix together with its spectral data.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub matrix: CMat,
    pub sqrt: CMat,
    /// Eigenvalues, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl Correlation {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::param("correlation matrix must be square"));
        }
        if (&matrix - matrix.adjoint()).norm() > 1e-12 * (1.0 + matrix.norm()) {
            return Err(Error::param("correlation matrix must be Hermitian"));
        }
        let (vals, vecs) = linalg::hermitian_eigen(&matrix);
        if vals.iter().any(|&v| v < -1e-10) {
            return Err(Error::param("correlation matrix must be positive semidefinite"));
        }
        let eigenvalues: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
        let sqrt = linalg::from_spectrum(&vecs, |i| eigenvalues[i].sqrt());
        Ok(Self {
            matrix,
            sqrt,
            eigenvalues,
            eigenvectors: vecs,
        })
    }

    pub fn exponential(rho: f64, antennas: usize) -> Result<Self> {
        Self::new(correlation_matrix(rho, antennas)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Hexagonal-cell geometry and the distance-dependent pathloss rule
/// `10 log10 ε = -10 α log10 d - L0` (d in meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub cell_radius: f64,
    pub min_distance: f64,
    pub pathloss_exponent: f64,
    pub pathloss_intercept_db: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            cell_radius: 500.0,
            min_distance: 35.0,
            pathloss_exponent: 3.8,
            pathloss_intercept_db: 34.5,
        }
    }
}

impl Geometry {
    pub fn pathloss_db(&self, distance: f64) -> f64 {
        -10.0 * self.pathloss_exponent * distance.log10() - self.pathloss_intercept_db
    }

    pub fn pathloss(&self, distance: f64) -> f64 {
        10f64.powf(self.pathloss_db(distance) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance > 0.0 && self.cell_radius > self.min_distance) {
            return Err(Error::param("need cell radius > min distance > 0"));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_intercept_db.is_finite()) {
            return Err(Error::param("pathloss parameters must be finite"));
        }
        Ok(())
    }
}

/// Base-station sites of a cluster of `cells` hexagons: the first at the
/// origin, the rest on the first ring so that consecutive sites are mutual
/// neighbours (three cells form a triangle).
pub fn hex_sites(cells: usize, radius: f64) -> Result<Vec<[f64; 2]>> {
    if cells == 0 || cells > 7 {
        return Err(Error::param("hexagonal layout supports 1 to 7 cells"));
    }
    let spacing = 3f64.sqrt() * radius;
    let mut sites = vec![[0.0, 0.0]];
    for i in 1..cells {
        let angle = PI / 6.0 + (i - 1) as f64 * PI / 3.0;
        sites.push([spacing * angle.cos(), spacing * angle.sin()]);
    }
    Ok(sites)
}

/// Point-in-hexagon test for a flat-topped hexagon of circumradius `radius`
/// centred at the origin.
pub fn in_hexagon(p: [f64; 2], radius: f64) -> bool {
    let apothem = 3f64.sqrt() / 2.0 * radius;
    (0..3).all(|i| {
        let a = PI / 6.0 + i as f64 * PI / 3.0;
        (p[0] * a.cos() + p[1] * a.sin()).abs() <= apothem
    })
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// One placement of users: fixes every pathloss for the statistics epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDrop {
    pub cells: usize,
    pub users_per_cell: usize,
    pub bs_positions: Vec<[f64; 2]>,
    /// Flat `j * K + k`.
    pub user_positions: Vec<[f64; 2]>,
    /// Linear pathloss `ε_{m,j,k}`, flat `(m * M + j) * K + k`.
    pub epsilon: Vec<f64>,
}

impl UserDrop {
    #[inline]
    pub fn eps(&self, bs: usize, cell: usize, k: usize) -> f64 {
        self.epsilon[(bs * self.cells + cell) * self.users_per_cell + k]
    }
}

/// Drops `K` users uniformly in each of `M` hexagonal cells, rejecting any
/// position closer than `min_distance` to some BS.
pub fn generate_user_drop(
    geometry: &Geometry,
    cells: usize,
    users_per_cell: usize,
    seed: u64,
) -> Result<UserDrop> {
    geometry.validate()?;
    if users_per_cell == 0 {
        return Err(Error::param("K must be at least 1"));
    }
    let r = geometry.cell_radius;
    let sites = hex_sites(cells, r)?;
    let mut rng = rng::substream(seed, Purpose::Drop, cells as u64, users_per_cell as u64);
    let half_height = 3f64.sqrt() / 2.0 * r;

    let mut users = Vec::with_capacity(cells * users_per_cell);
    for site in &sites {
        for _ in 0..users_per_cell {
            let pos = loop {
                let local = [
                    rng.random_range(-r..=r),
                    rng.random_range(-half_height..=half_height),
                ];
                if !in_hexagon(local, r) {
                    continue;
                }
                let p = [site[0] + local[0], site[1] + local[1]];
                if sites.iter().all(|&s| distance(s, p) >= geometry.min_distance) {
                    break p;
                }
            };
            users.push(pos);
        }
    }

    let mut epsilon = Vec::with_capacity(cells * cells * users_per_cell);
    for site in &sites {
        for u in &users {
            epsilon.push(geometry.pathloss(distance(*site, *u)));
        }
    }
    Ok(UserDrop {
        cells,
        users_per_cell,
        bs_positions: sites,
        user_positions: users,
        epsilon,
    })
}

/// One realization of every BS-to-user channel.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    /// `h_{m,j,k}`, flat `(m * M + j) * K + k`.
    pub h: Vec<CVec>,
    pub epsilon: Vec<f64>,
    pub correlation: Arc<Correlation>,
}

impl ChannelSet {
    #[inline]
    pub fn index(&self, bs: usize, cell: usize, k: usize) -> usize {
        (bs * self.cells + cell) * self.users_per_cell + k
    }

    /// `h_{bs, cell, k}`: channel from BS `bs` to user `(cell, k)`.
    #[inline]
    pub fn get(&self, bs: usize, cell: usize, k: usize) -> &CVec {
        &self.h[self.index(bs, cell, k)]
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    /// Channels seen from BS `bs` to every user, in flat user order.
    pub fn from_bs(&self, bs: usize) -> &[CVec] {
        let n = self.num_users();
        &self.h[bs * n..(bs + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(linalg::is_finite_vec)
    }
}

/// Draws `h_{m,j,k} = sqrt(ε_{m,j,k}) R^{1/2} z` with `z ~ CN(0, I)`.
pub fn generate_channels(drop: &UserDrop, params: &SystemParams, seed: u64) -> Result<ChannelSet> {
    let corr = Arc::new(Correlation::exponential(params.correlation, params.antennas)?);
    generate_channels_with(drop, &corr, seed, 0)
}

/// As [`generate_channels`] with a precomputed correlation and an explicit
/// realization index selecting the substream.
pub fn generate_channels_with(
    drop: &UserDrop,
    corr: &Arc<Correlation>,
    seed: u64,
    realization: u64,
) -> Result<ChannelSet> {
    let n = corr.dim();
    if drop.epsilon.len() != drop.cells * drop.cells * drop.users_per_cell {
        return Err(Error::param("pathloss table has the wrong size"));
    }
    let mut rng = rng::substream(seed, Purpose::Channel, realization, 0);
    let h = drop
        .epsilon
        .iter()
        .map(|&eps| {
            let z = linalg::complex_gaussian(&mut rng, n);
            (&corr.sqrt * z) * C64::new(eps.max(0.0).sqrt(), 0.0)
        })
        .collect();
    Ok(ChannelSet {
        cells: drop.cells,
        users_per_cell: drop.users_per_cell,
        antennas: n,
        h,
        epsilon: drop.epsilon.clone(),
        correlation: Arc::clone(corr),
    })
}

/// Beamforming vectors `v_{j,k}`, flat `j * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub cells: usize,
    pub users_per_cell: usize,
    pub v: Vec<CVec>,
}

impl BeamformerSet {
    pub fn zeros(cells: usize, users_per_cell: usize, antennas: usize) -> Self {
        Self {
            cells,
            users_per_cell,
            v: vec![CVec::zeros(antennas); cells * users_per_cell],
        }
    }

    #[inline]
    pub fn get(&self, cell: usize, k: usize) -> &CVec {
        &self.v[cell * self.users_per_cell + k]
    }

    /// `Σ_k ||v_{j,k}||²` for BS `j`.
    pub fn bs_power(&self, cell: usize) -> f64 {
        let k = self.users_per_cell;
        self.v[cell * k..(cell + 1) * k]
            .iter()
            .map(|v| v.norm_squared())
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.v.iter().map(|v| v.norm_squared()).sum()
    }

    /// Per-BS budgets hold to relative tolerance `rel_tol`.
    pub fn is_feasible(&self, budgets: &[f64], rel_tol: f64) -> bool {
        budgets
            .iter()
            .enumerate()
            .all(|(j, &p)| self.bs_power(j) <= p * (1.0 + rel_tol))
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(linalg::is_finite_vec)
    }
}

/// Received power table: entry `[user * MK + beam]` is `|h_{m,j,k}^H v_{m,n}|²`
/// for user `(j,k)` and beam `(m,n)`.
pub fn received_powers(channels: &ChannelSet, beams: &BeamformerSet) -> Vec<f64> {
    let (m_cells, k_users) = (channels.cells, channels.users_per_cell);
    let mk = m_cells * k_users;
    let mut out = vec![0.0; mk * mk];
    for j in 0..m_cells {
        for k in 0..k_users {
            let user = j * k_users + k;
            for m in 0..m_cells {
                let h = channels.get(m, j, k);
                for n in 0..k_users {
                    let beam = m * k_users + n;
                    out[user * mk + beam] = linalg::inner(h, &beams.v[beam]).norm_sqr();
                }
            }
        }
    }
    out
}

fn check_noise(sigma2: f64) -> Result<()> {
    if sigma2.is_finite() && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::param("noise power must be positive"))
    }
}

fn sinr_from_table(table: &[f64], mk: usize, user: usize, sigma2: f64) -> f64 {
    let row = &table[user * mk..(user + 1) * mk];
    let interference: f64 = row.iter().sum::<f64>() - row[user];
    row[user] / (interference.max(0.0) + sigma2)
}

/// SINR of user `(cell, k)`.
pub fn sinr(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    user: (usize, usize),
    sigma2: f64,
) -> Result<f64> {
    check_noise(sigma2)?;
    let (j, k) = user;
    let kk = channels.users_per_cell;
    let h_own = channels.get(j, j, k);
    let desired = linalg::inner(h_own, beams.get(j, k)).norm_sqr();
    let mut interference = 0.0;
    for m in 0..channels.cells {
        let h = channels.get(m, j, k);
        for n in 0..kk {
            if (m, n) != (j, k) {
                interference += linalg::inner(h, beams.get(m, n)).norm_sqr();
            }
        }
    }
    Ok(desired / (interference + sigma2))
}

/// SINR of every user, flat order.
pub fn sinr_all(channels: &ChannelSet, beams: &BeamformerSet, sigma2: f64) -> Result<Vec<f64>> {
    check_noise(sigma2)?;
    let mk = channels.num_users();
    let table = received_powers(channels, beams);
    Ok((0..mk).map(|u| sinr_from_table(&table, mk, u, sigma2)).collect())
}

/// `Σ w_{j,k} log2(1 + SINR_{j,k})` in bits per channel use.
pub fn weighted_sum_rate(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    weights: &[f64],
    sigma2: f64,
) -> Result<f64> {
    let sinrs = sinr_all(channels, beams, sigma2)?;
    Ok(sinrs
        .iter()
        .zip(weights)
        .map(|(s, w)| w * (1.0 + s).log2())
        .sum())
}

/// Consumed power `ζ Σ ||v||² + M N_t P_c + M P_0` in W.
pub fn total_power(beams: &BeamformerSet, params: &SystemParams) -> f64 {
    params.amp_inefficiency * beams.total_power() + params.idle_power()
}

/// Weighted sum rate per consumed watt, in bits per channel use per W.
/// This is the unit the optimizers work in.
pub fn ee_per_hz(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    weights: &[f64],
    params: &SystemParams,
) -> Result<f64> {
    Ok(weighted_sum_rate(channels, beams, weights, params.noise_power)? / total_power(beams, params))
}

/// Energy efficiency in bits/Joule.
pub fn energy_efficiency(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    weights: &[f64],
    params: &SystemParams,
) -> Result<f64> {
    Ok(params.bandwidth_hz * ee_per_hz(channels, beams, weights, params)?)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn correlation_identity_and_closed_form() {
        let r = correlation_matrix(0.0, 4).unwrap();
        assert_eq!(r, CMat::identity(4, 4));
        let r = correlation_matrix(0.5, 2).unwrap();
        assert_eq!(r[(0, 1)].re, 0.5);
        assert_eq!(r[(1, 0)].re, 0.5);
        assert_eq!(r[(1, 1)].re, 1.0);
        assert!(correlation_matrix(1.0, 3).is_err());
        assert!(correlation_matrix(-0.1, 3).is_err());
    }

    #[test]
    fn strong_correlation_is_positive_definite() {
        // Leading principal minors of the exponential matrix are (1 - ρ²)^(k-1).
        let rho: f64 = 0.9;
        let r = correlation_matrix(rho, 8).unwrap();
        for k in 1..=8 {
            let minor = r.view((0, 0), (k, k)).clone_owned().determinant().re;
            let expect = (1.0 - rho * rho).powi(k as i32 - 1);
            assert!((minor - expect).abs() < 1e-10 * expect.max(1.0), "k={k}");
        }
        let (vals, _) = linalg::hermitian_eigen(&r);
        assert!(vals.iter().cloned().fold(f64::INFINITY, f64::min) > 0.0);
    }

    #[test]
    fn pathloss_at_table_distances() {
        let g = Geometry::default();
        assert!((g.pathloss_db(35.0) - (-93.1746)).abs() < 1e-4);
        assert!((g.pathloss_db(500.0) - (-137.0609)).abs() < 1e-4);
    }

    #[test]
    fn drop_respects_geometry_and_is_deterministic() {
        let g = Geometry::default();
        let a = generate_user_drop(&g, 3, 5, 42).unwrap();
        let b = generate_user_drop(&g, 3, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_user_drop(&g, 3, 5, 43).unwrap());
        for j in 0..3 {
            for k in 0..5 {
                let u = a.user_positions[j * 5 + k];
                let site = a.bs_positions[j];
                assert!(in_hexagon([u[0] - site[0], u[1] - site[1]], g.cell_radius));
                for m in 0..3 {
                    let d = distance(a.bs_positions[m], u);
                    assert!(d >= g.min_distance);
                    assert!((a.eps(m, j, k) - g.pathloss(d)).abs() <= 1e-12 * a.eps(m, j, k));
                    assert!(a.eps(m, j, k) > 0.0);
                }
            }
        }
    }

    #[test]
    fn three_sites_are_mutual_neighbours() {
        let s = hex_sites(3, 500.0).unwrap();
        let d = 3f64.sqrt() * 500.0;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!((distance(s[a], s[b]) - d).abs() < 1e-9);
        }
    }

    fn single_link_drop(eps: f64) -> UserDrop {
        UserDrop {
            cells: 1,
            users_per_cell: 1,
            bs_positions: vec![[0.0, 0.0]],
            user_positions: vec![[100.0, 0.0]],
            epsilon: vec![eps],
        }
    }

    #[test]
    fn uncorrelated_channel_has_unit_variance_entries() {
        let n = 4;
        let corr = Arc::new(Correlation::exponential(0.0, n).unwrap());
        let eps = 3e-9;
        let drop = single_link_drop(eps);
        let draws = 10_000;
        let samples: Vec<f64> = (0..draws)
            .map(|r| {
                let ch = generate_channels_with(&drop, &corr, 11, r).unwrap();
                ch.h[0].norm_squared() / (eps * n as f64)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let stderr = (var / draws as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * stderr, "mean {mean}, stderr {stderr}");
    }

    #[test]
    fn correlated_channel_sample_covariance_matches() {
        let n = 3;
        let rho = 0.5;
        let corr = Arc::new(Correlation::exponential(rho, n).unwrap());
        let drop = single_link_drop(1.0);
        let draws = 10_000usize;
        let hs: Vec<CVec> = (0..draws as u64)
            .map(|r| generate_channels_with(&drop, &corr, 5, r).unwrap().h[0].clone())
            .collect();
        for a in 0..n {
            for b in 0..n {
                let prods: Vec<C64> = hs.iter().map(|h| h[a] * h[b].conj()).collect();
                let mean = prods.iter().sum::<C64>() / draws as f64;
                let var = prods.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / (draws as f64 - 1.0);
                let stderr = (var / draws as f64).sqrt();
                let target = corr.matrix[(a, b)];
                assert!(
                    (mean - target).norm() < 3.0 * stderr,
                    "entry ({a},{b}): {mean} vs {target}, stderr {stderr}"
                );
            }
        }
    }

    #[test]
    fn zero_pathloss_gives_zero_channel() {
        let corr = Arc::new(Correlation::exponential(0.3, 4).unwrap());
        let ch = generate_channels_with(&single_link_drop(0.0), &corr, 1, 0).unwrap();
        assert_eq!(ch.h[0].norm(), 0.0);
    }

    #[test]
    fn single_user_matched_beam_sinr() {
        let (params, ch) = random_instance(1, 1, 4, 10.0, 3);
        let h = ch.get(0, 0, 0).clone();
        let p: f64 = 10.0;
        let beams = BeamformerSet {
            cells: 1,
            users_per_cell: 1,
            v: vec![&h * C64::new(p.sqrt() / h.norm(), 0.0)],
        };
        let s = sinr(&ch, &beams, (0, 0), params.noise_power).unwrap();
        let expect = p * h.norm_squared() / params.noise_power;
        assert!((s - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn zero_beams_give_zero_rate_and_ee() {
        let (params, ch) = random_instance(2, 2, 4, 10.0, 4);
        let beams = BeamformerSet::zeros(2, 2, 4);
        assert_eq!(sinr(&ch, &beams, (1, 1), params.noise_power).unwrap(), 0.0);
        assert_eq!(weighted_sum_rate(&ch, &beams, &params.weights, params.noise_power).unwrap(), 0.0);
        assert_eq!(energy_efficiency(&ch, &beams, &params.weights, &params).unwrap(), 0.0);
        assert!(sinr(&ch, &beams, (0, 0), 0.0).is_err());
    }

    #[test]
    fn unit_sinr_gives_one_bit() {
        let (mut params, ch) = random_instance(1, 1, 2, 1.0, 9);
        params.weights = vec![1.0];
        let h = ch.get(0, 0, 0).clone();
        // Choose the power so that SINR = 1 exactly.
        let p = params.noise_power / h.norm_squared();
        let beams = BeamformerSet {
            cells: 1,
            users_per_cell: 1,
            v: vec![&h * C64::new(p.sqrt() / h.norm(), 0.0)],
        };
        let wsr = weighted_sum_rate(&ch, &beams, &params.weights, params.noise_power).unwrap();
        assert!((wsr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_power_table_values() {
        let params = params(3, 2, 4, 1.0);
        let zero = BeamformerSet::zeros(3, 2, 4);
        assert!((total_power(&zero, &params) - 42.0).abs() < 1e-12);

        let mut one = BeamformerSet::zeros(3, 2, 4);
        one.v[0][0] = C64::new(1.0, 0.0);
        assert!((total_power(&one, &params) - 44.0).abs() < 1e-12);

        let mut rng = substream(1, Purpose::Test, 0, 0);
        let b = random_beams(&mut rng, 3, 2, 4, 5.0);
        let mut doubled = b.clone();
        doubled.v.iter_mut().for_each(|v| *v *= C64::new(2.0, 0.0));
        let idle = params.idle_power();
        let t1 = total_power(&b, &params) - idle;
        let t2 = total_power(&doubled, &params) - idle;
        assert!((t2 - 4.0 * t1).abs() < 1e-12 * t2);
    }

    #[test]
    fn single_user_ee_is_unimodal_in_power() {
        let (mut params, ch) = random_instance(1, 1, 4, 40.0, 21);
        params.weights = vec![1.0];
        let h = ch.get(0, 0, 0).clone();
        let ees: Vec<f64> = (1..=400)
            .map(|i| {
                let p = 40.0 * i as f64 / 400.0;
                let b = BeamformerSet {
                    cells: 1,
                    users_per_cell: 1,
                    v: vec![&h * C64::new(p.sqrt() / h.norm(), 0.0)],
                };
                energy_efficiency(&ch, &b, &params.weights, &params).unwrap()
            })
            .collect();
        let peak = ees
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(ees[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(ees[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ee_scales_with_weights() {
        let (params, ch) = random_instance(2, 2, 4, 10.0, 5);
        let mut rng = substream(2, Purpose::Test, 0, 0);
        let b = random_beams(&mut rng, 2, 2, 4, 10.0);
        let base = energy_efficiency(&ch, &b, &params.weights, &params).unwrap();
        let scaled: Vec<f64> = params.weights.iter().map(|w| 3.5 * w).collect();
        let ee = energy_efficiency(&ch, &b, &scaled, &params).unwrap();
        assert!((ee - 3.5 * base).abs() < 1e-12 * ee);
    }

    #[test]
    fn sinr_invariant_to_beam_phase() {
        let (params, ch) = random_instance(2, 2, 4, 10.0, 6);
        let mut rng = substream(3, Purpose::Test, 0, 0);
        let b = random_beams(&mut rng, 2, 2, 4, 10.0);
        let mut rotated = b.clone();
        rotated.v[1] *= C64::from_polar(1.0, 1.234);
        rotated.v[2] *= C64::from_polar(1.0, -0.4);
        let s1 = sinr_all(&ch, &b, params.noise_power).unwrap();
        let s2 = sinr_all(&ch, &rotated, params.noise_power).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn idle_power_is_a_strict_floor() {
        let (params, _) = random_instance(2, 2, 4, 10.0, 7);
        let zero = BeamformerSet::zeros(2, 2, 4);
        assert_eq!(total_power(&zero, &params), params.idle_power());
        let mut one = zero.clone();
        one.v[3][1] = C64::new(0.0, 1e-3);
        assert!(total_power(&one, &params) > params.idle_power());
    }

    #[test]
    fn params_validation() {
        let mut p = params(2, 2, 4, 1.0);
        assert!(p.validate().is_ok());
        p.amp_inefficiency = 0.5;
        assert!(p.validate().is_err());
        let mut p = params(2, 2, 4, 1.0);
        p.weights[0] = 0.0;
        assert!(p.validate().is_err());
        let mut p = params(2, 2, 4, 1.0);
        p.correlation = 1.0;
        assert!(p.validate().is_err());
    }
}
