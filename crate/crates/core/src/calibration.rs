//! Monte Carlo check of the deterministic gain matrix against sample
//! averages of `|h_{j,m,n}^H v̄_{j,k}|²` over fresh channel draws.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::baselines;
use crate::deteq::{self, DetGainMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{ChannelSet, Correlation, SystemParams};
use crate::rng::{substream, Purpose};

/// Pass threshold on the median relative error.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSpec {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub draws: usize,
    pub seed: u64,
    pub correlation: f64,
    /// Flat over users.
    pub beta: Vec<f64>,
    /// Per BS.
    pub lambda: Vec<f64>,
    /// Flat `(bs * M + cell) * K + k`.
    pub epsilon: Vec<f64>,
}

impl CalibrationSpec {
    /// Single cell, `N_t = 40`, `K = 20`, `R = I`, unit pathloss, loadings
    /// spread over `[0.5, 1.5]` and `λ = N_t / 4`, 2000 draws.
    pub fn standard(seed: u64) -> Self {
        let k = 20;
        Self {
            cells: 1,
            users_per_cell: k,
            antennas: 40,
            draws: 2000,
            seed,
            correlation: 0.0,
            beta: (0..k).map(|i| 0.5 + i as f64 / (k - 1) as f64).collect(),
            lambda: vec![10.0],
            epsilon: vec![1.0; k],
        }
    }

    fn params(&self) -> SystemParams {
        let mut p = SystemParams::standard(self.cells, self.users_per_cell, self.antennas);
        p.correlation = self.correlation;
        p
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub median_rel_err: f64,
    pub median_rel_err_direct: f64,
    pub median_rel_err_cross: f64,
    pub max_rel_err: f64,
    #[serde(skip)]
    pub det: DMatrix<f64>,
    #[serde(skip)]
    pub sampled: DMatrix<f64>,
}

impl CalibrationReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.median_rel_err <= threshold
    }
}

fn median(mut x: Vec<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Sample mean of `|h_{j,m,n}^H v̄_{j,k}|²` with unit-norm parametric beams,
/// laid out like [`DetGainMatrix::g`].
pub fn sampled_gain_matrix(spec: &CalibrationSpec) -> Result<DMatrix<f64>> {
    let corr = Arc::new(Correlation::exponential(spec.correlation, spec.antennas)?);
    let (cells, kk, n) = (spec.cells, spec.users_per_cell, spec.antennas);
    let mk = cells * kk;
    if spec.draws == 0 {
        return Err(Error::param("calibration needs at least one draw"));
    }
    let mut acc = DMatrix::<f64>::zeros(mk, mk);
    let unit = vec![1.0; mk];
    for draw in 0..spec.draws {
        let mut rng = substream(spec.seed, Purpose::Calibration, draw as u64, 0);
        let h = spec
            .epsilon
            .iter()
            .map(|&eps| (&corr.sqrt * linalg::complex_gaussian(&mut rng, n)) * C64::new(eps.sqrt(), 0.0))
            .collect();
        let ch = ChannelSet {
            cells,
            users_per_cell: kk,
            antennas: n,
            h,
            epsilon: spec.epsilon.clone(),
            correlation: Arc::clone(&corr),
        };
        let beams = baselines::parametric_beams(&ch, &spec.beta, &spec.lambda, &unit)?;
        for b in 0..mk {
            let j = b / kk;
            for u in 0..mk {
                acc[(b, u)] += linalg::inner(&ch.from_bs(j)[u], &beams.v[b]).norm_sqr();
            }
        }
    }
    Ok(acc / spec.draws as f64)
}

pub fn det_gain_matrix(spec: &CalibrationSpec) -> Result<DetGainMatrix> {
    let corr = Correlation::exponential(spec.correlation, spec.antennas)?;
    deteq::build_det_gain_matrix(&spec.beta, &spec.lambda, &spec.epsilon, &corr, &spec.params())
}

/// Compares every entry of `G°` with its sample average.
pub fn run_calibration(spec: &CalibrationSpec) -> Result<CalibrationReport> {
    let det = det_gain_matrix(spec)?.g;
    let sampled = sampled_gain_matrix(spec)?;
    let mk = det.nrows();
    let (mut direct, mut cross) = (Vec::new(), Vec::new());
    for b in 0..mk {
        for u in 0..mk {
            let err = (det[(b, u)] - sampled[(b, u)]).abs() / sampled[(b, u)];
            if b == u {
                direct.push(err);
            } else {
                cross.push(err);
            }
        }
    }
    let all: Vec<f64> = direct.iter().chain(&cross).copied().collect();
    Ok(CalibrationReport {
        median_rel_err: median(all.clone()),
        median_rel_err_direct: median(direct),
        median_rel_err_cross: median(cross),
        max_rel_err: all.iter().copied().fold(0.0, f64::max),
        det,
        sampled,
    })
}
