//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! n_drops = 5
//! n_realizations = 30
//! schemes = ["ee-conventional", "ee-asymptotic", "wmmse-sr"]
//! power_sweep_dbm = [26, 31, 36, 41, 46]
//!
//! [scenario]
//! cells = 3
//! users_per_cell = 3
//! antennas = 4
//! weights = [1, 2, 3]          # per-cell pattern of length K, or all M*K
//! circuit_power_dbm = 30
//! static_power_dbm = 40
//! amp_inefficiency = 2
//! noise_power_dbm = -94        # or noise_figure_db = 7
//! bandwidth_hz = 20e6
//! correlation = 0.0
//!
//! [geometry]
//! cell_radius = 500
//! min_distance = 35
//! pathloss_exponent = 3.8
//! pathloss_intercept_db = 34.5
//!
//! [output]
//! format = "both"              # "csv", "json" or "both"
//! conventional_trace = true
//! ```
//!
//! Every key except `[scenario]`'s dimensions has a default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotic::AsymptoticOptions;
use crate::conventional::ConventionalOptions;
use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, Geometry, SystemParams};

/// Thermal noise density in dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Mrt,
    Zfbf,
    Vsinr,
    WmmseSr,
    EeConventional,
    EeAsymptotic,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Mrt,
        Scheme::Zfbf,
        Scheme::Vsinr,
        Scheme::WmmseSr,
        Scheme::EeConventional,
        Scheme::EeAsymptotic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mrt => "mrt",
            Scheme::Zfbf => "zfbf",
            Scheme::Vsinr => "vsinr",
            Scheme::WmmseSr => "wmmse-sr",
            Scheme::EeConventional => "ee-conventional",
            Scheme::EeAsymptotic => "ee-asymptotic",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_circuit")]
    pub circuit_power_dbm: f64,
    #[serde(default = "default_static")]
    pub static_power_dbm: f64,
    #[serde(default = "default_zeta")]
    pub amp_inefficiency: f64,
    #[serde(default)]
    pub noise_power_dbm: Option<f64>,
    #[serde(default)]
    pub noise_figure_db: Option<f64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub correlation: f64,
}

fn default_circuit() -> f64 {
    30.0
}
fn default_static() -> f64 {
    40.0
}
fn default_zeta() -> f64 {
    2.0
}
fn default_bandwidth() -> f64 {
    20e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_true")]
    pub conventional_trace: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: OutputFormat::Both,
            conventional_trace: true,
        }
    }
}

/// Solver tolerances; defaults match [`ConventionalOptions`] and
/// [`AsymptoticOptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub outer_rel_tol: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub asymptotic_max_inner: usize,
    pub sum_rate_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let c = ConventionalOptions::default();
        let a = AsymptoticOptions::default();
        Self {
            outer_rel_tol: c.outer_rel_tol,
            inner_tol: c.inner_tol,
            max_inner: c.max_inner,
            asymptotic_max_inner: a.max_inner,
            sum_rate_max_iters: c.max_inner,
        }
    }
}

impl SolverConfig {
    pub fn conventional(&self) -> ConventionalOptions {
        ConventionalOptions {
            outer_rel_tol: self.outer_rel_tol,
            inner_tol: self.inner_tol,
            max_inner: self.max_inner,
            ..ConventionalOptions::default()
        }
    }

    pub fn asymptotic(&self) -> AsymptoticOptions {
        AsymptoticOptions {
            outer_rel_tol: self.outer_rel_tol,
            inner_tol: self.inner_tol,
            max_inner: self.asymptotic_max_inner,
            ..AsymptoticOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub n_drops: usize,
    pub n_realizations: usize,
    pub schemes: Vec<Scheme>,
    pub power_sweep_dbm: Vec<f64>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_drops == 0 || self.n_realizations == 0 {
            return Err(Error::Config("n_drops and n_realizations must be at least 1".into()));
        }
        if self.power_sweep_dbm.is_empty() {
            return Err(Error::Config("power sweep is empty".into()));
        }
        if self.power_sweep_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("power sweep values must be finite".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        self.geometry.validate()?;
        self.system_params(self.power_sweep_dbm[0])?;
        Ok(())
    }

    /// Noise power in W: `noise_power_dbm` if given, else thermal noise over
    /// the bandwidth plus `noise_figure_db`, else −94 dBm.
    pub fn noise_power(&self) -> Result<f64> {
        let s = &self.scenario;
        match (s.noise_power_dbm, s.noise_figure_db) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either noise_power_dbm or noise_figure_db, not both".into(),
            )),
            (Some(dbm), None) => Ok(dbm_to_watts(dbm)),
            (None, Some(nf)) => Ok(dbm_to_watts(
                THERMAL_NOISE_DBM_HZ + 10.0 * s.bandwidth_hz.log10() + nf,
            )),
            (None, None) => Ok(dbm_to_watts(-94.0)),
        }
    }

    /// System parameters with every BS budget at `p_dbm`.
    pub fn system_params(&self, p_dbm: f64) -> Result<SystemParams> {
        let s = &self.scenario;
        let mk = s.cells * s.users_per_cell;
        let weights = match &s.weights {
            None => vec![1.0; mk],
            Some(w) if w.len() == s.users_per_cell => {
                (0..mk).map(|i| w[i % s.users_per_cell]).collect()
            }
            Some(w) if w.len() == mk => w.clone(),
            Some(w) => {
                return Err(Error::Config(format!(
                    "weights must have K = {} or M*K = {mk} entries, got {}",
                    s.users_per_cell,
                    w.len()
                )))
            }
        };
        let params = SystemParams {
            cells: s.cells,
            users_per_cell: s.users_per_cell,
            antennas: s.antennas,
            power_budget: vec![dbm_to_watts(p_dbm); s.cells],
            circuit_power: dbm_to_watts(s.circuit_power_dbm),
            static_power: dbm_to_watts(s.static_power_dbm),
            amp_inefficiency: s.amp_inefficiency,
            noise_power: self.noise_power()?,
            weights,
            correlation: s.correlation,
            bandwidth_hz: s.bandwidth_hz,
        };
        params.validate()?;
        Ok(params)
    }
}
