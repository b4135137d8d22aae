//! Experiment configuration (TOML).
//!
//! ```toml
//! delta = 1.0
//! m = 1.0
//! seed = 7
//!
//! [[atoms]]
//! prob = 0.5
//! segments = [[0.0, 1.0]]
//!
//! [[atoms]]
//! prob = 0.5
//! segments = [[1.0, 1.0]]
//!
//! [lyapunov]
//! e_lo = 0.2
//! e_hi = 5.0
//! e_points = 20
//! ```
//!
//! Every block and every field inside a block is optional; unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::furstenberg;
use crate::ldt;
use crate::lyapunov;
use crate::model::{Atom, ModelError, Piece, Segment, SingleSiteMeasure, DEFAULT_VALUE_TOL};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("schema error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Schema {
        line: Option<usize>,
        message: String,
    },
    #[error("{0}")]
    Value(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub prob: f64,
    /// `[value, length]` pairs.
    pub segments: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovBlock {
    pub e_lo: f64,
    pub e_hi: f64,
    pub e_points: usize,
    pub n: usize,
    pub samples: usize,
}

impl Default for LyapunovBlock {
    fn default() -> Self {
        Self {
            e_lo: 0.2,
            e_hi: 5.0,
            e_points: 20,
            n: lyapunov::DEFAULT_N,
            samples: lyapunov::DEFAULT_SAMPLES,
        }
    }
}

impl LyapunovBlock {
    pub fn grid(&self) -> Vec<f64> {
        lyapunov::linspace(self.e_lo, self.e_hi, self.e_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdtBlock {
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub samples: usize,
    pub e_grid: Vec<f64>,
    pub reference_samples: usize,
}

impl Default for LdtBlock {
    fn default() -> Self {
        Self {
            epsilon: ldt::DEFAULT_EPSILON,
            n_grid: ldt::DEFAULT_N_GRID.to_vec(),
            samples: ldt::DEFAULT_TAIL_SAMPLES,
            e_grid: vec![0.5],
            reference_samples: ldt::DEFAULT_REFERENCE_SAMPLES,
        }
    }
}

impl LdtBlock {
    pub fn params(&self) -> ldt::LdtParams {
        ldt::LdtParams {
            epsilon: self.epsilon,
            n_grid: self.n_grid.clone(),
            num_samples: self.samples,
            reference_n: None,
            reference_samples: self.reference_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyBlock {
    pub e_grid: Vec<f64>,
    pub tol_c: f64,
    pub tol_t: f64,
    pub k_max: usize,
}

impl Default for CertifyBlock {
    fn default() -> Self {
        Self {
            e_grid: vec![0.2, 0.5, 1.0, 2.0, 5.0],
            tol_c: furstenberg::DEFAULT_TOL_C,
            tol_t: furstenberg::DEFAULT_TOL_T,
            k_max: furstenberg::DEFAULT_K_MAX,
        }
    }
}

impl CertifyBlock {
    pub fn params(&self) -> furstenberg::CertifyParams {
        furstenberg::CertifyParams {
            tol_c: self.tol_c,
            tol_t: self.tol_t,
            k_max: self.k_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscreteSetBlock {
    pub e_lo: f64,
    pub e_hi: f64,
    pub grid_points: usize,
    pub tol: f64,
    pub pair: [usize; 2],
}

impl Default for DiscreteSetBlock {
    fn default() -> Self {
        Self {
            e_lo: 0.0,
            e_hi: 10.0,
            grid_points: 2000,
            tol: 1e-10,
            pair: [0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BorgMarchenkoBlock {
    /// Samples on the ray `E = -1 - j`.
    pub real_points: usize,
    /// Samples on the ray `E = i(1 + j)`.
    pub complex_points: usize,
}

impl Default for BorgMarchenkoBlock {
    fn default() -> Self {
        Self {
            real_points: 20,
            complex_points: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub delta: f64,
    pub m: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_value_tol")]
    pub value_tol: f64,
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub lyapunov: LyapunovBlock,
    #[serde(default)]
    pub ldt: LdtBlock,
    #[serde(default)]
    pub certify: CertifyBlock,
    #[serde(default)]
    pub discrete_set: DiscreteSetBlock,
    #[serde(default)]
    pub borg_marchenko: BorgMarchenkoBlock,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_value_tol() -> f64 {
    DEFAULT_VALUE_TOL
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn value_err(msg: impl Into<String>) -> ConfigError {
    ConfigError::Value(msg.into())
}

/// Parses, applies defaults and validates.
pub fn parse_config(text: &[u8]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::str::from_utf8(text).map_err(|e| ConfigError::Schema {
        line: None,
        message: format!("config is not UTF-8: {e}"),
    })?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Schema {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// Serializes a config so that `parse_config(emit_config(c)) == c`.
pub fn emit_config(config: &ExperimentConfig) -> Result<String, ConfigError> {
    toml::to_string(config).map_err(|e| value_err(format!("cannot serialize config: {e}")))
}

impl ExperimentConfig {
    /// The single-site measure; errors name the offending atom and segment.
    pub fn measure(&self) -> Result<SingleSiteMeasure, ConfigError> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (k, spec) in self.atoms.iter().enumerate() {
            let segments = spec
                .segments
                .iter()
                .map(|&[value, length]| Segment { value, length })
                .collect();
            let piece = Piece::new(segments).map_err(|e| {
                value_err(
                    ModelError::Atom {
                        atom: k,
                        source: Box::new(e),
                    }
                    .to_string(),
                )
            })?;
            atoms.push(Atom {
                piece,
                prob: spec.prob,
            });
        }
        SingleSiteMeasure::new(atoms, self.delta, self.m).map_err(|e| value_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mu = self.measure()?;
        if !(self.value_tol >= 0.0) {
            return Err(value_err("value_tol must be nonnegative"));
        }
        let l = &self.lyapunov;
        if !(l.e_lo.is_finite() && l.e_hi.is_finite() && l.e_lo <= l.e_hi) {
            return Err(value_err("lyapunov: need finite e_lo <= e_hi"));
        }
        if l.e_points == 0 || l.n == 0 || l.samples == 0 {
            return Err(value_err(
                "lyapunov: e_points, n and samples must be at least 1",
            ));
        }
        let d = &self.ldt;
        if !(d.epsilon > 0.0) {
            return Err(value_err(format!(
                "ldt: epsilon must be positive, got {}",
                d.epsilon
            )));
        }
        if d.n_grid.len() < 3 || d.n_grid[0] == 0 || d.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(value_err(
                "ldt: n_grid needs at least 3 strictly increasing positive entries",
            ));
        }
        if d.n_grid.iter().any(|&n| n > ldt::MAX_N) {
            return Err(value_err(format!(
                "ldt: n_grid entries are capped at {}",
                ldt::MAX_N
            )));
        }
        if d.samples < ldt::MIN_TAIL_SAMPLES {
            return Err(value_err(format!(
                "ldt: samples must be at least {}",
                ldt::MIN_TAIL_SAMPLES
            )));
        }
        if d.e_grid.is_empty() || d.reference_samples == 0 {
            return Err(value_err(
                "ldt: e_grid must be nonempty and reference_samples positive",
            ));
        }
        let c = &self.certify;
        if c.e_grid.is_empty() || !(c.tol_c >= 0.0) || !(c.tol_t >= 0.0) || c.k_max == 0 {
            return Err(value_err(
                "certify: need nonempty e_grid, nonnegative tolerances and k_max >= 1",
            ));
        }
        let s = &self.discrete_set;
        if !(s.e_lo < s.e_hi) || s.grid_points < 2 || !(s.tol > 0.0) {
            return Err(value_err(
                "discrete_set: need e_lo < e_hi, grid_points >= 2 and tol > 0",
            ));
        }
        if mu.len() >= 2 && (s.pair.iter().any(|&i| i >= mu.len()) || s.pair[0] == s.pair[1]) {
            return Err(value_err(format!(
                "discrete_set: pair {:?} must name two distinct atoms out of {}",
                s.pair,
                mu.len()
            )));
        }
        let b = &self.borg_marchenko;
        if b.real_points + b.complex_points == 0 {
            return Err(value_err("borg_marchenko: need at least one energy sample"));
        }
        let all_energies = l
            .grid()
            .into_iter()
            .chain(d.e_grid.iter().copied())
            .chain(c.e_grid.iter().copied());
        for e in all_energies {
            if !e.is_finite() {
                return Err(value_err(format!("energy {e} is not finite")));
            }
        }
        Ok(())
    }
}
