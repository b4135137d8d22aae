//! Empirical large-deviation checks.
//!
//! For each energy the tail `p̂(E, n) = P(|log ‖A_n‖ / n - L(E)| ≥ ε)` is
//! estimated on a grid of `n`, and `log p̂` is fitted by a straight line in
//! `n` to obtain `p̂ ≈ C e^{-η n}`. A positive minimum of `η` over a grid of
//! certified energies is the finite-sample proxy for a uniform estimate.
//!
//! Streams: the tail at word length `n` and grid index `i` uses
//! `(seed, Tail, i, n)`; the reference exponent uses `(seed, Reference, i, 0)`.

use serde::Serialize;
use thiserror::Error;

use crate::furstenberg::{certify_type_f, CertifyParams, Verdict};
use crate::lyapunov::{estimate_lyapunov_with, normalized_log_norms, Generators, LyapunovError};
use crate::model::SingleSiteMeasure;
use crate::rng::{Domain, StreamAddress};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_N_GRID: [usize; 5] = [50, 100, 200, 400, 800];
pub const DEFAULT_TAIL_SAMPLES: usize = 10_000;
pub const MIN_TAIL_SAMPLES: usize = 100;
/// Reference word length is this multiple of the largest `n` in the grid.
pub const REFERENCE_FACTOR: usize = 10;
pub const DEFAULT_REFERENCE_SAMPLES: usize = 200;
/// Default cap on the word lengths in an `n` grid.
pub const MAX_N: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdtError {
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("need at least {MIN_TAIL_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("n grid needs at least 3 strictly increasing positive entries")]
    BadGrid,
    #[error("tails and n grid differ in length")]
    Shape,
    #[error(
        "InsufficientTail: only {usable} grid points have a tail strictly between 0 and 1 (need 3)"
    )]
    InsufficientTail { usable: usize },
    #[error("energy grid is empty")]
    EmptyEnergies,
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

/// One empirical tail probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub n: usize,
    pub tail: f64,
    pub stderr: f64,
    pub num_samples: usize,
}

impl TailEstimate {
    fn from_count(n: usize, hits: usize, num_samples: usize) -> Self {
        let tail = hits as f64 / num_samples as f64;
        Self {
            n,
            tail,
            stderr: (tail * (1.0 - tail) / num_samples as f64).sqrt(),
            num_samples,
        }
    }
}

/// Fraction of `values` with `|v - l_ref| ≥ ε`, for each `ε`. Computed on
/// one shared sample, so the result is non-increasing in `ε`.
pub fn tail_profile(values: &[f64], l_ref: f64, epsilons: &[f64]) -> Vec<f64> {
    epsilons
        .iter()
        .map(|&eps| {
            let hits = values.iter().filter(|&&v| (v - l_ref).abs() >= eps).count();
            hits as f64 / values.len() as f64
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn tail_at(
    mu: &SingleSiteMeasure,
    energy: f64,
    energy_index: usize,
    l_ref: f64,
    epsilon: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<TailEstimate, LdtError> {
    if !(epsilon > 0.0) {
        return Err(LdtError::Epsilon(epsilon));
    }
    if num_samples < MIN_TAIL_SAMPLES {
        return Err(LdtError::TooFewSamples(num_samples));
    }
    if n == 0 {
        return Err(LyapunovError::EmptyWord.into());
    }
    let address = StreamAddress::new(seed, Domain::Tail, energy_index as u64, n as u64);
    let values = normalized_log_norms(mu, energy, n, num_samples, address);
    let hits = values
        .iter()
        .filter(|&&v| (v - l_ref).abs() >= epsilon)
        .count();
    Ok(TailEstimate::from_count(n, hits, num_samples))
}

/// Empirical `P(|log ‖A_n‖ / n - l_ref| ≥ ε)` from `num_samples` words.
pub fn tail_probability(
    mu: &SingleSiteMeasure,
    energy: f64,
    l_ref: f64,
    epsilon: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<TailEstimate, LdtError> {
    tail_at(mu, energy, 0, l_ref, epsilon, n, num_samples, seed)
}

/// Least-squares fit of `log p̂ = log C - η n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub eta: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    /// Grid positions whose zero count was replaced by `1 / num_samples`.
    pub zero_count_points: Vec<usize>,
    /// Fitted decay is not significantly positive.
    pub no_decay: bool,
}

/// Fits a decay law to given tails. `num_samples` sets the ceiling used for
/// zero counts.
pub fn fit_log_linear(
    n_grid: &[usize],
    tails: &[f64],
    num_samples: usize,
) -> Result<DecayFit, LdtError> {
    if tails.len() != n_grid.len() {
        return Err(LdtError::Shape);
    }
    validate_grid(n_grid)?;
    let usable = tails.iter().filter(|&&p| p > 0.0 && p < 1.0).count();
    if usable < 3 {
        return Err(LdtError::InsufficientTail { usable });
    }
    let floor = 1.0 / num_samples as f64;
    let mut zero_count_points = Vec::new();
    let ys: Vec<f64> = tails
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if p > 0.0 {
                p.ln()
            } else {
                zero_count_points.push(k);
                floor.ln()
            }
        })
        .collect();
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let slope_stderr = if xs.len() > 2 {
        (ss_res / (count - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let eta = -slope;
    Ok(DecayFit {
        c: intercept.exp(),
        eta,
        r2,
        slope_stderr,
        zero_count_points,
        no_decay: eta <= 2.0 * slope_stderr,
    })
}

fn validate_grid(n_grid: &[usize]) -> Result<(), LdtError> {
    if n_grid.len() < 3 || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LdtError::BadGrid);
    }
    Ok(())
}

/// Sampling parameters shared by [`fit_decay`] and [`uniform_ldt`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdtParams {
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub num_samples: usize,
    /// Reference word length; `None` means `REFERENCE_FACTOR · max(n_grid)`.
    pub reference_n: Option<usize>,
    pub reference_samples: usize,
}

impl Default for LdtParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            n_grid: DEFAULT_N_GRID.to_vec(),
            num_samples: DEFAULT_TAIL_SAMPLES,
            reference_n: None,
            reference_samples: DEFAULT_REFERENCE_SAMPLES,
        }
    }
}

impl LdtParams {
    pub fn reference_n(&self) -> usize {
        self.reference_n
            .unwrap_or(REFERENCE_FACTOR * self.n_grid.iter().copied().max().unwrap_or(1))
    }

    fn validate(&self) -> Result<(), LdtError> {
        if !(self.epsilon > 0.0) {
            return Err(LdtError::Epsilon(self.epsilon));
        }
        if self.num_samples < MIN_TAIL_SAMPLES {
            return Err(LdtError::TooFewSamples(self.num_samples));
        }
        validate_grid(&self.n_grid)
    }
}

/// Reference exponent and tails at one energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDecay {
    pub energy: f64,
    pub l_ref: f64,
    pub l_ref_std_error: f64,
    pub tails: Vec<TailEstimate>,
}

fn decay_at(
    mu: &SingleSiteMeasure,
    energy: f64,
    energy_index: usize,
    params: &LdtParams,
    seed: u64,
) -> Result<(EnergyDecay, Result<DecayFit, LdtError>), LdtError> {
    params.validate()?;
    let reference = estimate_lyapunov_with(
        mu,
        energy,
        params.reference_n(),
        params.reference_samples,
        StreamAddress::new(seed, Domain::Reference, energy_index as u64, 0),
    )?;
    let tails = params
        .n_grid
        .iter()
        .map(|&n| {
            tail_at(
                mu,
                energy,
                energy_index,
                reference.mean,
                params.epsilon,
                n,
                params.num_samples,
                seed,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = tails.iter().map(|t| t.tail).collect();
    let fit = fit_log_linear(&params.n_grid, &values, params.num_samples);
    let decay = EnergyDecay {
        energy,
        l_ref: reference.mean,
        l_ref_std_error: reference.std_error,
        tails,
    };
    Ok((decay, fit))
}

/// Estimates `L(E)` at the reference length, the tails over `n_grid`, and
/// fits `C e^{-η n}`. Returns the fit together with the raw tails.
pub fn fit_decay(
    mu: &SingleSiteMeasure,
    energy: f64,
    params: &LdtParams,
    seed: u64,
) -> Result<(DecayFit, EnergyDecay), LdtError> {
    let (decay, fit) = decay_at(mu, energy, 0, params, seed)?;
    Ok((fit?, decay))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdtReport {
    pub energies: Vec<f64>,
    pub epsilon: f64,
    pub n_grid: Vec<usize>,
    pub num_samples: usize,
    /// `tails[i][k]` is `p̂(energies[i], n_grid[k])`.
    pub tails: Vec<Vec<f64>>,
    pub tail_stderr: Vec<Vec<f64>>,
    pub eta_fit: Vec<Option<f64>>,
    pub c_fit: Vec<Option<f64>>,
    pub fit_r2: Vec<Option<f64>>,
    pub fit_notes: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub l_ref: Vec<f64>,
    /// Minimum fitted rate over CERTIFIED energies with a successful fit.
    pub eta_min: Option<f64>,
    /// `max ‖A^E(f)‖` over atoms and grid energies.
    pub unif_bd_constant: f64,
    pub warnings: Vec<String>,
}

/// Runs [`fit_decay`] at every grid energy and reduces to a uniform rate.
pub fn uniform_ldt(
    mu: &SingleSiteMeasure,
    energies: &[f64],
    params: &LdtParams,
    certify: &CertifyParams,
    seed: u64,
) -> Result<LdtReport, LdtError> {
    if energies.is_empty() {
        return Err(LdtError::EmptyEnergies);
    }
    params.validate()?;
    let mut report = LdtReport {
        energies: energies.to_vec(),
        epsilon: params.epsilon,
        n_grid: params.n_grid.clone(),
        num_samples: params.num_samples,
        tails: Vec::new(),
        tail_stderr: Vec::new(),
        eta_fit: Vec::new(),
        c_fit: Vec::new(),
        fit_r2: Vec::new(),
        fit_notes: Vec::new(),
        verdicts: Vec::new(),
        l_ref: Vec::new(),
        eta_min: None,
        unif_bd_constant: 0.0,
        warnings: Vec::new(),
    };
    for (i, &energy) in energies.iter().enumerate() {
        let generators = Generators::new(mu, energy);
        let bound = generators.max_log_norm().exp();
        report.unif_bd_constant = report.unif_bd_constant.max(bound);

        let verdict = certify_type_f(mu, energy, certify).verdict;
        if verdict != Verdict::Certified {
            report.warnings.push(format!(
                "energy {energy} is {verdict}; excluded from eta_min"
            ));
        }
        let (decay, fit) = decay_at(mu, energy, i, params, seed)?;
        report
            .tails
            .push(decay.tails.iter().map(|t| t.tail).collect());
        report
            .tail_stderr
            .push(decay.tails.iter().map(|t| t.stderr).collect());
        report.l_ref.push(decay.l_ref);
        report.verdicts.push(verdict);
        match fit {
            Ok(fit) => {
                let mut notes = Vec::new();
                if !fit.zero_count_points.is_empty() {
                    notes.push(format!(
                        "zero counts at grid positions {:?}",
                        fit.zero_count_points
                    ));
                }
                if fit.no_decay {
                    notes.push("NoDecay".to_string());
                }
                if verdict == Verdict::Certified {
                    report.eta_min = Some(report.eta_min.map_or(fit.eta, |m: f64| m.min(fit.eta)));
                }
                report.eta_fit.push(Some(fit.eta));
                report.c_fit.push(Some(fit.c));
                report.fit_r2.push(Some(fit.r2));
                report.fit_notes.push(notes.join("; "));
            }
            Err(err) => {
                let msg = err.to_string();
                report.warnings.push(format!("energy {energy}: {msg}"));
                report.eta_fit.push(None);
                report.c_fit.push(None);
                report.fit_r2.push(None);
                report.fit_notes.push(msg);
            }
        }
    }
    Ok(report)
}
