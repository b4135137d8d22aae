//! Monte Carlo estimation of the Lyapunov exponent.
//!
//! The estimator is the ensemble mean of `log ‖A_n^E(ω)‖ / n` over i.i.d.
//! words. Sample `j` at energy-grid index `i` draws its word from the stream
//! `(seed, Lyapunov, i, 0)` with stream index `j`, so results do not depend on
//! evaluation order or thread count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::SingleSiteMeasure;
use crate::rng::{Domain, StreamAddress};
use crate::transfer::{transfer_piece, LogNormState, Mat2};

pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("word length n must be at least 1")]
    EmptyWord,
    #[error("num_samples must be at least 1")]
    NoSamples,
    #[error("energy grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub energy: f64,
    pub n: usize,
    pub num_samples: usize,
    pub mean: f64,
    pub std_error: f64,
    pub seed: u64,
}

/// Transfer matrices of every atom at one energy.
#[derive(Debug, Clone)]
pub struct Generators {
    pub energy: f64,
    pub matrices: Vec<Mat2<f64>>,
}

impl Generators {
    pub fn new(mu: &SingleSiteMeasure, energy: f64) -> Self {
        Self {
            energy,
            matrices: mu
                .atoms()
                .iter()
                .map(|a| transfer_piece(&a.piece, energy))
                .collect(),
        }
    }

    /// `max_f log ‖A^E(f)‖`, the per-step growth bound.
    pub fn max_log_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| m.op_norm_real().ln())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `log ‖A_n‖` for one word of length `n` drawn from `rng`.
///
/// Draws the same atom sequence as [`crate::model::sample_indices`] on the
/// same generator, so it equals `cocycle_lognorm` of that word.
pub fn sample_log_norm<R: rand::Rng + ?Sized>(
    mu: &SingleSiteMeasure,
    generators: &Generators,
    n: usize,
    rng: &mut R,
) -> f64 {
    let mut state = LogNormState::new();
    for _ in 0..n {
        let k = mu.sample_index(rng);
        state.push(&generators.matrices[k]);
    }
    state.log_norm
}

/// `log ‖A_n‖ / n` for `num_samples` words; element `j` uses stream `j` of
/// `address`. The output order is the sample order.
pub fn normalized_log_norms(
    mu: &SingleSiteMeasure,
    energy: f64,
    n: usize,
    num_samples: usize,
    address: StreamAddress,
) -> Vec<f64> {
    let generators = Generators::new(mu, energy);
    (0..num_samples as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = address.rng(j);
            sample_log_norm(mu, &generators, n, &mut rng) / n as f64
        })
        .collect()
}

/// Sample mean and standard error of the mean, summed in index order.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

fn validate(n: usize, num_samples: usize) -> Result<(), LyapunovError> {
    if n == 0 {
        return Err(LyapunovError::EmptyWord);
    }
    if num_samples == 0 {
        return Err(LyapunovError::NoSamples);
    }
    Ok(())
}

/// Estimate from an explicit stream address; the recorded seed is the
/// address seed.
pub fn estimate_lyapunov_with(
    mu: &SingleSiteMeasure,
    energy: f64,
    n: usize,
    num_samples: usize,
    address: StreamAddress,
) -> Result<LyapunovEstimate, LyapunovError> {
    validate(n, num_samples)?;
    let values = normalized_log_norms(mu, energy, n, num_samples, address);
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(LyapunovEstimate {
        energy,
        n,
        num_samples,
        mean,
        std_error,
        seed: address.seed,
    })
}

/// Estimate at grid position `energy_index`; [`estimate_lyapunov`] is index 0.
pub fn estimate_lyapunov_indexed(
    mu: &SingleSiteMeasure,
    energy: f64,
    energy_index: usize,
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate, LyapunovError> {
    let address = StreamAddress::new(seed, Domain::Lyapunov, energy_index as u64, 0);
    estimate_lyapunov_with(mu, energy, n, num_samples, address)
}

pub fn estimate_lyapunov(
    mu: &SingleSiteMeasure,
    energy: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate, LyapunovError> {
    estimate_lyapunov_indexed(mu, energy, 0, n, num_samples, seed)
}

/// `estimate_lyapunov` at every grid energy, output in grid order.
pub fn sweep_lyapunov(
    mu: &SingleSiteMeasure,
    energies: &[f64],
    n: usize,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<LyapunovEstimate>, LyapunovError> {
    if energies.is_empty() {
        return Err(LyapunovError::EmptyGrid);
    }
    validate(n, num_samples)?;
    energies
        .iter()
        .enumerate()
        .map(|(i, &e)| estimate_lyapunov_indexed(mu, e, i, n, num_samples, seed))
        .collect()
}

/// Time average `log ‖A_n‖ / n` along one long orbit. Kept as an
/// independent cross-check of the ensemble estimator.
pub fn single_orbit_lyapunov(mu: &SingleSiteMeasure, energy: f64, n: usize, seed: u64) -> f64 {
    let generators = Generators::new(mu, energy);
    let mut rng = StreamAddress::new(seed, Domain::Orbit, 0, 0).rng(0);
    sample_log_norm(mu, &generators, n, &mut rng) / n as f64
}

/// Evenly spaced grid including both ends; a single point gives `[lo]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}
