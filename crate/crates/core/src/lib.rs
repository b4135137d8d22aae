//! Numerical laboratory for one-dimensional continuum Anderson models.
//!
//! The potential is a concatenation of i.i.d. piecewise-constant pieces drawn
//! from a finitely supported single-site measure. The crate computes exact
//! transfer matrices, Monte Carlo Lyapunov exponents, type-F certificates
//! for the generated matrix group, candidate exceptional energies, and
//! empirical large-deviation rates.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod furstenberg;
pub mod ldt;
pub mod lyapunov;
pub mod model;
pub mod rng;
pub mod transfer;

pub use furstenberg::{
    borg_marchenko_check, certify_type_f, commutator, find_discrete_set, CertifyParams,
    TypeFCertificate, Verdict,
};
pub use ldt::{fit_decay, tail_probability, uniform_ldt, LdtParams, LdtReport};
pub use lyapunov::{estimate_lyapunov, sweep_lyapunov, LyapunovEstimate};
pub use model::{
    check_nontriviality, concat, l2_norm, pieces_equal_ae, sample_word, Atom, NcReport, Piece,
    Segment, SingleSiteMeasure, Word,
};
pub use transfer::{
    cocycle_lognorm, mfunction, transfer_constant, transfer_piece, LogNormState, Mat2,
};
