//! Single-site potentials, the single-site measure, concatenation and the
//! nontriviality check.
//!
//! A [`Piece`] is a piecewise-constant potential on `[0, s)`, stored as an
//! ordered list of `(value, length)` segments. A [`SingleSiteMeasure`] is a
//! finitely supported probability measure on pieces whose lengths all lie in
//! `[delta, m]`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{Domain, StreamAddress};

/// Default tolerance for comparing potential heights.
pub const DEFAULT_VALUE_TOL: f64 = 1e-12;

/// Tolerance on the probability sum of a measure.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("piece has no segments")]
    EmptyPiece,
    #[error("segment {segment}: length {length} must be positive and finite")]
    BadLength { segment: usize, length: f64 },
    #[error("segment {segment}: value {value} is not finite")]
    BadValue { segment: usize, value: f64 },
    #[error("atom {atom}, {source}")]
    Atom {
        atom: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("measure has no atoms")]
    NoAtoms,
    #[error("invalid length bounds: need 0 < delta <= m, got delta = {delta}, m = {m}")]
    Bounds { delta: f64, m: f64 },
    #[error("atom {atom}: probability {prob} outside (0, 1]")]
    ProbRange { atom: usize, prob: f64 },
    #[error("probabilities sum to {sum}")]
    ProbSum { sum: f64 },
    #[error("atom {atom}: piece length {length} outside [{delta}, {m}]")]
    LengthOutOfRange {
        atom: usize,
        length: f64,
        delta: f64,
        m: f64,
    },
}

/// One constant stretch of a piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub value: f64,
    pub length: f64,
}

/// Piecewise-constant potential on `[0, total_length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    segments: Vec<Segment>,
    total_length: f64,
}

impl Piece {
    pub fn new(segments: Vec<Segment>) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::EmptyPiece);
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.length.is_finite() && seg.length > 0.0) {
                return Err(ModelError::BadLength {
                    segment: i,
                    length: seg.length,
                });
            }
            if !seg.value.is_finite() {
                return Err(ModelError::BadValue {
                    segment: i,
                    value: seg.value,
                });
            }
        }
        let total_length = segments.iter().map(|s| s.length).sum();
        Ok(Self {
            segments,
            total_length,
        })
    }

    /// Builds a piece from `(value, length)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, ModelError> {
        Self::new(
            pairs
                .iter()
                .map(|&(value, length)| Segment { value, length })
                .collect(),
        )
    }

    /// A single constant segment.
    pub fn constant(value: f64, length: f64) -> Result<Self, ModelError> {
        Self::from_pairs(&[(value, length)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn min_value(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same function with adjacent equal-valued segments merged.
    pub fn canonical(&self) -> Piece {
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            match out.last_mut() {
                Some(last) if last.value == seg.value => last.length += seg.length,
                _ => out.push(*seg),
            }
        }
        Piece {
            segments: out,
            total_length: self.total_length,
        }
    }
}

/// `f1 ⋆ f2`: `f1` on `[0, ℓ1)` followed by `f2` shifted to `[ℓ1, ℓ1 + ℓ2)`.
pub fn concat(f1: &Piece, f2: &Piece) -> Piece {
    let mut segments = Vec::with_capacity(f1.segments.len() + f2.segments.len());
    segments.extend_from_slice(&f1.segments);
    segments.extend_from_slice(&f2.segments);
    Piece {
        segments,
        total_length: f1.total_length + f2.total_length,
    }
}

/// `sqrt(Σ value² · length)`.
pub fn l2_norm(f: &Piece) -> f64 {
    f.segments
        .iter()
        .map(|s| s.value * s.value * s.length)
        .sum::<f64>()
        .sqrt()
}

/// Result of an almost-everywhere comparison of two pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeComparison {
    pub equal: bool,
    /// Lebesgue measure of `{x : |f1(x) - f2(x)| > tol}`, plus the length
    /// mismatch when the domains differ.
    pub disagreement_measure: f64,
}

/// Exact measure of the set where two pieces differ, by merging their
/// segment partitions.
///
/// Breakpoints that differ only by accumulated rounding of the partial sums
/// produce slivers of width `~1e-12 · length`; those are discarded, so
/// different encodings of one function compare equal.
pub fn pieces_equal_ae(f1: &Piece, f2: &Piece, tol_val: f64) -> AeComparison {
    let scale = f1.total_length.max(f2.total_length);
    let slop = 1e-12 * scale * (f1.segments.len() + f2.segments.len()) as f64;

    let overlap = f1.total_length.min(f2.total_length);
    let mut length_gap = (f1.total_length - f2.total_length).abs();
    if length_gap <= slop {
        length_gap = 0.0;
    }

    // the last segment of each piece runs to the overlap end, so rounding in
    // the running sums cannot leave a gap
    let end_of = |f: &Piece, k: usize, acc: f64| {
        if k + 1 == f.segments.len() {
            f64::INFINITY
        } else {
            acc + f.segments[k].length
        }
    };
    let (mut i, mut j) = (0usize, 0usize);
    let (mut end1, mut end2) = (end_of(f1, 0, 0.0), end_of(f2, 0, 0.0));
    let mut pos = 0.0f64;
    let mut measure = 0.0f64;
    while pos < overlap {
        let next = end1.min(end2).min(overlap);
        if (f1.segments[i].value - f2.segments[j].value).abs() > tol_val {
            measure += next - pos;
        }
        pos = next;
        if end1 <= pos {
            i += 1;
            end1 = end_of(f1, i, end1);
        }
        if end2 <= pos {
            j += 1;
            end2 = end_of(f2, j, end2);
        }
    }
    if measure <= slop {
        measure = 0.0;
    }
    let disagreement_measure = measure + length_gap;
    AeComparison {
        equal: disagreement_measure == 0.0,
        disagreement_measure,
    }
}

/// One support point of the single-site measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub piece: Piece,
    pub prob: f64,
}

/// Finitely supported probability measure on pieces.
#[derive(Debug, Clone)]
pub struct SingleSiteMeasure {
    atoms: Vec<Atom>,
    delta: f64,
    m_len: f64,
    l2_bound: f64,
    sampler: WeightedIndex<f64>,
}

impl PartialEq for SingleSiteMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.delta == other.delta && self.m_len == other.m_len
    }
}

impl SingleSiteMeasure {
    pub fn new(atoms: Vec<Atom>, delta: f64, m_len: f64) -> Result<Self, ModelError> {
        if !(delta.is_finite() && m_len.is_finite() && delta > 0.0 && m_len >= delta) {
            return Err(ModelError::Bounds { delta, m: m_len });
        }
        if atoms.is_empty() {
            return Err(ModelError::NoAtoms);
        }
        let slack = 1e-12 * m_len;
        for (k, atom) in atoms.iter().enumerate() {
            if !(atom.prob > 0.0 && atom.prob <= 1.0) {
                return Err(ModelError::ProbRange {
                    atom: k,
                    prob: atom.prob,
                });
            }
            let len = atom.piece.total_length();
            if len < delta - slack || len > m_len + slack {
                return Err(ModelError::LengthOutOfRange {
                    atom: k,
                    length: len,
                    delta,
                    m: m_len,
                });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.prob).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::ProbSum { sum });
        }
        let sampler = WeightedIndex::new(atoms.iter().map(|a| a.prob))
            .expect("probabilities validated positive");
        let l2_bound = atoms.iter().map(|a| l2_norm(&a.piece)).fold(0.0, f64::max);
        Ok(Self {
            atoms,
            delta,
            m_len,
            l2_bound,
            sampler,
        })
    }

    /// Uniform measure over the given pieces, with `delta`/`m` taken from
    /// the shortest and longest piece.
    pub fn uniform(pieces: Vec<Piece>) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::NoAtoms);
        }
        let delta = pieces
            .iter()
            .map(Piece::total_length)
            .fold(f64::INFINITY, f64::min);
        let m_len = pieces.iter().map(Piece::total_length).fold(0.0, f64::max);
        let prob = 1.0 / pieces.len() as f64;
        let atoms = pieces
            .into_iter()
            .map(|piece| Atom { piece, prob })
            .collect();
        Self::new(atoms, delta, m_len)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m_len(&self) -> f64 {
        self.m_len
    }

    /// `max ‖f‖_{L²}` over the support.
    pub fn l2_bound(&self) -> f64 {
        self.l2_bound
    }

    pub fn min_potential(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.piece.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    /// Draws one atom index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

/// A finite realization `ω_0, …, ω_{n-1}` with its concatenation endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pieces: Vec<Piece>,
    endpoints: Vec<f64>,
}

impl Word {
    pub fn new(pieces: Vec<Piece>) -> Self {
        let mut endpoints = Vec::with_capacity(pieces.len() + 1);
        let mut s = 0.0;
        endpoints.push(s);
        for p in &pieces {
            s += p.total_length();
            endpoints.push(s);
        }
        Self { pieces, endpoints }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `s_0 = 0, s_1, …, s_n`.
    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The concatenated potential `V_ω` at `x ∈ [0, s_n)`.
    pub fn potential_at(&self, x: f64) -> Option<f64> {
        if !(x >= 0.0 && x < *self.endpoints.last()?) {
            return None;
        }
        let k = self.endpoints.partition_point(|&e| e <= x) - 1;
        let mut local = x - self.endpoints[k];
        for seg in self.pieces[k].segments() {
            if local < seg.length {
                return Some(seg.value);
            }
            local -= seg.length;
        }
        self.pieces[k].segments().last().map(|s| s.value)
    }
}

/// Draws `n` i.i.d. atom indices from the given generator.
pub fn sample_indices<R: Rng + ?Sized>(
    mu: &SingleSiteMeasure,
    n: usize,
    rng: &mut R,
) -> Vec<usize> {
    (0..n).map(|_| mu.sample_index(rng)).collect()
}

/// Builds the word for a list of atom indices.
pub fn word_from_indices(mu: &SingleSiteMeasure, indices: &[usize]) -> Word {
    Word::new(indices.iter().map(|&k| mu.atoms[k].piece.clone()).collect())
}

/// Draws `n` i.i.d. pieces; deterministic in `(mu, n, seed)`.
pub fn sample_word(mu: &SingleSiteMeasure, n: usize, seed: u64) -> Word {
    let mut rng = StreamAddress::new(seed, Domain::Word, 0, 0).rng(0);
    word_from_indices(mu, &sample_indices(mu, n, &mut rng))
}

/// Outcome of the nontriviality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcReport {
    pub holds: bool,
    pub witness_pair: Option<(usize, usize)>,
    pub disagreement_measure: f64,
}

/// Searches for two atoms whose star products in both orders differ on a
/// set of positive measure.
pub fn check_nontriviality(mu: &SingleSiteMeasure, tol_val: f64) -> NcReport {
    let atoms = mu.atoms();
    for i in 0..atoms.len() {
        for j in (i + 1)..atoms.len() {
            let fg = concat(&atoms[i].piece, &atoms[j].piece);
            let gf = concat(&atoms[j].piece, &atoms[i].piece);
            let cmp = pieces_equal_ae(&fg, &gf, tol_val);
            if !cmp.equal {
                return NcReport {
                    holds: true,
                    witness_pair: Some((i, j)),
                    disagreement_measure: cmp.disagreement_measure,
                };
            }
        }
    }
    NcReport {
        holds: false,
        witness_pair: None,
        disagreement_measure: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(pairs: &[(f64, f64)]) -> Piece {
        Piece::from_pairs(pairs).unwrap()
    }

    #[test]
    fn concat_examples() {
        let c = concat(&p(&[(0.0, 1.0)]), &p(&[(1.0, 1.0)]));
        assert_eq!(c, p(&[(0.0, 1.0), (1.0, 1.0)]));
        assert_eq!(c.total_length(), 2.0);

        let c = concat(&p(&[(0.0, 1.0)]), &p(&[(0.0, 1.0)]));
        assert_eq!(c.canonical(), p(&[(0.0, 2.0)]));

        let c = concat(&p(&[(1.0, 0.5), (2.0, 0.5)]), &p(&[(3.0, 1.0)]));
        assert_eq!(c, p(&[(1.0, 0.5), (2.0, 0.5), (3.0, 1.0)]));
        assert_eq!(c.total_length(), 2.0);
    }

    #[test]
    fn ae_comparison_examples() {
        let cmp = pieces_equal_ae(
            &p(&[(0.0, 1.0), (1.0, 1.0)]),
            &p(&[(1.0, 1.0), (0.0, 1.0)]),
            1e-12,
        );
        assert_eq!(
            cmp,
            AeComparison {
                equal: false,
                disagreement_measure: 2.0
            }
        );

        let cmp = pieces_equal_ae(&p(&[(5.0, 2.0)]), &p(&[(5.0, 1.0), (5.0, 1.0)]), 1e-12);
        assert_eq!(
            cmp,
            AeComparison {
                equal: true,
                disagreement_measure: 0.0
            }
        );

        let cmp = pieces_equal_ae(
            &p(&[(0.0, 1.0), (1.0, 1.0)]),
            &p(&[(0.0, 1.0), (2.0, 1.0)]),
            1e-12,
        );
        assert_eq!(
            cmp,
            AeComparison {
                equal: false,
                disagreement_measure: 1.0
            }
        );
    }

    #[test]
    fn ae_comparison_length_mismatch() {
        let cmp = pieces_equal_ae(&p(&[(1.0, 1.0)]), &p(&[(1.0, 1.5)]), 1e-12);
        assert!(!cmp.equal);
        assert!((cmp.disagreement_measure - 0.5).abs() < 1e-15);

        let cmp = pieces_equal_ae(&p(&[(0.0, 1.0)]), &p(&[(1.0, 2.0)]), 1e-12);
        assert!((cmp.disagreement_measure - 2.0).abs() < 1e-15);
    }

    #[test]
    fn nontriviality_examples() {
        let bern = SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 1.0)])]).unwrap();
        let r = check_nontriviality(&bern, DEFAULT_VALUE_TOL);
        assert!(r.holds);
        assert_eq!(r.witness_pair, Some((0, 1)));
        assert_eq!(r.disagreement_measure, 2.0);

        let single = SingleSiteMeasure::uniform(vec![p(&[(1.0, 1.0)])]).unwrap();
        assert!(!check_nontriviality(&single, DEFAULT_VALUE_TOL).holds);

        let commuting =
            SingleSiteMeasure::uniform(vec![p(&[(3.0, 1.0)]), p(&[(3.0, 2.0)])]).unwrap();
        let r = check_nontriviality(&commuting, DEFAULT_VALUE_TOL);
        assert!(!r.holds);
        assert_eq!(r.witness_pair, None);
    }

    #[test]
    fn l2_norm_examples() {
        assert_eq!(l2_norm(&p(&[(0.0, 1.0)])), 0.0);
        assert_eq!(l2_norm(&p(&[(2.0, 1.0)])), 2.0);
        assert!((l2_norm(&p(&[(1.0, 0.5), (2.0, 0.5)])) - 1.58113883).abs() < 1e-8);
        assert_eq!(l2_norm(&p(&[(1.0, 0.5), (2.0, 0.5)])), 2.5f64.sqrt());
    }

    #[test]
    fn measure_validation() {
        let a = |v: f64, l: f64, prob: f64| Atom {
            piece: p(&[(v, l)]),
            prob,
        };
        let err =
            SingleSiteMeasure::new(vec![a(0.0, 1.0, 0.5), a(1.0, 1.0, 0.6)], 1.0, 1.0).unwrap_err();
        assert_eq!(err.to_string(), "probabilities sum to 1.1");
        let err = SingleSiteMeasure::new(vec![a(0.0, 3.0, 1.0)], 1.0, 2.0).unwrap_err();
        assert!(matches!(err, ModelError::LengthOutOfRange { atom: 0, .. }));
        let err = SingleSiteMeasure::new(vec![a(0.0, 1.0, 1.0)], 0.0, 2.0).unwrap_err();
        assert!(matches!(err, ModelError::Bounds { .. }));
        assert!(Piece::from_pairs(&[(0.0, 1.0), (1.0, -1.0)]).is_err());
        assert_eq!(Piece::from_pairs(&[]), Err(ModelError::EmptyPiece));
    }

    #[test]
    fn sample_word_deterministic_examples() {
        let single = SingleSiteMeasure::uniform(vec![p(&[(1.0, 1.5)])]).unwrap();
        let w = sample_word(&single, 3, 99);
        assert_eq!(w.len(), 3);
        assert_eq!(w.endpoints(), &[0.0, 1.5, 3.0, 4.5]);

        let bern = SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 2.0)])]).unwrap();
        let w = sample_word(&bern, 1, 5);
        assert_eq!(w.endpoints().len(), 2);
        assert_eq!(w.endpoints()[1], w.pieces()[0].total_length());
        assert_eq!(sample_word(&bern, 50, 5), sample_word(&bern, 50, 5));
    }

    #[test]
    fn sample_word_law_of_large_numbers() {
        // mean of s_n / n over many seeds is E[length] = 1.5
        let bern = SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 2.0)])]).unwrap();
        let n = 20usize;
        let seeds = 10_000u64;
        let vals: Vec<f64> = (0..seeds)
            .map(|s| sample_word(&bern, n, s).endpoints()[n] / n as f64)
            .collect();
        let mean = vals.iter().sum::<f64>() / seeds as f64;
        // per-piece variance 0.25, so sd(s_n / n) = 0.5 / sqrt(n)
        let sigma = 0.5 / (n as f64).sqrt() / (seeds as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn word_potential_lookup() {
        let w = Word::new(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 0.5), (2.0, 0.5)])]);
        assert_eq!(w.potential_at(0.5), Some(0.0));
        assert_eq!(w.potential_at(1.25), Some(1.0));
        assert_eq!(w.potential_at(1.75), Some(2.0));
        assert_eq!(w.potential_at(2.0), None);
    }

    fn arb_piece() -> impl Strategy<Value = Piece> {
        prop::collection::vec((-3i32..4, 1u32..8), 1..5).prop_map(|segs| {
            Piece::from_pairs(
                &segs
                    .into_iter()
                    .map(|(v, l)| (v as f64, l as f64 * 0.1))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn concat_is_associative(a in arb_piece(), b in arb_piece(), c in arb_piece()) {
            let left = concat(&concat(&a, &b), &c);
            let right = concat(&a, &concat(&b, &c));
            prop_assert!(pieces_equal_ae(&left, &right, 0.0).equal);
        }

        #[test]
        fn ae_comparison_symmetric_reflexive(a in arb_piece(), b in arb_piece()) {
            prop_assert!(pieces_equal_ae(&a, &a, 0.0).equal);
            let ab = pieces_equal_ae(&a, &b, 1e-12);
            let ba = pieces_equal_ae(&b, &a, 1e-12);
            prop_assert!((ab.disagreement_measure - ba.disagreement_measure).abs() < 1e-12);
            prop_assert_eq!(ab.equal, ba.equal);
            prop_assert!(ab.disagreement_measure <= a.total_length().max(b.total_length()) + 1e-12);
        }

        #[test]
        fn constant_atoms_nc(h1 in -5i32..5, h2 in -5i32..5, l1 in 1u32..5, l2 in 1u32..5) {
            let mu = SingleSiteMeasure::uniform(vec![
                Piece::constant(h1 as f64, l1 as f64).unwrap(),
                Piece::constant(h2 as f64, l2 as f64).unwrap(),
            ]).unwrap();
            prop_assert_eq!(check_nontriviality(&mu, DEFAULT_VALUE_TOL).holds, h1 != h2);
        }

        #[test]
        fn canonical_preserves_function(a in arb_piece()) {
            prop_assert!(pieces_equal_ae(&a, &a.canonical(), 0.0).equal);
        }
    }
}
