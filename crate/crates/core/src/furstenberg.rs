//! Type-F certificates for the group generated by the atoms' transfer
//! matrices, scans for the candidate exceptional energies, and the inverse
//! spectral (Borg–Marchenko) contrapositive check.
//!
//! At a real energy `E`, with `A`, `B` the transfer matrices of two atoms,
//! the group they generate is type-F when `det[A, B] ≠ 0`, `tr A ≠ 0`,
//! `tr B ≠ 0` and the group holds a non-elliptic element. The first three
//! are evaluated directly. The last is exhibited: a reduced word in
//! `A, A⁻¹, B, B⁻¹` with `|tr| > 2` whose powers contract.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Piece, SingleSiteMeasure};
use crate::transfer::{mfunction, transfer_piece, Mat2, Scalar, TransferError};

pub const DEFAULT_TOL_C: f64 = 1e-8;
pub const DEFAULT_TOL_T: f64 = 1e-10;
pub const DEFAULT_K_MAX: usize = 8;

/// `‖[A, B]‖ ≤ COMMUTE_TOL · ‖A‖‖B‖` counts as a vanishing commutator.
pub const COMMUTE_TOL: f64 = 1e-12;

/// Gap above which two transfer-matrix families are reported distinct.
pub const DISTINCT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FurstenbergError {
    #[error("pieces have different lengths ({0} vs {1})")]
    LengthMismatch(f64, f64),
    #[error("no energy samples given")]
    NoSamples,
    #[error("need e_lo < e_hi and at least 2 grid points")]
    BadWindow,
    #[error("atom index {0} out of range")]
    BadAtom(usize),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

pub fn commutator<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    *a * *b - *b * *a
}

/// `det(AB - BA)`.
pub fn commutator_det<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    commutator(a, b).det()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    NearDegenerate,
    NotCertified,
}

impl Verdict {
    fn rank(self) -> u8 {
        match self {
            Verdict::Certified => 2,
            Verdict::NearDegenerate => 1,
            Verdict::NotCertified => 0,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "CERTIFIED",
            Verdict::NearDegenerate => "NEAR_DEGENERATE",
            Verdict::NotCertified => "NOT_CERTIFIED",
        })
    }
}

/// One letter of a word in the generators: `A`, `B` or an inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    /// 0 for the first atom of the pair, 1 for the second.
    pub generator: u8,
    pub inverse: bool,
}

impl Letter {
    const ALL: [Letter; 4] = [
        Letter {
            generator: 0,
            inverse: false,
        },
        Letter {
            generator: 0,
            inverse: true,
        },
        Letter {
            generator: 1,
            inverse: false,
        },
        Letter {
            generator: 1,
            inverse: true,
        },
    ];

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

/// Word written left to right as applied matrices; `a`/`b` are inverses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupWord(pub Vec<Letter>);

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            let c = match (l.generator, l.inverse) {
                (0, false) => 'A',
                (0, true) => 'a',
                (_, false) => 'B',
                (_, true) => 'b',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Tolerances for [`certify_type_f`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyParams {
    /// Relative: the commutator threshold is `tol_c · ‖A‖²‖B‖²`.
    pub tol_c: f64,
    pub tol_t: f64,
    pub k_max: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            tol_c: DEFAULT_TOL_C,
            tol_t: DEFAULT_TOL_T,
            k_max: DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeFCertificate {
    pub energy: f64,
    pub pair: Option<(usize, usize)>,
    pub commutator_det: f64,
    /// Absolute commutator threshold actually applied.
    pub commutator_threshold: f64,
    pub trace_a: f64,
    pub trace_b: f64,
    #[serde(serialize_with = "ser_word")]
    pub non_elliptic_witness: Option<GroupWord>,
    pub witness_trace: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

fn ser_word<S: serde::Serializer>(w: &Option<GroupWord>, s: S) -> Result<S::Ok, S::Error> {
    match w {
        Some(w) => s.serialize_some(&w.to_string()),
        None => s.serialize_none(),
    }
}

/// Shortest reduced word of length ≤ `k_max` with `|tr| > 2 + tol_t`.
pub fn find_non_elliptic(
    a: &Mat2<f64>,
    b: &Mat2<f64>,
    k_max: usize,
    tol_t: f64,
) -> Option<(GroupWord, f64)> {
    let mats = [*a, a.unimodular_inverse(), *b, b.unimodular_inverse()];
    let matrix = |l: Letter| mats[(l.generator as usize) * 2 + l.inverse as usize];
    let mut level: Vec<(Vec<Letter>, Mat2<f64>)> = vec![(Vec::new(), Mat2::identity())];
    for _ in 0..k_max {
        let mut next = Vec::with_capacity(level.len() * 3);
        for (word, m) in &level {
            for l in Letter::ALL {
                if word.last().is_some_and(|&last| last.cancels(l)) {
                    continue;
                }
                let prod = matrix(l) * *m;
                let tr = prod.trace();
                let mut w = word.clone();
                w.push(l);
                if tr.abs() > 2.0 + tol_t {
                    return Some((GroupWord(w), tr));
                }
                next.push((w, prod));
            }
        }
        level = next;
    }
    None
}

fn certify_pair(
    mu: &SingleSiteMeasure,
    energy: f64,
    (i, j): (usize, usize),
    params: &CertifyParams,
) -> TypeFCertificate {
    let atoms = mu.atoms();
    let a = transfer_piece(&atoms[i].piece, energy);
    let b = transfer_piece(&atoms[j].piece, energy);
    let (na, nb) = (a.op_norm_real(), b.op_norm_real());
    let comm = commutator(&a, &b);
    let cdet = comm.det();
    let threshold = params.tol_c * (na * nb).powi(2);
    let (ta, tb) = (a.trace(), b.trace());

    let mut cert = TypeFCertificate {
        energy,
        pair: Some((i, j)),
        commutator_det: cdet,
        commutator_threshold: threshold,
        trace_a: ta,
        trace_b: tb,
        non_elliptic_witness: None,
        witness_trace: None,
        verdict: Verdict::NotCertified,
        note: String::new(),
    };

    if comm.frobenius() <= COMMUTE_TOL * na * nb {
        // Vanishing at E alone is an isolated event; vanishing off the real
        // axis too means the pair commutes identically.
        let z = Complex64::new(energy, 1.0);
        let (az, bz) = (
            transfer_piece(&atoms[i].piece, z),
            transfer_piece(&atoms[j].piece, z),
        );
        if commutator(&az, &bz).frobenius() <= COMMUTE_TOL * az.op_norm() * bz.op_norm() {
            cert.note = "generators commute identically".into();
            return cert;
        }
        cert.verdict = Verdict::NearDegenerate;
        cert.note = "commutator vanishes at this energy".into();
        return cert;
    }

    if let Some((w, tr)) = find_non_elliptic(&a, &b, params.k_max, params.tol_t) {
        cert.non_elliptic_witness = Some(w);
        cert.witness_trace = Some(tr);
    }

    let mut near = Vec::new();
    if cdet.abs() <= threshold {
        near.push("det[A,B]");
    }
    if ta.abs() <= params.tol_t {
        near.push("tr A");
    }
    if tb.abs() <= params.tol_t {
        near.push("tr B");
    }
    if !near.is_empty() {
        cert.verdict = Verdict::NearDegenerate;
        cert.note = format!("{} within tolerance of zero", near.join(", "));
    } else if cert.non_elliptic_witness.is_some() {
        cert.verdict = Verdict::Certified;
        cert.note = "real traces off the real axis are sampled, not proven".into();
    } else {
        cert.note = format!(
            "no non-elliptic word up to length {}; one exists abstractly since [A,B] != 0",
            params.k_max
        );
    }
    cert
}

/// Certifies the type-F conditions at `energy`, over every atom pair, and
/// returns the best certificate (CERTIFIED over NEAR_DEGENERATE over
/// NOT_CERTIFIED; ties go to the first pair).
pub fn certify_type_f(
    mu: &SingleSiteMeasure,
    energy: f64,
    params: &CertifyParams,
) -> TypeFCertificate {
    let n = mu.len();
    if n < 2 {
        let t = transfer_piece(&mu.atoms()[0].piece, energy).trace();
        return TypeFCertificate {
            energy,
            pair: None,
            commutator_det: 0.0,
            commutator_threshold: 0.0,
            trace_a: t,
            trace_b: t,
            non_elliptic_witness: None,
            witness_trace: None,
            verdict: Verdict::NotCertified,
            note: "single atom generates an abelian group".into(),
        };
    }
    let mut best: Option<TypeFCertificate> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let cert = certify_pair(mu, energy, (i, j), params);
            let better = best
                .as_ref()
                .is_none_or(|b| cert.verdict.rank() > b.verdict.rank());
            if better {
                let done = cert.verdict == Verdict::Certified;
                best = Some(cert);
                if done {
                    return best.unwrap();
                }
            }
        }
    }
    best.expect("at least one pair")
}

/// The three functions whose zeros make up the candidate exceptional set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Condition {
    CommutatorDet,
    TraceA,
    TraceB,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::CommutatorDet,
        Condition::TraceA,
        Condition::TraceB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::CommutatorDet => "det_commutator",
            Condition::TraceA => "trace_a",
            Condition::TraceB => "trace_b",
        }
    }
}

/// `(det[A,B], tr A, tr B)` at `energy` plus the scale of `det[A,B]`.
pub fn conditions_at(a_piece: &Piece, b_piece: &Piece, energy: f64) -> ([f64; 3], f64) {
    let a = transfer_piece(a_piece, energy);
    let b = transfer_piece(b_piece, energy);
    let scale = (a.op_norm_real() * b.op_norm_real()).powi(2);
    ([commutator_det(&a, &b), a.trace(), b.trace()], scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRoot {
    pub energy: f64,
    pub conditions: Vec<Condition>,
    /// `|g(energy)|` for each entry of `conditions`.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScanWarning {
    /// The function vanishes on the whole grid (to rounding); it has no
    /// isolated roots.
    IdenticallyZero(Condition),
    /// A local extremum of the function on `[lo, hi]` reaches across zero
    /// without a sign change at the grid points: probably two roots in one
    /// cell. Reported, not resolved.
    GridTooCoarse {
        condition: Condition,
        lo: f64,
        hi: f64,
    },
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanWarning::IdenticallyZero(c) => write!(
                f,
                "IdenticallyZero: {} vanishes on the whole grid",
                c.name()
            ),
            ScanWarning::GridTooCoarse { condition, lo, hi } => write!(
                f,
                "GridTooCoarse: {} may have two roots in [{lo}, {hi}]",
                condition.name()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSetScan {
    pub pair: (usize, usize),
    pub roots: Vec<CandidateRoot>,
    pub warnings: Vec<ScanWarning>,
}

impl DiscreteSetScan {
    pub fn energies(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.energy).collect()
    }

    pub fn identically_zero(&self) -> Vec<Condition> {
        self.warnings
            .iter()
            .filter_map(|w| match w {
                ScanWarning::IdenticallyZero(c) => Some(*c),
                _ => None,
            })
            .collect()
    }
}

/// Relative size below which `det[A,B]` counts as zero in the
/// identically-zero test.
const IDENTICALLY_ZERO_TOL: f64 = 1e-10;

/// Minimizes `|g|` on `[lo, hi]` by golden-section search.
fn minimize_abs(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (g(x1).abs(), g(x2).abs());
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = g(x1).abs();
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = g(x2).abs();
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 || (hi - lo <= tol && gm.abs() <= tol) {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Brackets and bisects the zeros of `det[A,B]`, `tr A`, `tr B` for the
/// given atom pair on `[e_lo, e_hi]`.
///
/// Sign changes are refined by bisection until the bracket is narrower than
/// `tol` and the residual is at most `tol` (or the bracket stops shrinking in
/// floating point). Local minima of `|g|` without a sign change are refined
/// by golden-section search and kept as even-order roots when the residual
/// is at most `tol`; otherwise a parabola fit decides whether to warn about
/// a possible unresolved root pair. Roots of different functions closer than
/// `tol` are merged.
pub fn find_discrete_set(
    mu: &SingleSiteMeasure,
    pair: (usize, usize),
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    tol: f64,
) -> Result<DiscreteSetScan, FurstenbergError> {
    if !(e_lo < e_hi) || grid_points < 2 {
        return Err(FurstenbergError::BadWindow);
    }
    let atoms = mu.atoms();
    for idx in [pair.0, pair.1] {
        if idx >= atoms.len() {
            return Err(FurstenbergError::BadAtom(idx));
        }
    }
    let (pa, pb) = (&atoms[pair.0].piece, &atoms[pair.1].piece);
    let grid = crate::lyapunov::linspace(e_lo, e_hi, grid_points);
    let values: Vec<([f64; 3], f64)> = grid.par_iter().map(|&e| conditions_at(pa, pb, e)).collect();

    let mut warnings = Vec::new();
    let mut raw: Vec<(f64, Condition, f64)> = Vec::new();
    for (ci, cond) in Condition::ALL.into_iter().enumerate() {
        let g = |e: f64| conditions_at(pa, pb, e).0[ci];
        let gs: Vec<f64> = values.iter().map(|v| v.0[ci]).collect();
        if cond == Condition::CommutatorDet
            && values
                .iter()
                .all(|(v, scale)| v[0].abs() <= IDENTICALLY_ZERO_TOL * scale.max(1.0))
        {
            warnings.push(ScanWarning::IdenticallyZero(cond));
            continue;
        }
        for k in 0..grid.len() {
            if gs[k] == 0.0 {
                raw.push((grid[k], cond, 0.0));
            }
            if k + 1 < grid.len() && gs[k] * gs[k + 1] < 0.0 {
                let r = bisect(g, grid[k], grid[k + 1], tol);
                raw.push((r, cond, g(r).abs()));
            }
            if k > 0 && k + 1 < grid.len() {
                let (l, c, r) = (gs[k - 1], gs[k], gs[k + 1]);
                let local_min = c.abs() < l.abs() && c.abs() <= r.abs();
                if l * c > 0.0 && c * r > 0.0 && local_min {
                    // zero touched without a sign change (even-order root)
                    let x = minimize_abs(g, grid[k - 1], grid[k + 1], tol);
                    let res = g(x).abs();
                    if res <= tol {
                        raw.push((x, cond, res));
                        continue;
                    }
                    // parabola through the three samples, t ∈ [-1, 1]
                    let curv = 0.5 * (r - 2.0 * c + l);
                    let slope = 0.5 * (r - l);
                    if curv != 0.0 {
                        let t = -slope / (2.0 * curv);
                        let vertex = c - slope * slope / (4.0 * curv);
                        if t.abs() <= 1.0 && vertex * c <= 0.0 {
                            warnings.push(ScanWarning::GridTooCoarse {
                                condition: cond,
                                lo: grid[k - 1],
                                hi: grid[k + 1],
                            });
                        }
                    }
                }
            }
        }
    }

    raw.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut roots: Vec<CandidateRoot> = Vec::new();
    for (e, cond, res) in raw {
        match roots.last_mut() {
            Some(last) if e - last.energy <= tol => {
                if !last.conditions.contains(&cond) {
                    last.conditions.push(cond);
                    last.residuals.push(res);
                }
            }
            _ => roots.push(CandidateRoot {
                energy: e,
                conditions: vec![cond],
                residuals: vec![res],
            }),
        }
    }
    Ok(DiscreteSetScan {
        pair,
        roots,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorgMarchenkoReport {
    pub distinct: bool,
    /// `max_E ‖A^E(f1) - A^E(f2)‖ / max(1, ‖A^E(f1)‖)`.
    pub max_matrix_gap: f64,
    /// `max_E |m1(E) - m2(E)|`.
    pub max_m_gap: f64,
}

/// 20 points on `E = -1 - j` and 20 on `E = i(1 + j)`.
pub fn default_energy_samples() -> Vec<Complex64> {
    energy_samples(20, 20)
}

pub fn energy_samples(real_points: usize, complex_points: usize) -> Vec<Complex64> {
    (0..real_points)
        .map(|j| Complex64::new(-1.0 - j as f64, 0.0))
        .chain((0..complex_points).map(|j| Complex64::new(0.0, 1.0 + j as f64)))
        .collect()
}

/// Compares the transfer matrices and m-functions of two pieces of equal
/// length at the sampled energies. Pieces that differ on a set of positive
/// measure cannot share all transfer matrices, so a gap shows up for a rich
/// enough sample.
pub fn borg_marchenko_check(
    f1: &Piece,
    f2: &Piece,
    energies: &[Complex64],
) -> Result<BorgMarchenkoReport, FurstenbergError> {
    let (l1, l2) = (f1.total_length(), f2.total_length());
    if (l1 - l2).abs() > 1e-12 * l1.max(l2) {
        return Err(FurstenbergError::LengthMismatch(l1, l2));
    }
    if energies.is_empty() {
        return Err(FurstenbergError::NoSamples);
    }
    let mut max_matrix_gap = 0.0f64;
    let mut max_m_gap = 0.0f64;
    for &e in energies {
        let (t1, t2) = (transfer_piece(f1, e), transfer_piece(f2, e));
        let gap = (t1 - t2).op_norm() / t1.op_norm().max(1.0);
        max_matrix_gap = max_matrix_gap.max(gap);
        let (m1, m2) = (mfunction(f1, e)?, mfunction(f2, e)?);
        max_m_gap = max_m_gap.max((m1 - m2).norm());
    }
    Ok(BorgMarchenkoReport {
        distinct: max_matrix_gap > DISTINCT_TOL,
        max_matrix_gap,
        max_m_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::transfer_constant;
    use proptest::prelude::*;

    fn p(pairs: &[(f64, f64)]) -> Piece {
        Piece::from_pairs(pairs).unwrap()
    }

    fn bernoulli() -> SingleSiteMeasure {
        SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 1.0)])]).unwrap()
    }

    fn commuting() -> SingleSiteMeasure {
        SingleSiteMeasure::uniform(vec![p(&[(3.0, 1.0)]), p(&[(3.0, 2.0)])]).unwrap()
    }

    /// `det[A,B] = 2 - tr(A B A⁻¹ B⁻¹)` for unimodular A, B.
    fn commutator_det_via_group_commutator(a: &Mat2<f64>, b: &Mat2<f64>) -> f64 {
        2.0 - (*a * *b * a.unimodular_inverse() * b.unimodular_inverse()).trace()
    }

    #[test]
    fn commutator_examples() {
        let a = Mat2::new(1.0, 1.0, 0.0, 1.0);
        let b = Mat2::new(1.0, 0.0, 1.0, 1.0);
        assert_eq!(commutator(&a, &a), Mat2::zero());
        assert_eq!(commutator(&a, &b), Mat2::new(1.0, 0.0, 0.0, -1.0));
    }

    #[test]
    fn bernoulli_commutator_at_half() {
        let a = transfer_constant(0.0, 1.0, 0.5);
        let b = transfer_constant(1.0, 1.0, 0.5);
        let direct = commutator_det(&a, &b);
        let oracle = commutator_det_via_group_commutator(&a, &b);
        assert!(direct.abs() > 1e-3);
        assert!((direct - oracle).abs() < 1e-12);
        // single segments have equal diagonal entries, so [A,B] = diag(x, -x)
        // with x = b1 c2 - c1 b2 and det[A,B] = -x²
        let k = 0.5f64.sqrt();
        let (b1, c1) = (k.sin() / k, -k * k.sin());
        let (b2, c2) = (k.sinh() / k, k * k.sinh());
        let x = b1 * c2 - c1 * b2;
        assert!((direct + x * x).abs() < 1e-12, "{direct} vs {}", -x * x);
    }

    #[test]
    fn commuting_model_not_certified() {
        for e in [-2.0, 0.0, 2.9, 3.0, 4.0, 5.5, 7.0, 10.0] {
            let cert = certify_type_f(&commuting(), e, &CertifyParams::default());
            assert_eq!(cert.verdict, Verdict::NotCertified, "E = {e}: {cert:?}");
        }
    }

    #[test]
    fn single_atom_not_certified() {
        let mu = SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)])]).unwrap();
        let cert = certify_type_f(&mu, 0.5, &CertifyParams::default());
        assert_eq!(cert.verdict, Verdict::NotCertified);
        assert_eq!(cert.pair, None);
    }

    #[test]
    fn bernoulli_below_spectrum_certified_with_short_witness() {
        let cert = certify_type_f(&bernoulli(), -1.0, &CertifyParams::default());
        assert_eq!(cert.verdict, Verdict::Certified);
        assert_eq!(cert.non_elliptic_witness.as_ref().unwrap().0.len(), 1);
        assert!((cert.trace_a - 2.0 * 1f64.cosh()).abs() < 1e-12);
        assert!((cert.trace_b - 2.0 * 2f64.sqrt().cosh()).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_at_half_certified() {
        let cert = certify_type_f(&bernoulli(), 0.5, &CertifyParams::default());
        assert_eq!(cert.verdict, Verdict::Certified, "{cert:?}");
        assert_eq!(cert.non_elliptic_witness.unwrap().to_string(), "B");
    }

    #[test]
    fn elliptic_pair_needs_longer_witness() {
        // both atoms elliptic at E = 3
        let mu = SingleSiteMeasure::uniform(vec![p(&[(0.0, 1.0)]), p(&[(1.0, 1.0)])]).unwrap();
        let cert = certify_type_f(&mu, 3.0, &CertifyParams::default());
        assert!(cert.trace_a.abs() < 2.0 && cert.trace_b.abs() < 2.0);
        if let Some(w) = &cert.non_elliptic_witness {
            assert!(w.0.len() >= 2);
            assert!(cert.witness_trace.unwrap().abs() > 2.0);
        }
    }

    #[test]
    fn trace_zero_is_near_degenerate() {
        // tr A = 2 cos(√E) vanishes at E = (π/2)²
        let e = (std::f64::consts::FRAC_PI_2).powi(2);
        let params = CertifyParams {
            tol_t: 1e-6,
            ..CertifyParams::default()
        };
        let cert = certify_type_f(&bernoulli(), e, &params);
        assert_eq!(cert.verdict, Verdict::NearDegenerate, "{cert:?}");
    }

    #[test]
    fn isolated_identity_generator_is_near_degenerate() {
        // A = -I at E = π² for the free atom of length 1
        let e = std::f64::consts::PI.powi(2);
        let cert = certify_type_f(&bernoulli(), e, &CertifyParams::default());
        assert_eq!(cert.verdict, Verdict::NearDegenerate, "{cert:?}");
    }

    #[test]
    fn discrete_set_free_trace_window() {
        let scan = find_discrete_set(&bernoulli(), (0, 1), 1.0, 2.0, 200, 1e-12).unwrap();
        assert!(scan
            .roots
            .iter()
            .all(|r| !r.conditions.contains(&Condition::TraceA)));
    }

    #[test]
    fn discrete_set_finds_trace_root() {
        let scan = find_discrete_set(&bernoulli(), (0, 1), 2.0, 3.0, 50, 1e-12).unwrap();
        let want = std::f64::consts::FRAC_PI_2.powi(2);
        assert!(scan
            .roots
            .iter()
            .any(|r| r.conditions.contains(&Condition::TraceA) && (r.energy - want).abs() < 1e-10));
    }

    #[test]
    fn discrete_set_commuting_pair_identically_zero() {
        let scan = find_discrete_set(&commuting(), (0, 1), 0.0, 10.0, 500, 1e-10).unwrap();
        assert_eq!(scan.identically_zero(), vec![Condition::CommutatorDet]);
        assert!(scan
            .roots
            .iter()
            .all(|r| !r.conditions.contains(&Condition::CommutatorDet)));
    }

    #[test]
    fn discrete_set_errors() {
        assert_eq!(
            find_discrete_set(&bernoulli(), (0, 1), 1.0, 1.0, 10, 1e-10),
            Err(FurstenbergError::BadWindow)
        );
        assert_eq!(
            find_discrete_set(&bernoulli(), (0, 5), 0.0, 1.0, 10, 1e-10),
            Err(FurstenbergError::BadAtom(5))
        );
    }

    #[test]
    fn borg_marchenko_examples() {
        let same = borg_marchenko_check(
            &p(&[(5.0, 2.0)]),
            &p(&[(5.0, 1.0), (5.0, 1.0)]),
            &default_energy_samples(),
        )
        .unwrap();
        assert!(!same.distinct);
        assert!(same.max_matrix_gap < 1e-12);

        let samples = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 2.0),
        ];
        let swapped = borg_marchenko_check(
            &p(&[(0.0, 1.0), (1.0, 1.0)]),
            &p(&[(1.0, 1.0), (0.0, 1.0)]),
            &samples,
        )
        .unwrap();
        assert!(swapped.distinct);

        let sub = borg_marchenko_check(
            &p(&[(0.0, 1.0), (1.0, 0.1), (0.0, 0.9)]),
            &p(&[(0.0, 2.0)]),
            &default_energy_samples(),
        )
        .unwrap();
        assert!(sub.distinct);
        assert!(sub.max_m_gap > 0.0);

        assert!(matches!(
            borg_marchenko_check(&p(&[(0.0, 1.0)]), &p(&[(0.0, 2.0)]), &samples),
            Err(FurstenbergError::LengthMismatch(..))
        ));
    }

    #[test]
    fn borg_marchenko_propagates_degenerate_energy() {
        let e = [Complex64::new(std::f64::consts::PI.powi(2), 0.0)];
        let err =
            borg_marchenko_check(&p(&[(0.0, 1.0)]), &p(&[(0.0, 0.5), (0.0, 0.5)]), &e).unwrap_err();
        assert!(matches!(
            err,
            FurstenbergError::Transfer(TransferError::DegenerateEnergy { .. })
        ));
    }

    #[test]
    fn word_display() {
        let w = GroupWord(vec![
            Letter {
                generator: 0,
                inverse: false,
            },
            Letter {
                generator: 1,
                inverse: true,
            },
        ]);
        assert_eq!(w.to_string(), "Ab");
    }

    fn arb_unimodular() -> impl Strategy<Value = Mat2<f64>> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_filter_map("singular", |(a, b, c)| {
            if a.abs() < 0.1 {
                return None;
            }
            Some(Mat2::new(a, b, c, (1.0 + b * c) / a))
        })
    }

    proptest! {
        #[test]
        fn conjugation_invariance(a in arb_unimodular(), b in arb_unimodular(), m in arb_unimodular()) {
            let mi = m.unimodular_inverse();
            let (ac, bc) = (mi * a * m, mi * b * m);
            let scale = (a.op_norm_real() * b.op_norm_real() * m.op_norm_real().powi(4)).powi(2);
            prop_assert!((commutator_det(&a, &b) - commutator_det(&ac, &bc)).abs() <= 1e-9 * scale.max(1.0));
            prop_assert!((a.trace() - ac.trace()).abs() <= 1e-9 * m.op_norm_real().powi(2) * a.op_norm_real());
        }

        #[test]
        fn commutator_det_two_routes(a in arb_unimodular(), b in arb_unimodular()) {
            let scale = (a.op_norm_real() * b.op_norm_real()).powi(2);
            prop_assert!((commutator_det(&a, &b) - commutator_det_via_group_commutator(&a, &b)).abs() <= 1e-10 * scale);
        }

        #[test]
        fn shrinking_tolerances_keeps_certified(e in -2.0f64..12.0, shrink in 1.0f64..1e6) {
            let mu = bernoulli();
            let base = CertifyParams::default();
            let loose = CertifyParams { tol_c: base.tol_c * 10.0, tol_t: base.tol_t * 10.0, ..base };
            let tight = CertifyParams { tol_c: loose.tol_c / shrink, tol_t: loose.tol_t / shrink, ..base };
            let before = certify_type_f(&mu, e, &loose).verdict;
            let after = certify_type_f(&mu, e, &tight).verdict;
            if before == Verdict::Certified {
                prop_assert_eq!(after, Verdict::Certified);
            }
        }
    }
}
