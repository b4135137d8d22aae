//! Transfer matrices of `-ψ'' + Vψ = Eψ` across piecewise-constant pieces.
//!
//! For a constant segment of height `v` and length `s`, with `k² = E - v`,
//!
//! ```text
//!     [ cos(ks)       sin(ks)/k ]
//!     [ -k sin(ks)    cos(ks)   ]
//! ```
//!
//! maps `(ψ(0), ψ'(0))` to `(ψ(s), ψ'(s))`. The entries are even in `k`, so
//! the same expression covers the hyperbolic (`k² < 0`) and complex cases.
//! Later segments multiply on the left.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Piece, Word};

/// Below this value of `|k²| s²` the segment matrix is evaluated by series.
pub const SERIES_THRESHOLD: f64 = 1e-8;

/// `|b|` below which an energy is treated as a Dirichlet eigenvalue.
pub const DEGENERATE_B: f64 = 1e-14;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TransferError {
    #[error("energy {re}{im:+}i is a Dirichlet eigenvalue of the interval (|b| = {b_abs:e}); move the energy")]
    DegenerateEnergy { re: f64, im: f64, b_abs: f64 },
}

/// Field of matrix entries: `f64` for real energies, `Complex64` otherwise.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;

    /// `(cos(ks), sin(ks)/k, -k sin(ks))` for `k² = k2`.
    fn segment_entries(k2: Self, len: f64) -> (Self, Self, Self);
}

#[inline]
fn series_entries<T: Scalar>(k2: T, len: f64) -> (T, T, T) {
    let x = k2 * T::from_real(len * len);
    let one = T::one();
    let cos = one - x * T::from_real(0.5) + x * x * T::from_real(1.0 / 24.0);
    let sinc = one - x * T::from_real(1.0 / 6.0) + x * x * T::from_real(1.0 / 120.0);
    let b = sinc * T::from_real(len);
    (cos, b, -(k2 * b))
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }

    #[inline]
    fn segment_entries(k2: f64, len: f64) -> (f64, f64, f64) {
        if k2.abs() * len * len < SERIES_THRESHOLD {
            series_entries(k2, len)
        } else if k2 > 0.0 {
            let k = k2.sqrt();
            let (s, c) = (k * len).sin_cos();
            (c, s / k, -k * s)
        } else {
            let kappa = (-k2).sqrt();
            let t = kappa * len;
            let (s, c) = (t.sinh(), t.cosh());
            (c, s / kappa, kappa * s)
        }
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }

    fn segment_entries(k2: Complex64, len: f64) -> (Complex64, Complex64, Complex64) {
        if k2.norm() * len * len < SERIES_THRESHOLD {
            series_entries(k2, len)
        } else {
            let k = k2.sqrt();
            let t = k * len;
            let (s, c) = (t.sin(), t.cos());
            (c, s / k, -(k * s))
        }
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> T {
        self.a + self.d
    }

    /// Inverse of a unimodular matrix (adjugate).
    pub fn unimodular_inverse(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn entries(&self) -> [T; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn frobenius(&self) -> f64 {
        self.entries()
            .iter()
            .map(|e| {
                let m = e.modulus();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        let f2: f64 = self.entries().iter().map(|e| e.modulus().powi(2)).sum();
        let det = self.det().modulus();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }
}

impl Mat2<f64> {
    /// Largest singular value, in the cancellation-free closed form.
    #[inline]
    pub fn op_norm_real(&self) -> f64 {
        let p = (self.a + self.d).hypot(self.b - self.c);
        let q = (self.a - self.d).hypot(self.b + self.c);
        0.5 * (p + q)
    }

    pub fn to_complex(&self) -> Mat2<Complex64> {
        Mat2::new(
            Complex64::from(self.a),
            Complex64::from(self.b),
            Complex64::from(self.c),
            Complex64::from(self.d),
        )
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Mat2<T>;

    #[inline]
    fn mul(self, o: Mat2<T>) -> Mat2<T> {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Mat2<T>;

    fn sub(self, o: Mat2<T>) -> Mat2<T> {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Mat2<T>;

    fn add(self, o: Mat2<T>) -> Mat2<T> {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

/// Transfer matrix across a constant segment of height `v` and length `len`.
#[inline]
pub fn transfer_constant<T: Scalar>(v: f64, len: f64, energy: T) -> Mat2<T> {
    let k2 = energy - T::from_real(v);
    let (cos, b, c) = T::segment_entries(k2, len);
    Mat2::new(cos, b, c, cos)
}

/// Transfer matrix `A^E(f)` across a whole piece.
pub fn transfer_piece<T: Scalar>(f: &Piece, energy: T) -> Mat2<T> {
    f.segments().iter().fold(Mat2::identity(), |acc, seg| {
        transfer_constant(seg.value, seg.length, energy) * acc
    })
}

/// Running cocycle product kept at unit norm, with the logarithm of the
/// discarded scale accumulated separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormState {
    pub frame: Mat2<f64>,
    pub log_norm: f64,
    pub steps: usize,
}

impl Default for LogNormState {
    fn default() -> Self {
        Self::new()
    }
}

impl LogNormState {
    pub fn new() -> Self {
        Self {
            frame: Mat2::identity(),
            log_norm: 0.0,
            steps: 0,
        }
    }

    /// Left-multiplies by `m` and renormalizes.
    #[inline]
    pub fn push(&mut self, m: &Mat2<f64>) {
        let next = *m * self.frame;
        let norm = next.op_norm_real();
        self.frame = next.scale(1.0 / norm);
        self.log_norm += norm.ln();
        self.steps += 1;
    }
}

/// `log ‖A^E(ω_{n-1}) ⋯ A^E(ω_0)‖` for the pieces of `word`.
pub fn cocycle_lognorm(word: &Word, energy: f64) -> LogNormState {
    let mut state = LogNormState::new();
    for piece in word.pieces() {
        state.push(&transfer_piece(piece, energy));
    }
    state
}

/// `u'(0)/u(0)` for the solution with `u(ℓ(f)) = 0`, i.e. `-a/b`.
pub fn mfunction(f: &Piece, energy: Complex64) -> Result<Complex64, TransferError> {
    let m = transfer_piece(f, energy);
    let b_abs = m.b.norm();
    if b_abs < DEGENERATE_B {
        return Err(TransferError::DegenerateEnergy {
            re: energy.re,
            im: energy.im,
            b_abs,
        });
    }
    Ok(-m.a / m.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(pairs: &[(f64, f64)]) -> Piece {
        Piece::from_pairs(pairs).unwrap()
    }

    fn close(m: &Mat2<f64>, want: [f64; 4], tol: f64) {
        for (x, y) in m.entries().iter().zip(want) {
            assert!((x - y).abs() <= tol, "{m:?} vs {want:?}");
        }
    }

    #[test]
    fn constant_segment_examples() {
        close(&transfer_constant(0.0, 1.0, 0.0), [1.0, 1.0, 0.0, 1.0], 0.0);
        close(
            &transfer_constant(0.0, PI, 1.0),
            [-1.0, 0.0, 0.0, -1.0],
            1e-15,
        );
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        close(&transfer_constant(1.0, 1.0, 0.0), [ch, sh, sh, ch], 1e-15);
        close(
            &transfer_constant(1.0, 1.0, 0.0),
            [1.54308063, 1.17520119, 1.17520119, 1.54308063],
            1e-8,
        );
    }

    #[test]
    fn piece_examples() {
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        let m = transfer_piece(&p(&[(0.0, 1.0), (1.0, 1.0)]), 0.0);
        close(&m, [ch, ch + sh, sh, sh + ch], 1e-15);
        for &(v, s, e) in &[(0.3, 0.7, 2.0), (2.0, 1.5, -1.0), (-1.0, 0.2, 0.0)] {
            assert_eq!(transfer_piece(&p(&[(v, s)]), e), transfer_constant(v, s, e));
        }
    }

    #[test]
    fn complex_path_matches_real_path_on_real_axis() {
        for &(v, s, e) in &[(0.0, 1.0, 3.0), (2.0, 0.5, -4.0), (1.0, 2.0, 1.0 + 1e-11)] {
            let r = transfer_constant(v, s, e);
            let c = transfer_constant(v, s, Complex64::new(e, 0.0));
            for (x, z) in r.entries().iter().zip(c.entries()) {
                assert!((x - z.re).abs() < 1e-13 * (1.0 + x.abs()));
                assert!(z.im.abs() < 1e-13 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        // just inside and just outside the series threshold
        let s = 1.0;
        for k2 in [0.99e-8, 1.01e-8, -0.99e-8, -1.01e-8] {
            let m = transfer_constant(0.0, s, k2);
            let k = Complex64::new(k2, 0.0).sqrt();
            let exact_b = ((k * s).sin() / k).re;
            assert!((m.b - exact_b).abs() < 1e-15);
            assert!((m.a - (k * s).cos().re).abs() < 1e-15);
        }
    }

    #[test]
    fn lognorm_examples() {
        let single = Word::new(vec![p(&[(0.0, 1.0)])]);
        let st = cocycle_lognorm(&single, 0.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((st.log_norm - phi.ln()).abs() < 1e-15);
        assert!((st.log_norm - 0.4812118).abs() < 1e-7);

        let n = 2000;
        let hyper = Word::new(vec![p(&[(1.0, 1.0)]); n]);
        let st = cocycle_lognorm(&hyper, 0.0);
        assert!((st.log_norm / n as f64 - 1.0).abs() < 1e-3);
        assert_eq!(st.steps, n);
        assert!((st.frame.op_norm_real() - 1.0).abs() < 1e-14);

        let rot = Word::new(vec![p(&[(0.0, 1.0)]); n]);
        assert!(cocycle_lognorm(&rot, 1.0).log_norm / (n as f64) < 1e-12);
    }

    #[test]
    fn mfunction_free_below_spectrum() {
        let m = mfunction(&p(&[(0.0, 1.0)]), Complex64::new(-1.0, 0.0)).unwrap();
        let want = -1f64.cosh() / 1f64.sinh();
        assert!((m.re - want).abs() < 1e-12 && m.im.abs() < 1e-15);
        assert!((m.re + 1.31303529).abs() < 1e-8);
    }

    #[test]
    fn mfunction_encoding_invariant_and_degenerate() {
        let a = p(&[(5.0, 2.0)]);
        let b = p(&[(5.0, 1.0), (5.0, 1.0)]);
        for e in [
            Complex64::new(0.0, 1.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(7.0, -2.0),
        ] {
            let (ma, mb) = (mfunction(&a, e).unwrap(), mfunction(&b, e).unwrap());
            assert!((ma - mb).norm() < 1e-12 * (1.0 + ma.norm()));
        }
        // free interval of length 1 has Dirichlet eigenvalue π²
        let err = mfunction(&p(&[(0.0, 1.0)]), Complex64::new(PI * PI, 0.0)).unwrap_err();
        assert!(matches!(err, TransferError::DegenerateEnergy { .. }));
    }

    #[test]
    fn op_norm_forms_agree() {
        let m = Mat2::new(1.0, 1.0, 0.0, 1.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((m.op_norm_real() - phi).abs() < 1e-15);
        assert!((m.op_norm() - phi).abs() < 1e-12);
        assert!((m.to_complex().op_norm() - phi).abs() < 1e-12);
    }

    fn arb_piece() -> impl Strategy<Value = Piece> {
        prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..5)
            .prop_map(|segs| Piece::from_pairs(&segs).unwrap())
    }

    proptest! {
        #[test]
        fn unimodular_and_real(f in arb_piece(), e in -1000.0f64..1000.0, im in -20.0f64..20.0) {
            let m = transfer_piece(&f, e);
            let scale = (m.a * m.d).abs() + (m.b * m.c).abs();
            prop_assert!((m.det() - 1.0).abs() <= 1e-9 * scale.max(1.0));
            let mc = transfer_piece(&f, Complex64::new(e, im));
            let scale = (mc.a * mc.d).norm() + (mc.b * mc.c).norm();
            prop_assert!((mc.det() - Complex64::new(1.0, 0.0)).norm() <= 1e-9 * scale.max(1.0));
        }

        #[test]
        fn trace_not_real_in_elliptic_range_off_axis(
            f in arb_piece(), re in -50.0f64..50.0, im in 0.1f64..10.0
        ) {
            // sampled check that tr A(z) ∈ [-2, 2] only on the real axis
            let t = transfer_piece(&f, Complex64::new(re, im)).trace();
            prop_assert!(t.im.abs() > 0.0, "tr = {t}");
        }
    }
}
