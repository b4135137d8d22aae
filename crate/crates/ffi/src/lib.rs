//! C ABI over `anderson-lab`.
//!
//! Models are opaque handles built from TOML config text. Every fallible call
//! returns an [`AlStatus`]; on failure the message is available from
//! [`al_last_error`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use anderson_lab::config::parse_config;
use anderson_lab::furstenberg::{certify_type_f, CertifyParams, Verdict};
use anderson_lab::model::{check_nontriviality, SingleSiteMeasure};
use anderson_lab::transfer::{mfunction, transfer_piece, TransferError};
use anderson_lab::{estimate_lyapunov, tail_probability};
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    DegenerateEnergy = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlVerdict {
    Certified = 0,
    NearDegenerate = 1,
    NotCertified = 2,
}

impl From<Verdict> for AlVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Certified => AlVerdict::Certified,
            Verdict::NearDegenerate => AlVerdict::NearDegenerate,
            Verdict::NotCertified => AlVerdict::NotCertified,
        }
    }
}

/// Opaque model handle.
pub struct AlModel {
    measure: SingleSiteMeasure,
    value_tol: f64,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: AlStatus, msg: impl Into<String>) -> AlStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> AlStatus) -> AlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(AlStatus::Panic, "internal panic"),
    }
}

unsafe fn model<'a>(handle: *const AlModel) -> Result<&'a AlModel, AlStatus> {
    handle
        .as_ref()
        .ok_or_else(|| fail(AlStatus::NullPointer, "model handle is null"))
}

fn atom(m: &AlModel, index: usize) -> Result<&anderson_lab::model::Piece, AlStatus> {
    m.measure
        .atoms()
        .get(index)
        .map(|a| &a.piece)
        .ok_or_else(|| {
            fail(
                AlStatus::InvalidArgument,
                format!("atom {index} out of range ({} atoms)", m.measure.len()),
            )
        })
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! out_ptr {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(AlStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn al_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn al_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from NUL-terminated UTF-8 TOML text.
///
/// # Safety
/// `toml` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn al_model_from_toml(
    toml: *const c_char,
    out: *mut *mut AlModel,
) -> AlStatus {
    guard(|| {
        out_ptr!(toml, out);
        let bytes = CStr::from_ptr(toml).to_bytes();
        let built = parse_config(bytes).and_then(|c| {
            Ok(AlModel {
                measure: c.measure()?,
                value_tol: c.value_tol,
                seed: c.seed,
            })
        });
        match built {
            Ok(m) => {
                *out = Box::into_raw(Box::new(m));
                AlStatus::Ok
            }
            Err(e) => fail(AlStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from [`al_model_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn al_model_free(handle: *mut AlModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn al_model_num_atoms(handle: *const AlModel) -> usize {
    handle.as_ref().map_or(0, |m| m.measure.len())
}

/// Seed recorded in the config, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn al_model_seed(handle: *const AlModel) -> u64 {
    handle.as_ref().map_or(0, |m| m.seed)
}

/// Transfer matrix of one atom at a real energy, written as `[a, b, c, d]`.
///
/// # Safety
/// `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn al_transfer_atom(
    handle: *const AlModel,
    atom_index: usize,
    energy: f64,
    out: *mut f64,
) -> AlStatus {
    guard(|| {
        out_ptr!(out);
        let m = tri!(model(handle));
        let piece = tri!(atom(m, atom_index));
        if !energy.is_finite() {
            return fail(AlStatus::InvalidArgument, "energy must be finite");
        }
        let t = transfer_piece(piece, energy);
        ptr::copy_nonoverlapping(t.entries().as_ptr(), out, 4);
        AlStatus::Ok
    })
}

/// m-function of one atom at a complex energy, written as `[re, im]`.
///
/// # Safety
/// `out` must point to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn al_mfunction_atom(
    handle: *const AlModel,
    atom_index: usize,
    energy_re: f64,
    energy_im: f64,
    out: *mut f64,
) -> AlStatus {
    guard(|| {
        out_ptr!(out);
        let m = tri!(model(handle));
        let piece = tri!(atom(m, atom_index));
        match mfunction(piece, Complex64::new(energy_re, energy_im)) {
            Ok(z) => {
                *out = z.re;
                *out.add(1) = z.im;
                AlStatus::Ok
            }
            Err(e @ TransferError::DegenerateEnergy { .. }) => {
                fail(AlStatus::DegenerateEnergy, e.to_string())
            }
        }
    })
}

/// Monte Carlo Lyapunov estimate.
///
/// # Safety
/// `mean` and `std_error` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn al_estimate_lyapunov(
    handle: *const AlModel,
    energy: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> AlStatus {
    guard(|| {
        out_ptr!(mean, std_error);
        let m = tri!(model(handle));
        match estimate_lyapunov(&m.measure, energy, n, num_samples, seed) {
            Ok(est) => {
                *mean = est.mean;
                *std_error = est.std_error;
                AlStatus::Ok
            }
            Err(e) => fail(AlStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Non-commutativity check at the config's value tolerance. `holds` gets 1
/// or 0; `measure` the disagreement measure of the witness pair.
///
/// # Safety
/// `holds` and `measure` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn al_check_nc(
    handle: *const AlModel,
    holds: *mut c_int,
    measure: *mut f64,
) -> AlStatus {
    guard(|| {
        out_ptr!(holds, measure);
        let m = tri!(model(handle));
        let r = check_nontriviality(&m.measure, m.value_tol);
        *holds = c_int::from(r.holds);
        *measure = r.disagreement_measure;
        AlStatus::Ok
    })
}

/// Type-F certificate at one energy with default tolerances.
///
/// # Safety
/// `verdict` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn al_certify(
    handle: *const AlModel,
    energy: f64,
    verdict: *mut AlVerdict,
) -> AlStatus {
    guard(|| {
        out_ptr!(verdict);
        let m = tri!(model(handle));
        *verdict = certify_type_f(&m.measure, energy, &CertifyParams::default())
            .verdict
            .into();
        AlStatus::Ok
    })
}

/// Estimate of `P(|log ‖A_n‖ / n - l_ref| > epsilon)`.
///
/// # Safety
/// `tail` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn al_tail_probability(
    handle: *const AlModel,
    energy: f64,
    l_ref: f64,
    epsilon: f64,
    n: usize,
    num_samples: usize,
    seed: u64,
    tail: *mut f64,
) -> AlStatus {
    guard(|| {
        out_ptr!(tail);
        let m = tri!(model(handle));
        match tail_probability(&m.measure, energy, l_ref, epsilon, n, num_samples, seed) {
            Ok(t) => {
                *tail = t.tail;
                AlStatus::Ok
            }
            Err(e) => fail(AlStatus::InvalidArgument, e.to_string()),
        }
    })
}
