//! C ABI over the `qhnf` normal-form pipeline.
//!
//! Results live behind an opaque [`QhnfReport`] handle. Every entry point
//! returns a [`QhnfStatus`]; on failure the message is available from
//! [`qhnf_last_error_message`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use qhnf::config::{Config, Tolerances};
use qhnf::document::MatrixDocument;
use qhnf::error::{Error, Stage};
use qhnf::normal_form::{normal_form, NormalFormReport, Verdict};
use qhnf::quadratic::HamiltonianMatrix;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhnfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The input matrix or document was rejected.
    Validation = 3,
    /// Spectral analysis or chain construction failed.
    Pipeline = 4,
    /// The transform was built but failed its final checks.
    Verification = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhnfVerdict {
    Stable = 0,
    Marginal = 1,
    Unstable = 2,
}

/// Selects a matrix for [`qhnf_report_matrix`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhnfMatrix {
    /// Symplectic transform `T`.
    Transform = 0,
    /// Normal-form Hamiltonian matrix `Tᵀ M T`.
    NormalHamiltonian = 1,
    /// Normal-form equation-of-motion matrix.
    NormalEquationOfMotion = 2,
}

/// Opaque analysis result.
pub struct QhnfReport {
    inner: NormalFormReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: QhnfStatus, message: &str) -> QhnfStatus {
    set_last_error(message);
    status
}

fn status_of(e: &Error) -> QhnfStatus {
    match e.stage() {
        Stage::Validation => QhnfStatus::Validation,
        Stage::Pipeline => QhnfStatus::Pipeline,
        Stage::Verification => QhnfStatus::Verification,
    }
}

fn guarded(body: impl FnOnce() -> QhnfStatus) -> QhnfStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(QhnfStatus::Panic, &format!("internal panic: {detail}"))
        }
    }
}

fn store(result: Result<NormalFormReport, Error>, out: *mut *mut QhnfReport) -> QhnfStatus {
    match result {
        Ok(inner) => {
            // SAFETY: `out` was checked non-null by the caller.
            unsafe { *out = Box::into_raw(Box::new(QhnfReport { inner })) };
            QhnfStatus::Ok
        }
        Err(e) => fail(status_of(&e), &e.to_string()),
    }
}

/// Analyze a row-major `2N×2N` symmetric matrix with default tolerances.
///
/// # Safety
/// `entries` must point to `4·n_modes²` readable doubles and `out` to a
/// writable handle slot. On success `*out` must be released with
/// [`qhnf_report_free`].
#[no_mangle]
pub unsafe extern "C" fn qhnf_analyze(entries: *const f64, n_modes: usize, out: *mut *mut QhnfReport) -> QhnfStatus {
    guarded(|| {
        if entries.is_null() || out.is_null() {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        }
        unsafe { *out = ptr::null_mut() };
        if n_modes == 0 || n_modes > (1 << 12) {
            return fail(QhnfStatus::InvalidArgument, "n_modes must be between 1 and 4096");
        }
        let d = 2 * n_modes;
        let values = unsafe { std::slice::from_raw_parts(entries, d * d) };
        let matrix = DMatrix::from_row_slice(d, d, values);
        let config = Config::default();
        store(HamiltonianMatrix::new(matrix, &config.tolerances).and_then(|m| normal_form(&m, &config)), out)
    })
}

/// Parse a matrix document (plain text or JSON) and analyze it, honouring
/// any tolerances it declares.
///
/// # Safety
/// `text` must be a nul-terminated UTF-8 string and `out` a writable handle
/// slot.
#[no_mangle]
pub unsafe extern "C" fn qhnf_analyze_document(text: *const c_char, out: *mut *mut QhnfReport) -> QhnfStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        }
        unsafe { *out = ptr::null_mut() };
        let Ok(input) = unsafe { CStr::from_ptr(text) }.to_str() else {
            return fail(QhnfStatus::InvalidArgument, "document is not valid UTF-8");
        };
        let result = MatrixDocument::parse(input).and_then(|doc| {
            let tolerances = doc.effective_tolerances(&Tolerances::default());
            let config = Config { tolerances, ..Config::default() };
            normal_form(&doc.hamiltonian(&tolerances)?, &config)
        });
        store(result, out)
    })
}

/// Release a report. Null is accepted.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_free(report: *mut QhnfReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_n_modes(report: *const QhnfReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.inner.n_modes())
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_verdict(report: *const QhnfReport, out: *mut QhnfVerdict) -> QhnfStatus {
    guarded(|| {
        let (Some(r), false) = (unsafe { report.as_ref() }, out.is_null()) else {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        };
        let verdict = match r.inner.verdict {
            Verdict::Stable => QhnfVerdict::Stable,
            Verdict::Marginal { .. } => QhnfVerdict::Marginal,
            Verdict::Unstable { .. } => QhnfVerdict::Unstable,
        };
        unsafe { *out = verdict };
        QhnfStatus::Ok
    })
}

/// Number of zero-frequency (free-particle) modes, or 0 for null.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_zero_frequency_modes(report: *const QhnfReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.inner.zero_frequency_mode_count)
}

/// Copy a `2N×2N` matrix in row-major order into `buffer`, which must hold
/// `len ≥ 4N²` doubles.
///
/// # Safety
/// `report` must be a live handle and `buffer` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_matrix(
    report: *const QhnfReport,
    which: QhnfMatrix,
    buffer: *mut f64,
    len: usize,
) -> QhnfStatus {
    guarded(|| {
        let (Some(r), false) = (unsafe { report.as_ref() }, buffer.is_null()) else {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        };
        let matrix = match which {
            QhnfMatrix::Transform => r.inner.transform.entries(),
            QhnfMatrix::NormalHamiltonian => r.inner.n_matrix.entries(),
            QhnfMatrix::NormalEquationOfMotion => r.inner.k_normal.entries(),
        };
        let needed = matrix.len();
        if len < needed {
            return fail(QhnfStatus::InvalidArgument, &format!("buffer holds {len} values, {needed} required"));
        }
        let target = unsafe { std::slice::from_raw_parts_mut(buffer, needed) };
        for (slot, value) in target.iter_mut().zip(matrix.transpose().iter()) {
            *slot = *value;
        }
        QhnfStatus::Ok
    })
}

fn hand_out(text: String, out: *mut *mut c_char) -> QhnfStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            QhnfStatus::Ok
        }
        Err(_) => fail(QhnfStatus::Pipeline, "output contained a nul byte"),
    }
}

/// Full report as JSON. Release with [`qhnf_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_json(report: *const QhnfReport, out: *mut *mut c_char) -> QhnfStatus {
    guarded(|| {
        let (Some(r), false) = (unsafe { report.as_ref() }, out.is_null()) else {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        };
        hand_out(qhnf::report::to_json(&r.inner), out)
    })
}

/// Normal-form Hamiltonian as a single line such as `1.5(X1^2 + P1^2)`.
/// Release with [`qhnf_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qhnf_report_expression(report: *const QhnfReport, out: *mut *mut c_char) -> QhnfStatus {
    guarded(|| {
        let (Some(r), false) = (unsafe { report.as_ref() }, out.is_null()) else {
            return fail(QhnfStatus::NullPointer, "null pointer argument");
        };
        hand_out(r.inner.hamiltonian_expression(), out)
    })
}

/// # Safety
/// `text` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn qhnf_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qhnf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qhnf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
