//! C interface to the `l2dens` estimator.
//!
//! Objects are opaque handles created by `*_new` functions and released with
//! the matching `*_free`. Every fallible call returns an [`L2densStatus`]; on
//! failure a description is available from [`l2dens_last_error`] on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use l2dens::kernel::KernelSet;
use l2dens::rate::{rate_exponent, Index, Smoothness};
use l2dens::selector::{self, Branch};
use l2dens::ustat::SplitSample;
use l2dens::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum L2densStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OddSampleSize = 3,
    UnsupportedSampleSize = 4,
    InvalidInput = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Which estimate the isotropic combiner kept.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum L2densBranch {
    /// No combiner was requested.
    None = 0,
    Parametric = 1,
    Adaptive = 2,
}

/// Kernel of a given order and dimension.
pub struct L2densKernel {
    inner: KernelSet,
}

/// Result of one estimation run.
pub struct L2densEstimate {
    estimate: f64,
    selected_estimate: f64,
    n_hat: f64,
    h: Vec<f64>,
    exponents: Vec<u32>,
    branch: L2densBranch,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> L2densStatus {
    match e {
        Error::OddSampleSize(_) => L2densStatus::OddSampleSize,
        Error::UnsupportedSampleSize(_) | Error::EmptyGrid { .. } => L2densStatus::UnsupportedSampleSize,
        Error::InputFormat { .. } => L2densStatus::InvalidInput,
        Error::QuadratureFailure(_) => L2densStatus::Numerical,
        _ => L2densStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (L2densStatus, String)>>(f: F) -> L2densStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => L2densStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            L2densStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (L2densStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (L2densStatus, String) {
    (L2densStatus::NullPointer, format!("{name} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn l2dens_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn l2dens_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                // SAFETY: the caller guarantees `len` writable bytes at `buf`.
                unsafe {
                    std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                    *buf.add(n) = 0;
                }
            }
            bytes.len()
        }
    })
}

/// Builds the kernel of order `b` (2..=8) in dimension `d`.
///
/// # Safety
/// `out` must be null or a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn l2dens_kernel_new(b: u32, d: usize, out: *mut *mut L2densKernel) -> L2densStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = KernelSet::new(b, d).map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(L2densKernel { inner })) };
        Ok(())
    })
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `kernel` must come from [`l2dens_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn l2dens_kernel_free(kernel: *mut L2densKernel) {
    if !kernel.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// `||T||_1`, `||T||_inf` and `varpi` of a kernel; any output may be null.
///
/// # Safety
/// `kernel` must be a live handle; outputs must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn l2dens_kernel_norms(
    kernel: *const L2densKernel,
    l1: *mut f64,
    sup: *mut f64,
    varpi: *mut f64,
) -> L2densStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or null.
        let k = unsafe { kernel.as_ref() }.ok_or_else(|| null("kernel"))?;
        // SAFETY: each output is null or writable.
        unsafe {
            if let Some(p) = l1.as_mut() {
                *p = k.inner.norm_t1();
            }
            if let Some(p) = sup.as_mut() {
                *p = k.inner.norm_tinf();
            }
            if let Some(p) = varpi.as_mut() {
                *p = k.inner.varpi();
            }
        }
        Ok(())
    })
}

/// Estimates the L2 norm from `rows` observations of dimension `d` stored
/// row-major in `data`. `rows` must be even; the first half is X, the second Y.
///
/// # Safety
/// `kernel` must be a live handle, `data` must point to `rows * d` doubles
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate(
    kernel: *const L2densKernel,
    data: *const f64,
    rows: usize,
    d: usize,
    q: f64,
    isotropic: bool,
    out: *mut *mut L2densEstimate,
) -> L2densStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or null.
        let k = unsafe { kernel.as_ref() }.ok_or_else(|| null("kernel"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if k.inner.dim() != d {
            return Err((
                L2densStatus::InvalidArgument,
                format!("kernel dimension {} does not match data dimension {d}", k.inner.dim()),
            ));
        }
        let n = rows
            .checked_mul(d)
            .ok_or((L2densStatus::InvalidArgument, "rows * d overflows".to_string()))?;
        // SAFETY: the caller guarantees `rows * d` readable doubles.
        let slice = unsafe { std::slice::from_raw_parts(data, n) };
        let sample = SplitSample::from_rows(slice, d).map_err(lib_err)?;
        let rep = selector::run(&sample, &k.inner, q, isotropic).map_err(lib_err)?;
        let branch = match rep.combined.as_ref().map(|c| c.branch) {
            None => L2densBranch::None,
            Some(Branch::Parametric) => L2densBranch::Parametric,
            Some(Branch::Adaptive) => L2densBranch::Adaptive,
        };
        let est = L2densEstimate {
            estimate: rep.estimate(),
            selected_estimate: rep.selection.estimate,
            n_hat: rep.selection.n_hat,
            h: rep.selection.h.clone(),
            exponents: rep.selection.exponents.clone(),
            branch,
        };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(est)) };
        Ok(())
    })
}

/// Reported estimate of `||f||_2` (combined when requested).
///
/// # Safety
/// `est` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_value(est: *const L2densEstimate) -> f64 {
    // SAFETY: live handle or null.
    unsafe { est.as_ref() }.map_or(f64::NAN, |e| e.estimate)
}

/// Estimate at the selected bandwidth, before combining.
///
/// # Safety
/// As [`l2dens_estimate_value`].
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_selected(est: *const L2densEstimate) -> f64 {
    // SAFETY: live handle or null.
    unsafe { est.as_ref() }.map_or(f64::NAN, |e| e.selected_estimate)
}

/// The U-statistic at the selected bandwidth (an estimate of `||f||_2^2`).
///
/// # Safety
/// As [`l2dens_estimate_value`].
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_n_hat(est: *const L2densEstimate) -> f64 {
    // SAFETY: live handle or null.
    unsafe { est.as_ref() }.map_or(f64::NAN, |e| e.n_hat)
}

/// Branch kept by the combiner.
///
/// # Safety
/// As [`l2dens_estimate_value`].
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_branch(est: *const L2densEstimate) -> L2densBranch {
    // SAFETY: live handle or null.
    unsafe { est.as_ref() }.map_or(L2densBranch::None, |e| e.branch)
}

/// Copies the selected bandwidth (`d` values) and its grid exponents into
/// the caller's buffers; either buffer may be null.
///
/// # Safety
/// `est` must be a live handle; non-null buffers must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_bandwidth(
    est: *const L2densEstimate,
    h: *mut f64,
    exponents: *mut u32,
    len: usize,
) -> L2densStatus {
    guard(|| {
        // SAFETY: live handle or null.
        let e = unsafe { est.as_ref() }.ok_or_else(|| null("est"))?;
        if len < e.h.len() {
            return Err((
                L2densStatus::BufferTooSmall,
                format!("need {} elements, got {len}", e.h.len()),
            ));
        }
        // SAFETY: non-null buffers hold at least `len >= d` elements.
        unsafe {
            if !h.is_null() {
                std::ptr::copy_nonoverlapping(e.h.as_ptr(), h, e.h.len());
            }
            if !exponents.is_null() {
                std::ptr::copy_nonoverlapping(e.exponents.as_ptr(), exponents, e.exponents.len());
            }
        }
        Ok(())
    })
}

/// Releases an estimate; null is ignored.
///
/// # Safety
/// `est` must come from [`l2dens_estimate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn l2dens_estimate_free(est: *mut L2densEstimate) {
    if !est.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(est) });
    }
}

/// Minimax exponent for per-axis smoothness `beta[j]` and integrability
/// `r[j]` (pass `INFINITY` for an infinite index).
///
/// # Safety
/// `beta` and `r` must point to `d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2dens_rate_exponent(beta: *const f64, r: *const f64, d: usize, out: *mut f64) -> L2densStatus {
    guard(|| {
        if beta.is_null() || r.is_null() || out.is_null() {
            return Err(null("beta, r or out"));
        }
        // SAFETY: the caller guarantees `d` readable doubles in each.
        let (b, rr) = unsafe { (std::slice::from_raw_parts(beta, d), std::slice::from_raw_parts(r, d)) };
        let idx = rr
            .iter()
            .map(|&v| if v == f64::INFINITY { Ok(Index::Infinite) } else { Index::new(v) })
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib_err)?;
        let p = Smoothness::new(b.to_vec(), idx).map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = rate_exponent(&p).0 };
        Ok(())
    })
}
