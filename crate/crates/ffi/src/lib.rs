//! C interface to the `bernstein` crate.
//!
//! Objects are opaque handles created by `*_new` functions and released with
//! the matching `*_free`. Every fallible call returns a [`BernsteinStatus`] and
//! writes its result through an out pointer; on failure the message is
//! available from [`bernstein_last_error`] on the same thread. Panics are
//! caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use bernstein::heat::HeatKernel;
use bernstein::mixture::{max_entropy, solve_beta};
use bernstein::observable::Region;
use bernstein::process::LevelProcess;
use bernstein::sampler::sample_level_paths;
use bernstein::spectral::SpectralBasis;
use bernstein::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BernsteinStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Invalid argument or configuration, including times below `t_min`.
    InvalidInput = 2,
    /// No solution exists, or the truncation cannot be certified.
    Infeasible = 3,
    /// An iterative solver did not converge.
    NonConvergence = 4,
    /// Numerical failure or violated invariant.
    Numerical = 5,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 6,
    /// A Rust panic was caught.
    Panic = 7,
}

/// A heat kernel together with its spectral basis.
pub struct BernsteinKernel {
    inner: Arc<HeatKernel>,
}

/// A single-level Bernstein process.
pub struct BernsteinProcess {
    inner: LevelProcess,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BernsteinStatus {
    match e.exit_code() {
        2 => BernsteinStatus::InvalidInput,
        3 => BernsteinStatus::Infeasible,
        4 => BernsteinStatus::NonConvergence,
        _ => BernsteinStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), BernsteinStatus>) -> BernsteinStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BernsteinStatus::Ok,
        Ok(Err(s)) => s,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BernsteinStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, BernsteinStatus>;
}

impl<T> OrStatus<T> for bernstein::Result<T> {
    fn or_status(self) -> Result<T, BernsteinStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, BernsteinStatus> {
    // SAFETY: the caller passes null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error(format!("`{name}` is null"));
        BernsteinStatus::NullPointer
    })
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), BernsteinStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        return Err(BernsteinStatus::NullPointer);
    }
    // SAFETY: non-null and, by contract, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

/// The message of the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn bernstein_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bernstein_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn new_kernel(
    basis: bernstein::Result<SpectralBasis>,
    t_min: f64,
    tol: f64,
    out: *mut *mut BernsteinKernel,
) -> BernsteinStatus {
    guard(|| {
        if out.is_null() {
            set_error("`out` is null".into());
            return Err(BernsteinStatus::NullPointer);
        }
        let basis = Arc::new(basis.or_status()?);
        let inner = Arc::new(HeatKernel::new(basis, t_min, tol).or_status()?);
        let handle = Box::into_raw(Box::new(BernsteinKernel { inner }));
        // SAFETY: checked non-null above.
        unsafe { out.write(handle) };
        Ok(())
    })
}

/// Kernel on the Neumann interval `[0, 1]` with `levels` modes, quadrature of
/// order `quad_order`, certified for `t >= t_min` to tolerance `tol`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_new_interval(
    levels: usize,
    quad_order: usize,
    t_min: f64,
    tol: f64,
    out: *mut *mut BernsteinKernel,
) -> BernsteinStatus {
    new_kernel(SpectralBasis::interval(levels, quad_order), t_min, tol, out)
}

/// Kernel on the unit disk restricted to radial modes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_new_disk(
    levels: usize,
    quad_order: usize,
    t_min: f64,
    tol: f64,
    out: *mut *mut BernsteinKernel,
) -> BernsteinStatus {
    new_kernel(SpectralBasis::disk(levels, quad_order), t_min, tol, out)
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_free(kernel: *mut BernsteinKernel) {
    if !kernel.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Number of modes retained by the kernel.
///
/// # Safety
/// `kernel` must be null or a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_truncation(
    kernel: *const BernsteinKernel,
    out: *mut usize,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        unsafe { write_out(out, k.inner.truncation(), "out") }
    })
}

/// Eigenvalue `lambda_m` of level `m`.
///
/// # Safety
/// As for [`bernstein_kernel_truncation`].
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_eigenvalue(
    kernel: *const BernsteinKernel,
    m: usize,
    out: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        let basis = k.inner.basis();
        if m >= basis.level_count() {
            set_error(format!(
                "level {m} is beyond the basis size {}",
                basis.level_count()
            ));
            return Err(BernsteinStatus::InvalidInput);
        }
        unsafe { write_out(out, basis.eigenvalue(m), "out") }
    })
}

/// Kernel value `g(x, t, y)`; refuses `t < t_min`.
///
/// # Safety
/// As for [`bernstein_kernel_truncation`].
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_eval(
    kernel: *const BernsteinKernel,
    x: f64,
    t: f64,
    y: f64,
    out: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        let v = k.inner.eval(x, t, y).or_status()?;
        unsafe { write_out(out, v, "out") }
    })
}

/// Partition function `Z(T) = sum_m exp(-T lambda_m)` over the truncation.
///
/// # Safety
/// As for [`bernstein_kernel_truncation`].
#[no_mangle]
pub unsafe extern "C" fn bernstein_kernel_partition_function(
    kernel: *const BernsteinKernel,
    horizon: f64,
    out: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        let v = k.inner.partition_function(horizon).or_status()?;
        unsafe { write_out(out, v, "out") }
    })
}

/// Maximal-entropy Gibbs parameters for the spectral average `lambda`.
/// Any of `beta`, `z` and `entropy` may be null.
///
/// # Safety
/// `kernel` must be null or a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_gibbs_solve(
    kernel: *const BernsteinKernel,
    lambda: f64,
    tol: f64,
    beta: *mut f64,
    z: *mut f64,
    entropy: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        let basis = k.inner.basis();
        let n = basis.level_count();
        let params = solve_beta(basis, lambda, tol, n).or_status()?;
        let s = max_entropy(&params, basis, n).or_status()?;
        for (p, v) in [(beta, params.beta), (z, params.z), (entropy, s)] {
            if !p.is_null() {
                // SAFETY: non-null and valid for writes by contract.
                unsafe { p.write(v) };
            }
        }
        Ok(())
    })
}

/// A positive level-`m` process on `[0, horizon]`. On the disk it uses the
/// disk example data; elsewhere `phi = 1 + F_m / (2 sup|F_m|)` and `psi = 1`.
///
/// # Safety
/// `kernel` must be null or a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_process_new_level(
    kernel: *const BernsteinKernel,
    m: usize,
    horizon: f64,
    out: *mut *mut BernsteinProcess,
) -> BernsteinStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        if out.is_null() {
            set_error("`out` is null".into());
            return Err(BernsteinStatus::NullPointer);
        }
        let inner = LevelProcess::positive_example(Arc::clone(&k.inner), m, horizon).or_status()?;
        let handle = Box::into_raw(Box::new(BernsteinProcess { inner }));
        // SAFETY: checked non-null above.
        unsafe { out.write(handle) };
        Ok(())
    })
}

/// Releases a process; null is ignored.
///
/// # Safety
/// `process` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bernstein_process_free(process: *mut BernsteinProcess) {
    if !process.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(process) });
    }
}

/// Marginal density (with respect to area) at `x` and time `t`.
///
/// # Safety
/// `process` must be null or a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_process_marginal_density(
    process: *const BernsteinProcess,
    x: f64,
    t: f64,
    out: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let p = unsafe { deref(process, "process") }?;
        if !(0.0..=p.inner.horizon()).contains(&t) {
            set_error(format!("t = {t} is outside [0, {}]", p.inner.horizon()));
            return Err(BernsteinStatus::InvalidInput);
        }
        unsafe { write_out(out, p.inner.marginal_density(x, t), "out") }
    })
}

/// `P(lo <= X(t) <= hi)`.
///
/// # Safety
/// As for [`bernstein_process_marginal_density`].
#[no_mangle]
pub unsafe extern "C" fn bernstein_process_probability(
    process: *const BernsteinProcess,
    lo: f64,
    hi: f64,
    t: f64,
    out: *mut f64,
) -> BernsteinStatus {
    guard(|| {
        let p = unsafe { deref(process, "process") }?;
        let region = Region::band(lo, hi).or_status()?;
        let v = p.inner.probability(t, region).or_status()?;
        unsafe { write_out(out, v, "out") }
    })
}

/// Samples `n_paths` trajectories at the `n_times` increasing `times` and
/// writes them row-major (path after path) into `coords`, which must hold
/// `capacity >= n_paths * n_times` values. When it is too small nothing is
/// sampled, `*written` is set to the required length and the call returns
/// `BufferTooSmall`. Results depend only on `seed`.
///
/// # Safety
/// `process` must be null or a live handle; `times` must point to `n_times`
/// values; `coords` to `capacity` writable values; `written` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bernstein_process_sample(
    process: *const BernsteinProcess,
    times: *const f64,
    n_times: usize,
    n_paths: usize,
    seed: u64,
    coords: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> BernsteinStatus {
    guard(|| {
        let p = unsafe { deref(process, "process") }?;
        if times.is_null() || coords.is_null() || written.is_null() {
            set_error("`times`, `coords` and `written` must be non-null".into());
            return Err(BernsteinStatus::NullPointer);
        }
        let needed = n_paths.checked_mul(n_times).ok_or_else(|| {
            set_error("n_paths * n_times overflows".into());
            BernsteinStatus::InvalidInput
        })?;
        // SAFETY: checked non-null.
        unsafe { written.write(needed) };
        if capacity < needed {
            set_error(format!("buffer holds {capacity} values, {needed} needed"));
            return Err(BernsteinStatus::BufferTooSmall);
        }
        // SAFETY: the caller guarantees `n_times` readable values.
        let times = unsafe { std::slice::from_raw_parts(times, n_times) };
        let batch = sample_level_paths(&p.inner, times, n_paths, seed).or_status()?;
        // SAFETY: capacity checked above.
        let dst = unsafe { std::slice::from_raw_parts_mut(coords, needed) };
        for (row, path) in dst.chunks_mut(n_times.max(1)).zip(&batch.paths) {
            row.copy_from_slice(path);
        }
        Ok(())
    })
}
