//! C ABI for `sigmafield`.
//!
//! Objects are opaque handles created by `sf_*_new`-style functions and
//! released with the matching `sf_*_free`. Every fallible call returns an
//! [`SfStatus`]; on failure the message is kept per thread and can be read
//! with [`sf_last_error_message`]. Sets are passed as flat arrays
//! `[a0, b0, a1, b1, ...]` of half-open intervals `[a, b)`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use sigmafield::config::{parse_str, MeasureFile, MeasureRef};
use sigmafield::hermite::{hermite_eval, rkhs_kernel_eval};
use sigmafield::spectral::{SpectralMeasure, VarianceFunction};
use sigmafield::{Error, FieldSimulator, MeasurableSet, MeasureSpace};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// A measure on the real line.
pub struct SfMeasure {
    space: MeasureSpace,
    variance: OnceLock<Result<VarianceFunction, Error>>,
}

/// A seeded field simulator.
pub struct SfSimulator {
    sim: FieldSimulator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::Config(_) => SfStatus::Config,
        e if e.is_numerical() => SfStatus::Numerical,
        _ => SfStatus::InvalidInput,
    }
}

/// Runs `f`, recording errors and turning panics into [`SfStatus::Panic`].
fn guard<F: FnOnce() -> Result<(), (SfStatus, String)>>(f: F) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SfStatus, String) {
    (SfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SfStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn read_set(ptr: *const f64, n_intervals: usize) -> Result<MeasurableSet, (SfStatus, String)> {
    if n_intervals == 0 {
        return Ok(MeasurableSet::empty());
    }
    if ptr.is_null() {
        return Err(null("intervals"));
    }
    let flat = std::slice::from_raw_parts(ptr, 2 * n_intervals);
    MeasurableSet::from_intervals(flat.chunks_exact(2).map(|c| (c[0], c[1]))).map_err(lib_err)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (SfStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

fn boxed_measure(space: MeasureSpace) -> *mut SfMeasure {
    Box::into_raw(Box::new(SfMeasure {
        space,
        variance: OnceLock::new(),
    }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builtin measure by name, e.g. `"lebesgue"`, `"normalized-lebesgue"`,
/// `"power:0.5"`, `"cauchy-like:1"`, `"dirac"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_builtin(name: *const c_char, out: *mut *mut SfMeasure) -> SfStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let space = MeasureRef::Builtin(name.to_string())
            .resolve(std::path::Path::new("."))
            .map_err(lib_err)?;
        write_out(out, boxed_measure(space))
    })
}

/// Measure from a JSON document
/// `{"density": ..., "atoms": [[x, mass], ...], "quadrature": {...}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_from_json(json: *const c_char, out: *mut *mut SfMeasure) -> SfStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let file: MeasureFile = parse_str(text, true).map_err(lib_err)?;
        write_out(out, boxed_measure(file.build().map_err(lib_err)?))
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_free(m: *mut SfMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `sigma(A)` for the set given by `n_intervals` pairs.
///
/// # Safety
/// `m` must be a live handle, `intervals` must hold `2 * n_intervals`
/// doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_of(
    m: *const SfMeasure,
    intervals: *const f64,
    n_intervals: usize,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("measure"))?;
        let set = read_set(intervals, n_intervals)?;
        write_out(out, m.space.measure_of(&set).map_err(lib_err)?)
    })
}

/// Variance function `r(t)` of the stationary-increment process whose
/// spectral measure is `m`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_variance_r(m: *const SfMeasure, t: f64, out: *mut f64) -> SfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("measure"))?;
        let vf = m
            .variance
            .get_or_init(|| SpectralMeasure::new(m.space.clone()).map(VarianceFunction::new))
            .as_ref()
            .map_err(|e| lib_err(e.clone()))?;
        write_out(out, vf.r(t).map_err(lib_err)?)
    })
}

/// `exp(-(sigma(A) + sigma(B) - 2 sigma(A ∩ B)) / 2)`.
///
/// # Safety
/// `m` must be a live handle, `a` and `b` must hold `2 * na` and `2 * nb`
/// doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_rkhs_kernel(
    m: *const SfMeasure,
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("measure"))?;
        let (a, b) = (read_set(a, na)?, read_set(b, nb)?);
        write_out(out, rkhs_kernel_eval(&m.space, &a, &b).map_err(lib_err)?)
    })
}

/// Probabilists' Hermite polynomial `He_n(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_hermite_eval(n: u32, x: f64, out: *mut f64) -> SfStatus {
    guard(|| write_out(out, hermite_eval(n as usize, x)))
}

/// Simulator over the domain `[lo, hi)` with a Haar basis of the given
/// depth. The measure is copied, so `m` may be freed afterwards.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_simulator_new(
    m: *const SfMeasure,
    lo: f64,
    hi: f64,
    depth: u32,
    seed: u64,
    replicas: usize,
    out: *mut *mut SfSimulator,
) -> SfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("measure"))?;
        let domain = MeasurableSet::interval(lo, hi).map_err(lib_err)?;
        let sim = FieldSimulator::build(m.space.clone(), &domain, depth, seed, replicas).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(SfSimulator { sim })))
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_simulator_free(s: *mut SfSimulator) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of replicas of a simulator, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_simulator_replicas(s: *const SfSimulator) -> usize {
    s.as_ref().map_or(0, |s| s.sim.replicas())
}

/// Writes `W_A` for every replica into `values`. `len` must be at least
/// the replica count.
///
/// # Safety
/// `s` must be a live handle, `intervals` must hold `2 * n_intervals`
/// doubles and `values` must have `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_simulator_sample_set(
    s: *const SfSimulator,
    intervals: *const f64,
    n_intervals: usize,
    values: *mut f64,
    len: usize,
) -> SfStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("simulator"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        let n = s.sim.replicas();
        if len < n {
            return Err((SfStatus::BufferTooSmall, format!("need {n} values, buffer holds {len}")));
        }
        let set = read_set(intervals, n_intervals)?;
        let sample = s.sim.sample_field(std::slice::from_ref(&set)).map_err(lib_err)?;
        std::ptr::copy_nonoverlapping(sample.values[0].as_ptr(), values, n);
        Ok(())
    })
}
