//! C ABI over `mforge`.
//!
//! Every fallible entry point returns an [`MfStatus`]; on failure the message
//! is available through [`mf_last_error`] on the calling thread until the next
//! failing call. Objects are opaque handles released with their `_free`
//! function. Strings returned by the library are released with
//! [`mf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mforge::construct::{build_schedule, Preset, Schedule, SymbolicMeasure};
use mforge::legendre::{conjugate_f, LqFunction, SpectrumFunction};
use mforge::Error;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    Parse = 3,
    Unattainable = 4,
    Construction = 5,
    Panic = 6,
}

/// A multifractal spectrum `f`.
pub struct MfSpectrum(SpectrumFunction);
/// A sampled `L^q` spectrum `tau`.
pub struct MfLq(LqFunction);
/// A construction schedule.
pub struct MfSchedule(Schedule);
/// A symbolic measure built from a schedule.
pub struct MfMeasure(SymbolicMeasure);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MfStatus {
    match e {
        Error::Parse(_) => MfStatus::Parse,
        Error::Unattainable(_) | Error::GenerationCap { .. } => MfStatus::Unattainable,
        Error::EmptySelection(_) | Error::NormalizerTooSmall { .. } | Error::NotDominated(_) => MfStatus::Construction,
        _ => MfStatus::InvalidInput,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null argument: {what}"));
            MfStatus::NullArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("internal panic: {}", msg.unwrap_or_default()));
            MfStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure::Lib(Error::Parse(format!("{what} is not UTF-8: {e}"))))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure::Lib(Error::InvalidInput(e.to_string())))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must be null or a string obtained from this library, released once.
#[no_mangle]
pub unsafe extern "C" fn mf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a spectrum from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_spectrum_from_json(json: *const c_char, out_spec: *mut *mut MfSpectrum) -> MfStatus {
    guard(|| {
        let o = out(out_spec, "out")?;
        let s = str_arg(json, "json")?;
        let f: SpectrumFunction = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        *o = boxed(MfSpectrum(f));
        Ok(())
    })
}

/// The tent through `(a, 0)`, `(peak, value)` and `(b, 0)` in dimension `d`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_spectrum_tent(a: f64, peak: f64, b: f64, value: f64, d: usize, out_spec: *mut *mut MfSpectrum) -> MfStatus {
    guard(|| {
        let o = out(out_spec, "out")?;
        *o = boxed(MfSpectrum(SpectrumFunction::tent(a, peak, b, value, d)?));
        Ok(())
    })
}

/// `f(alpha)`, with `-inf` off the domain.
///
/// # Safety
/// `spec` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_spectrum_eval(spec: *const MfSpectrum, alpha: f64, value: *mut f64) -> MfStatus {
    guard(|| {
        let f = as_ref(spec, "spec")?;
        *out(value, "value")? = f.0.eval(alpha);
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a live handle, released once.
#[no_mangle]
pub unsafe extern "C" fn mf_spectrum_free(spec: *mut MfSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// `f^*` sampled on the `n` values of `q`.
///
/// # Safety
/// `spec` must be a live handle, `q` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_lq_from_spectrum(spec: *const MfSpectrum, q: *const f64, n: usize, out_lq: *mut *mut MfLq) -> MfStatus {
    guard(|| {
        let f = as_ref(spec, "spec")?;
        let o = out(out_lq, "out")?;
        if q.is_null() {
            return Err(Failure::Null("q"));
        }
        let grid = std::slice::from_raw_parts(q, n);
        *o = boxed(MfLq(conjugate_f(&f.0, grid)?));
        Ok(())
    })
}

/// `tau(q)` by linear interpolation on the grid.
///
/// # Safety
/// `lq` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_lq_eval(lq: *const MfLq, q: f64, value: *mut f64) -> MfStatus {
    guard(|| {
        let t = as_ref(lq, "lq")?;
        *out(value, "value")? = t.0.eval(q);
        Ok(())
    })
}

/// # Safety
/// `lq` must be null or a live handle, released once.
#[no_mangle]
pub unsafe extern "C" fn mf_lq_free(lq: *mut MfLq) {
    if !lq.is_null() {
        drop(Box::from_raw(lq));
    }
}

/// Schedules rounds `1..=m_max` for `f` alone (`g` null) or for the pair
/// `(f, g)`, around the fixed point `d_fix`, with a named preset.
///
/// # Safety
/// `f` must be a live handle, `g` null or a live handle, `preset` a
/// NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_schedule_build(
    f: *const MfSpectrum,
    g: *const MfSpectrum,
    d_fix: f64,
    m_max: usize,
    preset: *const c_char,
    out_schedule: *mut *mut MfSchedule,
) -> MfStatus {
    guard(|| {
        let f = as_ref(f, "f")?;
        let g = g.as_ref().map(|g| &g.0);
        let o = out(out_schedule, "out")?;
        let preset = Preset::named(str_arg(preset, "preset")?)?;
        *o = boxed(MfSchedule(build_schedule(&f.0, g, d_fix, m_max, &preset)?));
        Ok(())
    })
}

/// The schedule as JSON, released with [`mf_string_free`].
///
/// # Safety
/// `schedule` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_schedule_to_json(schedule: *const MfSchedule, out_json: *mut *mut c_char) -> MfStatus {
    guard(|| {
        let s = as_ref(schedule, "schedule")?;
        let o = out(out_json, "out")?;
        let text = serde_json::to_string(&s.0).map_err(|e| Error::Parse(e.to_string()))?;
        *o = c_string(text)?;
        Ok(())
    })
}

/// Generation `N_m` of round `m`.
///
/// # Safety
/// `schedule` must be a live handle and `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_schedule_round_generation(schedule: *const MfSchedule, m: usize, n: *mut u64) -> MfStatus {
    guard(|| {
        let s = as_ref(schedule, "schedule")?;
        let r = s.0.rounds.iter().find(|r| r.m == m).ok_or_else(|| Error::InvalidInput(format!("no round {m}")))?;
        *out(n, "n")? = r.n_gen;
        Ok(())
    })
}

/// # Safety
/// `schedule` must be null or a live handle, released once.
#[no_mangle]
pub unsafe extern "C" fn mf_schedule_free(schedule: *mut MfSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Builds the measure described by a schedule.
///
/// # Safety
/// `schedule` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_build(schedule: *const MfSchedule, out_measure: *mut *mut MfMeasure) -> MfStatus {
    guard(|| {
        let s = as_ref(schedule, "schedule")?;
        let o = out(out_measure, "out")?;
        *o = boxed(MfMeasure(SymbolicMeasure::build(&s.0)?));
        Ok(())
    })
}

/// Number of stages.
///
/// # Safety
/// `measure` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_stage_count(measure: *const MfMeasure, count: *mut usize) -> MfStatus {
    guard(|| {
        let mu = as_ref(measure, "measure")?;
        *out(count, "count")? = mu.0.stage_count();
        Ok(())
    })
}

/// Generation reached after stage `s`.
///
/// # Safety
/// `measure` must be a live handle and `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_generation(measure: *const MfMeasure, s: usize, n: *mut u64) -> MfStatus {
    guard(|| {
        let mu = as_ref(measure, "measure")?;
        *out(n, "n")? = mu.0.n_of(s)?;
        Ok(())
    })
}

/// `log2` of the partition function `sum mu(I)^q` over the cubes of stage `s`.
///
/// # Safety
/// `measure` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_log2_partition(measure: *const MfMeasure, q: f64, s: usize, value: *mut f64) -> MfStatus {
    guard(|| {
        let mu = as_ref(measure, "measure")?;
        *out(value, "value")? = mu.0.log2_partition(q, s)?;
        Ok(())
    })
}

/// # Safety
/// `measure` must be null or a live handle, released once.
#[no_mangle]
pub unsafe extern "C" fn mf_measure_free(measure: *mut MfMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}
