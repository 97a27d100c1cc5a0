//! C ABI over `sbq-core`.
//!
//! A simulation lives behind an opaque [`SbqSimulation`] handle created from a
//! JSON run configuration. Every entry point returns an [`SbqStatus`]; on
//! failure a human-readable message is available from
//! [`sbq_last_error_message`] on the same thread. Panics never cross the
//! boundary.
//!
//! The header `include/sbq.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sbq_core::config::{parse_config, RunConfig};
use sbq_core::diagnostics::{compute_record, DiagnosticsRecord};
use sbq_core::integrator::{run, RunOptions, RunStatus, SimState};
use sbq_core::io::write_snapshot;
use sbq_core::noise::{realization_seed, rng_from_seed, NoiseRng};
use sbq_core::{IntegratorError, NoiseBasis};

/// Result of every `sbq_*` call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    /// A step produced a non-finite state; the handle keeps the last finite one.
    Blowup = 4,
    /// The CFL guard refused a step; the handle keeps the last accepted state.
    CflViolation = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// One diagnostics row. Field order matches the CSV columns.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SbqDiagnostics {
    pub t: f64,
    pub kinetic_energy: f64,
    pub buoyancy_flux: f64,
    pub enstrophy2: f64,
    pub enstrophy4: f64,
    pub h2_omega: f64,
    pub h3_theta: f64,
    pub linf_grad_u: f64,
    pub linf_grad_theta: f64,
    pub lp_grad_theta: f64,
    pub blowup_accum: f64,
    pub embedding_ratio: f64,
}

impl From<&DiagnosticsRecord> for SbqDiagnostics {
    fn from(r: &DiagnosticsRecord) -> Self {
        SbqDiagnostics {
            t: r.t,
            kinetic_energy: r.kinetic_energy,
            buoyancy_flux: r.buoyancy_flux,
            enstrophy2: r.enstrophy2,
            enstrophy4: r.enstrophy4,
            h2_omega: r.h2_omega,
            h3_theta: r.h3_theta,
            linf_grad_u: r.linf_grad_u,
            linf_grad_theta: r.linf_grad_theta,
            lp_grad_theta: r.lp_grad_theta,
            blowup_accum: r.blowup_accum,
            embedding_ratio: r.embedding_ratio,
        }
    }
}

/// Opaque simulation handle.
pub struct SbqSimulation {
    config: RunConfig,
    basis: NoiseBasis,
    state: SimState,
    rng: NoiseRng,
    records: Vec<DiagnosticsRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (SbqStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SbqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbqStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {message}"));
            SbqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (SbqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn sim_ref<'a>(sim: *const SbqSimulation) -> Result<&'a SbqSimulation, Failure> {
    sim.as_ref().ok_or_else(|| null("simulation"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SbqStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn config_failure(e: impl std::fmt::Display) -> Failure {
    (SbqStatus::Config, e.to_string())
}

impl SbqSimulation {
    fn from_json(text: &str) -> Result<Self, Failure> {
        let config = parse_config(text).map_err(config_failure)?;
        let basis = config.basis().map_err(config_failure)?;
        let state = config.initial_state().map_err(config_failure)?;
        let first = compute_record(&state, config.p).map_err(|e| (SbqStatus::Blowup, e.to_string()))?;
        let rng = rng_from_seed(realization_seed(config.seed, 0));
        Ok(SbqSimulation { config, basis, state, rng, records: vec![first] })
    }

    fn advance(&mut self, end_time: f64) -> Result<(), Failure> {
        if !end_time.is_finite() || end_time < self.state.t {
            return Err((
                SbqStatus::InvalidArgument,
                format!("end time {end_time} is before the current time {}", self.state.t),
            ));
        }
        let options = RunOptions { end_time, ..self.config.run_options() };
        let tr = run(&self.state, &self.basis, &self.config.scheme_config(), &options, &mut self.rng, &mut [])
            .map_err(|e| match e {
                IntegratorError::EndBeforeStart { .. } => (SbqStatus::InvalidArgument, e.to_string()),
                other => (SbqStatus::Internal, other.to_string()),
            })?;
        self.records.extend_from_slice(&tr.records[1..]);
        self.state = tr.state;
        match tr.status {
            RunStatus::Completed => Ok(()),
            RunStatus::BlowupSuspected { step } => {
                Err((SbqStatus::Blowup, format!("blow-up suspected {step} steps into the advance")))
            }
            RunStatus::CflViolation { step, dt_max } => {
                Err((SbqStatus::CflViolation, format!("CFL guard refused step {step}: dt exceeds {dt_max:e}")))
            }
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if the last call
/// succeeded. Release it with `sbq_string_free`.
#[no_mangle]
pub extern "C" fn sbq_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from `sbq_last_error_message`, not
/// already freed.
#[no_mangle]
pub unsafe extern "C" fn sbq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of diagnostics columns.
#[no_mangle]
pub extern "C" fn sbq_diagnostics_column_count() -> usize {
    DiagnosticsRecord::COLUMNS.len()
}

/// Static NUL-terminated name of diagnostics column `index`, or null when out of range.
#[no_mangle]
pub extern "C" fn sbq_diagnostics_column_name(index: usize) -> *const c_char {
    const NAMES: [&str; 12] = [
        "t\0",
        "kinetic_energy\0",
        "buoyancy_flux\0",
        "enstrophy2\0",
        "enstrophy4\0",
        "h2_omega\0",
        "h3_theta\0",
        "linf_grad_u\0",
        "linf_grad_theta\0",
        "lp_grad_theta\0",
        "blowup_accum\0",
        "embedding_ratio\0",
    ];
    NAMES.get(index).map_or(ptr::null(), |s| s.as_ptr().cast())
}

/// Creates a simulation from a JSON run configuration. On success `*out`
/// owns a handle that must be released with `sbq_simulation_free`.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_new(config_json: *const c_char, out: *mut *mut SbqSimulation) -> SbqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sim = SbqSimulation::from_json(str_arg(config_json, "config_json")?)?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `sbq_simulation_new`, not already freed.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_free(sim: *mut SbqSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances to `end_time`, recording diagnostics at the configured interval.
///
/// # Safety
/// `sim` must be null or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_advance(sim: *mut SbqSimulation, end_time: f64) -> SbqStatus {
    guard(|| sim.as_mut().ok_or_else(|| null("simulation"))?.advance(end_time))
}

/// Current model time.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_time(sim: *const SbqSimulation, out: *mut f64) -> SbqStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.state.t;
        Ok(())
    })
}

/// Grid points per side.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_grid_size(sim: *const SbqSimulation, out: *mut usize) -> SbqStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.config.n;
        Ok(())
    })
}

unsafe fn copy_physical(values: Vec<f64>, buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len != values.len() {
        return Err((SbqStatus::InvalidArgument, format!("buffer holds {len} values, need {}", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
    Ok(())
}

/// Copies the vorticity on the physical grid into `buf`, which must hold
/// exactly `n * n` values; `buf[i * n + j]` is the value at `(x_i, y_j)`.
///
/// # Safety
/// `sim` must be null or a live handle; `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_vorticity(sim: *const SbqSimulation, buf: *mut f64, len: usize) -> SbqStatus {
    guard(|| copy_physical(sim_ref(sim)?.state.omega.to_physical(), buf, len))
}

/// Like `sbq_simulation_vorticity`, for the temperature.
///
/// # Safety
/// `sim` must be null or a live handle; `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_temperature(sim: *const SbqSimulation, buf: *mut f64, len: usize) -> SbqStatus {
    guard(|| copy_physical(sim_ref(sim)?.state.theta.to_physical(), buf, len))
}

/// Number of diagnostics rows recorded so far, the initial one included.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_record_count(sim: *const SbqSimulation, out: *mut usize) -> SbqStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.records.len();
        Ok(())
    })
}

/// Diagnostics row `index` (0 is the initial state).
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_record(
    sim: *const SbqSimulation,
    index: usize,
    out: *mut SbqDiagnostics,
) -> SbqStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let r = s.records.get(index).ok_or_else(|| {
            (SbqStatus::InvalidArgument, format!("record {index} out of range ({} recorded)", s.records.len()))
        })?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.into();
        Ok(())
    })
}

/// Writes the current state as a binary snapshot.
///
/// # Safety
/// `sim` must be null or a live handle; `path` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sbq_simulation_write_snapshot(sim: *const SbqSimulation, path: *const c_char) -> SbqStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let path = str_arg(path, "path")?;
        write_snapshot(Path::new(path), &s.state).map_err(|e| (SbqStatus::Io, e.to_string()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = "{\"n\": 16, \"T\": 0.05, \"dt\": 0.01, \"scheme\": \"stratonovich_heun\", \"seed\": 3, \
                          \"initial\": \"taylor_green\"}\0";

    fn last_error() -> Option<String> {
        let p = sbq_last_error_message();
        if p.is_null() {
            return None;
        }
        let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
        unsafe { sbq_string_free(p) };
        Some(s)
    }

    #[test]
    fn column_names_match_the_core_record() {
        assert_eq!(sbq_diagnostics_column_count(), 12);
        for (i, name) in DiagnosticsRecord::COLUMNS.iter().enumerate() {
            let c = unsafe { CStr::from_ptr(sbq_diagnostics_column_name(i)) };
            assert_eq!(c.to_str().unwrap(), *name);
        }
        assert!(sbq_diagnostics_column_name(12).is_null());
        assert_eq!(std::mem::size_of::<SbqDiagnostics>(), 12 * 8);
    }

    #[test]
    fn status_and_message_follow_each_call() {
        let mut sim = ptr::null_mut();
        let st = unsafe { sbq_simulation_new(c"{\"n\": 3}".as_ptr(), &mut sim) };
        assert_eq!(st, SbqStatus::Config);
        assert!(sim.is_null());
        assert!(last_error().is_some());

        assert_eq!(unsafe { sbq_simulation_new(CONFIG.as_ptr().cast(), &mut sim) }, SbqStatus::Ok);
        assert!(last_error().is_none());
        assert_eq!(unsafe { sbq_simulation_advance(sim, -1.0) }, SbqStatus::InvalidArgument);
        assert!(last_error().unwrap().contains("before"));
        unsafe { sbq_simulation_free(sim) };
    }

    #[test]
    fn null_arguments_are_reported() {
        assert_eq!(unsafe { sbq_simulation_new(ptr::null(), ptr::null_mut()) }, SbqStatus::NullPointer);
        assert_eq!(unsafe { sbq_simulation_advance(ptr::null_mut(), 1.0) }, SbqStatus::NullPointer);
        let mut t = 0.0;
        assert_eq!(unsafe { sbq_simulation_time(ptr::null(), &mut t) }, SbqStatus::NullPointer);
        unsafe { sbq_simulation_free(ptr::null_mut()) };
        unsafe { sbq_string_free(ptr::null_mut()) };
    }
}
