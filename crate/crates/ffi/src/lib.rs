//! C interface to the nonlocal-fv solvers.
//!
//! Configurations and finished runs are opaque handles created and freed
//! through this interface. Every fallible call returns an [`NfvStatus`];
//! on failure, [`nfv_last_error`] describes the most recent error on the
//! calling thread. Panics never cross the boundary and come back as
//! `NFV_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nonlocal_fv::analysis::{convergence_study_1d, convergence_study_2d};
use nonlocal_fv::cli::{check_monitors, rate_floor, simulate, Simulation};
use nonlocal_fv::config::RunConfig;
use nonlocal_fv::Error;

/// Outcome of a call. The first four values match the command-line exit
/// codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfvStatus {
    Ok = 0,
    /// A stability, entropy or rate check failed. Results are still returned.
    MonitorViolation = 2,
    /// Invalid configuration or arguments.
    Config = 3,
    /// Non-finite state or mass reaching the boundary band.
    Numerical = 4,
    NullPointer = 10,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 11,
    /// An output buffer is too small.
    BufferTooSmall = 12,
    Io = 13,
    Panic = 14,
}

/// Parsed run configuration.
pub struct NfvConfig(RunConfig);

/// A finished run: final state and step count.
pub struct NfvRun(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> NfvStatus {
    match err {
        Error::Io(_) | Error::Csv(_) => NfvStatus::Io,
        _ => match err.exit_code() {
            2 => NfvStatus::MonitorViolation,
            4 => NfvStatus::Numerical,
            _ => NfvStatus::Config,
        },
    }
}

fn fail(err: Error) -> NfvStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> NfvStatus) -> NfvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NfvStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, NfvStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(NfvStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        NfvStatus::InvalidUtf8
    })
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return NfvStatus::NullPointer;
        })+
    };
}

unsafe fn emit_config(config: nonlocal_fv::Result<RunConfig>, out: *mut *mut NfvConfig) -> NfvStatus {
    match config {
        Ok(c) => {
            *out = Box::into_raw(Box::new(NfvConfig(c)));
            NfvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn nfv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nfv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfv_config_from_toml(toml: *const c_char, out: *mut *mut NfvConfig) -> NfvStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        emit_config(RunConfig::from_toml_str(text), out)
    })
}

/// Loads a built-in configuration (`paper-1d` or `paper-2d`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfv_config_preset(name: *const c_char, out: *mut *mut NfvConfig) -> NfvStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let name = match read_str(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        emit_config(RunConfig::preset(name), out)
    })
}

/// Sets the cell width of a configuration.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn nfv_config_set_dx(config: *mut NfvConfig, dx: f64) -> NfvStatus {
    guard(|| {
        non_null!(config);
        if !(dx.is_finite() && dx > 0.0) {
            set_error(format!("cell width must be positive, got {dx}"));
            return NfvStatus::Config;
        }
        let g = &mut (*config).0.grid;
        g.dx = Some(dx);
        g.n_cells = None;
        NfvStatus::Ok
    })
}

/// Sets the final time of a configuration.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn nfv_config_set_final_time(config: *mut NfvConfig, t_final: f64) -> NfvStatus {
    guard(|| {
        non_null!(config);
        let run = &mut (*config).0.run;
        run.t_final = t_final;
        run.snapshots.retain(|t| *t <= t_final);
        NfvStatus::Ok
    })
}

/// # Safety
/// `config` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfv_config_free(config: *mut NfvConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Marches the configuration to its final time and checks the enabled
/// monitors. On `NFV_STATUS_MONITOR_VIOLATION` the run is still stored in
/// `out`; on any other failure `out` is null.
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfv_run(config: *const NfvConfig, out: *mut *mut NfvRun) -> NfvStatus {
    guard(|| {
        non_null!(config, out);
        *out = ptr::null_mut();
        let config = &(*config).0;
        let sim = match simulate(config) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let checked = check_monitors(config, &sim);
        *out = Box::into_raw(Box::new(NfvRun(sim)));
        match checked {
            Ok(_) => NfvStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `run` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfv_run_free(run: *mut NfvRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Shape of a finished run: spatial dimension, number of components and
/// cells per axis (`ny` is 1 in one dimension).
///
/// # Safety
/// `run` must come from this library; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfv_run_shape(
    run: *const NfvRun,
    dimension: *mut usize,
    components: *mut usize,
    nx: *mut usize,
    ny: *mut usize,
) -> NfvStatus {
    guard(|| {
        non_null!(run, dimension, components, nx, ny);
        let sim = &(*run).0;
        *dimension = sim.dimension();
        *components = sim.final_cells().len();
        (*nx, *ny) = sim.shape();
        NfvStatus::Ok
    })
}

/// Final time reached and number of steps taken.
///
/// # Safety
/// `run` must come from this library; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfv_run_time(run: *const NfvRun, t: *mut f64, steps: *mut usize) -> NfvStatus {
    guard(|| {
        non_null!(run, t, steps);
        let sim = &(*run).0;
        *t = sim.final_time();
        *steps = sim.steps();
        NfvStatus::Ok
    })
}

/// Copies the final cell values of `component` into `buf` (row-major with
/// x fastest in two dimensions). `len` must be at least `nx * ny`.
///
/// # Safety
/// `run` must come from this library and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nfv_run_copy_component(
    run: *const NfvRun,
    component: usize,
    buf: *mut f64,
    len: usize,
) -> NfvStatus {
    guard(|| {
        non_null!(run, buf);
        let cells = (*run).0.final_cells();
        let Some(values) = cells.get(component) else {
            set_error(format!(
                "component {component} out of range ({} components)",
                cells.len()
            ));
            return NfvStatus::Config;
        };
        if len < values.len() {
            set_error(format!("buffer holds {len} values, need {}", values.len()));
            return NfvStatus::BufferTooSmall;
        }
        std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
        NfvStatus::Ok
    })
}

/// Grid-refinement study with `levels` table rows (`levels + 1` runs).
/// Row `i` gets its cell width in `dx[i]`, error in `error[i]` and rate in
/// `rate[i]` (NaN on the last row); each buffer must hold `levels` values.
/// Returns `NFV_STATUS_MONITOR_VIOLATION` with the table filled when a rate
/// misses the configured floor.
///
/// # Safety
/// `config` must come from this library and each buffer hold `levels`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn nfv_converge(
    config: *const NfvConfig,
    levels: usize,
    dx: *mut f64,
    error: *mut f64,
    rate: *mut f64,
) -> NfvStatus {
    guard(|| {
        non_null!(config, dx, error, rate);
        let config = &(*config).0;
        let result = (|| {
            let mut settings = config.converge_settings()?.clone();
            settings.levels = levels;
            let mut checked = config.clone();
            checked.converge = Some(settings.clone());
            checked.converge_settings()?;
            let model = config.build_model()?;
            let data = config.initial_data()?;
            let t = config.run.t_final;
            let table = if model.dimension() == 1 {
                let g = &config.grid;
                convergence_study_1d(&model, (g.lo, g.hi), &data, &config.scheme, settings.base_dx, levels, t)?
            } else {
                let domain = config.square_domain()?;
                convergence_study_2d(&model, domain, &data, &config.scheme, settings.base_dx, levels, t)?
            };
            for (i, row) in table.rows.iter().enumerate() {
                *dx.add(i) = row.dx;
                *error.add(i) = row.error;
                *rate.add(i) = row.rate.unwrap_or(f64::NAN);
            }
            table.check_floor(rate_floor(config)?, settings.margin)
        })();
        match result {
            Ok(()) => NfvStatus::Ok,
            Err(e) => fail(e),
        }
    })
}
