//! C ABI over `blowuplab`.
//!
//! Every function returns a [`BlowupStatus`]; on failure the message is kept
//! per thread and read with [`blowup_last_error_message`]. Simulations live
//! behind the opaque [`BlowupSimulation`] handle, created from a TOML run
//! configuration and released with [`blowup_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use blowuplab::ball::{BallGrid, BallQuadrature};
use blowuplab::cli::commands::{simulate_in_memory, SimulateOutcome};
use blowuplab::cli::RunConfig;
use blowuplab::diagnostics::{lower_bound_check, Verdict};
use blowuplab::energy::{initial_criterion, CriterionVerdict};
use blowuplab::model::{ode_exact_kt, DerivedConstants};
use blowuplab::solver::HaltReason;
use blowuplab::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    NumericalFailure = 5,
    InsufficientData = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Why a simulation stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupHalt {
    ReachedTEnd = 0,
    BlowupDetected = 1,
    NumericalFailure = 2,
}

/// Columns of the per-step time series.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupSeriesColumn {
    Time = 0,
    MaxU = 1,
    MaxUt = 2,
    L2NormU = 3,
    L2NormUt = 4,
}

/// Fitted blow-up time and rate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlowupEstimate {
    pub t_hat: f64,
    pub t_hat_uncertainty: f64,
    pub beta_hat: f64,
    pub kappa_hat: f64,
    pub fit_samples: usize,
}

/// Rate lower bound: both scaled quantities against `kappa (1 - slack)`.
/// Verdicts are 0 = PASS, 1 = FAIL, 2 = INCONCLUSIVE.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlowupLowerBound {
    pub sup_scaled_ut: f64,
    pub inf_scaled_f: f64,
    pub kappa: f64,
    pub ut_verdict: c_int,
    pub f_verdict: c_int,
}

/// Opaque simulation handle.
pub struct BlowupSimulation {
    config: RunConfig,
    outcome: SimulateOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> BlowupStatus {
    match err {
        Error::Config(_) | Error::Profile(_) => BlowupStatus::InvalidConfig,
        Error::InvalidExponent(_)
        | Error::InvalidWeight { .. }
        | Error::InvalidGrid(_)
        | Error::Domain(_)
        | Error::IncompatibleGrids(_)
        | Error::FrameOutOfRange(_)
        | Error::Regime(_) => BlowupStatus::InvalidArgument,
        Error::NumericalFailure { .. } => BlowupStatus::NumericalFailure,
        Error::HistoryTooShort(_) | Error::InsufficientGrowth { .. } => {
            BlowupStatus::InsufficientData
        }
        Error::Io { .. } => BlowupStatus::Io,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), BlowupStatus>>(f: F) -> BlowupStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BlowupStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            BlowupStatus::Panic
        }
    }
}

fn fail(err: Error) -> BlowupStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(name: &str) -> BlowupStatus {
    set_error(format!("{name} is null"));
    BlowupStatus::NullPointer
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn blowup_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blowup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// `beta = 1/(p-1)` and `kappa = beta^beta`.
///
/// # Safety
/// `beta` and `kappa` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_constants(p: f64, beta: *mut f64, kappa: *mut f64) -> BlowupStatus {
    guard(|| {
        if beta.is_null() || kappa.is_null() {
            return Err(null("output pointer"));
        }
        let c = DerivedConstants::new(p).map_err(fail)?;
        *beta = c.beta;
        *kappa = c.kappa;
        Ok(())
    })
}

/// Exact ODE blow-up profile `kappa (T - t)^(-beta)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_ode_exact_kt(t: f64, blowup_time: f64, p: f64, out: *mut f64) -> BlowupStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = DerivedConstants::new(p).map_err(fail)?;
        *out = ode_exact_kt(t, blowup_time, &c).map_err(fail)?;
        Ok(())
    })
}

unsafe fn slice<'a>(ptr: *const f64, n: usize, name: &str) -> Result<&'a [f64], BlowupStatus> {
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, n))
}

/// Initial-data criterion on a uniform ball grid of `n` nodes (`[-1, 1]` in
/// 1-D, the radius `[0, 1]` otherwise). `satisfied` receives 1 when the
/// value is nonnegative.
///
/// # Safety
/// The three arrays must hold `n` readable values; `value` and `satisfied`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_initial_criterion(
    p: f64,
    alpha: f64,
    dim: usize,
    n: usize,
    w0: *const f64,
    grad_w0: *const f64,
    grad_w00: *const f64,
    value: *mut f64,
    satisfied: *mut c_int,
) -> BlowupStatus {
    guard(|| {
        if value.is_null() || satisfied.is_null() {
            return Err(null("output pointer"));
        }
        let w0 = slice(w0, n, "w0")?;
        let g0 = slice(grad_w0, n, "grad_w0")?;
        let g00 = slice(grad_w00, n, "grad_w00")?;
        let c = DerivedConstants::new(p).map_err(fail)?;
        let quad = BallGrid::new(dim, n)
            .and_then(|b| BallQuadrature::new(b, alpha))
            .map_err(fail)?;
        let crit = initial_criterion(w0, g0, g00, &quad, &c).map_err(fail)?;
        *value = crit.value;
        *satisfied = c_int::from(crit.verdict == CriterionVerdict::Satisfied);
        Ok(())
    })
}

/// Parse a TOML run configuration and integrate it. Relative file paths in
/// the configuration resolve against the working directory.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be valid for
/// writes. The handle written to `out` must be released with
/// [`blowup_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_new(
    config_toml: *const c_char,
    out: *mut *mut BlowupSimulation,
) -> BlowupStatus {
    guard(|| {
        if config_toml.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        *out = std::ptr::null_mut();
        let text = CStr::from_ptr(config_toml).to_str().map_err(|_| {
            set_error("configuration is not valid UTF-8");
            BlowupStatus::InvalidUtf8
        })?;
        let config = RunConfig::parse(text, Path::new(".")).map_err(fail)?;
        let outcome = simulate_in_memory(&config).map_err(fail)?;
        *out = Box::into_raw(Box::new(BlowupSimulation { config, outcome }));
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`blowup_simulation_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_free(sim: *mut BlowupSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *const BlowupSimulation) -> Result<&'a BlowupSimulation, BlowupStatus> {
    sim.as_ref().ok_or_else(|| null("simulation handle"))
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_halt_reason(
    sim: *const BlowupSimulation,
    out: *mut BlowupHalt,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match s.outcome.history.halt_reason {
            HaltReason::ReachedTEnd => BlowupHalt::ReachedTEnd,
            HaltReason::BlowupDetected => BlowupHalt::BlowupDetected,
            HaltReason::NumericalFailure => BlowupHalt::NumericalFailure,
        };
        Ok(())
    })
}

/// Number of rows in the time series and grid points per field.
///
/// # Safety
/// `sim` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_sizes(
    sim: *const BlowupSimulation,
    series_len: *mut usize,
    nx: *mut usize,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if series_len.is_null() || nx.is_null() {
            return Err(null("output pointer"));
        }
        *series_len = s.outcome.history.series.len();
        *nx = s.outcome.history.grid.nx;
        Ok(())
    })
}

/// Copy one series column (a [`BlowupSeriesColumn`] value) into `buf`,
/// which must hold at least the series length (see
/// [`blowup_simulation_sizes`]).
///
/// # Safety
/// `sim` must be a live handle; `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_series(
    sim: *const BlowupSimulation,
    column: c_int,
    buf: *mut f64,
    len: usize,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let column = match column {
            0 => BlowupSeriesColumn::Time,
            1 => BlowupSeriesColumn::MaxU,
            2 => BlowupSeriesColumn::MaxUt,
            3 => BlowupSeriesColumn::L2NormU,
            4 => BlowupSeriesColumn::L2NormUt,
            other => {
                set_error(format!("unknown series column {other}"));
                return Err(BlowupStatus::InvalidArgument);
            }
        };
        let rows = &s.outcome.history.series;
        if len < rows.len() {
            set_error(format!("buffer holds {len} values, the series {}", rows.len()));
            return Err(BlowupStatus::BufferTooSmall);
        }
        let out = std::slice::from_raw_parts_mut(buf, rows.len());
        for (o, r) in out.iter_mut().zip(rows) {
            *o = match column {
                BlowupSeriesColumn::Time => r.t,
                BlowupSeriesColumn::MaxU => r.max_u,
                BlowupSeriesColumn::MaxUt => r.max_ut,
                BlowupSeriesColumn::L2NormU => r.l2_u,
                BlowupSeriesColumn::L2NormUt => r.l2_ut,
            };
        }
        Ok(())
    })
}

/// Copy the final `u` and `u_t` (and the grid coordinates, if `x` is not
/// null) into buffers of `len >= nx` values.
///
/// # Safety
/// `sim` must be a live handle; non-null buffers must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_final_state(
    sim: *const BlowupSimulation,
    x: *mut f64,
    u: *mut f64,
    ut: *mut f64,
    len: usize,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if u.is_null() || ut.is_null() {
            return Err(null("u or ut"));
        }
        let h = &s.outcome.history;
        let st = h.last_state();
        if len < st.u.len() {
            set_error(format!("buffers hold {len} values, the grid {}", st.u.len()));
            return Err(BlowupStatus::BufferTooSmall);
        }
        std::ptr::copy_nonoverlapping(st.u.as_ptr(), u, st.u.len());
        std::ptr::copy_nonoverlapping(st.ut.as_ptr(), ut, st.ut.len());
        if !x.is_null() {
            std::ptr::copy_nonoverlapping(h.grid.coords.as_ptr(), x, h.grid.coords.len());
        }
        Ok(())
    })
}

/// Blow-up time fit. Returns `InsufficientData` when the run did not blow
/// up or the fit window was too short.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_estimate(
    sim: *const BlowupSimulation,
    out: *mut BlowupEstimate,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = &s.outcome.report;
        let e = r.estimate.as_ref().ok_or_else(|| {
            set_error(
                r.estimate_error
                    .clone()
                    .unwrap_or_else(|| format!("run halted with {}", r.halt_reason)),
            );
            BlowupStatus::InsufficientData
        })?;
        *out = BlowupEstimate {
            t_hat: e.t_hat,
            t_hat_uncertainty: e.t_hat_uncertainty,
            beta_hat: e.beta_hat,
            kappa_hat: e.kappa_hat,
            fit_samples: e.fit_samples,
        };
        Ok(())
    })
}

fn verdict_code(v: Verdict) -> c_int {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Rate lower bound on the fitted window with relative slack `slack`.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn blowup_simulation_lower_bound(
    sim: *const BlowupSimulation,
    slack: f64,
    out: *mut BlowupLowerBound,
) -> BlowupStatus {
    guard(|| {
        let s = handle(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(0.0..1.0).contains(&slack) {
            set_error(format!("slack = {slack} must lie in [0, 1)"));
            return Err(BlowupStatus::InvalidArgument);
        }
        if s.outcome.history.grid.dim != 1 {
            return Err(fail(Error::Regime("the rate lower bound is checked for N = 1 only".into())));
        }
        let est = s.outcome.report.estimate.as_ref().ok_or_else(|| {
            set_error("no blow-up estimate");
            BlowupStatus::InsufficientData
        })?;
        let lb = lower_bound_check(&s.outcome.history, est, &s.config.validated.consts, slack);
        *out = BlowupLowerBound {
            sup_scaled_ut: lb.sup_scaled_ut,
            inf_scaled_f: lb.inf_scaled_f,
            kappa: lb.kappa,
            ut_verdict: verdict_code(lb.ut_verdict),
            f_verdict: verdict_code(lb.f_verdict),
        };
        Ok(())
    })
}
