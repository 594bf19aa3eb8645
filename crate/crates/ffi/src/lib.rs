//! C ABI over `kdv5-core`.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `kdv5_*_new`/solver call and released by the matching `kdv5_*_free`.
//! Functions return a [`Kdv5Status`]; on failure the message is kept per thread
//! and read with [`kdv5_last_error_message`].
//!
//! Fields are exchanged as real samples `u(x_j)` on the model's collocation
//! grid, `x_j = 2πj/n_points`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kdv5_core::control::ControlProfile;
use kdv5_core::hum::{
    observability_report, solve_linear_control, solve_nonlinear_control, ControlSignal,
    NonlinearControlOptions,
};
use kdv5_core::linear::{evolve_linear, LinearModel};
use kdv5_core::nonlinear::{evolve_nonlinear, NonlinearModel, SolverOptions};
use kdv5_core::spectral::{sobolev_norm, to_physical, to_spectral, SpectralField, Trajectory};
use kdv5_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kdv5Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    Resolution = 5,
    Divergence = 6,
    Convergence = 7,
    IllConditioned = 8,
    InconclusiveDecay = 9,
    SmallDataViolation = 10,
    Io = 11,
    Config = 12,
    Panic = 13,
}

impl From<&Error> for Kdv5Status {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => Kdv5Status::Dimension,
            Error::Domain(_) => Kdv5Status::Domain,
            Error::Resolution(_) => Kdv5Status::Resolution,
            Error::Divergence { .. } => Kdv5Status::Divergence,
            Error::Convergence { .. } => Kdv5Status::Convergence,
            Error::IllConditioned { .. } => Kdv5Status::IllConditioned,
            Error::InconclusiveDecay(_) => Kdv5Status::InconclusiveDecay,
            Error::SmallDataViolation(_) => Kdv5Status::SmallDataViolation,
            Error::Io { .. } => Kdv5Status::Io,
            Error::Config(_) => Kdv5Status::Config,
        }
    }
}

/// Equation, grid and control profile.
pub struct Kdv5Model {
    inner: NonlinearModel,
}

/// Time levels of a solution.
pub struct Kdv5Trajectory {
    inner: Trajectory,
}

/// A computed control with its resimulated trajectory.
pub struct Kdv5Control {
    signal: ControlSignal,
    trajectory: Trajectory,
    endpoint_error: f64,
    iterations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

enum Failure {
    Status(Kdv5Status, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(Kdv5Status::InvalidArgument, msg.into())
}

/// Runs `f`, records any error and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> Kdv5Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            Kdv5Status::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            Kdv5Status::from(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            Kdv5Status::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::Status(Kdv5Status::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::Status(Kdv5Status::NullPointer, format!("{what} is null")))
}

unsafe fn samples<'a>(p: *const f64, n: usize, expected: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Status(Kdv5Status::NullPointer, format!("{what} is null")));
    }
    if n != expected {
        return Err(Failure::Status(
            Kdv5Status::Dimension,
            format!("{what} has {n} samples, the grid has {expected}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn write_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::Status(Kdv5Status::NullPointer, "output buffer is null".into()));
    }
    if len < src.len() {
        return Err(Failure::Status(
            Kdv5Status::Dimension,
            format!("output buffer holds {len} values, {} needed", src.len()),
        ));
    }
    // SAFETY: the caller guarantees `dst` points to `len` writable doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

/// Length in bytes of the last error message on this thread, excluding the NUL.
#[no_mangle]
pub extern "C" fn kdv5_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message (NUL-terminated, truncated to `len − 1` bytes)
/// and returns its full length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kdv5_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kdv5_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn new_model(n_modes: usize, profile: Option<(f64, f64)>, feedback: c_int) -> Result<Box<Kdv5Model>, Failure> {
    let grid = kdv5_core::spectral::PeriodicGrid::new(n_modes)?;
    let p = match profile {
        Some((c, r)) => ControlProfile::bump(&grid, c, r)?,
        None => ControlProfile::uniform(&grid),
    };
    let linear = LinearModel::new(p).with_feedback(feedback != 0);
    Ok(Box::new(Kdv5Model {
        inner: NonlinearModel::kdv5(linear),
    }))
}

/// Fifth-order KdV model on `K = n_modes` with a bump control profile.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_new_bump(
    n_modes: usize,
    center: f64,
    radius: f64,
    feedback: c_int,
    out: *mut *mut Kdv5Model,
) -> Kdv5Status {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        *slot = Box::into_raw(new_model(n_modes, Some((center, radius)), feedback)?);
        Ok(())
    })
}

/// As [`kdv5_model_new_bump`] with the uniform profile `g = 1/2π`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_new_uniform(
    n_modes: usize,
    feedback: c_int,
    out: *mut *mut Kdv5Model,
) -> Kdv5Status {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        *slot = Box::into_raw(new_model(n_modes, None, feedback)?);
        Ok(())
    })
}

/// Sets `ε`, the `D^{2l+1}` damping coefficient.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_set_epsilon(model: *mut Kdv5Model, epsilon: f64) -> Kdv5Status {
    guard(|| {
        let m = out_ptr(model, "model")?;
        let mut next = m.inner.clone();
        next.linear.epsilon = epsilon;
        next.validate()?;
        m.inner = next;
        Ok(())
    })
}

/// Sets the nonlinear coefficients `c₀…c₃` from `c[4]`.
///
/// # Safety
/// `model` must be a live handle and `c` point to four doubles.
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_set_coefficients(model: *mut Kdv5Model, c: *const f64) -> Kdv5Status {
    guard(|| {
        let m = out_ptr(model, "model")?;
        let c = samples(c, 4, 4, "c")?;
        let next = NonlinearModel::new(m.inner.linear.clone(), [c[0], c[1], c[2], c[3]]);
        next.validate()?;
        m.inner = next;
        Ok(())
    })
}

/// Number of collocation points, the length of every sample array.
///
/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_n_points(model: *const Kdv5Model) -> usize {
    model.as_ref().map_or(0, |m| m.inner.grid().n_points())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdv5_model_free(model: *mut Kdv5Model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn field(m: &Kdv5Model, u: &[f64]) -> Result<SpectralField, Failure> {
    Ok(to_spectral(u, m.inner.grid())?)
}

/// Solves from samples `u0` over `[0, t_final]`; `linear != 0` drops the nonlinearity.
///
/// # Safety
/// `model` must be a live handle, `u0` point to `n` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn kdv5_simulate(
    model: *const Kdv5Model,
    u0: *const f64,
    n: usize,
    t_final: f64,
    dt: f64,
    linear: c_int,
    out: *mut *mut Kdv5Trajectory,
) -> Kdv5Status {
    guard(|| {
        let m = deref(model, "model")?;
        let slot = out_ptr(out, "out")?;
        let u = field(m, samples(u0, n, m.inner.grid().n_points(), "u0")?)?;
        let traj = if linear != 0 {
            evolve_linear(&m.inner.linear, &u, None, t_final, dt)?
        } else {
            evolve_nonlinear(&m.inner, &u, None, t_final, dt, &SolverOptions::default())?
        };
        *slot = Box::into_raw(Box::new(Kdv5Trajectory { inner: traj }));
        Ok(())
    })
}

/// Number of stored time levels (steps + 1).
///
/// # Safety
/// `traj` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kdv5_trajectory_len(traj: *const Kdv5Trajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Samples of level `index` into `buf[len]`.
///
/// # Safety
/// `traj` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kdv5_trajectory_state(
    traj: *const Kdv5Trajectory,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> Kdv5Status {
    guard(|| {
        let t = deref(traj, "traj")?;
        let u = t
            .inner
            .states()
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range 0..{}", t.inner.len())))?;
        write_out(&to_physical(u), buf, len)
    })
}

/// `‖u(t_index)‖_s`.
///
/// # Safety
/// `traj` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kdv5_trajectory_norm(
    traj: *const Kdv5Trajectory,
    index: usize,
    s: f64,
    out: *mut f64,
) -> Kdv5Status {
    guard(|| {
        let t = deref(traj, "traj")?;
        let slot = out_ptr(out, "out")?;
        let u = t
            .inner
            .states()
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range 0..{}", t.inner.len())))?;
        *slot = sobolev_norm(u, s);
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdv5_trajectory_free(traj: *mut Kdv5Trajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Steers `u0` to `ut` in time `t_final`. `nonlinear == 0` uses the linear
/// minimum-energy control (data must be mean-zero); otherwise the nonlinear
/// fixed point runs to tolerance `tol` in `Z_{s,T}`.
///
/// # Safety
/// `model` must be a live handle, `u0` and `ut` point to `n` doubles and `out` be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kdv5_control_solve(
    model: *const Kdv5Model,
    u0: *const f64,
    ut: *const f64,
    n: usize,
    t_final: f64,
    dt: f64,
    s: f64,
    nonlinear: c_int,
    tol: f64,
    out: *mut *mut Kdv5Control,
) -> Kdv5Status {
    guard(|| {
        let m = deref(model, "model")?;
        let slot = out_ptr(out, "out")?;
        let np = m.inner.grid().n_points();
        let a = field(m, samples(u0, n, np, "u0")?)?;
        let b = field(m, samples(ut, n, np, "ut")?)?;
        let c = if nonlinear == 0 {
            let c = solve_linear_control(&m.inner.linear, &a, &b, t_final, dt, s)?;
            Kdv5Control {
                signal: c.signal,
                trajectory: c.trajectory,
                endpoint_error: c.endpoint_error,
                iterations: 0,
            }
        } else {
            if !(tol > 0.0) {
                return Err(invalid(format!("tol must be positive, got {tol}")));
            }
            let opts = NonlinearControlOptions {
                s,
                tol,
                ..Default::default()
            };
            let c = solve_nonlinear_control(&m.inner, &a, &b, t_final, dt, &opts)?;
            Kdv5Control {
                signal: c.signal,
                trajectory: c.trajectory,
                endpoint_error: c.endpoint_error,
                iterations: c.iterations,
            }
        };
        *slot = Box::into_raw(Box::new(c));
        Ok(())
    })
}

/// Resimulation endpoint error in `H^s` (relative for linear control, absolute
/// for nonlinear control).
///
/// # Safety
/// `control` must be a live handle or null (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_endpoint_error(control: *const Kdv5Control) -> f64 {
    control.as_ref().map_or(f64::NAN, |c| c.endpoint_error)
}

/// Fixed-point iterations used (0 for linear control).
///
/// # Safety
/// `control` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_iterations(control: *const Kdv5Control) -> usize {
    control.as_ref().map_or(0, |c| c.iterations)
}

/// Trapezoid `L²` energy `Σ wₙ dt ‖k(t_n)‖²` of the control.
///
/// # Safety
/// `control` must be a live handle or null (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_energy(control: *const Kdv5Control) -> f64 {
    control.as_ref().map_or(f64::NAN, |c| c.signal.energy())
}

/// Number of control samples (steps + 1).
///
/// # Safety
/// `control` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_len(control: *const Kdv5Control) -> usize {
    control.as_ref().map_or(0, |c| c.signal.values().len())
}

/// Samples of `k(t_index)` into `buf[len]`.
///
/// # Safety
/// `control` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_signal(
    control: *const Kdv5Control,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> Kdv5Status {
    guard(|| {
        let c = deref(control, "control")?;
        let k = c
            .signal
            .values()
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range")))?;
        write_out(&to_physical(k), buf, len)
    })
}

/// Copies the controlled trajectory into a new handle.
///
/// # Safety
/// `control` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_trajectory(
    control: *const Kdv5Control,
    out: *mut *mut Kdv5Trajectory,
) -> Kdv5Status {
    guard(|| {
        let c = deref(control, "control")?;
        let slot = out_ptr(out, "out")?;
        *slot = Box::into_raw(Box::new(Kdv5Trajectory {
            inner: c.trajectory.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `control` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdv5_control_free(control: *mut Kdv5Control) {
    if !control.is_null() {
        drop(Box::from_raw(control));
    }
}

/// Extreme eigenvalues of the observability Gramian over `[0, t_final]`.
///
/// # Safety
/// `model` must be a live handle; `lambda_min` and `lambda_max` valid.
#[no_mangle]
pub unsafe extern "C" fn kdv5_observability(
    model: *const Kdv5Model,
    t_final: f64,
    dt: f64,
    lambda_min: *mut f64,
    lambda_max: *mut f64,
) -> Kdv5Status {
    guard(|| {
        let m = deref(model, "model")?;
        let lo = out_ptr(lambda_min, "lambda_min")?;
        let hi = out_ptr(lambda_max, "lambda_max")?;
        let r = observability_report(&m.inner.linear, t_final, dt)?;
        *lo = r.lambda_min;
        *hi = r.lambda_max;
        Ok(())
    })
}

/// Runs the scenario CLI with `argv[0..argc]` and returns its exit code.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn kdv5_run_cli(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        set_error("argv is null or empty");
        return kdv5_core::cli::EXIT_CONFIG;
    }
    let mut args = Vec::with_capacity(argc as usize);
    for i in 0..argc as usize {
        let p = *argv.add(i);
        if p.is_null() {
            set_error(format!("argv[{i}] is null"));
            return kdv5_core::cli::EXIT_CONFIG;
        }
        args.push(CStr::from_ptr(p).to_string_lossy().into_owned());
    }
    match catch_unwind(|| kdv5_core::cli::run_cli(args)) {
        Ok(code) => code,
        Err(_) => {
            set_error("panic in scenario runner");
            kdv5_core::cli::EXIT_NUMERICAL
        }
    }
}
