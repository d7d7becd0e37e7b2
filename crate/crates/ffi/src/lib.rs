//! C interface to the obstacle solvers and the batch driver.
//!
//! Every fallible function returns a [`MidStatus`]. On failure the message is
//! kept per thread and can be read with [`mid_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use membrane_id::cli::{self, Command, Overrides};
use membrane_id::forward::{kkt_residual, solve, ContactSolution, Method, ObstacleProblem, SolverConfig};
use membrane_id::mesh::{Grid, NodalField};
use membrane_id::scenarios::{make_testcase1, make_testcase2};
use membrane_id::Error;

/// Status codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericalFailure = 2,
    StepsizeTooLarge = 3,
    InfeasibleIterate = 4,
    UndefinedMetric = 5,
    InvalidPerturbation = 6,
    MeasurementFailure = 7,
    Parse = 8,
    Io = 9,
    NullPointer = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidMethod {
    Pg = 0,
    Npg = 1,
    Barrier = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidTestCase {
    Testcase1 = 1,
    Testcase2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidCommand {
    Forward = 0,
    Invert = 1,
    Experiment = 2,
}

/// Solver settings. A non-positive `tau` selects the method's default step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MidSolverConfig {
    pub method: MidMethod,
    pub tau: f64,
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub mu0: f64,
    pub theta0: f64,
}

/// Opaque obstacle problem on a uniform grid.
pub struct MidProblem(ObstacleProblem);

/// Opaque result of a contact solve.
pub struct MidSolution(ContactSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MidStatus {
    match e {
        Error::InvalidArgument(_) => MidStatus::InvalidArgument,
        Error::NumericalFailure(_) => MidStatus::NumericalFailure,
        Error::StepsizeTooLarge { .. } => MidStatus::StepsizeTooLarge,
        Error::InfeasibleIterate { .. } => MidStatus::InfeasibleIterate,
        Error::UndefinedMetric(_) => MidStatus::UndefinedMetric,
        Error::InvalidPerturbation(_) => MidStatus::InvalidPerturbation,
        Error::Measurement { .. } => MidStatus::MeasurementFailure,
        Error::Parse(_) => MidStatus::Parse,
        Error::Io(_) => MidStatus::Io,
    }
}

fn fail(status: MidStatus, msg: impl Into<String>) -> MidStatus {
    set_error(msg.into());
    status
}

/// Run `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), MidStatus>) -> MidStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MidStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(MidStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: membrane_id::Result<T>) -> Result<T, MidStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), MidStatus> {
    if p.is_null() {
        Err(fail(MidStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `data` must point to `len` readable doubles.
unsafe fn field(grid: &Grid, data: *const f64, len: usize, what: &str) -> Result<NodalField, MidStatus> {
    non_null(data, what)?;
    lift(NodalField::new(grid, slice::from_raw_parts(data, len).to_vec()))
}

/// # Safety
/// `out` must point to `len` writable doubles.
unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), MidStatus> {
    non_null(out, "output buffer")?;
    if len < values.len() {
        return Err(fail(
            MidStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn mid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings for `method`.
#[no_mangle]
pub extern "C" fn mid_solver_config_default(method: MidMethod) -> MidSolverConfig {
    let c = SolverConfig::with_method(to_method(method));
    MidSolverConfig {
        method,
        tau: 0.0,
        kkt_tol: c.kkt_tol,
        max_iter: c.max_iter,
        mu0: c.mu0,
        theta0: c.theta0,
    }
}

fn to_method(m: MidMethod) -> Method {
    match m {
        MidMethod::Pg => Method::Pg,
        MidMethod::Npg => Method::Npg,
        MidMethod::Barrier => Method::Barrier,
    }
}

/// Problem on an `n × n` node grid from nodal coefficient, load and obstacle
/// arrays of length `len = n²` (node `j·n + i` at `(i, j)/(n − 1)`).
///
/// # Safety
/// `a`, `f`, `h` must each point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mid_problem_new(
    n: usize,
    a: *const f64,
    f: *const f64,
    h: *const f64,
    len: usize,
    out: *mut *mut MidProblem,
) -> MidStatus {
    guard(|| {
        non_null(out, "out")?;
        let grid = lift(Grid::new(n))?;
        let p = lift(ObstacleProblem::new(
            &grid,
            field(&grid, a, len, "coefficient")?,
            field(&grid, f, len, "load")?,
            field(&grid, h, len, "obstacle")?,
        ))?;
        *out = Box::into_raw(Box::new(MidProblem(p)));
        Ok(())
    })
}

/// One of the two built-in forward benchmarks.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mid_problem_testcase(which: MidTestCase, n: usize, out: *mut *mut MidProblem) -> MidStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = lift(match which {
            MidTestCase::Testcase1 => make_testcase1(n),
            MidTestCase::Testcase2 => make_testcase2(n),
        })?;
        *out = Box::into_raw(Box::new(MidProblem(p)));
        Ok(())
    })
}

/// Nodes per axis, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn mid_problem_grid_n(p: *const MidProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.grid().n())
}

/// # Safety
/// `p` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn mid_problem_free(p: *mut MidProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// KKT residual of the nodal vector `u` for problem `p`.
///
/// # Safety
/// `p` must be a live handle, `u` must point to `len` doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mid_kkt_residual(p: *const MidProblem, u: *const f64, len: usize, out: *mut f64) -> MidStatus {
    guard(|| {
        non_null(p, "problem")?;
        non_null(out, "out")?;
        let p = &(*p).0;
        let u = field(p.grid(), u, len, "state")?;
        *out = kkt_residual(p, &u);
        Ok(())
    })
}

/// Solve the contact problem. Running out of iterations is not an error;
/// check [`mid_solution_converged`].
///
/// # Safety
/// `p` must be a live handle, `cfg` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mid_solve(
    p: *const MidProblem,
    cfg: *const MidSolverConfig,
    out: *mut *mut MidSolution,
) -> MidStatus {
    guard(|| {
        non_null(p, "problem")?;
        non_null(cfg, "config")?;
        non_null(out, "out")?;
        let c = *cfg;
        let config = SolverConfig {
            tau: (c.tau > 0.0).then_some(c.tau),
            kkt_tol: c.kkt_tol,
            max_iter: c.max_iter,
            mu0: c.mu0,
            theta0: c.theta0,
            ..SolverConfig::with_method(to_method(c.method))
        };
        let sol = lift(solve(&(*p).0, &config))?;
        *out = Box::into_raw(Box::new(MidSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_free(s: *mut MidSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of nodes of the solution, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_len(s: *const MidSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.u.len())
}

/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_iterations(s: *const MidSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.iterations)
}

/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_converged(s: *const MidSolution) -> bool {
    s.as_ref().is_some_and(|s| s.0.converged)
}

/// Final KKT residual (NaN for a null handle).
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_kkt(s: *const MidSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.final_kkt())
}

/// Copy the displacement into `out`.
///
/// # Safety
/// `s` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_u(s: *const MidSolution, out: *mut f64, len: usize) -> MidStatus {
    guard(|| {
        non_null(s, "solution")?;
        copy_out((*s).0.u.values(), out, len)
    })
}

/// Copy the contact multiplier `Au − f` (zero on the boundary) into `out`.
///
/// # Safety
/// `s` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_lambda(s: *const MidSolution, out: *mut f64, len: usize) -> MidStatus {
    guard(|| {
        non_null(s, "solution")?;
        copy_out((*s).0.lambda.values(), out, len)
    })
}

/// Write 1 for contact nodes and 0 elsewhere into `out`.
///
/// # Safety
/// `s` must be a live handle and `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mid_solution_contact(s: *const MidSolution, out: *mut u8, len: usize) -> MidStatus {
    guard(|| {
        non_null(s, "solution")?;
        non_null(out, "output buffer")?;
        let mask = (*s).0.contact_mask.values();
        if len < mask.len() {
            return Err(fail(
                MidStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", mask.len()),
            ));
        }
        for (k, &c) in mask.iter().enumerate() {
            *out.add(k) = c as u8;
        }
        Ok(())
    })
}

/// Run a command-line job from a JSON configuration. `out_dir` may be null
/// to keep the configured directory. Returns the command's exit code:
/// 0 converged, 2 iteration budget exhausted, 1 error (see [`mid_last_error`]).
///
/// # Safety
/// `config_json` must be a nul-terminated string; `out_dir` null or nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn mid_run(command: MidCommand, config_json: *const c_char, out_dir: *const c_char) -> i32 {
    let mut code = cli::EXIT_ERROR;
    let status = guard(|| {
        non_null(config_json, "config")?;
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| fail(MidStatus::InvalidArgument, "config is not UTF-8"))?;
        let out = if out_dir.is_null() {
            None
        } else {
            let s = CStr::from_ptr(out_dir)
                .to_str()
                .map_err(|_| fail(MidStatus::InvalidArgument, "out_dir is not UTF-8"))?;
            Some(PathBuf::from(s))
        };
        let cmd = match command {
            MidCommand::Forward => Command::Forward,
            MidCommand::Invert => Command::Invert,
            MidCommand::Experiment => Command::Experiment,
        };
        let overrides = Overrides {
            out,
            ..Overrides::default()
        };
        let cfg = lift(cli::RunConfig::from_json(text))?.materialize(&overrides);
        code = lift(cli::execute(cmd, cfg))?;
        Ok(())
    });
    if status == MidStatus::Ok {
        code
    } else {
        cli::EXIT_ERROR
    }
}
