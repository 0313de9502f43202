//! C ABI for the urysohn solver: opaque handles, status codes, and a small
//! solve/evaluate surface so other languages can bind the library.
//!
//! The generated header lives at `include/urysohn.h`. All functions are
//! panic-safe: internal panics are reported as `URY_STATUS_INTERNAL_ERROR`
//! instead of unwinding across the boundary.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use urysohn::bspline::{build_space, Evaluable, Spline};
use urysohn::problems::{make_test1, make_test2};
use urysohn::quadrature::gauss_rule;
use urysohn::quasi_interp::{build_qip, QipVariant};
use urysohn::solver::{
    eval_highorder, solve_collocation, solve_highorder, HighOrderApproximant, NewtonConfig,
    SeedPolicy,
};
use urysohn::Error;

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UryStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidParameter = 2,
    ConstructionFailed = 3,
    NumericError = 4,
    SingularSystem = 5,
    Diverged = 6,
    InternalError = 7,
}

/// Discretization to solve with.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UryMethod {
    Collocation = 0,
    HighOrder = 1,
}

/// Quasi-interpolating projector variant.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UryQip {
    Q2 = 0,
    Q2DB = 1,
    Q3 = 2,
}

/// Newton starting point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrySeed {
    ProjectRhs = 0,
    Exact = 1,
}

/// Solve parameters. Zero or negative `tol` selects the default 1e-14; zero
/// `max_iter` selects the default 50.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UrySolveOptions {
    pub n: u32,
    pub method: UryMethod,
    pub qip: UryQip,
    pub seed: UrySeed,
    pub tol: f64,
    pub max_iter: u32,
    pub damped: bool,
}

/// Opaque problem handle.
pub struct UryProblem {
    inner: Arc<urysohn::operator::UrysohnProblem>,
}

enum SolutionKind {
    Spline(Spline),
    HighOrder(HighOrderApproximant),
}

/// Opaque solution handle.
pub struct UrySolution {
    problem: Arc<urysohn::operator::UrysohnProblem>,
    kind: SolutionKind,
    iterations: u32,
    residual: f64,
}

fn status_of(err: &Error) -> UryStatus {
    match err {
        Error::Parameter(_) | Error::Usage(_) => UryStatus::InvalidParameter,
        Error::QipConstruction { .. } | Error::SelfConsistency { .. } => {
            UryStatus::ConstructionFailed
        }
        Error::NonFiniteKernel { .. } | Error::Assembly { .. } => UryStatus::NumericError,
        Error::Singular { .. } => UryStatus::SingularSystem,
        Error::Divergence { .. } => UryStatus::Diverged,
        Error::Io(_) => UryStatus::InternalError,
    }
}

fn guarded<F: FnOnce() -> UryStatus>(f: F) -> UryStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(UryStatus::InternalError)
}

/// Creates the first benchmark problem (degenerate oscillatory kernel).
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ury_problem_test1(out: *mut *mut UryProblem) -> UryStatus {
    if out.is_null() {
        return UryStatus::NullArgument;
    }
    guarded(|| {
        let handle = Box::new(UryProblem {
            inner: Arc::new(make_test1()),
        });
        unsafe { *out = Box::into_raw(handle) };
        UryStatus::Ok
    })
}

/// Creates the second benchmark problem with parameter `c > 0`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ury_problem_test2(c: f64, out: *mut *mut UryProblem) -> UryStatus {
    if out.is_null() {
        return UryStatus::NullArgument;
    }
    guarded(|| match make_test2(c) {
        Ok(problem) => {
            let handle = Box::new(UryProblem {
                inner: Arc::new(problem),
            });
            unsafe { *out = Box::into_raw(handle) };
            UryStatus::Ok
        }
        Err(err) => status_of(&err),
    })
}

/// Releases a problem handle. Passing null is a no-op.
///
/// # Safety
/// `problem` must be a handle returned by a constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ury_problem_free(problem: *mut UryProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Solves the problem on `options.n` subintervals and returns a solution
/// handle.
///
/// # Safety
/// `problem` and `options` must be valid; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ury_solve(
    problem: *const UryProblem,
    options: *const UrySolveOptions,
    out: *mut *mut UrySolution,
) -> UryStatus {
    if problem.is_null() || options.is_null() || out.is_null() {
        return UryStatus::NullArgument;
    }
    let problem = unsafe { &*problem };
    let options = unsafe { *options };
    guarded(|| {
        let variant = match options.qip {
            UryQip::Q2 => QipVariant::Q2,
            UryQip::Q2DB => QipVariant::Q2dB,
            UryQip::Q3 => QipVariant::Q3,
        };
        let cfg = NewtonConfig {
            tol: if options.tol > 0.0 {
                options.tol
            } else {
                1e-14
            },
            max_iter: if options.max_iter > 0 {
                options.max_iter as usize
            } else {
                50
            },
            seed: match options.seed {
                UrySeed::ProjectRhs => SeedPolicy::ProjectRhs,
                UrySeed::Exact => SeedPolicy::ExactSeed,
            },
            damped: options.damped,
        };
        let solve = || -> Result<UrySolution, Error> {
            let space = Arc::new(build_space(variant.degree(), options.n as usize)?);
            let scheme = Arc::new(build_qip(space, variant)?);
            let rule = gauss_rule(20)?;
            match options.method {
                UryMethod::Collocation => {
                    let result = solve_collocation(&problem.inner, &scheme, &cfg, &rule)?;
                    let spline = Spline::new(scheme.space().clone(), result.coefficients)?;
                    Ok(UrySolution {
                        problem: problem.inner.clone(),
                        kind: SolutionKind::Spline(spline),
                        iterations: result.iterations as u32,
                        residual: result.residual,
                    })
                }
                UryMethod::HighOrder => {
                    let (result, approx) = solve_highorder(&problem.inner, &scheme, &cfg, &rule)?;
                    Ok(UrySolution {
                        problem: problem.inner.clone(),
                        kind: SolutionKind::HighOrder(approx),
                        iterations: result.iterations as u32,
                        residual: result.residual,
                    })
                }
            }
        };
        match solve() {
            Ok(solution) => {
                unsafe { *out = Box::into_raw(Box::new(solution)) };
                UryStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Evaluates the approximate solution at `s` in [0, 1].
///
/// # Safety
/// `solution` must be a live solution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ury_solution_eval(
    solution: *const UrySolution,
    s: f64,
    out: *mut f64,
) -> UryStatus {
    if solution.is_null() || out.is_null() {
        return UryStatus::NullArgument;
    }
    if !(0.0..=1.0).contains(&s) {
        return UryStatus::InvalidParameter;
    }
    let solution = unsafe { &*solution };
    guarded(|| {
        let value = match &solution.kind {
            SolutionKind::Spline(spline) => spline.eval(s),
            SolutionKind::HighOrder(approx) => match eval_highorder(approx, s) {
                Ok(v) => v,
                Err(err) => return status_of(&err),
            },
        };
        if !value.is_finite() {
            return UryStatus::NumericError;
        }
        unsafe { *out = value };
        UryStatus::Ok
    })
}

/// Number of Newton iterations it took to converge.
///
/// # Safety
/// `solution` must be a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn ury_solution_iterations(solution: *const UrySolution) -> u32 {
    if solution.is_null() {
        return 0;
    }
    unsafe { &*solution }.iterations
}

/// Max-norm residual of the discrete fixed-point equation at the final
/// iterate.
///
/// # Safety
/// `solution` must be a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn ury_solution_residual(solution: *const UrySolution) -> f64 {
    if solution.is_null() {
        return f64::NAN;
    }
    unsafe { &*solution }.residual
}

/// Largest deviation from the problem's exact solution over `grid_points`
/// equally spaced evaluation points. Fails with `URY_STATUS_INVALID_PARAMETER`
/// when the problem has no exact solution or `grid_points < 2`.
///
/// # Safety
/// `solution` must be a live solution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ury_solution_max_error(
    solution: *const UrySolution,
    grid_points: u32,
    out: *mut f64,
) -> UryStatus {
    if solution.is_null() || out.is_null() {
        return UryStatus::NullArgument;
    }
    let solution = unsafe { &*solution };
    if grid_points < 2 || !solution.problem.has_exact() {
        return UryStatus::InvalidParameter;
    }
    guarded(|| {
        let mut worst: f64 = 0.0;
        for k in 0..grid_points {
            let s = k as f64 / (grid_points - 1) as f64;
            let approx = match &solution.kind {
                SolutionKind::Spline(spline) => spline.eval(s),
                SolutionKind::HighOrder(high) => match eval_highorder(high, s) {
                    Ok(v) => v,
                    Err(err) => return status_of(&err),
                },
            };
            worst = worst.max((solution.problem.exact(s).unwrap() - approx).abs());
        }
        unsafe { *out = worst };
        UryStatus::Ok
    })
}

/// Releases a solution handle. Passing null is a no-op.
///
/// # Safety
/// `solution` must be a handle returned by `ury_solve` and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ury_solution_free(solution: *mut UrySolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Static name for a status code.
#[no_mangle]
pub extern "C" fn ury_status_name(status: UryStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        UryStatus::Ok => b"ok\0",
        UryStatus::NullArgument => b"null argument\0",
        UryStatus::InvalidParameter => b"invalid parameter\0",
        UryStatus::ConstructionFailed => b"construction failed\0",
        UryStatus::NumericError => b"numeric error\0",
        UryStatus::SingularSystem => b"singular system\0",
        UryStatus::Diverged => b"diverged\0",
        UryStatus::InternalError => b"internal error\0",
    };
    name.as_ptr() as *const c_char
}
