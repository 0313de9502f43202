//! The two benchmark problems, with exact solutions and self-consistent
//! right-hand sides.

use crate::bspline::UniformKnotGrid;
use crate::error::{Error, Result};
use crate::operator::UrysohnProblem;
use crate::quadrature::gauss_rule;
use std::f64::consts::PI;
use std::sync::Arc;

const SELF_CONSISTENCY_TOL: f64 = 1e-10;

/// Hammerstein problem with the degenerate kernel
/// `k(s, t, u) = cos(11 pi s) sin(11 pi t) u²`, forced so that
/// `φ(s) = cos(11 pi s)` solves the equation.
pub fn make_test1() -> UrysohnProblem {
    let omega = 11.0 * PI;
    UrysohnProblem::new(
        "test1",
        Box::new(move |s, t, u| (omega * s).cos() * (omega * t).sin() * u * u),
        Box::new(move |s, t, u| 2.0 * (omega * s).cos() * (omega * t).sin() * u),
        // ∫ sin(11 pi t) cos²(11 pi t) dt = 2 / (33 pi).
        Box::new(move |s| (1.0 - 2.0 / (33.0 * PI)) * (omega * s).cos()),
        Some(Box::new(move |s| (omega * s).cos())),
    )
}

/// Closed form of `∫_0^1 (t + c) / ((t + c)(t + s) + 1) dt`, the value of the
/// Test 2 operator on its exact solution. With `B = c + s`, `C = cs + 1` and
/// `D = 4C - B² > 0`:
///
/// `I(s) = ln((1 + B + C)/C)/2
///        + (c - B/2) (2/sqrt(D)) [atan((2 + B)/sqrt(D)) - atan(B/sqrt(D))]`.
pub fn test2_integral(s: f64, c: f64) -> f64 {
    let b = c + s;
    let cc = c * s + 1.0;
    let d = 4.0 * cc - b * b;
    debug_assert!(d > 0.0);
    let sq = d.sqrt();
    0.5 * ((1.0 + b + cc) / cc).ln()
        + (c - 0.5 * b) * (2.0 / sq) * (((2.0 + b) / sq).atan() - (b / sq).atan())
}

/// Urysohn problem with kernel `k(s, t, u) = 1/(s + t + u)` and exact
/// solution `φ(t) = 1/(t + c)`, `c > 0`. The right-hand side uses the closed
/// form of [`test2_integral`] so it carries no quadrature error of its own.
pub fn make_test2(c: f64) -> Result<UrysohnProblem> {
    if !(c > 0.0) {
        return Err(Error::parameter(format!("test2 needs c > 0, got {c}")));
    }
    Ok(UrysohnProblem::new(
        format!("test2(c={c})"),
        Box::new(|s, t, u| 1.0 / (s + t + u)),
        Box::new(|s, t, u| {
            let den = s + t + u;
            -1.0 / (den * den)
        }),
        Box::new(move |s| 1.0 / (s + c) - test2_integral(s, c)),
        Some(Box::new(move |t| 1.0 / (t + c))),
    ))
}

/// A catalog problem ready for the harness, with the robustness flag for the
/// badly behaved parameter range.
#[derive(Debug, Clone)]
pub struct ProblemCatalogEntry {
    pub id: String,
    pub c: Option<f64>,
    pub problem: Arc<UrysohnProblem>,
    /// When set, the harness falls back to exact seeding with a damped first
    /// Newton step unless told otherwise.
    pub ill_behaved: bool,
}

/// Looks up a problem by id (`test1` or `test2`), verifying the exact
/// solution against the equation under this module's own quadrature before
/// handing it out.
pub fn catalog_entry(id: &str, c: Option<f64>) -> Result<ProblemCatalogEntry> {
    let (problem, c, ill_behaved) = match id {
        "test1" => (make_test1(), None, false),
        "test2" => {
            let c = c.unwrap_or(1.0);
            (make_test2(c)?, Some(c), c < 0.5)
        }
        other => {
            return Err(Error::parameter(format!(
                "unknown problem id '{other}' (expected test1 or test2)"
            )))
        }
    };
    let grid = UniformKnotGrid::new(64)?;
    let rule = gauss_rule(20)?;
    let residual = problem.self_consistency_residual(&grid, &rule, 20)?;
    if residual > SELF_CONSISTENCY_TOL {
        return Err(Error::SelfConsistency {
            residual,
            tolerance: SELF_CONSISTENCY_TOL,
        });
    }
    Ok(ProblemCatalogEntry {
        id: id.to_string(),
        c,
        problem: Arc::new(problem),
        ill_behaved,
    })
}
