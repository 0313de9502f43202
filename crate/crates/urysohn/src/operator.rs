//! The Urysohn integral operator `K(x)(s) = ∫ k(s, t, x(t)) dt`, its Fréchet
//! derivative, and their action on splines and basis functions.

use crate::bspline::{Evaluable, SplineSpace, UniformKnotGrid};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

type Kernel = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A Urysohn problem instance: kernel, its partial derivative in the third
/// argument, right-hand side, and (when known) the exact solution.
pub struct UrysohnProblem {
    label: String,
    kernel: Box<Kernel>,
    kernel_du: Box<Kernel>,
    rhs: Box<ScalarFn>,
    exact: Option<Box<ScalarFn>>,
}

impl std::fmt::Debug for UrysohnProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UrysohnProblem")
            .field("label", &self.label)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl UrysohnProblem {
    pub fn new(
        label: impl Into<String>,
        kernel: Box<Kernel>,
        kernel_du: Box<Kernel>,
        rhs: Box<ScalarFn>,
        exact: Option<Box<ScalarFn>>,
    ) -> Self {
        Self {
            label: label.into(),
            kernel,
            kernel_du,
            rhs,
            exact,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Kernel value `k(s, t, u)`.
    pub fn kernel(&self, s: f64, t: f64, u: f64) -> f64 {
        (self.kernel)(s, t, u)
    }

    /// Partial derivative `∂k/∂u (s, t, u)`.
    pub fn kernel_du(&self, s: f64, t: f64, u: f64) -> f64 {
        (self.kernel_du)(s, t, u)
    }

    pub fn rhs(&self, s: f64) -> f64 {
        (self.rhs)(s)
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Exact solution value, when the problem carries one.
    pub fn exact(&self, s: f64) -> Option<f64> {
        self.exact.as_ref().map(|f| f(s))
    }

    /// Largest residual `|φ(s) - K(φ)(s) - f(s)|` over `samples` equispaced
    /// points, with integrals on the given knot-aligned mesh. Errors when no
    /// exact solution is attached.
    pub fn self_consistency_residual(
        &self,
        grid: &UniformKnotGrid,
        rule: &GaussRule,
        samples: usize,
    ) -> Result<f64> {
        let exact = self
            .exact
            .as_ref()
            .ok_or_else(|| Error::parameter("problem has no exact solution"))?;
        let phi = |t: f64| exact(t);
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let s = k as f64 / (samples - 1) as f64;
            let r = phi(s) - apply_k(self, &phi, s, rule, grid)? - self.rhs(s);
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }
}

fn checked(v: f64, s: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteKernel { s, t })
    }
}

/// `K(x)(s)` by composite quadrature over the knot cells.
pub fn apply_k(
    problem: &UrysohnProblem,
    x: &dyn Evaluable,
    s: f64,
    rule: &GaussRule,
    grid: &UniformKnotGrid,
) -> Result<f64> {
    let mut total = 0.0;
    let half_h = 0.5 * grid.mesh_width();
    for c in 0..grid.n() {
        let mid = 0.5 * (grid.knot(c) + grid.knot(c + 1));
        let mut acc = 0.0;
        for (xq, wq) in rule.nodes().iter().zip(rule.weights()) {
            let t = mid + half_h * xq;
            acc += wq * checked(problem.kernel(s, t, x.eval(t)), s, t)?;
        }
        total += half_h * acc;
    }
    Ok(total)
}

/// `(K'(x) h)(s) = ∫ ∂k/∂u (s, t, x(t)) h(t) dt` by the same quadrature.
pub fn apply_kprime(
    problem: &UrysohnProblem,
    x: &dyn Evaluable,
    hfun: &dyn Evaluable,
    s: f64,
    rule: &GaussRule,
    grid: &UniformKnotGrid,
) -> Result<f64> {
    let mut total = 0.0;
    let half_h = 0.5 * grid.mesh_width();
    for c in 0..grid.n() {
        let mid = 0.5 * (grid.knot(c) + grid.knot(c + 1));
        let mut acc = 0.0;
        for (xq, wq) in rule.nodes().iter().zip(rule.weights()) {
            let t = mid + half_h * xq;
            acc += wq * checked(problem.kernel_du(s, t, x.eval(t)), s, t)? * hfun.eval(t);
        }
        total += half_h * acc;
    }
    Ok(total)
}

/// `(K'(x) B_j)(s)` with integration restricted to the support cells of
/// `B_j` (1-based), which contribute exactly zero elsewhere.
pub fn kprime_on_basis(
    problem: &UrysohnProblem,
    x: &dyn Evaluable,
    space: &SplineSpace,
    j: usize,
    s: f64,
    rule: &GaussRule,
) -> Result<f64> {
    if j == 0 || j > space.dim() {
        return Err(Error::parameter(format!(
            "basis index {j} out of range 1..={}",
            space.dim()
        )));
    }
    let grid = space.grid();
    let d = space.degree();
    let n = grid.n();
    let first_cell = j.saturating_sub(d + 1);
    let last_cell = j.min(n);
    let half_h = 0.5 * grid.mesh_width();
    let mut total = 0.0;
    let mut vals = [0.0_f64; crate::bspline::MAX_DEGREE + 1];
    for c in first_cell..last_cell {
        let mid = 0.5 * (grid.knot(c) + grid.knot(c + 1));
        let mut acc = 0.0;
        for (xq, wq) in rule.nodes().iter().zip(rule.weights()) {
            let t = mid + half_h * xq;
            let first = space.active_basis(t, &mut vals);
            let idx = j - 1;
            let basis = if idx >= first && idx <= first + d {
                vals[idx - first]
            } else {
                0.0
            };
            acc += wq * checked(problem.kernel_du(s, t, x.eval(t)), s, t)? * basis;
        }
        total += half_h * acc;
    }
    Ok(total)
}
