//! Newton-Kantorovich solution of the collocation scheme and the high-order
//! modified projection scheme.
//!
//! Both methods iterate on the spline coefficient vector. Collocation solves
//! `(I - C) y⁺ = r` with `C(i,j) = λ_i(K'(ζ) B_j)`. The high-order scheme
//! solves `(I - A - B) x⁺ = d`, where `A` has the same entry formula with the
//! corrected iterate `φ = ψ + (I - π_n)(K(ψ) + f)` in place of `ζ`, and
//! `B(i,j) = λ_i(K'(φ)(I - π_n)K'(ψ) B_j)`.
//!
//! The corrected iterate is memoized at every quadrature abscissa and QI node
//! once per Newton step; it appears in every matrix entry.

pub mod linalg;

use crate::bspline::{Evaluable, Spline, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::operator::{apply_k, UrysohnProblem};
use crate::quadrature::GaussRule;
use crate::quasi_interp::{GridSamples, QipScheme};
use linalg::{dense_solve, Matrix};
use std::sync::Arc;

/// Which of the two discretizations produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Collocation,
    HighOrder,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Collocation => "collocation",
            Method::HighOrder => "highorder",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "collocation" => Ok(Method::Collocation),
            "highorder" | "high-order" => Ok(Method::HighOrder),
            other => Err(Error::Usage(format!(
                "unknown method '{other}' (expected collocation or highorder)"
            ))),
        }
    }
}

/// Starting point for the Newton iteration.
#[derive(Debug, Clone)]
pub enum SeedPolicy {
    /// Coefficients `λ_i(f)`: the projection of the right-hand side.
    ProjectRhs,
    /// Coefficients `λ_i(φ)`; needs the exact solution.
    ExactSeed,
    /// A caller-supplied coefficient vector.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Increment tolerance: stop when `‖Δx‖_∞ ≤ tol (1 + ‖x‖_∞)`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: SeedPolicy,
    /// Halve the Newton step while the discrete residual grows.
    pub damped: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 50,
            seed: SeedPolicy::ProjectRhs,
            damped: false,
        }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::parameter("Newton tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::parameter("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a converged Newton iteration.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Max-norm coefficient change at each iteration.
    pub increment_history: Vec<f64>,
    /// Max-norm residual of the discrete fixed-point equation at the final
    /// iterate.
    pub residual: f64,
    pub method: Method,
}

/// Geometry and problem data shared by every Newton step: quadrature
/// abscissae on the knot cells, basis values there and at the QI nodes, and
/// right-hand-side samples.
struct Tables {
    degree: usize,
    dim: usize,
    quad_t: Vec<f64>,
    /// Quadrature weights including the cell half-width factor.
    quad_w: Vec<f64>,
    qfirst: Vec<usize>,
    qvals: Vec<f64>,
    nodes: Vec<f64>,
    f_nodes: Vec<f64>,
    f_quad: Vec<f64>,
}

impl Tables {
    fn new(problem: &UrysohnProblem, scheme: &QipScheme, rule: &GaussRule) -> Self {
        let space = scheme.space();
        let grid = space.grid();
        let d = space.degree();
        let n = grid.n();
        let m = rule.m();
        let half_h = 0.5 * grid.mesh_width();
        let mut quad_t = Vec::with_capacity(n * m);
        let mut quad_w = Vec::with_capacity(n * m);
        for c in 0..n {
            let mid = 0.5 * (grid.knot(c) + grid.knot(c + 1));
            for (xq, wq) in rule.nodes().iter().zip(rule.weights()) {
                quad_t.push(mid + half_h * xq);
                quad_w.push(half_h * wq);
            }
        }
        let (qfirst, qvals) = basis_table(space, &quad_t);
        let nodes = scheme.node_set().nodes().to_vec();
        let f_nodes: Vec<f64> = nodes.iter().map(|&s| problem.rhs(s)).collect();
        let f_quad: Vec<f64> = quad_t.iter().map(|&s| problem.rhs(s)).collect();
        Tables {
            degree: d,
            dim: space.dim(),
            quad_t,
            quad_w,
            qfirst,
            qvals,
            nodes,
            f_nodes,
            f_quad,
        }
    }

    fn spline_at_quad(&self, coeffs: &[f64]) -> Vec<f64> {
        eval_with_table(coeffs, &self.qfirst, &self.qvals, self.degree)
    }

    /// `K(x)(s)` for every `s` in `points`, from the memoized values of `x`
    /// at the quadrature abscissae. Summation runs in fixed abscissa order.
    fn k_at_points(
        &self,
        problem: &UrysohnProblem,
        x_quad: &[f64],
        points: &[f64],
    ) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|&s| {
                let mut acc = 0.0;
                for (cq, &t) in self.quad_t.iter().enumerate() {
                    let v = problem.kernel(s, t, x_quad[cq]);
                    if !v.is_finite() {
                        return Err(Error::NonFiniteKernel { s, t });
                    }
                    acc += self.quad_w[cq] * v;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Row of weighted kernel-derivative values
    /// `g_cq = w_cq ∂k/∂u(s, t_cq, x(t_cq))`.
    fn kprime_row(
        &self,
        problem: &UrysohnProblem,
        x_quad: &[f64],
        s: f64,
        out: &mut [f64],
    ) -> Result<()> {
        for (cq, &t) in self.quad_t.iter().enumerate() {
            let v = problem.kernel_du(s, t, x_quad[cq]);
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel { s, t });
            }
            out[cq] = self.quad_w[cq] * v;
        }
        Ok(())
    }
}

fn basis_table(space: &crate::bspline::SplineSpace, points: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let d = space.degree();
    let mut first = Vec::with_capacity(points.len());
    let mut vals = vec![0.0; points.len() * (d + 1)];
    let mut buf = [0.0_f64; MAX_DEGREE + 1];
    for (k, &t) in points.iter().enumerate() {
        first.push(space.active_basis(t, &mut buf));
        vals[k * (d + 1)..(k + 1) * (d + 1)].copy_from_slice(&buf[..d + 1]);
    }
    (first, vals)
}

fn eval_with_table(coeffs: &[f64], first: &[usize], vals: &[f64], d: usize) -> Vec<f64> {
    first
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let mut acc = 0.0;
            for a in 0..=d {
                acc += coeffs[f + a] * vals[k * (d + 1) + a];
            }
            acc
        })
        .collect()
}

/// Turns a matrix of per-node values into the functional matrix
/// `out(i, j) = λ_i(rows)`, applying each stencil to the node rows.
fn lambda_rows(scheme: &QipScheme, node_matrix: &Matrix) -> Matrix {
    let nn = scheme.space().dim();
    let ncols = node_matrix.ncols();
    let mut out = Matrix::zeros(nn, ncols);
    for i in 0..nn {
        let st = scheme.stencil(i + 1);
        for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
            let src = node_matrix.row(k);
            let dst = out.row_mut(i);
            for j in 0..ncols {
                dst[j] += w * src[j];
            }
        }
    }
    out
}

fn check_matrix(m: &Matrix) -> Result<()> {
    for i in 0..m.nrows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Assembly {
                    row: i + 1,
                    col: j + 1,
                });
            }
        }
    }
    Ok(())
}

fn check_vector(v: &[f64]) -> Result<()> {
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::Assembly { row: i + 1, col: 0 });
        }
    }
    Ok(())
}

fn same_space(scheme: &QipScheme, spline: &Spline) -> Result<()> {
    let a = scheme.space();
    let b = spline.space();
    if a.degree() != b.degree() || a.grid().n() != b.grid().n() {
        return Err(Error::parameter(
            "iterate spline does not live in the scheme's space",
        ));
    }
    Ok(())
}

/// Collocation matrix `C(i,j) = λ_i(K'(ζ) B_j)` at the QI node level.
fn collocation_node_matrix(
    tables: &Tables,
    problem: &UrysohnProblem,
    x_quad: &[f64],
) -> Result<Matrix> {
    let d = tables.degree;
    let nq = tables.quad_t.len();
    let mut node_rows = Matrix::zeros(tables.nodes.len(), tables.dim);
    let mut g = vec![0.0; nq];
    for r in 0..tables.nodes.len() {
        tables.kprime_row(problem, x_quad, tables.nodes[r], &mut g)?;
        let row = node_rows.row_mut(r);
        for cq in 0..nq {
            let gv = g[cq];
            let base = tables.qfirst[cq];
            for a in 0..=d {
                row[base + a] += gv * tables.qvals[cq * (d + 1) + a];
            }
        }
    }
    Ok(node_rows)
}

fn assemble_collocation_core(
    tables: &Tables,
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    y: &[f64],
) -> Result<(Matrix, Vec<f64>)> {
    let zeta_quad = tables.spline_at_quad(y);
    let node_rows = collocation_node_matrix(tables, problem, &zeta_quad)?;
    let c = lambda_rows(scheme, &node_rows);
    let k_nodes = tables.k_at_points(problem, &zeta_quad, &tables.nodes)?;
    let g_nodes: Vec<f64> = k_nodes
        .iter()
        .zip(&tables.f_nodes)
        .map(|(a, b)| a + b)
        .collect();
    let cy = c.matvec(y);
    let r: Vec<f64> = (0..tables.dim)
        .map(|i| scheme.functional(i + 1, &g_nodes) - cy[i])
        .collect();
    check_matrix(&c)?;
    check_vector(&r)?;
    Ok((c, r))
}

/// Assembles the collocation Newton system `(I - C) y⁺ = r` at the iterate.
pub fn assemble_collocation(
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    iterate: &Spline,
    rule: &GaussRule,
) -> Result<(Matrix, Vec<f64>)> {
    same_space(scheme, iterate)?;
    let tables = Tables::new(problem, scheme, rule);
    assemble_collocation_core(&tables, problem, scheme, iterate.coefficients())
}

/// Max-norm residual of the discrete collocation equation
/// `y_i = λ_i(K(ζ) + f)`.
fn collocation_residual(
    tables: &Tables,
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    y: &[f64],
) -> Result<f64> {
    let zeta_quad = tables.spline_at_quad(y);
    let k_nodes = tables.k_at_points(problem, &zeta_quad, &tables.nodes)?;
    let g_nodes: Vec<f64> = k_nodes
        .iter()
        .zip(&tables.f_nodes)
        .map(|(a, b)| a + b)
        .collect();
    Ok((0..tables.dim)
        .map(|i| (y[i] - scheme.functional(i + 1, &g_nodes)).abs())
        .fold(0.0, f64::max))
}

fn seed_coefficients(
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    cfg: &NewtonConfig,
) -> Result<Vec<f64>> {
    match &cfg.seed {
        SeedPolicy::ProjectRhs => {
            let samples = GridSamples::sample(scheme.node_set(), |t| problem.rhs(t));
            Ok(scheme.coefficients_from_node_values(samples.values()))
        }
        SeedPolicy::ExactSeed => {
            if !problem.has_exact() {
                return Err(Error::parameter(
                    "exact_seed requires a problem with a known exact solution",
                ));
            }
            let samples = GridSamples::sample(scheme.node_set(), |t| problem.exact(t).unwrap());
            Ok(scheme.coefficients_from_node_values(samples.values()))
        }
        SeedPolicy::Custom(v) => {
            if v.len() != scheme.space().dim() {
                return Err(Error::parameter(format!(
                    "custom seed length {} does not match dimension {}",
                    v.len(),
                    scheme.space().dim()
                )));
            }
            Ok(v.clone())
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn newton_matrix(parts: &[&Matrix]) -> Matrix {
    let n = parts[0].nrows();
    let mut m = Matrix::identity(n);
    for part in parts {
        for i in 0..n {
            let dst = m.row_mut(i);
            for (j, v) in part.row(i).iter().enumerate() {
                dst[j] -= v;
            }
        }
    }
    m
}

/// Solves the collocation equation `ζ - π_n K(ζ) = π_n f` by
/// Newton-Kantorovich iteration on the coefficient vector.
pub fn solve_collocation(
    problem: &Arc<UrysohnProblem>,
    scheme: &Arc<QipScheme>,
    cfg: &NewtonConfig,
    rule: &GaussRule,
) -> Result<SolveResult> {
    cfg.validate()?;
    let tables = Tables::new(problem, scheme, rule);
    let mut y = seed_coefficients(problem, scheme, cfg)?;
    let mut history = Vec::new();
    let mut res_prev = None;
    for iter in 1..=cfg.max_iter {
        let (c, r) = assemble_collocation_core(&tables, problem, scheme, &y)?;
        let m = newton_matrix(&[&c]);
        let mut y_next = dense_solve(&m, &r)?;
        if cfg.damped {
            let res_old = match res_prev {
                Some(v) => v,
                None => collocation_residual(&tables, problem, scheme, &y)?,
            };
            let mut res_new = collocation_residual(&tables, problem, scheme, &y_next)?;
            let mut halvings = 0;
            while res_new > res_old && halvings < 8 {
                for (yn, yo) in y_next.iter_mut().zip(&y) {
                    *yn = yo + 0.5 * (*yn - yo);
                }
                res_new = collocation_residual(&tables, problem, scheme, &y_next)?;
                halvings += 1;
            }
            res_prev = Some(res_new);
        }
        let delta = max_abs_diff(&y_next, &y);
        history.push(delta);
        let converged = delta <= cfg.tol * (1.0 + max_abs(&y_next));
        y = y_next;
        if converged {
            let residual = collocation_residual(&tables, problem, scheme, &y)?;
            return Ok(SolveResult {
                coefficients: y,
                iterations: iter,
                increment_history: history,
                residual,
                method: Method::Collocation,
            });
        }
    }
    Err(Error::Divergence {
        max_iter: cfg.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// The corrected iterate `φ = ψ + (I - π_n)(K(ψ) + f)` memoized at the
/// quadrature abscissae, where every matrix entry evaluates it.
struct CorrectedIterate {
    psi_quad: Vec<f64>,
    phi_quad: Vec<f64>,
}

fn corrected_iterate(
    tables: &Tables,
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    x: &[f64],
) -> Result<CorrectedIterate> {
    let psi_quad = tables.spline_at_quad(x);
    let k_psi_nodes = tables.k_at_points(problem, &psi_quad, &tables.nodes)?;
    let k_psi_quad = tables.k_at_points(problem, &psi_quad, &tables.quad_t)?;
    let g_nodes: Vec<f64> = k_psi_nodes
        .iter()
        .zip(&tables.f_nodes)
        .map(|(a, b)| a + b)
        .collect();
    let proj = scheme.coefficients_from_node_values(&g_nodes);
    let proj_quad = tables.spline_at_quad(&proj);
    let phi_quad: Vec<f64> = (0..tables.quad_t.len())
        .map(|cq| psi_quad[cq] + k_psi_quad[cq] + tables.f_quad[cq] - proj_quad[cq])
        .collect();
    Ok(CorrectedIterate { psi_quad, phi_quad })
}

fn assemble_highorder_core(
    tables: &Tables,
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    x: &[f64],
) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let d = tables.degree;
    let nn = tables.dim;
    let nq = tables.quad_t.len();
    let num_nodes = tables.nodes.len();
    let memo = corrected_iterate(tables, problem, scheme, x)?;

    // Step 1: w_j = K'(ψ) B_j at all QI nodes, then at all quadrature
    // abscissae. Row p of `w` holds w_j at the p-th evaluation point.
    let total_pts = num_nodes + nq;
    let mut w = Matrix::zeros(total_pts, nn);
    let mut g = vec![0.0; nq];
    for p in 0..total_pts {
        let s = if p < num_nodes {
            tables.nodes[p]
        } else {
            tables.quad_t[p - num_nodes]
        };
        tables.kprime_row(problem, &memo.psi_quad, s, &mut g)?;
        let row = w.row_mut(p);
        for cq in 0..nq {
            let gv = g[cq];
            let base = tables.qfirst[cq];
            for a in 0..=d {
                row[base + a] += gv * tables.qvals[cq * (d + 1) + a];
            }
        }
    }

    // Step 2: v_j = (I - π_n) w_j at the quadrature abscissae, using the
    // spline built from the node samples of w_j.
    let mut v = Matrix::zeros(nq, nn);
    let mut node_col = vec![0.0; num_nodes];
    for j in 0..nn {
        for r in 0..num_nodes {
            node_col[r] = w.get(r, j);
        }
        let proj = scheme.coefficients_from_node_values(&node_col);
        for cq in 0..nq {
            let base = tables.qfirst[cq];
            let mut pv = 0.0;
            for a in 0..=d {
                pv += proj[base + a] * tables.qvals[cq * (d + 1) + a];
            }
            v.set(cq, j, w.get(num_nodes + cq, j) - pv);
        }
    }

    // Step 3: node-level rows of A and of s ↦ ∫ ∂k/∂u(s, t, φ(t)) v_j(t) dt,
    // then the functionals on top.
    let mut anode = Matrix::zeros(num_nodes, nn);
    let mut bnode = Matrix::zeros(num_nodes, nn);
    for r in 0..num_nodes {
        tables.kprime_row(problem, &memo.phi_quad, tables.nodes[r], &mut g)?;
        {
            let arow = anode.row_mut(r);
            for cq in 0..nq {
                let gv = g[cq];
                let base = tables.qfirst[cq];
                for a in 0..=d {
                    arow[base + a] += gv * tables.qvals[cq * (d + 1) + a];
                }
            }
        }
        let brow = bnode.row_mut(r);
        for cq in 0..nq {
            let gv = g[cq];
            if gv == 0.0 {
                continue;
            }
            let vrow = v.row(cq);
            for j in 0..nn {
                brow[j] += gv * vrow[j];
            }
        }
    }
    let a = lambda_rows(scheme, &anode);
    let b = lambda_rows(scheme, &bnode);

    let k_phi_nodes = tables.k_at_points(problem, &memo.phi_quad, &tables.nodes)?;
    let g_nodes: Vec<f64> = k_phi_nodes
        .iter()
        .zip(&tables.f_nodes)
        .map(|(p, q)| p + q)
        .collect();
    let ax = a.matvec(x);
    let bx = b.matvec(x);
    let dvec: Vec<f64> = (0..nn)
        .map(|i| scheme.functional(i + 1, &g_nodes) - ax[i] - bx[i])
        .collect();
    check_matrix(&a)?;
    check_matrix(&b)?;
    check_vector(&dvec)?;
    Ok((a, b, dvec))
}

/// Assembles the high-order Newton system `(I - A - B) x⁺ = d` at the
/// iterate `ψ`.
pub fn assemble_highorder(
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    iterate: &Spline,
    rule: &GaussRule,
) -> Result<(Matrix, Matrix, Vec<f64>)> {
    same_space(scheme, iterate)?;
    let tables = Tables::new(problem, scheme, rule);
    assemble_highorder_core(&tables, problem, scheme, iterate.coefficients())
}

/// Max-norm residual of the discrete high-order equation
/// `x_i = λ_i(K(φ) + f)` with `φ` the corrected iterate of `x`.
fn highorder_residual(
    tables: &Tables,
    problem: &UrysohnProblem,
    scheme: &QipScheme,
    x: &[f64],
) -> Result<f64> {
    let memo = corrected_iterate(tables, problem, scheme, x)?;
    let k_phi_nodes = tables.k_at_points(problem, &memo.phi_quad, &tables.nodes)?;
    let g_nodes: Vec<f64> = k_phi_nodes
        .iter()
        .zip(&tables.f_nodes)
        .map(|(p, q)| p + q)
        .collect();
    Ok((0..tables.dim)
        .map(|i| (x[i] - scheme.functional(i + 1, &g_nodes)).abs())
        .fold(0.0, f64::max))
}

/// The evaluable high-order approximant
/// `φ_n(s) = ψ(s) + K(ψ)(s) + f(s) - [π_n(K(ψ) + f)](s)`.
pub struct HighOrderApproximant {
    psi: Spline,
    projected_correction: Spline,
    problem: Arc<UrysohnProblem>,
    scheme: Arc<QipScheme>,
    rule: GaussRule,
}

impl HighOrderApproximant {
    /// The spline part `ψ = π_n φ_n`.
    pub fn psi(&self) -> &Spline {
        &self.psi
    }

    pub fn scheme(&self) -> &Arc<QipScheme> {
        &self.scheme
    }

    fn eval_inner(&self, s: f64) -> Result<f64> {
        let grid = self.scheme.space().grid();
        let k_psi = apply_k(&self.problem, &self.psi, s, &self.rule, grid)?;
        Ok(self.psi.eval(s) + k_psi + self.problem.rhs(s) - self.projected_correction.eval(s))
    }
}

impl Evaluable for HighOrderApproximant {
    fn eval(&self, t: f64) -> f64 {
        self.eval_inner(t).unwrap_or(f64::NAN)
    }
}

/// Value of the high-order approximant at `s ∈ [0, 1]`.
pub fn eval_highorder(approx: &HighOrderApproximant, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::parameter(format!("point {s} outside [0, 1]")));
    }
    approx.eval_inner(s)
}

/// Solves the high-order modified projection equation by Newton-Kantorovich
/// iteration, returning the coefficient-level result together with the
/// evaluable corrected approximant.
pub fn solve_highorder(
    problem: &Arc<UrysohnProblem>,
    scheme: &Arc<QipScheme>,
    cfg: &NewtonConfig,
    rule: &GaussRule,
) -> Result<(SolveResult, HighOrderApproximant)> {
    cfg.validate()?;
    let tables = Tables::new(problem, scheme, rule);
    let mut x = seed_coefficients(problem, scheme, cfg)?;
    let mut history = Vec::new();
    let mut res_prev = None;
    for iter in 1..=cfg.max_iter {
        let (a, b, d) = assemble_highorder_core(&tables, problem, scheme, &x)?;
        let m = newton_matrix(&[&a, &b]);
        let mut x_next = dense_solve(&m, &d)?;
        if cfg.damped {
            let res_old = match res_prev {
                Some(v) => v,
                None => highorder_residual(&tables, problem, scheme, &x)?,
            };
            let mut res_new = highorder_residual(&tables, problem, scheme, &x_next)?;
            let mut halvings = 0;
            while res_new > res_old && halvings < 8 {
                for (xn, xo) in x_next.iter_mut().zip(&x) {
                    *xn = xo + 0.5 * (*xn - xo);
                }
                res_new = highorder_residual(&tables, problem, scheme, &x_next)?;
                halvings += 1;
            }
            res_prev = Some(res_new);
        }
        let delta = max_abs_diff(&x_next, &x);
        history.push(delta);
        let converged = delta <= cfg.tol * (1.0 + max_abs(&x_next));
        x = x_next;
        if converged {
            let residual = highorder_residual(&tables, problem, scheme, &x)?;
            let psi = Spline::new(scheme.space().clone(), x.clone())?;
            let psi_quad = tables.spline_at_quad(&x);
            let k_psi_nodes = tables.k_at_points(problem, &psi_quad, &tables.nodes)?;
            let g_nodes: Vec<f64> = k_psi_nodes
                .iter()
                .zip(&tables.f_nodes)
                .map(|(p, q)| p + q)
                .collect();
            let projected_correction = Spline::new(
                scheme.space().clone(),
                scheme.coefficients_from_node_values(&g_nodes),
            )?;
            let result = SolveResult {
                coefficients: x,
                iterations: iter,
                increment_history: history,
                residual,
                method: Method::HighOrder,
            };
            let approx = HighOrderApproximant {
                psi,
                projected_correction,
                problem: problem.clone(),
                scheme: scheme.clone(),
                rule: rule.clone(),
            };
            return Ok((result, approx));
        }
    }
    Err(Error::Divergence {
        max_iter: cfg.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::{build_space, eval_basis};
    use crate::problems::{make_test1, make_test2};
    use crate::quadrature::{composite_integrate, gauss_rule};
    use crate::quasi_interp::{apply_qip, build_qip, projector_defect, QipVariant};
    use approx::assert_abs_diff_eq;

    fn fixture(
        variant: QipVariant,
        n: usize,
        problem: UrysohnProblem,
    ) -> (Arc<UrysohnProblem>, Arc<QipScheme>, GaussRule) {
        let space = Arc::new(build_space(variant.degree(), n).unwrap());
        let scheme = Arc::new(build_qip(space, variant).unwrap());
        (Arc::new(problem), scheme, gauss_rule(20).unwrap())
    }

    fn zero_kernel_problem() -> UrysohnProblem {
        UrysohnProblem::new(
            "zero-kernel",
            Box::new(|_, _, _| 0.0),
            Box::new(|_, _, _| 0.0),
            Box::new(|s| (2.0 * s).sin()),
            None,
        )
    }

    #[test]
    fn zero_kernel_collocation_assembly() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 6, zero_kernel_problem());
        let zero = Spline::new(scheme.space().clone(), vec![0.0; scheme.space().dim()]).unwrap();
        let (c, r) = assemble_collocation(&problem, &scheme, &zero, &rule).unwrap();
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                assert_eq!(c.get(i, j), 0.0);
            }
        }
        let samples = GridSamples::sample(scheme.node_set(), |t| problem.rhs(t));
        let expected = scheme.coefficients_from_node_values(samples.values());
        for (got, want) in r.iter().zip(&expected) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_kernel_highorder_assembly() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 6, zero_kernel_problem());
        let zero = Spline::new(scheme.space().clone(), vec![0.0; scheme.space().dim()]).unwrap();
        let (a, b, d) = assemble_highorder(&problem, &scheme, &zero, &rule).unwrap();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert_eq!(a.get(i, j), 0.0);
                assert_eq!(b.get(i, j), 0.0);
            }
        }
        let samples = GridSamples::sample(scheme.node_set(), |t| problem.rhs(t));
        let expected = scheme.coefficients_from_node_values(samples.values());
        for (got, want) in d.iter().zip(&expected) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution_quickly() {
        // With f ≡ 0 and the Test 1 kernel, φ = 0 is the fixed point.
        let kernel_only = UrysohnProblem::new(
            "test1-homogeneous",
            Box::new(|s, t, u| {
                let w = 11.0 * std::f64::consts::PI;
                (w * s).cos() * (w * t).sin() * u * u
            }),
            Box::new(|s, t, u| {
                let w = 11.0 * std::f64::consts::PI;
                2.0 * (w * s).cos() * (w * t).sin() * u
            }),
            Box::new(|_| 0.0),
            None,
        );
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 8, kernel_only);
        let cfg = NewtonConfig::default();
        let result = solve_collocation(&problem, &scheme, &cfg, &rule).unwrap();
        assert!(result.iterations <= 2);
        assert!(max_abs(&result.coefficients) <= 1e-14);
        let (result, _) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
        assert!(result.iterations <= 2);
        assert!(max_abs(&result.coefficients) <= 1e-14);
    }

    /// Brute-force oracle for the collocation matrix: λ_i(K'(ζ) B_j) with the
    /// inner integral taken over the whole interval, no support restriction.
    #[test]
    fn collocation_matrix_matches_double_quadrature_oracle() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 4, make_test1());
        let space = scheme.space();
        let grid = space.grid();
        let nn = space.dim();
        let coeffs: Vec<f64> = (0..nn).map(|k| 0.2 + 0.05 * k as f64).collect();
        let zeta = Spline::new(space.clone(), coeffs).unwrap();
        let (c, _) = assemble_collocation(&problem, &scheme, &zeta, &rule).unwrap();
        let bp: Vec<f64> = grid.knots().to_vec();
        for i in 1..=nn {
            for j in 1..=nn {
                let st = scheme.stencil(i);
                let mut oracle = 0.0;
                for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
                    let s = scheme.node_set().node(k);
                    let inner = composite_integrate(
                        |t| {
                            problem.kernel_du(s, t, zeta.eval(t)) * eval_basis(space, j, t).unwrap()
                        },
                        &bp,
                        &rule,
                    )
                    .unwrap();
                    oracle += w * inner;
                }
                assert!(
                    (c.get(i - 1, j - 1) - oracle).abs() <= 1e-13,
                    "entry ({i}, {j}): {} vs {oracle}",
                    c.get(i - 1, j - 1)
                );
            }
        }
    }

    /// Brute-force oracle for A and B: the corrected iterate is rebuilt from
    /// public operations and both matrices are recomputed entry by entry with
    /// plain composite quadrature.
    #[test]
    fn highorder_matrices_match_brute_force_oracle() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 4, make_test2(1.0).unwrap());
        let space = scheme.space();
        let grid = space.grid();
        let nn = space.dim();
        let coeffs: Vec<f64> = (0..nn).map(|k| 0.8 - 0.05 * k as f64).collect();
        let psi = Spline::new(space.clone(), coeffs).unwrap();
        let (a, b, _) = assemble_highorder(&problem, &scheme, &psi, &rule).unwrap();

        // φ = ψ + (I - π_n)(K(ψ) + f), built from public pieces.
        let g = |t: f64| apply_k(&problem, &psi, t, &rule, grid).unwrap() + problem.rhs(t);
        let g_samples = GridSamples::sample(scheme.node_set(), g);
        let g_proj = apply_qip(&scheme, &g_samples).unwrap();
        let phi = |t: f64| psi.eval(t) + g(t) - g_proj.eval(t);

        let bp: Vec<f64> = grid.knots().to_vec();
        for j in 1..=nn {
            // w_j = K'(ψ) B_j and v_j = (I - π_n) w_j.
            let w_j = |t: f64| {
                composite_integrate(
                    |tau| {
                        problem.kernel_du(t, tau, psi.eval(tau))
                            * eval_basis(space, j, tau).unwrap()
                    },
                    &bp,
                    &rule,
                )
                .unwrap()
            };
            let wj_samples = GridSamples::sample(scheme.node_set(), w_j);
            let wj_proj = apply_qip(&scheme, &wj_samples).unwrap();
            let v_j = |t: f64| w_j(t) - wj_proj.eval(t);
            for i in 1..=nn {
                let st = scheme.stencil(i);
                let mut a_oracle = 0.0;
                let mut b_oracle = 0.0;
                for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
                    let s = scheme.node_set().node(k);
                    let a_inner = composite_integrate(
                        |t| problem.kernel_du(s, t, phi(t)) * eval_basis(space, j, t).unwrap(),
                        &bp,
                        &rule,
                    )
                    .unwrap();
                    let b_inner = composite_integrate(
                        |t| problem.kernel_du(s, t, phi(t)) * v_j(t),
                        &bp,
                        &rule,
                    )
                    .unwrap();
                    a_oracle += w * a_inner;
                    b_oracle += w * b_inner;
                }
                assert!(
                    (a.get(i - 1, j - 1) - a_oracle).abs() <= 1e-12,
                    "A({i}, {j}): {} vs {a_oracle}",
                    a.get(i - 1, j - 1)
                );
                assert!(
                    (b.get(i - 1, j - 1) - b_oracle).abs() <= 1e-12,
                    "B({i}, {j}): {} vs {b_oracle}",
                    b.get(i - 1, j - 1)
                );
            }
        }
    }

    #[test]
    fn b_matrix_columns_shrink_with_projection_order() {
        // For Test 1 the inner operator maps into a fixed smooth function, so
        // B's entries decay like the projection error O(h^{d+1}).
        let sup_b = |n: usize| {
            let (problem, scheme, rule) = fixture(QipVariant::Q2, n, make_test1());
            let samples = GridSamples::sample(scheme.node_set(), |t| problem.exact(t).unwrap());
            let psi = apply_qip(&scheme, &samples).unwrap();
            let (_, b, _) = assemble_highorder(&problem, &scheme, &psi, &rule).unwrap();
            let mut sup: f64 = 0.0;
            for i in 0..b.nrows() {
                for v in b.row(i) {
                    sup = sup.max(v.abs());
                }
            }
            sup
        };
        let ratio = sup_b(8) / sup_b(16);
        assert!(ratio >= 5.0, "B sup-norm ratio {ratio}");
    }

    #[test]
    fn zero_kernel_highorder_solution_is_projected_rhs() {
        // With K ≡ 0 and f already a spline in the space, the approximant is
        // exactly ψ = π_n f with zero correction.
        let space = Arc::new(build_space(2, 6).unwrap());
        let scheme = Arc::new(build_qip(space.clone(), QipVariant::Q2).unwrap());
        let f_spline = Spline::new(
            space.clone(),
            (0..space.dim()).map(|k| 0.3 + 0.1 * k as f64).collect(),
        )
        .unwrap();
        let f_clone = f_spline.clone();
        let problem = Arc::new(UrysohnProblem::new(
            "zero-kernel-spline-rhs",
            Box::new(|_, _, _| 0.0),
            Box::new(|_, _, _| 0.0),
            Box::new(move |s| f_clone.eval(s)),
            None,
        ));
        let rule = gauss_rule(20).unwrap();
        let cfg = NewtonConfig::default();
        let (result, approx) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
        for (got, want) in result.coefficients.iter().zip(f_spline.coefficients()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            assert_abs_diff_eq!(
                eval_highorder(&approx, s).unwrap(),
                f_spline.eval(s),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn projecting_the_approximant_recovers_psi() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 8, make_test2(1.0).unwrap());
        let cfg = NewtonConfig::default();
        let (result, approx) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
        let samples = GridSamples::sample(scheme.node_set(), |t| approx.eval(t));
        let reprojected = apply_qip(&scheme, &samples).unwrap();
        for (got, want) in reprojected.coefficients().iter().zip(&result.coefficients) {
            assert!((got - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn fixed_point_residuals_hold_at_convergence() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 16, make_test2(1.0).unwrap());
        let cfg = NewtonConfig::default();
        let coll = solve_collocation(&problem, &scheme, &cfg, &rule).unwrap();
        let bound = 100.0 * cfg.tol * (1.0 + max_abs(&coll.coefficients));
        assert!(coll.residual <= bound, "{} > {bound}", coll.residual);
        let (high, _) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
        let bound = 100.0 * cfg.tol * (1.0 + max_abs(&high.coefficients));
        assert!(high.residual <= bound, "{} > {bound}", high.residual);
    }

    #[test]
    fn exact_seed_converges_quadratically() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 16, make_test2(1.0).unwrap());
        let cfg = NewtonConfig {
            seed: SeedPolicy::ExactSeed,
            ..NewtonConfig::default()
        };
        for result in [
            solve_collocation(&problem, &scheme, &cfg, &rule).unwrap(),
            solve_highorder(&problem, &scheme, &cfg, &rule).unwrap().0,
        ] {
            assert!(result.iterations <= 5, "{} iterations", result.iterations);
            assert_eq!(result.increment_history.len(), result.iterations);
        }
    }

    #[test]
    fn divergence_is_reported_with_history() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 6, make_test2(1.0).unwrap());
        let cfg = NewtonConfig {
            max_iter: 1,
            tol: 1e-16,
            ..NewtonConfig::default()
        };
        match solve_collocation(&problem, &scheme, &cfg, &rule) {
            Err(Error::Divergence { history, .. }) => assert_eq!(history.len(), 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn custom_seed_length_is_validated() {
        let (problem, scheme, rule) = fixture(QipVariant::Q2, 6, make_test2(1.0).unwrap());
        let cfg = NewtonConfig {
            seed: SeedPolicy::Custom(vec![0.0; 3]),
            ..NewtonConfig::default()
        };
        assert!(solve_collocation(&problem, &scheme, &cfg, &rule).is_err());
    }

    #[test]
    fn schemes_used_here_are_projectors() {
        // Guard for the fixtures above.
        let space = Arc::new(build_space(2, 8).unwrap());
        let scheme = build_qip(space, QipVariant::Q2).unwrap();
        assert!(projector_defect(&scheme) <= 1e-12);
    }
}
