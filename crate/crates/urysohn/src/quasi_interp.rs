//! Quasi-interpolating projectors onto uniform spline spaces.
//!
//! A scheme carries, for each basis function `B_i`, a coefficient functional
//! `λ_i(x) = Σ_j σ_{i,j} x(ξ_{k_j})` over quasi-interpolation nodes inside
//! `supp(B_i)`. Weights solve the projector constraints `λ_i(B_j) = δ_{ij}`,
//! with interior weights forced symmetric about the support center and
//! right-end functionals mirroring the left end. Remaining freedom is closed
//! by the near-best solution, the one with the smallest weight 1-norm; nodes
//! whose weight comes out zero are dropped from the stencil.
//!
//! For even degree the boundary functionals additionally reproduce the cubic
//! monomial the way the interior ones provably do; without that extra row
//! the closure loses fourth-order superconvergence at nodes near the
//! interval ends.

use crate::bspline::{Evaluable, Spline, SplineSpace, UniformKnotGrid, MAX_DEGREE};
use crate::error::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// Quasi-interpolation nodes: knots interleaved with cell midpoints,
/// `ξ_{2i} = t_i` and `ξ_{2i-1} = s_i`, for `2n + 1` nodes in total.
#[derive(Debug, Clone)]
pub struct QiNodeSet {
    nodes: Vec<f64>,
}

impl QiNodeSet {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }
}

/// Builds the interleaved node set from the grid's stored knots and
/// midpoints, so node values match grid values bit for bit.
pub fn qi_nodes(grid: &UniformKnotGrid) -> QiNodeSet {
    let n = grid.n();
    let mut nodes = Vec::with_capacity(2 * n + 1);
    nodes.push(grid.knot(0));
    for i in 1..=n {
        nodes.push(grid.midpoints()[i - 1]);
        nodes.push(grid.knot(i));
    }
    QiNodeSet { nodes }
}

/// The shipped projector variants plus a degree-1 diagnostic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QipVariant {
    /// Degree-1 diagnostic: construction degenerates to nodal interpolation
    /// at the knots.
    Q1,
    /// Degree 2, near-best interior stencils on the support endpoints and
    /// midpoints.
    Q2,
    /// Degree 2, smallest solvable stencils (recovers the classical
    /// three-point midpoint scheme).
    Q2dB,
    /// Degree 3, near-best stencils over the whole support.
    Q3,
}

impl QipVariant {
    pub fn degree(self) -> usize {
        match self {
            QipVariant::Q1 => 1,
            QipVariant::Q2 | QipVariant::Q2dB => 2,
            QipVariant::Q3 => 3,
        }
    }

    /// Whether interior functionals grow the smallest consistent stencil
    /// (Q1, Q2dB) or offer the whole support to the near-best closure
    /// (Q2, Q3).
    fn minimal_interior(self) -> bool {
        matches!(self, QipVariant::Q1 | QipVariant::Q2dB)
    }

    /// Boundary functionals: only Q3 keeps the whole support there; the
    /// degree-2 variants and the diagnostic use the smallest stencils.
    fn minimal_boundary(self) -> bool {
        !matches!(self, QipVariant::Q3)
    }

    pub fn name(self) -> &'static str {
        match self {
            QipVariant::Q1 => "Q1",
            QipVariant::Q2 => "Q2",
            QipVariant::Q2dB => "Q2dB",
            QipVariant::Q3 => "Q3",
        }
    }
}

impl std::str::FromStr for QipVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(QipVariant::Q1),
            "q2" => Ok(QipVariant::Q2),
            "q2db" => Ok(QipVariant::Q2dB),
            "q3" => Ok(QipVariant::Q3),
            other => Err(Error::Usage(format!(
                "unknown QIP variant '{other}' (expected Q2, Q2dB or Q3)"
            ))),
        }
    }
}

/// One coefficient functional: node indices into the QI node set and the
/// matching weights, sorted by node index.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub node_indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// A fully constructed quasi-interpolating projector.
#[derive(Debug, Clone)]
pub struct QipScheme {
    space: Arc<SplineSpace>,
    node_set: QiNodeSet,
    variant: QipVariant,
    stencils: Vec<Stencil>,
}

/// Function values at all quasi-interpolation nodes.
#[derive(Debug, Clone)]
pub struct GridSamples(Vec<f64>);

impl GridSamples {
    pub fn new(values: Vec<f64>) -> Self {
        GridSamples(values)
    }

    pub fn sample<F: Fn(f64) -> f64>(nodes: &QiNodeSet, f: F) -> Self {
        GridSamples(nodes.nodes().iter().map(|&t| f(t)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Orthonormalizes the constraint rows (two-pass modified Gram-Schmidt),
/// carrying the right-hand side along. Returns the minimum 2-norm solution
/// and the orthonormal row basis, or `None` when a dependent row contradicts
/// the rest or the final residual is not negligible.
fn min_norm_solve_with_basis(rows: &[Vec<f64>], rhs: &[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = rows.first()?.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    for (row, &b) in rows.iter().zip(rhs) {
        let scale = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = row.clone();
        let mut beta = b;
        for _ in 0..2 {
            for (q, &c) in basis.iter().zip(&vals) {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
                beta -= proj * c;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-9 * scale.max(1e-30) {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            basis.push(v);
            vals.push(beta / nv);
        } else if beta.abs() > 1e-9 * (1.0 + b.abs()) {
            return None;
        }
    }
    let mut w = vec![0.0; dim];
    for (q, &c) in basis.iter().zip(&vals) {
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi += c * qi;
        }
    }
    for (row, &b) in rows.iter().zip(rhs) {
        let r: f64 = row.iter().zip(&w).map(|(a, x)| a * x).sum::<f64>() - b;
        if r.abs() > 1e-10 * (1.0 + b.abs()) {
            return None;
        }
    }
    Some((w, basis))
}

fn min_norm_solve(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    min_norm_solve_with_basis(rows, rhs).map(|(w, _)| w)
}

/// Smallest kink of `τ ↦ Σ_k |w_k + τ z_k|` attaining the minimum; the
/// function is convex piecewise linear, so scanning the kinks is exact.
fn best_kink(w: &[f64], z: &[f64]) -> f64 {
    let mut best_f: f64 = w.iter().map(|v| v.abs()).sum();
    let mut best_tau = 0.0;
    let mut kinks: Vec<f64> = w
        .iter()
        .zip(z)
        .filter(|(_, z)| z.abs() > 1e-12)
        .map(|(&wk, &zk)| -wk / zk)
        .collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &tau in &kinks {
        let f: f64 = w.iter().zip(z).map(|(wk, zk)| (wk + tau * zk).abs()).sum();
        if f < best_f - 1e-13 * (1.0 + best_f) {
            best_f = f;
            best_tau = tau;
        }
    }
    best_tau
}

/// Near-best solution of a consistent system: the solution with the smallest
/// weight 1-norm. Any remaining nullspace freedom after the constraints is
/// spent descending the 1-norm, which for the shipped schemes (at most one
/// free direction) is exact.
fn near_best_solve(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let dim = rows.first()?.len();
    let (mut w, basis) = min_norm_solve_with_basis(rows, rhs)?;
    let mut null: Vec<Vec<f64>> = Vec::new();
    for k in 0..dim {
        let mut z = vec![0.0; dim];
        z[k] = 1.0;
        for _ in 0..2 {
            for q in basis.iter().chain(&null) {
                let proj: f64 = z.iter().zip(q).map(|(a, b)| a * b).sum();
                for (zi, qi) in z.iter_mut().zip(q) {
                    *zi -= proj * qi;
                }
            }
        }
        let nz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nz > 1e-9 {
            for zi in z.iter_mut() {
                *zi /= nz;
            }
            null.push(z);
        }
    }
    if !null.is_empty() {
        for _ in 0..50 {
            let mut improved = false;
            for z in &null {
                let tau = best_kink(&w, z);
                if tau.abs() > 1e-12 {
                    for (wi, zi) in w.iter_mut().zip(z) {
                        *wi += tau * zi;
                    }
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }
    Some(w)
}

/// Values of every basis function that is nonzero at some candidate node.
struct NodeBasisTable {
    first: Vec<usize>,
    vals: Vec<f64>,
    stride: usize,
}

impl NodeBasisTable {
    fn build(space: &SplineSpace, nodes: &[f64]) -> Self {
        let d = space.degree();
        let stride = d + 1;
        let mut first = Vec::with_capacity(nodes.len());
        let mut vals = vec![0.0; nodes.len() * stride];
        let mut buf = [0.0_f64; MAX_DEGREE + 1];
        for (k, &t) in nodes.iter().enumerate() {
            let f = space.active_basis(t, &mut buf);
            first.push(f);
            vals[k * stride..k * stride + stride].copy_from_slice(&buf[..stride]);
        }
        NodeBasisTable {
            first,
            vals,
            stride,
        }
    }

    /// Value of `B_j` (1-based) at node row `k`.
    fn basis_value(&self, k: usize, j: usize) -> f64 {
        let idx = j - 1;
        let f = self.first[k];
        if idx >= f && idx < f + self.stride {
            self.vals[k * self.stride + (idx - f)]
        } else {
            0.0
        }
    }
}

/// Constructs the projector for `variant` on `space`. The space degree must
/// match the variant's, and the weight constraint system of every functional
/// must be consistent.
pub fn build_qip(space: Arc<SplineSpace>, variant: QipVariant) -> Result<QipScheme> {
    let d = space.degree();
    if d != variant.degree() {
        return Err(Error::parameter(format!(
            "variant {} needs a degree-{} space, got degree {}",
            variant.name(),
            variant.degree(),
            d
        )));
    }
    let n = space.grid().n();
    let nn = space.dim();
    let node_set = qi_nodes(space.grid());
    let table = NodeBasisTable::build(&space, node_set.nodes());

    let cubic_refs = if d % 2 == 0 {
        Some(boundary_cubic_refs(&space, &node_set, &table)?)
    } else {
        None
    };

    let half = (nn + 1) / 2;
    let mut stencils: Vec<Stencil> = Vec::with_capacity(nn);
    for i in 1..=half {
        let cubic_rhs = match &cubic_refs {
            Some(p) if i <= d => Some(p[i - 1]),
            _ => None,
        };
        stencils.push(build_functional(
            &space, &node_set, &table, i, variant, cubic_rhs,
        )?);
    }
    for i in half + 1..=nn {
        let source = &stencils[nn - i];
        stencils.push(mirror_stencil(source, 2 * n));
    }
    Ok(QipScheme {
        space,
        node_set,
        variant,
        stencils,
    })
}

/// Reference values `λ_i(t³)` for the left-boundary functionals of an
/// even-degree scheme, solved from exactness of the node-interpolating
/// reference spline at the leftmost nodes. Interior functionals take
/// `γ_i³ - (3/4) γ_i h²` automatically; these values extend that behavior to
/// the boundary.
fn boundary_cubic_refs(
    space: &SplineSpace,
    node_set: &QiNodeSet,
    table: &NodeBasisTable,
) -> Result<Vec<f64>> {
    let d = space.degree();
    let h = space.grid().mesh_width();
    let nn = space.dim();
    let interior_ref = |j: usize| {
        let g = space.greville(j);
        g * g * g - 0.75 * g * h * h
    };
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for r in 0..2 * d {
        let t = node_set.node(r);
        let mut row = vec![0.0; d];
        let mut b = t * t * t;
        for j in 1..=nn.min(r / 2 + d + 1) {
            let v = table.basis_value(r, j);
            if v == 0.0 {
                continue;
            }
            if j <= d {
                row[j - 1] = v;
            } else {
                b -= v * interior_ref(j);
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    min_norm_solve(&rows, &rhs).ok_or_else(|| Error::QipConstruction {
        functional: 0,
        detail: "boundary cubic reference system is inconsistent".into(),
    })
}

fn build_functional(
    space: &SplineSpace,
    node_set: &QiNodeSet,
    table: &NodeBasisTable,
    i: usize,
    variant: QipVariant,
    cubic_rhs: Option<f64>,
) -> Result<Stencil> {
    let d = space.degree();
    let n = space.grid().n();
    let two_n = 2 * n;
    // QI nodes inside supp(B_i) = [t_{i-d-1}, t_i], by index arithmetic.
    let lo = 2 * (i as isize - d as isize - 1);
    let lo = lo.max(0) as usize;
    let hi = (2 * i).min(two_n);
    let candidates: Vec<usize> = (lo..=hi).collect();
    let interior = i > d && i <= n;
    let minimal = if interior {
        variant.minimal_interior()
    } else {
        variant.minimal_boundary()
    };

    if !minimal {
        return solve_stencil(space, node_set, table, i, &candidates, interior, cubic_rhs)
            .ok_or_else(|| inconsistent(i));
    }

    // Smallest stencil: grow outward from the Greville abscissa, keeping
    // equidistant nodes together so interior stencils stay symmetric.
    let greville = space.greville(i);
    let mut order: Vec<usize> = candidates.clone();
    order.sort_by(|&a, &b| {
        let da = (node_set.node(a) - greville).abs();
        let db = (node_set.node(b) - greville).abs();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    let tie = 1e-9 * space.grid().mesh_width();
    let mut size = 0;
    while size < order.len() {
        let mut next = size + 1;
        let dist = (node_set.node(order[size]) - greville).abs();
        while next < order.len()
            && ((node_set.node(order[next]) - greville).abs() - dist).abs() <= tie
        {
            next += 1;
        }
        size = next;
        let mut chosen: Vec<usize> = order[..size].to_vec();
        chosen.sort_unstable();
        if let Some(st) = solve_stencil(space, node_set, table, i, &chosen, interior, cubic_rhs) {
            return Ok(st);
        }
    }
    Err(inconsistent(i))
}

fn inconsistent(i: usize) -> Error {
    Error::QipConstruction {
        functional: i,
        detail: "weight constraint system is inconsistent".into(),
    }
}

fn solve_stencil(
    space: &SplineSpace,
    node_set: &QiNodeSet,
    table: &NodeBasisTable,
    i: usize,
    stencil_nodes: &[usize],
    interior: bool,
    cubic_rhs: Option<f64>,
) -> Option<Stencil> {
    let d = space.degree();
    let nn = space.dim();
    let f = stencil_nodes.len();
    let jlo = i.saturating_sub(d).max(1);
    let jhi = (i + d).min(nn);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for j in jlo..=jhi {
        let row: Vec<f64> = stencil_nodes
            .iter()
            .map(|&k| table.basis_value(k, j))
            .collect();
        if j == i || row.iter().any(|v| v.abs() > 0.0) {
            rows.push(row);
            rhs.push(if j == i { 1.0 } else { 0.0 });
        }
    }
    if interior {
        for a in 0..f / 2 {
            let mut row = vec![0.0; f];
            row[a] = 1.0;
            row[f - 1 - a] = -1.0;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    if let Some(p) = cubic_rhs {
        let row: Vec<f64> = stencil_nodes
            .iter()
            .map(|&k| {
                let t = node_set.node(k);
                t * t * t
            })
            .collect();
        rows.push(row);
        rhs.push(p);
    }
    let weights = near_best_solve(&rows, &rhs)?;
    // Zero weights mean the node is not used; drop it.
    let mut kept_nodes = Vec::with_capacity(f);
    let mut kept_weights = Vec::with_capacity(f);
    for (&k, &w) in stencil_nodes.iter().zip(&weights) {
        if w.abs() > 1e-11 {
            kept_nodes.push(k);
            kept_weights.push(w);
        }
    }
    if kept_nodes.is_empty() {
        return None;
    }
    Some(Stencil {
        node_indices: kept_nodes,
        weights: kept_weights,
    })
}

fn mirror_stencil(source: &Stencil, two_n: usize) -> Stencil {
    let mut pairs: Vec<(usize, f64)> = source
        .node_indices
        .iter()
        .zip(&source.weights)
        .map(|(&k, &w)| (two_n - k, w))
        .collect();
    pairs.sort_by_key(|p| p.0);
    Stencil {
        node_indices: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

impl QipScheme {
    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn node_set(&self) -> &QiNodeSet {
        &self.node_set
    }

    pub fn variant(&self) -> QipVariant {
        self.variant
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.stencils
    }

    /// Stencil of functional `λ_i` (1-based).
    pub fn stencil(&self, i: usize) -> &Stencil {
        &self.stencils[i - 1]
    }

    /// Applies `λ_i` to a function given its values at all QI nodes.
    pub fn functional(&self, i: usize, node_values: &[f64]) -> f64 {
        let st = &self.stencils[i - 1];
        st.node_indices
            .iter()
            .zip(&st.weights)
            .map(|(&k, &w)| w * node_values[k])
            .sum()
    }

    /// All coefficients `λ_1(x), ..., λ_N(x)` from node values of `x`.
    pub fn coefficients_from_node_values(&self, node_values: &[f64]) -> Vec<f64> {
        (1..=self.space.dim())
            .map(|i| self.functional(i, node_values))
            .collect()
    }

    /// Test hook: adds `delta` to the `entry`-th weight of functional `i`.
    pub fn perturb_weight(&mut self, i: usize, entry: usize, delta: f64) {
        self.stencils[i - 1].weights[entry] += delta;
    }
}

/// Projects node samples onto the spline space: coefficient `i` is
/// `Σ_j σ_{i,j} samples[k_j]`.
pub fn apply_qip(scheme: &QipScheme, samples: &GridSamples) -> Result<Spline> {
    if samples.values().len() != scheme.node_set.len() {
        return Err(Error::parameter(format!(
            "expected {} node samples, got {}",
            scheme.node_set.len(),
            samples.values().len()
        )));
    }
    let coeffs = scheme.coefficients_from_node_values(samples.values());
    Spline::new(scheme.space.clone(), coeffs)
}

/// Projects an arbitrary function by sampling it at the QI nodes first.
pub fn project(scheme: &QipScheme, f: &dyn Evaluable) -> Spline {
    let samples = GridSamples::sample(&scheme.node_set, |t| f.eval(t));
    apply_qip(scheme, &samples).expect("sample length matches by construction")
}

/// Deviation from the projector property: `max_{i,j} |λ_i(B_j) - δ_{ij}|`.
pub fn projector_defect(scheme: &QipScheme) -> f64 {
    let nn = scheme.space.dim();
    let d = scheme.space.degree();
    let table = NodeBasisTable::build(&scheme.space, scheme.node_set.nodes());
    let mut worst: f64 = 0.0;
    let mut row = vec![0.0_f64; nn];
    let mut seen = vec![false; nn];
    let mut touched: Vec<usize> = Vec::new();
    for (i0, st) in scheme.stencils.iter().enumerate() {
        for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
            let first = table.first[k];
            for r in 0..=d {
                let idx = first + r;
                if !seen[idx] {
                    seen[idx] = true;
                    touched.push(idx);
                }
                row[idx] += w * table.vals[k * table.stride + r];
            }
        }
        let mut saw_diag = false;
        for &idx in &touched {
            let target = if idx == i0 {
                saw_diag = true;
                1.0
            } else {
                0.0
            };
            worst = worst.max((row[idx] - target).abs());
            row[idx] = 0.0;
            seen[idx] = false;
        }
        if !saw_diag {
            worst = worst.max(1.0);
        }
        touched.clear();
    }
    worst
}

/// Sampling estimate of the sup norm of the projector: the maximum over 1000
/// points of the Lebesgue function `Σ_k |Σ_i σ_{i,k} B_i(t)|`.
pub fn norm_estimate(scheme: &QipScheme) -> f64 {
    let d = scheme.space.degree();
    let num_nodes = scheme.node_set.len();
    let mut acc = vec![0.0_f64; num_nodes];
    let mut seen = vec![false; num_nodes];
    let mut touched: Vec<usize> = Vec::new();
    let mut buf = [0.0_f64; MAX_DEGREE + 1];
    let samples = 1000;
    let mut best: f64 = 0.0;
    for s in 0..samples {
        let t = s as f64 / (samples - 1) as f64;
        let first = scheme.space.active_basis(t, &mut buf);
        for r in 0..=d {
            let i = first + r + 1;
            let bv = buf[r];
            if bv == 0.0 {
                continue;
            }
            let st = &scheme.stencils[i - 1];
            for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
                if !seen[k] {
                    seen[k] = true;
                    touched.push(k);
                }
                acc[k] += bv * w;
            }
        }
        let mut lebesgue = 0.0;
        for &k in &touched {
            lebesgue += acc[k].abs();
            acc[k] = 0.0;
            seen[k] = false;
        }
        touched.clear();
        best = best.max(lebesgue);
    }
    best
}

/// Debug dump of all stencils as CSV rows `(i, node_index, xi_value, sigma)`.
pub fn write_stencils_csv<W: Write>(scheme: &QipScheme, out: &mut W) -> Result<()> {
    writeln!(out, "i,node_index,xi_value,sigma")?;
    for (i0, st) in scheme.stencils.iter().enumerate() {
        for (&k, &w) in st.node_indices.iter().zip(&st.weights) {
            writeln!(out, "{},{},{},{}", i0 + 1, k, scheme.node_set.node(k), w)?;
        }
    }
    Ok(())
}
