//! Gauss-Legendre rules and composite integration on knot-aligned meshes.
//!
//! Every integral in the solvers runs through [`composite_integrate`] (or the
//! equivalent inlined loops) with breakpoints aligned to the spline knot mesh,
//! so piecewise-polynomial integrands are seen as smooth on each cell.

use crate::error::{Error, Result};

/// An `m`-point Gauss-Legendre rule on the reference interval (-1, 1).
#[derive(Debug, Clone)]
pub struct GaussRule {
    m: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Nodes in (-1, 1), symmetric about 0, in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights summing to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Legendre polynomial `P_m` and its derivative at `x` by the three-term
/// recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Computes the `m`-point Gauss-Legendre rule, `1 ≤ m ≤ 64`.
///
/// Roots of `P_m` are found by Newton iteration from the arccosine asymptotic
/// initial guess, to a residual of 1e-15; nodes and weights are mirrored so
/// the rule is exactly symmetric.
pub fn gauss_rule(m: usize) -> Result<GaussRule> {
    if m == 0 || m > 64 {
        return Err(Error::parameter(format!(
            "Gauss point count must be in 1..=64, got {m}"
        )));
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m / 2;
    for k in 0..half {
        // k-th root in (0, 1), counted from the right.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (p, dp) = legendre_with_derivative(m, x);
        debug_assert!(p.abs() <= 1e-13);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - k] = x;
        nodes[k] = -x;
        weights[m - 1 - k] = w;
        weights[k] = w;
    }
    if m % 2 == 1 {
        let (_, dp) = legendre_with_derivative(m, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    Ok(GaussRule { m, nodes, weights })
}

/// Integrates `f` over the partition cells `[b_0, b_1], ..., [b_{k-1}, b_k]`
/// by the affinely mapped rule, cell by cell in ascending order.
pub fn composite_integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    rule: &GaussRule,
) -> Result<f64> {
    if breakpoints.len() < 2 {
        return Err(Error::parameter(
            "composite integration needs at least two breakpoints",
        ));
    }
    for w in breakpoints.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::parameter(format!(
                "breakpoints must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let mut total = 0.0;
    for cell in breakpoints.windows(2) {
        let mid = 0.5 * (cell[0] + cell[1]);
        let rad = 0.5 * (cell[1] - cell[0]);
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(mid + rad * x);
        }
        total += rad * acc;
    }
    Ok(total)
}
