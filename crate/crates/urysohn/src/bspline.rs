//! Uniform B-spline spaces of degree `d` and smoothness `C^{d-1}` on [0, 1].
//!
//! The space is spanned by `N = n + d` B-splines `B_1, ..., B_N` over the
//! uniform knot grid `t_i = i/n`, extended with `d+1`-fold knots at both
//! interval ends. `B_i` is supported on `[t_{i-d-1}, t_i]` (clipped to the
//! interval). Evaluation uses the right-continuous convention at interior
//! knots; at `t = 1` the left limit is taken, so `B_N(1) = 1`.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Largest supported spline degree. Evaluation scratch buffers live on the
/// stack with this bound.
pub const MAX_DEGREE: usize = 15;

/// The uniform mesh `t_i = i/n` together with the cell midpoints.
#[derive(Debug, Clone)]
pub struct UniformKnotGrid {
    n: usize,
    h: f64,
    knots: Vec<f64>,
    midpoints: Vec<f64>,
}

impl UniformKnotGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("subinterval count n must be positive"));
        }
        let nf = n as f64;
        let knots: Vec<f64> = (0..=n).map(|i| i as f64 / nf).collect();
        let midpoints: Vec<f64> = (1..=n).map(|i| 0.5 * (knots[i - 1] + knots[i])).collect();
        Ok(Self {
            n,
            h: 1.0 / nf,
            knots,
            midpoints,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width `h = 1/n`.
    pub fn mesh_width(&self) -> f64 {
        self.h
    }

    /// Knots `t_0, ..., t_n`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Midpoints `s_1, ..., s_n` (index shifted down by one).
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    /// Index of the mesh cell `[t_c, t_{c+1})` containing `t`; `t = 1` maps
    /// to the last cell. The result is exact against the stored knot values.
    pub fn cell_of(&self, t: f64) -> usize {
        let mut c = ((t * self.n as f64).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        while c + 1 < self.n && t >= self.knots[c + 1] {
            c += 1;
        }
        while c > 0 && t < self.knots[c] {
            c -= 1;
        }
        c
    }
}

/// The spline space `S_d^{d-1}` on a uniform grid, with its extended knots.
#[derive(Debug, Clone)]
pub struct SplineSpace {
    degree: usize,
    grid: UniformKnotGrid,
    dim: usize,
    ext_knots: Vec<f64>,
}

/// Builds the space of splines of degree `d ≥ 1` on `n ≥ d + 1` subintervals.
pub fn build_space(degree: usize, n: usize) -> Result<SplineSpace> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::parameter(format!(
            "degree must be in 1..={MAX_DEGREE}, got {degree}"
        )));
    }
    if n < degree + 1 {
        return Err(Error::parameter(format!(
            "need n ≥ d + 1 subintervals, got n = {n} for degree {degree}"
        )));
    }
    let grid = UniformKnotGrid::new(n)?;
    // d+1-fold end knots, simple interior knots: n + 2d + 1 entries.
    let mut ext_knots = Vec::with_capacity(n + 2 * degree + 1);
    ext_knots.extend(std::iter::repeat_n(0.0, degree));
    ext_knots.extend_from_slice(grid.knots());
    ext_knots.extend(std::iter::repeat_n(1.0, degree));
    Ok(SplineSpace {
        degree,
        grid,
        dim: n + degree,
        ext_knots,
    })
}

impl SplineSpace {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &UniformKnotGrid {
        &self.grid
    }

    /// Dimension `N = n + d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extended_knots(&self) -> &[f64] {
        &self.ext_knots
    }

    /// Support of `B_i` (1-based), clipped to [0, 1].
    pub fn support(&self, i: usize) -> (f64, f64) {
        let d = self.degree;
        (
            self.ext_knots[i - 1].max(0.0),
            self.ext_knots[i + d].min(1.0),
        )
    }

    /// Greville abscissa of `B_i` (1-based): the mean of its `d` inner knots.
    pub fn greville(&self, i: usize) -> f64 {
        let d = self.degree;
        self.ext_knots[i..i + d].iter().sum::<f64>() / d as f64
    }

    /// Evaluates the `d + 1` basis functions that are nonzero on the cell
    /// containing `t`, writing them into `vals[0..=d]`. Returns the 0-based
    /// coefficient index of the first one, so `vals[r]` is the value of
    /// `B_{first + r + 1}`.
    pub(crate) fn active_basis(&self, t: f64, vals: &mut [f64]) -> usize {
        let d = self.degree;
        let cell = self.grid.cell_of(t);
        let k = cell + d;
        let ext = &self.ext_knots;
        let mut left = [0.0_f64; MAX_DEGREE + 1];
        let mut right = [0.0_f64; MAX_DEGREE + 1];
        vals[0] = 1.0;
        for j in 1..=d {
            left[j] = t - ext[k + 1 - j];
            right[j] = ext[k + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        cell
    }
}

/// Value of the basis function `B_i` (1-based, `1 ≤ i ≤ N`) at `t`.
pub fn eval_basis(space: &SplineSpace, i: usize, t: f64) -> Result<f64> {
    if i == 0 || i > space.dim {
        return Err(Error::parameter(format!(
            "basis index {i} out of range 1..={}",
            space.dim
        )));
    }
    check_domain(t)?;
    let mut vals = [0.0_f64; MAX_DEGREE + 1];
    let first = space.active_basis(t, &mut vals);
    let idx = i - 1;
    if idx >= first && idx <= first + space.degree {
        Ok(vals[idx - first])
    } else {
        Ok(0.0)
    }
}

fn check_domain(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::parameter(format!("point {t} outside [0, 1]")));
    }
    Ok(())
}

/// A spline as a coefficient vector over the basis of its space.
#[derive(Debug, Clone)]
pub struct Spline {
    space: Arc<SplineSpace>,
    coefficients: Vec<f64>,
}

impl Spline {
    pub fn new(space: Arc<SplineSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dim() {
            return Err(Error::parameter(format!(
                "coefficient length {} does not match space dimension {}",
                coefficients.len(),
                space.dim()
            )));
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        let d = self.space.degree();
        let mut vals = [0.0_f64; MAX_DEGREE + 1];
        let first = self.space.active_basis(t, &mut vals);
        let mut acc = 0.0;
        for r in 0..=d {
            acc += self.coefficients[first + r] * vals[r];
        }
        acc
    }
}

/// Value of the spline at `t ∈ [0, 1]`, accumulated over the `d + 1` active
/// basis functions.
pub fn eval_spline(s: &Spline, t: f64) -> Result<f64> {
    check_domain(t)?;
    Ok(s.eval_unchecked(t))
}

/// Anything that can be evaluated pointwise on [0, 1]: splines, analytic
/// functions, or composites built by the solver.
pub trait Evaluable {
    fn eval(&self, t: f64) -> f64;
}

impl Evaluable for Spline {
    fn eval(&self, t: f64) -> f64 {
        self.eval_unchecked(t)
    }
}

impl<F: Fn(f64) -> f64> Evaluable for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions_match_n_plus_d() {
        let space = build_space(2, 40).unwrap();
        assert_eq!(space.dim(), 42);
        let space = build_space(1, 4).unwrap();
        assert_eq!(space.dim(), 5);
    }

    #[test]
    fn extended_knot_count() {
        // n + 2d + 1 entries, d+1-fold ends, simple interior knots.
        let space = build_space(3, 8).unwrap();
        assert_eq!(space.extended_knots().len(), 8 + 2 * 3 + 1);
        assert_eq!(&space.extended_knots()[..4], &[0.0; 4]);
        assert_eq!(&space.extended_knots()[11..], &[1.0; 4]);
        let interior = &space.extended_knots()[4..11];
        for w in interior.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_space(0, 10).is_err());
        assert!(build_space(2, 2).is_err());
        assert!(build_space(3, 3).is_err());
    }

    #[test]
    fn quadratic_interior_basis_center_value() {
        // Cardinal quadratic B-spline takes the value 3/4 at the center of
        // its support.
        let space = build_space(2, 8).unwrap();
        let i = 5;
        let (lo, hi) = space.support(i);
        let center = 0.5 * (lo + hi);
        assert_abs_diff_eq!(
            eval_basis(&space, i, center).unwrap(),
            0.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(d, n) in &[(1usize, 5usize), (2, 16), (3, 11)] {
            let space = build_space(d, n).unwrap();
            for _ in 0..100 {
                let t: f64 = rng.random();
                let sum: f64 = (1..=space.dim())
                    .map(|i| eval_basis(&space, i, t).unwrap())
                    .sum();
                assert!((sum - 1.0).abs() <= 1e-14, "sum {sum} at t = {t}");
            }
        }
    }

    #[test]
    fn basis_vanishes_outside_support() {
        let space = build_space(2, 10).unwrap();
        for i in 1..=space.dim() {
            let (lo, hi) = space.support(i);
            for k in 0..200 {
                let t = k as f64 / 199.0;
                if t < lo || t > hi {
                    assert_eq!(eval_basis(&space, i, t).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn basis_nonnegative() {
        for &(d, n) in &[(2usize, 12usize), (3, 9)] {
            let space = build_space(d, n).unwrap();
            for i in 1..=space.dim() {
                for k in 0..=300 {
                    let t = k as f64 / 300.0;
                    assert!(eval_basis(&space, i, t).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn endpoint_values() {
        let space = build_space(2, 6).unwrap();
        assert_eq!(eval_basis(&space, 1, 0.0).unwrap(), 1.0);
        assert_eq!(eval_basis(&space, 2, 0.0).unwrap(), 0.0);
        // Left limit at t = 1, so the last basis function is 1 there.
        assert_eq!(eval_basis(&space, space.dim(), 1.0).unwrap(), 1.0);
        assert_eq!(eval_basis(&space, space.dim() - 1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn index_and_domain_errors() {
        let space = build_space(2, 6).unwrap();
        assert!(eval_basis(&space, 0, 0.5).is_err());
        assert!(eval_basis(&space, space.dim() + 1, 0.5).is_err());
        assert!(eval_basis(&space, 1, -0.1).is_err());
        assert!(eval_basis(&space, 1, 1.1).is_err());
    }

    #[test]
    fn constant_spline_is_one_everywhere() {
        let space = Arc::new(build_space(2, 9).unwrap());
        let s = Spline::new(space.clone(), vec![1.0; space.dim()]).unwrap();
        for k in 0..=500 {
            let t = k as f64 / 500.0;
            assert_abs_diff_eq!(eval_spline(&s, t).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_spline_reproduces_identity() {
        // For d = 1 the Greville abscissae are the knots, so coefficients
        // t_{i-1} give the piecewise-linear interpolant of t ↦ t.
        let space = Arc::new(build_space(1, 4).unwrap());
        let coeffs: Vec<f64> = (1..=space.dim()).map(|i| space.greville(i)).collect();
        let s = Spline::new(space, coeffs).unwrap();
        assert_abs_diff_eq!(eval_spline(&s, 0.3).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn spline_matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let space = Arc::new(build_space(3, 8).unwrap());
        let coeffs: Vec<f64> = (0..space.dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let s = Spline::new(space.clone(), coeffs.clone()).unwrap();
        for _ in 0..200 {
            let t: f64 = rng.random();
            let brute: f64 = (1..=space.dim())
                .map(|j| coeffs[j - 1] * eval_basis(&space, j, t).unwrap())
                .sum();
            assert_abs_diff_eq!(eval_spline(&s, t).unwrap(), brute, epsilon = 1e-13);
        }
    }

    #[test]
    fn coefficient_length_is_checked() {
        let space = Arc::new(build_space(2, 6).unwrap());
        assert!(Spline::new(space, vec![0.0; 3]).is_err());
    }

    #[test]
    fn first_divided_differences_continuous_across_knots() {
        // C^{d-1} sanity for d = 2: one-sided difference quotients agree to
        // O(h) scale across interior knots.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = Arc::new(build_space(2, 16).unwrap());
        let coeffs: Vec<f64> = (0..space.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let s = Spline::new(space.clone(), coeffs).unwrap();
        let delta = 1e-6;
        for i in 1..space.grid().n() {
            let t = space.grid().knot(i);
            let right = (s.eval(t + delta) - s.eval(t)) / delta;
            let left = (s.eval(t) - s.eval(t - delta)) / delta;
            // Slopes of a C^1 function differ by about |s''| * delta here.
            assert!(
                (right - left).abs() <= 1e-2,
                "kink at knot {i}: {right} vs {left}"
            );
        }
    }

    #[test]
    fn closures_are_evaluable() {
        let f = |t: f64| t * t;
        assert_eq!(Evaluable::eval(&f, 0.5), 0.25);
    }
}
