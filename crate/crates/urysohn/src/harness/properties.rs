//! Executable form of the crate's numerical invariants: projector defects,
//! approximation orders, superconvergence rates, operator identities, and
//! solver fixed-point checks, each at its documented tolerance.

use crate::bspline::{build_space, eval_basis, Evaluable, Spline, UniformKnotGrid};
use crate::error::Result;
use crate::harness::report::ReportFormat;
use crate::harness::study::{run_study, SeedChoice, StudySpec};
use crate::operator::{apply_k, apply_kprime, kprime_on_basis};
use crate::problems::{make_test1, make_test2, test2_integral};
use crate::quadrature::{composite_integrate, gauss_rule};
use crate::quasi_interp::{
    build_qip, norm_estimate, project, projector_defect, QipScheme, QipVariant,
};
use crate::solver::{solve_collocation, solve_highorder, Method, NewtonConfig, SeedPolicy};
use std::sync::Arc;

/// Suite size: `Quick` keeps every mesh at n ≤ 64, `Full` goes up to n = 320
/// and additionally reports the measured projector order tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(crate::error::Error::Usage(format!(
                "unknown level '{other}' (expected quick or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn scheme_for(variant: QipVariant, n: usize) -> Arc<QipScheme> {
    let space = Arc::new(build_space(variant.degree(), n).expect("valid space"));
    Arc::new(build_qip(space, variant).expect("scheme builds"))
}

fn orders_of(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Empirical orders `log2(|v_{k-1}| / |v_k|)` across mesh doublings of a
/// signed sequence, skipping the pairs adjacent to a sign change: near a zero
/// crossing the magnitudes say nothing about the decay rate.
pub fn sign_aware_orders(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..values.len() {
        let crossed = values[k].signum() != values[k - 1].signum();
        let prev_crossed = k >= 2 && values[k - 1].signum() != values[k - 2].signum();
        if crossed || prev_crossed {
            continue;
        }
        out.push((values[k - 1].abs() / values[k].abs()).log2());
    }
    out
}

fn fmt_orders(orders: &[f64]) -> String {
    orders
        .iter()
        .map(|o| format!("{o:.2}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Largest deviation of the basis sum from 1 over a dense grid.
fn check_partition_of_unity() -> CheckResult {
    let mut worst: f64 = 0.0;
    for &(d, n) in &[(1usize, 9usize), (2, 16), (3, 16)] {
        let space = build_space(d, n).unwrap();
        for k in 0..=2000 {
            let t = k as f64 / 2000.0;
            let sum: f64 = (1..=space.dim())
                .map(|i| eval_basis(&space, i, t).unwrap())
                .sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    CheckResult::new(
        "bspline/partition-of-unity",
        worst <= 1e-14,
        format!("max |sum - 1| = {worst:.3e} (tol 1e-14)"),
    )
}

fn check_basis_positivity_and_support() -> CheckResult {
    let mut ok = true;
    let mut detail = String::from("nonnegative and locally supported");
    'outer: for &(d, n) in &[(2usize, 12usize), (3, 10)] {
        let space = build_space(d, n).unwrap();
        for i in 1..=space.dim() {
            let (lo, hi) = space.support(i);
            for k in 0..=500 {
                let t = k as f64 / 500.0;
                let v = eval_basis(&space, i, t).unwrap();
                if v < 0.0 || ((t < lo || t > hi) && v != 0.0) {
                    ok = false;
                    detail = format!("violation for d={d}, i={i}, t={t}: {v}");
                    break 'outer;
                }
            }
        }
    }
    CheckResult::new("bspline/support", ok, detail)
}

fn check_smoothness() -> CheckResult {
    let space = Arc::new(build_space(2, 16).unwrap());
    let coeffs: Vec<f64> = (0..space.dim())
        .map(|k| ((k * 7919) % 13) as f64 / 13.0)
        .collect();
    let s = Spline::new(space.clone(), coeffs).unwrap();
    let delta = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 1..space.grid().n() {
        let t = space.grid().knot(i);
        let right = (s.eval(t + delta) - s.eval(t)) / delta;
        let left = (s.eval(t) - s.eval(t - delta)) / delta;
        worst = worst.max((right - left).abs());
    }
    CheckResult::new(
        "bspline/c1-continuity",
        worst <= 1e-2,
        format!("max slope jump {worst:.3e} (tol 1e-2)"),
    )
}

fn check_quadrature_exactness() -> CheckResult {
    let mut worst: f64 = 0.0;
    for m in [2usize, 5, 20] {
        let rule = gauss_rule(m).unwrap();
        for deg in 0..=(2 * m - 1) {
            let got: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
        }
    }
    CheckResult::new(
        "quadrature/exactness",
        worst <= 1e-13,
        format!("max relative defect {worst:.3e} (tol 1e-13)"),
    )
}

fn check_quadrature_additivity() -> CheckResult {
    let rule = gauss_rule(20).unwrap();
    let f = |t: f64| (4.0 * t).exp() * (9.0 * t).cos();
    let whole = composite_integrate(&f, &[0.0, 1.0], &rule).unwrap();
    let split = composite_integrate(&f, &[0.0, 0.31, 1.0], &rule).unwrap();
    let diff = (whole - split).abs();
    CheckResult::new(
        "quadrature/additivity",
        diff <= 1e-14 * whole.abs().max(1.0),
        format!("split difference {diff:.3e}"),
    )
}

fn check_projector_defects(level: Level) -> CheckResult {
    let ns: &[usize] = match level {
        Level::Quick => &[16, 64],
        Level::Full => &[16, 64, 256],
    };
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for variant in [QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3] {
        for &n in ns {
            let defect = projector_defect(&scheme_for(variant, n));
            if defect > worst {
                worst = defect;
                where_ = format!("{} n={n}", variant.name());
            }
        }
    }
    CheckResult::new(
        "qip/projector-defect",
        worst <= 1e-12,
        format!("max defect {worst:.3e} at {where_} (tol 1e-12)"),
    )
}

fn check_spline_reproduction() -> CheckResult {
    let mut worst_rel: f64 = 0.0;
    for variant in [QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3] {
        let scheme = scheme_for(variant, 16);
        let dim = scheme.space().dim();
        for trial in 0..20 {
            let coeffs: Vec<f64> = (0..dim)
                .map(|k| (((k + 1) * (trial + 3) * 2654435761) % 1000) as f64 / 500.0 - 1.0)
                .collect();
            let s = Spline::new(scheme.space().clone(), coeffs.clone()).unwrap();
            let sup = coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
            let p = project(&scheme, &s);
            for k in 0..500 {
                let t = k as f64 / 499.0;
                let diff = (s.eval(t) - p.eval(t)).abs() / (1.0 + sup);
                worst_rel = worst_rel.max(diff);
            }
        }
    }
    CheckResult::new(
        "qip/spline-reproduction",
        worst_rel <= 1e-11,
        format!("max scaled error {worst_rel:.3e} (tol 1e-11)"),
    )
}

fn projection_sup_error(scheme: &QipScheme, f: &dyn Evaluable) -> f64 {
    let p = project(scheme, f);
    (0..=3000)
        .map(|k| {
            let t = k as f64 / 3000.0;
            (p.eval(t) - f.eval(t)).abs()
        })
        .fold(0.0, f64::max)
}

fn check_approximation_order(level: Level) -> CheckResult {
    let ns: Vec<usize> = match level {
        Level::Quick => vec![16, 32, 64],
        Level::Full => vec![32, 64, 128, 256],
    };
    let mut ok = true;
    let mut details = Vec::new();
    for variant in [QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3] {
        let gate = variant.degree() as f64 + 0.7;
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| projection_sup_error(&scheme_for(variant, n), &|t: f64| t.exp()))
            .collect();
        let orders = orders_of(&errs);
        let fine = &orders[orders.len().saturating_sub(2)..];
        if fine.iter().any(|&o| o < gate) {
            ok = false;
        }
        details.push(format!(
            "{}: [{}] gate {gate}",
            variant.name(),
            fmt_orders(&orders)
        ));
    }
    CheckResult::new("qip/approximation-order", ok, details.join("; "))
}

fn check_integral_superconvergence(level: Level) -> CheckResult {
    let ns: Vec<usize> = match level {
        Level::Quick => vec![16, 32, 64],
        Level::Full => vec![32, 64, 128, 256],
    };
    let rule = gauss_rule(20).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for variant in [QipVariant::Q2, QipVariant::Q2dB] {
        // Signed values: the near-best variant's integral crosses zero around
        // n = 40, so rate estimates must skip the crossing.
        let values: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let scheme = scheme_for(variant, n);
                let p = project(&scheme, &|t: f64| t.exp());
                let bp = scheme.space().grid().knots().to_vec();
                composite_integrate(|t| t.exp() * (p.eval(t) - t.exp()), &bp, &rule).unwrap()
            })
            .collect();
        let orders = sign_aware_orders(&values);
        let gate = variant.degree() as f64 + 1.7;
        let fine = &orders[orders.len().saturating_sub(2)..];
        if fine.is_empty() || fine.iter().any(|&o| o < gate) {
            ok = false;
        }
        details.push(format!(
            "{}: [{}] gate {gate}",
            variant.name(),
            fmt_orders(&orders)
        ));
    }
    CheckResult::new("qip/integral-superconvergence", ok, details.join("; "))
}

fn check_node_superconvergence(level: Level) -> CheckResult {
    let ns: Vec<usize> = match level {
        Level::Quick => vec![16, 32, 64],
        Level::Full => vec![32, 64, 128, 256],
    };
    let mut ok = true;
    let mut details = Vec::new();
    for variant in [QipVariant::Q2, QipVariant::Q2dB] {
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let scheme = scheme_for(variant, n);
                let p = project(&scheme, &|t: f64| t.exp());
                scheme
                    .node_set()
                    .nodes()
                    .iter()
                    .map(|&xi| (p.eval(xi) - xi.exp()).abs())
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        let orders = orders_of(&errs);
        let fine = &orders[orders.len().saturating_sub(2)..];
        if fine.iter().any(|&o| o < 3.7) {
            ok = false;
        }
        details.push(format!(
            "{}: [{}] gate 3.7",
            variant.name(),
            fmt_orders(&orders)
        ));
    }
    CheckResult::new("qip/node-superconvergence", ok, details.join("; "))
}

fn check_symmetry() -> CheckResult {
    let mut ok = true;
    let mut detail = String::from("interior palindromic, ends mirrored");
    for variant in [QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3] {
        let scheme = scheme_for(variant, 14);
        let d = scheme.space().degree();
        let n = scheme.space().grid().n();
        let nn = scheme.space().dim();
        for i in d + 1..=n {
            let w = &scheme.stencil(i).weights;
            for a in 0..w.len() / 2 {
                if (w[a] - w[w.len() - 1 - a]).abs() > 1e-12 {
                    ok = false;
                    detail = format!("{} interior functional {i} asymmetric", variant.name());
                }
            }
        }
        for i in 1..=d {
            let left = scheme.stencil(i);
            let right = scheme.stencil(nn + 1 - i);
            if left.node_indices.len() != right.node_indices.len() {
                ok = false;
                detail = format!("{} boundary {i} does not mirror", variant.name());
                continue;
            }
            for (a, (&kl, &wl)) in left.node_indices.iter().zip(&left.weights).enumerate() {
                let b = right.node_indices.len() - 1 - a;
                if right.node_indices[b] != 2 * n - kl || (right.weights[b] - wl).abs() > 1e-13 {
                    ok = false;
                    detail = format!("{} boundary {i} does not mirror", variant.name());
                }
            }
        }
    }
    CheckResult::new("qip/symmetry", ok, detail)
}

fn check_norm_boundedness() -> CheckResult {
    let estimates: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&n| norm_estimate(&scheme_for(QipVariant::Q2, n)))
        .collect();
    let lo = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().cloned().fold(0.0_f64, f64::max);
    let ok = lo >= 1.0 - 1e-12 && (hi - lo) <= 0.1 * lo;
    CheckResult::new(
        "qip/norm-boundedness",
        ok,
        format!("estimates in [{lo:.4}, {hi:.4}]"),
    )
}

fn check_operator_linearity() -> CheckResult {
    let problem = make_test2(1.0).unwrap();
    let grid = UniformKnotGrid::new(12).unwrap();
    let rule = gauss_rule(20).unwrap();
    let x = |t: f64| 1.0 / (t + 1.0);
    let h1 = |t: f64| (2.0 * t).sin();
    let h2 = |t: f64| t * t - 0.3;
    let combo = |t: f64| 1.7 * h1(t) - 0.4 * h2(t);
    let mut worst: f64 = 0.0;
    for s in [0.0, 0.37, 0.72, 1.0] {
        let lhs = apply_kprime(&problem, &x, &combo, s, &rule, &grid).unwrap();
        let rhs = 1.7 * apply_kprime(&problem, &x, &h1, s, &rule, &grid).unwrap()
            - 0.4 * apply_kprime(&problem, &x, &h2, s, &rule, &grid).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    CheckResult::new(
        "operator/linearity",
        worst <= 1e-13,
        format!("max deviation {worst:.3e} (tol 1e-13)"),
    )
}

fn check_frechet_remainder() -> CheckResult {
    let problem = make_test2(1.0).unwrap();
    let grid = UniformKnotGrid::new(16).unwrap();
    let rule = gauss_rule(20).unwrap();
    let x = |t: f64| 1.0 / (t + 1.0);
    let h = |t: f64| (3.0 * t).cos();
    let s = 0.25;
    let remainder = |eps: f64| {
        let shifted = |t: f64| x(t) + eps * h(t);
        let k1 = apply_k(&problem, &shifted, s, &rule, &grid).unwrap();
        let k0 = apply_k(&problem, &x, s, &rule, &grid).unwrap();
        let dk = apply_kprime(&problem, &x, &h, s, &rule, &grid).unwrap();
        (k1 - k0 - eps * dk).abs()
    };
    let ratio = remainder(1e-3) / remainder(1e-4);
    let ok = (100.0 / 3.0..=300.0).contains(&ratio);
    CheckResult::new(
        "operator/frechet-remainder",
        ok,
        format!("remainder ratio {ratio:.1} (expected ~100 within x3)"),
    )
}

fn check_support_restriction() -> CheckResult {
    let problem = make_test1();
    let space = build_space(2, 10).unwrap();
    let rule = gauss_rule(20).unwrap();
    let x = |t: f64| 0.3 + 0.2 * (5.0 * t).sin();
    let mut worst: f64 = 0.0;
    for j in [1, 4, 7, space.dim()] {
        for s in [0.0, 0.5, 1.0] {
            let restricted = kprime_on_basis(&problem, &x, &space, j, s, &rule).unwrap();
            let basis = |t: f64| eval_basis(&space, j, t).unwrap();
            let full = apply_kprime(&problem, &x, &basis, s, &rule, space.grid()).unwrap();
            worst = worst.max((restricted - full).abs());
        }
    }
    CheckResult::new(
        "operator/support-restriction",
        worst <= 1e-13,
        format!("max difference {worst:.3e}"),
    )
}

fn check_problem_self_consistency() -> CheckResult {
    let grid = UniformKnotGrid::new(64).unwrap();
    let rule = gauss_rule(20).unwrap();
    let mut worst: f64 = 0.0;
    for problem in [
        make_test1(),
        make_test2(1.0).unwrap(),
        make_test2(0.1).unwrap(),
    ] {
        let r = problem.self_consistency_residual(&grid, &rule, 20).unwrap();
        worst = worst.max(r);
    }
    CheckResult::new(
        "problems/self-consistency",
        worst <= 1e-10,
        format!("max residual {worst:.3e} (tol 1e-10)"),
    )
}

fn check_problem_derivatives() -> CheckResult {
    let eps = 1e-7;
    let mut worst: f64 = 0.0;
    for problem in [make_test1(), make_test2(1.0).unwrap()] {
        for k in 0..40 {
            let s = (k % 7) as f64 / 6.0;
            let t = (k % 11) as f64 / 10.0;
            let u = 0.4 + 0.02 * k as f64;
            let fd = (problem.kernel(s, t, u + eps) - problem.kernel(s, t, u)) / eps;
            let an = problem.kernel_du(s, t, u);
            worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
        }
    }
    CheckResult::new(
        "problems/derivative-consistency",
        worst <= 1e-5,
        format!("max scaled FD deviation {worst:.3e}"),
    )
}

fn check_closed_form_rhs() -> CheckResult {
    let rule = gauss_rule(20).unwrap();
    let bp: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
    let mut worst: f64 = 0.0;
    for c in [0.1, 1.0] {
        for s in [0.0, 0.5, 1.0] {
            let numeric =
                composite_integrate(|t| (t + c) / ((t + c) * (t + s) + 1.0), &bp, &rule).unwrap();
            worst = worst.max((numeric - test2_integral(s, c)).abs());
        }
    }
    CheckResult::new(
        "problems/closed-form-rhs",
        worst <= 1e-13,
        format!("max |closed form - quadrature| = {worst:.3e}"),
    )
}

fn check_dense_solve_residual() -> CheckResult {
    use crate::solver::linalg::{dense_solve, Matrix};
    // Deterministic diagonally dominant test matrix.
    let n = 50;
    let mut m = Matrix::zeros(n, n);
    let mut state: u64 = 0x243F6A8885A308D3;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { n as f64 } else { 0.0 };
            m.set(i, j, next() + diag);
        }
    }
    let b: Vec<f64> = (0..n).map(|_| next()).collect();
    let worst = match dense_solve(&m, &b) {
        Ok(x) => {
            let r = m.matvec(&x);
            r.iter()
                .zip(&b)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
        }
        Err(_) => f64::INFINITY,
    };
    CheckResult::new(
        "solver/dense-solve",
        worst <= 1e-11,
        format!("max residual {worst:.3e} (tol 1e-11)"),
    )
}

fn check_solver_fixed_points() -> CheckResult {
    let problem = Arc::new(make_test2(1.0).unwrap());
    let scheme = scheme_for(QipVariant::Q2, 16);
    let rule = gauss_rule(20).unwrap();
    let cfg = NewtonConfig::default();
    let coll = solve_collocation(&problem, &scheme, &cfg, &rule).unwrap();
    let sup = coll
        .coefficients
        .iter()
        .fold(0.0_f64, |a, c| a.max(c.abs()));
    let coll_ok = coll.residual <= 100.0 * cfg.tol * (1.0 + sup);
    let (high, _) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
    let sup = high
        .coefficients
        .iter()
        .fold(0.0_f64, |a, c| a.max(c.abs()));
    let high_ok = high.residual <= 100.0 * cfg.tol * (1.0 + sup);
    CheckResult::new(
        "solver/fixed-point",
        coll_ok && high_ok,
        format!(
            "residuals: collocation {:.3e}, high-order {:.3e}",
            coll.residual, high.residual
        ),
    )
}

fn check_quadratic_convergence() -> CheckResult {
    let problem = Arc::new(make_test2(1.0).unwrap());
    let scheme = scheme_for(QipVariant::Q2, 16);
    let rule = gauss_rule(20).unwrap();
    let cfg = NewtonConfig {
        seed: SeedPolicy::ExactSeed,
        ..NewtonConfig::default()
    };
    let coll = solve_collocation(&problem, &scheme, &cfg, &rule).unwrap();
    let (high, _) = solve_highorder(&problem, &scheme, &cfg, &rule).unwrap();
    let ok = coll.iterations <= 5 && high.iterations <= 5;
    CheckResult::new(
        "solver/quadratic-convergence",
        ok,
        format!(
            "iterations: collocation {}, high-order {} (gate 5); increments {:?}",
            coll.iterations, high.iterations, high.increment_history
        ),
    )
}

fn study_errors(method: Method, variant: QipVariant, ns: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = StudySpec {
        problem: "test1".into(),
        c: None,
        method,
        variant,
        n_list: ns.to_vec(),
        seed: SeedChoice::Auto,
        tol: 1e-14,
        max_iter: 50,
        damped: None,
        format: ReportFormat::Csv,
        out: None,
    };
    let report = run_study(&spec)?;
    let mut e = Vec::new();
    let mut es = Vec::new();
    for row in &report.rows {
        let d = row
            .data
            .as_ref()
            .ok_or_else(|| crate::error::Error::Usage(format!("row n = {} failed", row.n)))?;
        e.push(d.e_inf);
        es.push(d.es);
    }
    Ok((e, es))
}

fn check_method_orders(level: Level) -> Vec<CheckResult> {
    let ns: Vec<usize> = match level {
        Level::Quick => vec![16, 32, 64],
        Level::Full => vec![40, 80, 160],
    };
    let mut results = Vec::new();

    let coll = study_errors(Method::Collocation, QipVariant::Q2, &ns);
    let high = study_errors(Method::HighOrder, QipVariant::Q2, &ns);
    match (coll, high) {
        (Ok((ce, ces)), Ok((he, hes))) => {
            let co = orders_of(&ce);
            let ho = orders_of(&he);
            let fine_c = &co[co.len() - 2.min(co.len())..];
            let fine_h = &ho[ho.len() - 2.min(ho.len())..];
            let ok = fine_c.iter().all(|&o| o >= 2.6) && fine_h.iter().all(|&o| o >= 6.4);
            results.push(CheckResult::new(
                "solver/method-order-separation-d2",
                ok,
                format!(
                    "collocation orders [{}] (gate 2.6); high-order [{}] (gate 6.4)",
                    fmt_orders(&co),
                    fmt_orders(&ho)
                ),
            ));
            let cno = orders_of(&ces);
            let hno = orders_of(&hes);
            let ok = cno.last().is_some_and(|&o| o >= 3.6) && hno.last().is_some_and(|&o| o >= 7.4);
            results.push(CheckResult::new(
                "solver/node-superconvergence-d2",
                ok,
                format!(
                    "collocation node orders [{}] (gate 3.6); high-order [{}] (gate 7.4)",
                    fmt_orders(&cno),
                    fmt_orders(&hno)
                ),
            ));
        }
        (c, h) => {
            let detail = format!("study failed: {:?} / {:?}", c.err(), h.err());
            results.push(CheckResult::new(
                "solver/method-order-separation-d2",
                false,
                detail.clone(),
            ));
            results.push(CheckResult::new(
                "solver/node-superconvergence-d2",
                false,
                detail,
            ));
        }
    }

    if level == Level::Full {
        let coll = study_errors(Method::Collocation, QipVariant::Q3, &[40, 80]);
        let high = study_errors(Method::HighOrder, QipVariant::Q3, &[40, 80]);
        let result = match (coll, high) {
            (Ok((ce, _)), Ok((he, _))) => {
                let co = orders_of(&ce);
                let ho = orders_of(&he);
                let ok =
                    co.last().is_some_and(|&o| o >= 3.6) && ho.last().is_some_and(|&o| o >= 7.5);
                CheckResult::new(
                    "solver/method-order-separation-d3",
                    ok,
                    format!(
                        "collocation orders [{}] (gate 3.6); high-order [{}] (gate 7.5)",
                        fmt_orders(&co),
                        fmt_orders(&ho)
                    ),
                )
            }
            (c, h) => CheckResult::new(
                "solver/method-order-separation-d3",
                false,
                format!("study failed: {:?} / {:?}", c.err(), h.err()),
            ),
        };
        results.push(result);
    }
    results
}

fn check_harness_determinism() -> CheckResult {
    let spec = StudySpec {
        problem: "test2".into(),
        c: Some(1.0),
        method: Method::Collocation,
        variant: QipVariant::Q2,
        n_list: vec![4, 8],
        ..StudySpec::default()
    };
    let a = run_study(&spec).map(|r| r.to_csv());
    let b = run_study(&spec).map(|r| r.to_csv());
    match (a, b) {
        (Ok(a), Ok(b)) => CheckResult::new(
            "harness/determinism",
            a == b,
            if a == b {
                "identical CSV bytes across two runs".into()
            } else {
                "CSV output differs between runs".into()
            },
        ),
        (a, b) => CheckResult::new(
            "harness/determinism",
            false,
            format!("study failed: {:?} / {:?}", a.err(), b.err()),
        ),
    }
}

fn check_order_arithmetic() -> CheckResult {
    let spec = StudySpec {
        problem: "test2".into(),
        c: Some(1.0),
        method: Method::Collocation,
        variant: QipVariant::Q2,
        n_list: vec![4, 8, 16],
        ..StudySpec::default()
    };
    let report = match run_study(&spec) {
        Ok(r) => r,
        Err(e) => {
            return CheckResult::new("harness/order-arithmetic", false, format!("{e}"));
        }
    };
    let csv = report.to_csv();
    let mut prev: Option<f64> = None;
    let mut worst: f64 = 0.0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let e: f64 = cols[1].parse().unwrap_or(f64::NAN);
        if let (Some(p), Ok(order)) = (prev, cols[2].parse::<f64>()) {
            worst = worst.max(((p / e).log2() - order).abs());
        }
        prev = Some(e);
    }
    CheckResult::new(
        "harness/order-arithmetic",
        worst <= 0.05,
        format!("max |recomputed - emitted| = {worst:.3} (tol 0.05)"),
    )
}

/// Runs every invariant check at the requested level.
pub fn run_property_suite(level: Level) -> Vec<CheckResult> {
    let mut results = vec![
        check_partition_of_unity(),
        check_basis_positivity_and_support(),
        check_smoothness(),
        check_quadrature_exactness(),
        check_quadrature_additivity(),
        check_projector_defects(level),
        check_spline_reproduction(),
        check_approximation_order(level),
        check_integral_superconvergence(level),
        check_node_superconvergence(level),
        check_symmetry(),
        check_norm_boundedness(),
        check_operator_linearity(),
        check_frechet_remainder(),
        check_support_restriction(),
        check_problem_self_consistency(),
        check_problem_derivatives(),
        check_closed_form_rhs(),
        check_dense_solve_residual(),
        check_solver_fixed_points(),
        check_quadratic_convergence(),
    ];
    results.extend(check_method_orders(level));
    results.push(check_harness_determinism());
    results.push(check_order_arithmetic());
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let results = run_property_suite(Level::Quick);
        for r in &results {
            eprintln!(
                "[{}] {}: {}",
                if r.passed { "pass" } else { "FAIL" },
                r.name,
                r.detail
            );
        }
        assert!(all_passed(&results));
    }

    #[test]
    fn perturbed_scheme_fails_the_defect_gate() {
        let space = Arc::new(build_space(2, 16).unwrap());
        let mut scheme = build_qip(space, QipVariant::Q2).unwrap();
        scheme.perturb_weight(5, 2, 1e-3);
        assert!(projector_defect(&scheme) >= 1e-4);
    }
}
