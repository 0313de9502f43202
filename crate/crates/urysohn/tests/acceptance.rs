//! Acceptance suite: one test per shipped guarantee, each printing a pass
//! line with the measured values. Order gates are tight; magnitude gates
//! allow a bounded factor against the reference values, since the error
//! constants of quasi-interpolating projectors depend on the exact weight
//! closure.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! measured numbers.

use std::sync::Arc;
use urysohn::bspline::{build_space, Evaluable};
use urysohn::harness::properties::sign_aware_orders;
use urysohn::harness::{run_property_suite, Level, ReportFormat, SeedChoice, StudySpec};
use urysohn::quadrature::{composite_integrate, gauss_rule};
use urysohn::quasi_interp::{build_qip, project, projector_defect, QipVariant};
use urysohn::solver::Method;

fn scheme_for(variant: QipVariant, n: usize) -> Arc<urysohn::quasi_interp::QipScheme> {
    let space = Arc::new(build_space(variant.degree(), n).unwrap());
    Arc::new(build_qip(space, variant).unwrap())
}

fn study(
    problem: &str,
    c: Option<f64>,
    method: Method,
    variant: QipVariant,
    ns: &[usize],
) -> urysohn::harness::ConvergenceReport {
    let spec = StudySpec {
        problem: problem.into(),
        c,
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
    urysohn::harness::run_study(&spec).expect("study runs")
}

fn errors_of(report: &urysohn::harness::ConvergenceReport) -> (Vec<f64>, Vec<f64>) {
    let mut e = Vec::new();
    let mut es = Vec::new();
    for row in &report.rows {
        let d = row
            .data
            .as_ref()
            .unwrap_or_else(|| panic!("row n = {} failed", row.n));
        e.push(d.e_inf);
        es.push(d.es);
    }
    (e, es)
}

fn orders_of(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value <= reference * factor && value >= reference / factor
}

fn sci(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v:.3e}")).collect()
}

/// Criterion 1: projector property for all shipped variants and
/// n in {16, 64, 256}.
#[test]
fn criterion_1_projector_property() {
    for variant in [QipVariant::Q2, QipVariant::Q2dB, QipVariant::Q3] {
        for n in [16usize, 64, 256] {
            let defect = projector_defect(&scheme_for(variant, n));
            assert!(
                defect <= 1e-12,
                "{} n={n}: defect {defect:.3e} exceeds 1e-12",
                variant.name()
            );
        }
    }
    println!(
        "criterion 1 PASS: projector defect <= 1e-12 for Q2, Q2dB, Q3 at n in {{16, 64, 256}}"
    );
}

/// Criterion 2: projection of exp converges at order d + 1; gate on the
/// finest doubling of 32 -> 256.
#[test]
fn criterion_2_qip_approximation_order() {
    let ns = [32usize, 64, 128, 256];
    for (variant, gate) in [
        (QipVariant::Q2, 2.7),
        (QipVariant::Q2dB, 2.7),
        (QipVariant::Q3, 3.7),
    ] {
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let scheme = scheme_for(variant, n);
                let p = project(&scheme, &|t: f64| t.exp());
                (0..=3000)
                    .map(|k| {
                        let t = k as f64 / 3000.0;
                        (p.eval(t) - t.exp()).abs()
                    })
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        let orders = orders_of(&errs);
        let finest = *orders.last().unwrap();
        assert!(
            finest >= gate,
            "{}: finest order {finest:.2} below {gate}",
            variant.name()
        );
        println!(
            "criterion 2 PASS ({}): orders {:?} >= {gate} on the finest pair",
            variant.name(),
            orders
                .iter()
                .map(|o| (o * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
    }
}

/// Criterion 3: even-degree integral superconvergence of the projector at
/// order d + 2 across 32 -> 256. The signed integral of the near-best Q2
/// crosses zero near n = 40, so pairs next to the crossing carry no rate
/// information and are skipped.
#[test]
fn criterion_3_integral_superconvergence() {
    let ns = [32usize, 64, 128, 256];
    let rule = gauss_rule(20).unwrap();
    for variant in [QipVariant::Q2, QipVariant::Q2dB] {
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
        let finest = *orders.last().expect("at least one clean pair");
        assert!(
            finest >= 3.7,
            "{}: finest clean order {finest:.2} below 3.7 (values {values:?})",
            variant.name()
        );
        println!(
            "criterion 3 PASS ({}): clean orders {:?}, finest >= 3.7",
            variant.name(),
            orders
                .iter()
                .map(|o| (o * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
    }
}

/// Criteria 4 and 7: reproduction of the Test 1 quadratic-spline table and
/// the node superconvergence rates, n in {40, 80, 160}.
#[test]
fn criterion_4_and_7_test1_q2_table() {
    let ns = [40usize, 80, 160];
    let high = study("test1", None, Method::HighOrder, QipVariant::Q2, &ns);
    let coll = study("test1", None, Method::Collocation, QipVariant::Q2, &ns);
    let (he, hes) = errors_of(&high);
    let (ce, ces) = errors_of(&coll);

    // Printed reference values and orders.
    let high_ref = [1.08e-6, 4.08e-9, 2.13e-11];
    let coll_ref = [7.74e-3, 6.77e-4, 8.17e-5];
    for k in 0..3 {
        assert!(
            within_factor(he[k], high_ref[k], 10.0),
            "high-order E({}) = {:.3e} not within 10x of {:.2e}",
            ns[k],
            he[k],
            high_ref[k]
        );
        assert!(
            within_factor(ce[k], coll_ref[k], 10.0),
            "collocation E({}) = {:.3e} not within 10x of {:.2e}",
            ns[k],
            ce[k],
            coll_ref[k]
        );
    }
    let ho = orders_of(&he);
    let co = orders_of(&ce);
    assert!(
        (ho[0] - 8.1).abs() <= 0.7,
        "high-order order {:.2} vs 8.1 +- 0.7",
        ho[0]
    );
    assert!(
        (ho[1] - 7.6).abs() <= 0.7,
        "high-order order {:.2} vs 7.6 +- 0.7",
        ho[1]
    );
    assert!(
        (co[0] - 3.5).abs() <= 0.5,
        "collocation order {:.2} vs 3.5 +- 0.5",
        co[0]
    );
    assert!(
        (co[1] - 3.0).abs() <= 0.5,
        "collocation order {:.2} vs 3.0 +- 0.5",
        co[1]
    );
    println!(
        "criterion 4 PASS: high-order E = {:?} orders [{:.2}, {:.2}]; collocation E = {:?} orders [{:.2}, {:.2}]",
        sci(&he),
        ho[0],
        ho[1],
        sci(&ce),
        co[0],
        co[1]
    );

    // Criterion 7: node superconvergence on the finest pair.
    let hno = orders_of(&hes);
    let cno = orders_of(&ces);
    let h_fine = *hno.last().unwrap();
    let c_fine = *cno.last().unwrap();
    assert!(h_fine >= 7.4, "high-order node order {h_fine:.2} below 7.4");
    assert!(
        c_fine >= 3.6,
        "collocation node order {c_fine:.2} below 3.6"
    );
    println!(
        "criterion 7 PASS: node orders high-order [{:.2}, {:.2}] (>= 7.4), collocation [{:.2}, {:.2}] (>= 3.6)",
        hno[0], hno[1], cno[0], cno[1]
    );
}

/// Criterion 5: reproduction of the Test 1 cubic-spline table, n in {40, 80}.
#[test]
fn criterion_5_test1_q3_table() {
    let ns = [40usize, 80];
    let high = study("test1", None, Method::HighOrder, QipVariant::Q3, &ns);
    let coll = study("test1", None, Method::Collocation, QipVariant::Q3, &ns);
    let (he, _) = errors_of(&high);
    let (ce, _) = errors_of(&coll);
    let ho = orders_of(&he)[0];
    let co = orders_of(&ce)[0];
    assert!(
        within_factor(he[1], 9.40e-11, 10.0),
        "high-order E(80) = {:.3e} not within 10x of 9.40e-11",
        he[1]
    );
    assert!(
        (ho - 8.0).abs() <= 1.0,
        "high-order order {ho:.2} vs 8 +- 1"
    );
    assert!(
        (co - 4.0).abs() <= 0.5,
        "collocation order {co:.2} vs 4.0 +- 0.5"
    );
    println!(
        "criterion 5 PASS: high-order E = {:?} order {ho:.2}; collocation order {co:.2}",
        sci(&he)
    );
}

/// Criterion 6: Test 2 with c = 1 at small n.
#[test]
fn criterion_6_test2_small_meshes() {
    let high2 = study(
        "test2",
        Some(1.0),
        Method::HighOrder,
        QipVariant::Q2,
        &[4, 8, 16],
    );
    let (he, hes) = errors_of(&high2);
    let order = *orders_of(&he).last().unwrap();
    let es_order = *orders_of(&hes).last().unwrap();
    assert!(
        (order - 7.3).abs() <= 0.7,
        "Q2 order at n=16 {order:.2} vs 7.3 +- 0.7"
    );
    assert!(
        (es_order - 8.0).abs() <= 0.7,
        "Q2 node order at n=16 {es_order:.2} vs 8.0 +- 0.7"
    );
    let high3 = study(
        "test2",
        Some(1.0),
        Method::HighOrder,
        QipVariant::Q3,
        &[4, 8],
    );
    let (he3, _) = errors_of(&high3);
    assert!(
        he3[1] <= 1e-10,
        "Q3 error at n=8 is {:.3e}, above 1e-10",
        he3[1]
    );
    println!(
        "criterion 6 PASS: Q2 orders ({order:.2}, ES {es_order:.2}); Q3 E(8) = {:.3e} <= 1e-10",
        he3[1]
    );
}

/// Criterion 8: the badly behaved c = 0.1 problem completes across
/// n in {4, ..., 64} under the fallback seeding, with the documented
/// accuracy by n = 32 and collocation approaching third order.
#[test]
fn criterion_8_test2_ill_behaved() {
    let ns = [4usize, 8, 16, 32, 64];
    let high = study("test2", Some(0.1), Method::HighOrder, QipVariant::Q2, &ns);
    let coll = study("test2", Some(0.1), Method::Collocation, QipVariant::Q2, &ns);
    for report in [&high, &coll] {
        for row in &report.rows {
            assert!(row.data.is_some(), "row n = {} failed to solve", row.n);
        }
        assert_eq!(report.metadata.newton_policy, "exact_seed+damped");
    }
    let (he, _) = errors_of(&high);
    assert!(
        he[3] <= 1e-12,
        "high-order E(32) = {:.3e}, above 1e-12",
        he[3]
    );
    let (ce, _) = errors_of(&coll);
    let finest = *orders_of(&ce).last().unwrap();
    assert!(
        finest >= 2.5,
        "collocation finest order {finest:.2} below 2.5"
    );
    println!(
        "criterion 8 PASS: all rows solved with exact_seed+damped; high-order E(32) = {:.3e}; collocation orders {:?}",
        he[3],
        orders_of(&ce).iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
}

/// Criterion 9: the Fréchet/quadrature/oracle property checks pass at their
/// stated tolerances.
#[test]
fn criterion_9_property_suite() {
    let results = run_property_suite(Level::Quick);
    let required = [
        "operator/linearity",
        "operator/frechet-remainder",
        "quadrature/exactness",
        "solver/dense-solve",
        "problems/closed-form-rhs",
    ];
    for name in required {
        let r = results
            .iter()
            .find(|r| r.name == name)
            .unwrap_or_else(|| panic!("check {name} missing from the suite"));
        assert!(r.passed, "{name} failed: {}", r.detail);
    }
    // The rest of the suite must hold as well.
    for r in &results {
        assert!(r.passed, "{} failed: {}", r.name, r.detail);
    }
    println!("criterion 9 PASS: {} property checks green", results.len());
}
