//! Convergence studies: solve a catalog problem over a list of mesh sizes and
//! tabulate errors against the exact solution.

use crate::bspline::{build_space, Evaluable};
use crate::error::{Error, Result};
use crate::harness::report::{
    compute_orders, ConvergenceReport, ReportFormat, ReportMetadata, ReportRow, RowData,
};
use crate::operator::UrysohnProblem;
use crate::problems::catalog_entry;
use crate::quadrature::{gauss_rule, GaussRule};
use crate::quasi_interp::{build_qip, QipScheme, QipVariant};
use crate::solver::{
    eval_highorder, solve_collocation, solve_highorder, Method, NewtonConfig, SeedPolicy,
};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

/// Number of equally spaced evaluation points (both endpoints included).
pub const ERROR_GRID_POINTS: usize = 1500;

/// Seeding requested by the user; `Auto` defers to the problem catalog flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedChoice {
    Auto,
    ProjectRhs,
    ExactSeed,
}

impl std::str::FromStr for SeedChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "auto" => Ok(SeedChoice::Auto),
            "project_rhs" => Ok(SeedChoice::ProjectRhs),
            "exact_seed" => Ok(SeedChoice::ExactSeed),
            other => Err(Error::Usage(format!(
                "unknown seed policy '{other}' (expected auto, project_rhs or exact_seed)"
            ))),
        }
    }
}

/// Everything needed to run one convergence study.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub problem: String,
    pub c: Option<f64>,
    pub method: Method,
    pub variant: QipVariant,
    pub n_list: Vec<usize>,
    pub seed: SeedChoice,
    pub tol: f64,
    pub max_iter: usize,
    /// Damped first step; `None` follows the catalog flag.
    pub damped: Option<bool>,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            problem: "test1".into(),
            c: None,
            method: Method::HighOrder,
            variant: QipVariant::Q2,
            n_list: vec![40, 80],
            seed: SeedChoice::Auto,
            tol: 1e-14,
            max_iter: 50,
            damped: None,
            format: ReportFormat::Csv,
            out: None,
        }
    }
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Usage("n_list must not be empty".into()));
        }
        let d = self.variant.degree();
        for w in self.n_list.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Usage("n_list must be strictly increasing".into()));
            }
        }
        if self.n_list[0] < d + 1 {
            return Err(Error::Usage(format!(
                "every n must be at least d + 1 = {}",
                d + 1
            )));
        }
        Ok(())
    }
}

fn error_grid() -> Vec<f64> {
    (0..ERROR_GRID_POINTS)
        .map(|k| k as f64 / (ERROR_GRID_POINTS - 1) as f64)
        .collect()
}

fn max_error_on(points: &[f64], approx: &dyn Evaluable, exact: &dyn Fn(f64) -> f64) -> f64 {
    points
        .iter()
        .map(|&v| (exact(v) - approx.eval(v)).abs())
        .fold(0.0, f64::max)
}

fn solve_one(
    problem: &Arc<UrysohnProblem>,
    scheme: &Arc<QipScheme>,
    cfg: &NewtonConfig,
    rule: &GaussRule,
    method: Method,
    grid_points: &[f64],
) -> Result<RowData> {
    let exact = |s: f64| {
        problem
            .exact(s)
            .expect("study problems carry exact solutions")
    };
    let (e_inf, es, iterations, residual) = match method {
        Method::Collocation => {
            let result = solve_collocation(problem, scheme, cfg, rule)?;
            let spline =
                crate::bspline::Spline::new(scheme.space().clone(), result.coefficients.clone())?;
            let e_inf = max_error_on(grid_points, &spline, &exact);
            let es = max_error_on(scheme.node_set().nodes(), &spline, &exact);
            (e_inf, es, result.iterations, result.residual)
        }
        Method::HighOrder => {
            let (result, approx) = solve_highorder(problem, scheme, cfg, rule)?;
            let e_inf = grid_points
                .iter()
                .map(|&v| (exact(v) - eval_highorder(&approx, v).unwrap_or(f64::NAN)).abs())
                .fold(0.0, f64::max);
            let es = scheme
                .node_set()
                .nodes()
                .iter()
                .map(|&v| (exact(v) - eval_highorder(&approx, v).unwrap_or(f64::NAN)).abs())
                .fold(0.0, f64::max);
            (e_inf, es, result.iterations, result.residual)
        }
    };
    Ok(RowData {
        e_inf,
        order_inf: None,
        es,
        order_es: None,
        iterations,
        residual,
    })
}

/// Runs the study: for each `n`, build the space and scheme, solve, and
/// measure max-norm errors on the evaluation grid and at the QI nodes.
/// Rows whose solve fails are marked failed and the study continues.
pub fn run_study(spec: &StudySpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let entry = catalog_entry(&spec.problem, spec.c)?;
    if !entry.problem.has_exact() {
        return Err(Error::parameter(
            "convergence studies need a problem with a known exact solution",
        ));
    }
    let seed = match spec.seed {
        SeedChoice::ProjectRhs => SeedPolicy::ProjectRhs,
        SeedChoice::ExactSeed => SeedPolicy::ExactSeed,
        SeedChoice::Auto if entry.ill_behaved => SeedPolicy::ExactSeed,
        SeedChoice::Auto => SeedPolicy::ProjectRhs,
    };
    let damped = spec.damped.unwrap_or(entry.ill_behaved);
    let policy_name = format!(
        "{}{}",
        match seed {
            SeedPolicy::ProjectRhs => "project_rhs",
            SeedPolicy::ExactSeed => "exact_seed",
            SeedPolicy::Custom(_) => "custom",
        },
        if damped { "+damped" } else { "" }
    );
    let cfg = NewtonConfig {
        tol: spec.tol,
        max_iter: spec.max_iter,
        seed,
        damped,
    };
    let rule = gauss_rule(20)?;
    let grid_points = error_grid();
    let mut rows = Vec::with_capacity(spec.n_list.len());
    for &n in &spec.n_list {
        let row = build_space(spec.variant.degree(), n)
            .map(Arc::new)
            .and_then(|space| build_qip(space, spec.variant).map(Arc::new))
            .and_then(|scheme| {
                solve_one(
                    &entry.problem,
                    &scheme,
                    &cfg,
                    &rule,
                    spec.method,
                    &grid_points,
                )
            });
        match row {
            Ok(data) => rows.push(ReportRow {
                n,
                data: Some(data),
            }),
            Err(err) => {
                eprintln!("study row n = {n} failed: {err}");
                rows.push(ReportRow { n, data: None });
            }
        }
    }
    compute_orders(&mut rows);
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ConvergenceReport {
        rows,
        metadata: ReportMetadata {
            problem: entry.problem.label().to_string(),
            method: spec.method.name().to_string(),
            variant: spec.variant.name().to_string(),
            grid_points: ERROR_GRID_POINTS,
            newton_policy: policy_name,
            timestamp,
        },
    })
}

/// Parses the flat `key = value` configuration format. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!("config line {}: expected key = value", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Applies config-file values to a spec; CLI flags are applied afterwards and
/// therefore win.
pub fn apply_config(spec: &mut StudySpec, map: &HashMap<String, String>) -> Result<()> {
    for (key, value) in map {
        match key.as_str() {
            "problem" => spec.problem = value.clone(),
            "c" => {
                spec.c = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Usage(format!("config: bad value for c: '{value}'")))?,
                )
            }
            "method" => spec.method = value.parse()?,
            "qip" => spec.variant = value.parse()?,
            "n_list" => spec.n_list = parse_n_list(value)?,
            "seed_policy" => spec.seed = value.parse()?,
            "tol" => {
                spec.tol = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("config: bad value for tol: '{value}'")))?
            }
            "max_iter" => {
                spec.max_iter = value.parse().map_err(|_| {
                    Error::Usage(format!("config: bad value for max_iter: '{value}'"))
                })?
            }
            "damped" => {
                spec.damped = Some(value.parse().map_err(|_| {
                    Error::Usage(format!("config: bad value for damped: '{value}'"))
                })?)
            }
            "format" => spec.format = value.parse()?,
            "out" => spec.out = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Usage(format!("config: unknown key '{other}'")));
            }
        }
    }
    Ok(())
}

/// Parses a comma-separated list of mesh sizes.
pub fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad n value '{}'", part.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let mut spec = StudySpec::default();
        spec.n_list = vec![8, 16, 32];
        assert!(spec.validate().is_ok());
        spec.n_list = vec![16, 8];
        assert!(spec.validate().is_err());
        spec.n_list = vec![2, 8];
        assert!(spec.validate().is_err());
        spec.n_list = vec![];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn config_parsing_round_trip() {
        let text = "\n# comment\nproblem = test2\nc = 0.1\nmethod = collocation\nqip = Q2dB\nn_list = 4, 8, 16\nseed_policy = exact_seed\ntol = 1e-12\nmax_iter = 30\nformat = markdown\nout = /tmp/report.md\n";
        let map = parse_config(text).unwrap();
        let mut spec = StudySpec::default();
        apply_config(&mut spec, &map).unwrap();
        assert_eq!(spec.problem, "test2");
        assert_eq!(spec.c, Some(0.1));
        assert_eq!(spec.method, Method::Collocation);
        assert_eq!(spec.variant, QipVariant::Q2dB);
        assert_eq!(spec.n_list, vec![4, 8, 16]);
        assert_eq!(spec.seed, SeedChoice::ExactSeed);
        assert_eq!(spec.tol, 1e-12);
        assert_eq!(spec.max_iter, 30);
        assert_eq!(spec.format, ReportFormat::Markdown);
        assert_eq!(spec.out, Some(PathBuf::from("/tmp/report.md")));
    }

    #[test]
    fn bad_config_lines_are_rejected() {
        assert!(parse_config("no equals sign").is_err());
        let map = parse_config("mystery = 1").unwrap();
        let mut spec = StudySpec::default();
        assert!(apply_config(&mut spec, &map).is_err());
    }

    #[test]
    fn diverging_rows_are_marked_failed_and_the_study_continues() {
        // A one-iteration budget at an unreachable tolerance fails every
        // Newton solve; rows must come back empty rather than aborting.
        let spec = StudySpec {
            problem: "test2".into(),
            c: Some(1.0),
            method: Method::Collocation,
            variant: QipVariant::Q2,
            n_list: vec![4, 8],
            max_iter: 1,
            tol: 1e-16,
            ..StudySpec::default()
        };
        let report = run_study(&spec).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.data.is_none()));
        let csv = report.to_csv();
        assert!(csv.lines().nth(1).unwrap().starts_with("4,,"));
        assert!(csv.lines().nth(2).unwrap().starts_with("8,,"));
    }

    #[test]
    fn orders_skip_across_failed_rows() {
        use crate::harness::report::{compute_orders, ReportRow, RowData};
        let data = |e: f64| RowData {
            e_inf: e,
            order_inf: None,
            es: e,
            order_es: None,
            iterations: 1,
            residual: 0.0,
        };
        let mut rows = vec![
            ReportRow {
                n: 4,
                data: Some(data(1e-2)),
            },
            ReportRow { n: 8, data: None },
            ReportRow {
                n: 16,
                data: Some(data(1e-4)),
            },
        ];
        compute_orders(&mut rows);
        // No neighbor to compare against on either side of the failure.
        assert!(rows[2].data.as_ref().unwrap().order_inf.is_none());
    }

    #[test]
    fn small_study_produces_orders() {
        let spec = StudySpec {
            problem: "test2".into(),
            c: Some(1.0),
            method: Method::Collocation,
            variant: QipVariant::Q2,
            n_list: vec![4, 8],
            ..StudySpec::default()
        };
        let report = run_study(&spec).unwrap();
        assert_eq!(report.rows.len(), 2);
        let d0 = report.rows[0].data.as_ref().unwrap();
        let d1 = report.rows[1].data.as_ref().unwrap();
        assert!(d0.order_inf.is_none());
        assert!(d1.order_inf.is_some());
        assert!(d1.e_inf < d0.e_inf);
    }
}
