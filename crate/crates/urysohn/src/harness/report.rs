//! Convergence reports: per-n error rows, empirical orders, and CSV /
//! markdown emission.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(crate::error::Error::Usage(format!(
                "unknown format '{other}' (expected csv or markdown)"
            ))),
        }
    }
}

/// Error data for one mesh size. Orders are empty on the first row and next
/// to failed rows.
#[derive(Debug, Clone)]
pub struct RowData {
    pub e_inf: f64,
    pub order_inf: Option<f64>,
    pub es: f64,
    pub order_es: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub n: usize,
    /// `None` marks a row whose solve failed; the study continues past it.
    pub data: Option<RowData>,
}

#[derive(Debug, Clone)]
pub struct ReportMetadata {
    pub problem: String,
    pub method: String,
    pub variant: String,
    pub grid_points: usize,
    pub newton_policy: String,
    /// Unix timestamp of the run; kept out of emitted files so report bytes
    /// stay reproducible.
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

/// Fills in `order = log2(previous_error / current_error)` between
/// consecutive successful rows.
pub fn compute_orders(rows: &mut [ReportRow]) {
    for k in 1..rows.len() {
        let prev = match &rows[k - 1].data {
            Some(d) => (d.e_inf, d.es),
            None => continue,
        };
        if let Some(d) = &mut rows[k].data {
            if prev.0 > 0.0 && d.e_inf > 0.0 {
                d.order_inf = Some((prev.0 / d.e_inf).log2());
            }
            if prev.1 > 0.0 && d.es > 0.0 {
                d.order_es = Some((prev.1 / d.es).log2());
            }
        }
    }
}

/// Compact scientific notation: three significant digits with the
/// exponent in parentheses, e.g. `4.08(-09)`.
pub fn format_sci(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let mut exp = v.abs().log10().floor() as i32;
    let mut mant = v / 10f64.powi(exp);
    // Rounding the mantissa to two decimals can push it to ±10.
    if format!("{mant:.2}")
        .trim_start_matches('-')
        .starts_with("10")
    {
        mant /= 10.0;
        exp += 1;
    }
    format!("{mant:.2}({exp:+03})")
}

fn order_cell(v: Option<f64>, width: usize) -> String {
    match v {
        Some(o) => format!("{o:>width$.1}"),
        None => format!("{:>width$}", "-"),
    }
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,E_inf,O_inf,ES,O_ES,iters,residual\n");
        for row in &self.rows {
            match &row.data {
                Some(d) => {
                    let o_inf = d.order_inf.map(|o| format!("{o:.2}")).unwrap_or_default();
                    let o_es = d.order_es.map(|o| format!("{o:.2}")).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{:.6e},{},{:.6e},{},{},{:.3e}",
                        row.n, d.e_inf, o_inf, d.es, o_es, d.iterations, d.residual
                    );
                }
                None => {
                    let _ = writeln!(out, "{},,,,,,", row.n);
                }
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metadata;
        let mut out = format!(
            "## {} - {} / {} (seed: {}, errors on {} points)\n\n",
            m.problem, m.method, m.variant, m.newton_policy, m.grid_points
        );
        out.push_str("| n | E_inf | O_inf | ES | O_ES | iters | residual |\n");
        out.push_str("|---|-------|-------|----|------|-------|----------|\n");
        for row in &self.rows {
            match &row.data {
                Some(d) => {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} | {} |",
                        row.n,
                        format_sci(d.e_inf),
                        order_cell(d.order_inf, 1),
                        format_sci(d.es),
                        order_cell(d.order_es, 1),
                        d.iterations,
                        format_sci(d.residual)
                    );
                }
                None => {
                    let _ = writeln!(out, "| {} | - | - | - | - | - | - |", row.n);
                }
            }
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }
}

/// Writes a file atomically: contents go to a sibling temp file which is then
/// renamed over the destination.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut name = name.to_os_string();
            name.push(".tmp");
            path.with_file_name(name)
        }
        None => {
            return Err(crate::error::Error::Usage(format!(
                "invalid output path {}",
                path.display()
            )))
        }
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Emits the report in the chosen format, atomically when a path is given,
/// otherwise to standard output.
pub fn emit_report(
    report: &ConvergenceReport,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<()> {
    let rendered = report.render(format);
    match out {
        Some(path) => write_atomic(path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
