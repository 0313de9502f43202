//! Convergence-study harness: study specs, report emission, and the
//! invariant property suite. The `urysohn` binary exposes this over the
//! command line via the `study`, `properties` and `dump-qip` subcommands.

pub mod properties;
pub mod report;
pub mod study;

pub use properties::{all_passed, run_property_suite, CheckResult, Level};
pub use report::{
    emit_report, format_sci, ConvergenceReport, ReportFormat, ReportMetadata, ReportRow, RowData,
};
pub use study::{parse_config, parse_n_list, run_study, SeedChoice, StudySpec};
