//! End-to-end checks of the command line interface: exit codes, file output,
//! configuration handling, and the stencil dump.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urysohn"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("urysohn-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn study_writes_csv_deterministically() {
    let dir = temp_dir("study");
    let out = dir.join("report.csv");
    for _ in 0..2 {
        let status = bin()
            .args([
                "study",
                "--problem",
                "test2",
                "--c",
                "1.0",
                "--method",
                "collocation",
                "--qip",
                "Q2",
                "--n-list",
                "4,8",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,E_inf,O_inf,ES,O_ES,iters,residual");
    assert_eq!(lines.len(), 3);
    // Byte determinism: re-run and compare.
    let first = text.clone();
    let status = bin()
        .args([
            "study",
            "--problem",
            "test2",
            "--c",
            "1.0",
            "--method",
            "collocation",
            "--qip",
            "Q2",
            "--n-list",
            "4,8",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn markdown_output_uses_compact_notation() {
    let output = bin()
        .args([
            "study",
            "--problem",
            "test2",
            "--c",
            "1.0",
            "--method",
            "collocation",
            "--qip",
            "Q2",
            "--n-list",
            "4,8",
            "--format",
            "markdown",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("| n |"), "missing table header: {text}");
    assert!(
        text.contains("(-0"),
        "missing mantissa(-exponent) values: {text}"
    );
}

#[test]
fn config_file_is_read_and_flags_override() {
    let dir = temp_dir("config");
    let config = dir.join("study.conf");
    std::fs::write(
        &config,
        "problem = test2\nc = 1.0\nmethod = collocation\nqip = Q2dB\nn_list = 4, 8, 16\n",
    )
    .unwrap();
    // Flag overrides the n_list from the file.
    let output = bin()
        .args(["study", "--config"])
        .arg(&config)
        .args(["--n-list", "4,8"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert_eq!(
        text.lines().count(),
        3,
        "override should give 2 rows: {text}"
    );
    assert!(text.lines().nth(1).unwrap().starts_with("4,"));
    assert!(text.lines().nth(2).unwrap().starts_with("8,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_errors_exit_with_code_two() {
    let output = bin()
        .args(["study", "--problem", "bogus", "--n-list", "4,8"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().args(["study", "--n-list", "8,4"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().args(["study", "--qip", "Q9"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    // Unknown flags are a clap-level usage error.
    let output = bin().args(["study", "--frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn study_with_no_solved_rows_exits_with_code_one() {
    let output = bin()
        .args([
            "study",
            "--problem",
            "test2",
            "--c",
            "1.0",
            "--method",
            "collocation",
            "--qip",
            "Q2",
            "--n-list",
            "4,8",
            "--max-iter",
            "1",
            "--tol",
            "1e-16",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("4,,"));
}

#[test]
fn dump_qip_emits_stencil_rows() {
    let output = bin()
        .args(["dump-qip", "--qip", "Q2dB", "--n", "6"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,node_index,xi_value,sigma");
    assert!(lines.len() > 8);
    // Every row: functional index, node index, node value, weight.
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 4, "bad row {line}");
    }
    let dir = temp_dir("dump");
    let out = dir.join("stencils.csv");
    let status = bin()
        .args(["dump-qip", "--qip", "Q3", "--n", "8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("i,node_index"));
    std::fs::remove_dir_all(&dir).unwrap();
}
