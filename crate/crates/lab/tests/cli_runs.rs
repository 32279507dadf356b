//! End-to-end tests of the `rbdsde` binary: exit codes, report artifacts,
//! determinism, and environment overrides.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rbdsde")
}

struct RunResult {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(out_dir: &Path, args: &[&str]) -> RunResult {
    let output = Command::new(bin())
        .args(args)
        .env("RBDSDE_OUT", out_dir)
        .output()
        .expect("binary runs");
    RunResult {
        code: output.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// Small affine solve used by several tests.
fn affine_solve_config(paths: usize, seed: u64) -> String {
    format!(
        r#"{{
        "problem": {{
            "family": "affine",
            "params": {{ "a": 0.5, "b": 0.25, "c0": 0.3, "beta": 0.2, "g0": 0.1 }}
        }},
        "grid": {{ "horizon": 1.0, "steps": 10 }},
        "ensemble": {{ "paths": {paths}, "dim": 1, "seed": {seed} }},
        "emit_solution_csv": true
    }}"#
    )
}

fn strip_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.contains("generated_at_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn solve_run_passes_and_emits_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &affine_solve_config(200, 7));
    let out = dir.path().join("run");
    let res = run_in(&out, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    assert!(res.stdout.contains("solve: PASS"), "stdout: {}", res.stdout);

    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"schema\": 1"));
    assert!(report.contains("\"pass\": true"));
    let plot = std::fs::read_to_string(out.join("plotdata.csv")).unwrap();
    assert!(plot.starts_with("series,x,y\n"));
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(csv.starts_with("path,step,t,Y,Z_1,K\n"));
    // 200 paths × 11 nodes + header.
    assert_eq!(csv.lines().count(), 1 + 200 * 11);
}

#[test]
fn repeat_runs_are_byte_identical_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &affine_solve_config(200, 11));
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let res_a = run_in(&out_a, &["solve", "--config", cfg.to_str().unwrap()]);
    let res_b = run_in(&out_b, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res_a.code, 0);
    assert_eq!(res_b.code, 0);

    let report_a = std::fs::read_to_string(out_a.join("report.json")).unwrap();
    let report_b = std::fs::read_to_string(out_b.join("report.json")).unwrap();
    assert_eq!(strip_timestamp(&report_a), strip_timestamp(&report_b));

    // The remaining artifacts carry no timestamp at all.
    let plot_a = std::fs::read(out_a.join("plotdata.csv")).unwrap();
    let plot_b = std::fs::read(out_b.join("plotdata.csv")).unwrap();
    assert_eq!(plot_a, plot_b);
    let csv_a = std::fs::read(out_a.join("solution.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("solution.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn thread_cap_changes_scheduling_not_results() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "problem": { "family": "linear_f_ode", "params": { "rate": 0.1 } },
        "grid": { "horizon": 1.0, "steps": 10 },
        "ensemble": { "paths": 128, "dim": 1, "seed": 3 },
        "convergence": {
            "step_schedule": [5, 10, 20, 40],
            "reference_y0": 0.9048374180359595
        }
    }"#;
    let cfg = write_config(dir.path(), "c.json", body);
    let out_1 = dir.path().join("t1");
    let out_4 = dir.path().join("t4");
    let res_1 = run_in(
        &out_1,
        &[
            "convergence-study",
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            "1",
        ],
    );
    let res_4 = run_in(
        &out_4,
        &[
            "convergence-study",
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            "4",
        ],
    );
    assert_eq!(res_1.code, 0, "stderr: {}", res_1.stderr);
    assert_eq!(res_4.code, 0, "stderr: {}", res_4.stderr);
    let report_1 = std::fs::read_to_string(out_1.join("report.json")).unwrap();
    let report_4 = std::fs::read_to_string(out_4.join("report.json")).unwrap();
    assert_eq!(strip_timestamp(&report_1), strip_timestamp(&report_4));
}

#[test]
fn cli_overrides_are_reflected_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &affine_solve_config(200, 7));
    let out = dir.path().join("run");
    let res = run_in(
        &out,
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "99",
            "--paths",
            "64",
            "--steps",
            "8",
        ],
    );
    assert_eq!(res.code, 0, "stderr: {}", res.stderr);
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 99"));
    assert!(report.contains("\"paths\": 64"));
    assert!(report.contains("\"steps\": 8"));
}

#[test]
fn failed_check_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    // A wildly wrong reference value makes the measured errors flat in dt,
    // so the fitted slope sits near zero and the study fails.
    let body = r#"{
        "problem": { "family": "linear_f_ode", "params": { "rate": 0.1 } },
        "grid": { "horizon": 1.0, "steps": 10 },
        "ensemble": { "paths": 64, "dim": 1, "seed": 3 },
        "convergence": { "step_schedule": [5, 10, 20], "reference_y0": 5.0 }
    }"#;
    let cfg = write_config(dir.path(), "c.json", body);
    let out = dir.path().join("run");
    let res = run_in(&out, &["convergence-study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 1, "stdout: {}", res.stdout);
    assert!(res.stdout.contains("FAIL"));
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"pass\": false"));
}

#[test]
fn config_mistakes_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // Misspelled family.
    let bad_family = affine_solve_config(64, 1).replace("affine", "afine");
    let cfg = write_config(dir.path(), "bad_family.json", &bad_family);
    let res = run_in(&out, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2, "stderr: {}", res.stderr);
    assert!(res.stderr.contains("afine"));

    // Malformed JSON.
    let cfg = write_config(dir.path(), "broken.json", "{ not json");
    let res = run_in(&out, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2);

    // Missing file.
    let res = run_in(&out, &["solve", "--config", "/nonexistent/c.json"]);
    assert_eq!(res.code, 2);

    // Study pinned to a different subcommand.
    let pinned = format!(
        r#"{{ "study": "solve", {} }}"#,
        affine_solve_config(64, 1)
            .trim_start()
            .strip_prefix('{')
            .unwrap()
            .trim_start()
            .strip_suffix('}')
            .map(str::trim_end)
            .unwrap()
    );
    let cfg = write_config(dir.path(), "pinned.json", &pinned);
    let res = run_in(&out, &["verify-estimates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2, "stderr: {}", res.stderr);

    // Subcommand without its required section.
    let cfg = write_config(dir.path(), "nosection.json", &affine_solve_config(64, 1));
    let res = run_in(&out, &["truncation-study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2);

    // Unknown catalog case.
    let body = r#"{
        "problem": { "family": "martingale" },
        "grid": { "horizon": 1.0, "steps": 10 },
        "ensemble": { "paths": 64, "dim": 1, "seed": 1 },
        "oracle": { "mode": "catalog", "case": "nope", "y0_tolerance": 0.1 }
    }"#;
    let cfg = write_config(dir.path(), "case.json", body);
    let res = run_in(&out, &["oracle-compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2);
    assert!(res.stderr.contains("nope"));
}

#[test]
fn unsupported_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // Lattice oracle on an instance with a backward driver.
    let body = r#"{
        "problem": {
            "family": "affine",
            "params": { "a": 0.5, "b": 0.25, "c0": 0.3, "beta": 0.2, "g0": 0.1 }
        },
        "grid": { "horizon": 1.0, "steps": 10 },
        "ensemble": { "paths": 64, "dim": 1, "seed": 1 },
        "oracle": { "mode": "lattice", "lattice_steps": 100, "y0_tolerance": 0.1 }
    }"#;
    let cfg = write_config(dir.path(), "lattice.json", body);
    let res = run_in(&out, &["oracle-compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2, "stderr: {}", res.stderr);
    assert!(res.stderr.contains("oracle"));

    // Truncation of an instance whose g does not vanish at the origin.
    let body = r#"{
        "problem": {
            "family": "affine",
            "params": { "a": 0.5, "b": 0.25, "c0": 0.3, "beta": 0.2, "g0": 0.1 }
        },
        "grid": { "horizon": 1.0, "steps": 10 },
        "ensemble": { "paths": 64, "dim": 1, "seed": 1 },
        "truncation": { "n_levels": [2, 4, 8], "m_levels": [1, 2] }
    }"#;
    let cfg = write_config(dir.path(), "h4.json", body);
    let res = run_in(&out, &["truncation-study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 2, "stderr: {}", res.stderr);
    assert!(res.stderr.contains("g(t,0,0)"));
}

#[test]
fn output_dir_comes_from_env_then_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_out = dir.path().join("from_config");
    let body = format!(
        r#"{{
        "problem": {{ "family": "martingale" }},
        "grid": {{ "horizon": 1.0, "steps": 5 }},
        "ensemble": {{ "paths": 32, "dim": 1, "seed": 1 }},
        "output_dir": {}
    }}"#,
        serde_json::to_string(config_out.to_str().unwrap()).unwrap()
    );
    let cfg = write_config(dir.path(), "c.json", &body);

    // Without the env var the configured directory is used.
    let output = Command::new(bin())
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env_remove("RBDSDE_OUT")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(config_out.join("report.json").exists());

    // With the env var set, it wins.
    let env_out = dir.path().join("from_env");
    let res = run_in(&env_out, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.code, 0);
    assert!(env_out.join("report.json").exists());
}
