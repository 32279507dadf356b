//! Machine-readable run reports.
//!
//! Every study emits a `report.json` with a fixed schema. Two runs with
//! identical configuration and seed produce byte-identical reports except
//! for the `generated_at_unix` line, which carries the wall-clock stamp.

use std::time::{SystemTime, UNIX_EPOCH};

use rbdsde_core::model::ValidationReport;
use rbdsde_core::solver::InvariantReport;
use rbdsde_core::{CauchyReport, ErrorReport, Margin, NormTriple};
use serde::Serialize;

use crate::config::StudyKind;

/// Top-level report envelope.
#[derive(Debug, Serialize)]
pub struct Report {
    /// Report format version; always 1.
    pub schema: u32,
    /// Unix timestamp of report creation (seconds).
    pub generated_at_unix: u64,
    pub study: String,
    /// Human-readable problem label.
    pub problem: String,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub dim: usize,
    pub exponent_p: f64,
    /// Overall verdict; drives the process exit code (0 vs 1).
    pub pass: bool,
    pub results: StudyResults,
}

impl Report {
    pub fn new(
        study: StudyKind,
        problem: &str,
        seed: u64,
        paths: usize,
        steps: usize,
        dim: usize,
        exponent_p: f64,
        pass: bool,
        results: StudyResults,
    ) -> Report {
        let generated_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            schema: 1,
            generated_at_unix,
            study: study.name().to_string(),
            problem: problem.to_string(),
            seed,
            paths,
            steps,
            dim,
            exponent_p,
            pass,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Study-specific payload.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudyResults {
    Solve(SolveResults),
    VerifyEstimates(EstimateResults),
    TruncationStudy(TruncationResults),
    ConvergenceStudy(ConvergenceResults),
    OracleCompare(OracleResults),
}

/// Output of a plain solve: structural diagnostics of the computed triple.
#[derive(Debug, Serialize)]
pub struct SolveResults {
    /// Assumption checks on the problem data.
    pub validation: ValidationReport,
    /// Pathwise invariants of the computed solution.
    pub invariants: InvariantReport,
    /// Worst pathwise defect in the telescoped backward equation.
    pub equation_gap: f64,
    /// Worst pathwise discrete Skorokhod product.
    pub skorokhod_residual: f64,
    /// Monte Carlo p-norms of the solution triple.
    pub norms: NormTriple,
    /// Sample mean of `Y_0` across paths.
    pub y0_mean: f64,
    /// Standard error of the above.
    pub y0_se: f64,
}

/// Two-number summary of a mean-zero martingale increment sum.
#[derive(Debug, Serialize)]
pub struct MartingaleDiagnostic {
    pub mean: f64,
    pub se: f64,
    /// |mean| ≤ 3·se + 1e-12.
    pub pass: bool,
}

/// Output of the inequality-checker study.
#[derive(Debug, Serialize)]
pub struct EstimateResults {
    pub lemma31: Margin,
    pub lemma32: Margin,
    pub lemma33: Margin,
    pub ito_p: Margin,
    pub forward_martingale: MartingaleDiagnostic,
    pub backward_martingale: MartingaleDiagnostic,
    pub skorokhod_residual: f64,
    pub skorokhod_pass: bool,
}

/// Output of the truncation Cauchy study.
#[derive(Debug, Serialize)]
pub struct TruncationResults {
    pub cauchy: CauchyReport,
    /// Consecutive-level distances decrease strictly.
    pub strictly_decreasing: bool,
    /// Last consecutive distance over the first, when both are nonzero.
    pub final_over_first: Option<f64>,
    /// Configured cap on the above, when present.
    pub final_over_first_max: Option<f64>,
}

/// One grid refinement in the convergence study.
#[derive(Debug, Serialize)]
pub struct ConvergencePoint {
    pub steps: usize,
    pub dt: f64,
    pub y0_mean: f64,
    pub y0_se: f64,
    /// |y0_mean − reference|.
    pub error: f64,
}

/// Output of the grid-refinement study.
#[derive(Debug, Serialize)]
pub struct ConvergenceResults {
    pub reference_y0: f64,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of log(error) against log(dt).
    pub slope: f64,
    pub min_slope: f64,
}

/// Output of an oracle comparison.
#[derive(Debug, Serialize)]
pub struct OracleResults {
    pub mode: String,
    /// Catalog case or lattice description.
    pub reference: String,
    pub y0_solver: f64,
    pub y0_reference: f64,
    pub y0_error: f64,
    pub y0_tolerance: f64,
    /// Pathwise comparison against the catalog triple, when applicable.
    pub detail: Option<ErrorReport>,
    pub sup_tolerance: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_serializes_with_schema_and_stable_shape() {
        let report = Report::new(
            StudyKind::ConvergenceStudy,
            "test-problem",
            42,
            100,
            10,
            1,
            1.5,
            true,
            StudyResults::ConvergenceStudy(ConvergenceResults {
                reference_y0: 1.0,
                points: vec![ConvergencePoint {
                    steps: 10,
                    dt: 0.1,
                    y0_mean: 0.99,
                    y0_se: 0.01,
                    error: 0.01,
                }],
                slope: 0.9,
                min_slope: 0.4,
            }),
        );
        let json = report.to_json();
        assert!(json.contains("\"schema\": 1"));
        assert!(json.contains("\"generated_at_unix\""));
        assert!(json.contains("\"study\": \"convergence-study\""));
        assert!(json.contains("\"kind\": \"convergence-study\""));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["pass"], serde_json::Value::Bool(true));
    }

    #[test]
    fn reports_differ_only_in_the_timestamp_line() {
        let make = || {
            Report::new(
                StudyKind::Solve,
                "p",
                1,
                2,
                3,
                1,
                1.5,
                false,
                StudyResults::ConvergenceStudy(ConvergenceResults {
                    reference_y0: 0.0,
                    points: vec![],
                    slope: 0.0,
                    min_slope: 0.4,
                }),
            )
        };
        let a = make().to_json();
        let b = make().to_json();
        let strip = |s: &str| {
            s.lines()
                .filter(|l| !l.contains("generated_at_unix"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&a), strip(&b));
    }
}
