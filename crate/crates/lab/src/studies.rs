//! Study runners: each subcommand maps to one function here that computes a
//! pass/fail verdict, a structured result payload, and plot data.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use rbdsde_core::families::{shift_f, shift_terminal};
use rbdsde_core::model::validate_problem;
use rbdsde_core::paths::{make_grid, simulate_ensemble, PathEnsemble};
use rbdsde_core::solver::{
    check_solution_invariants, equation_gap, solve_reflected_bdsde, DiscreteSolution,
};
use rbdsde_core::{
    catalog_solution, check_ito_p, check_lemma31, check_lemma32, check_lemma33, compare_solutions,
    lattice_y0_error, lp_norms, skorokhod_residual, snell_lattice, CatalogCase, ProblemSpec,
    TruncationLevels,
};

use crate::config::{ExperimentConfig, OracleMode, StudyKind};
use crate::error::{LabError, Result};
use crate::io::{self, PlotRow};
use crate::report::{
    ConvergencePoint, ConvergenceResults, EstimateResults, MartingaleDiagnostic, OracleResults,
    Report, SolveResults, StudyResults, TruncationResults,
};

/// Number of pilot paths used by the assumption validator.
const PILOT_PATHS: usize = 1000;

/// Gaps at or below this value count as numerically converged when judging
/// whether the truncation distances decrease.
const CONVERGED_FLOOR: f64 = 1e-14;

/// Everything a finished run produces.
pub struct RunOutcome {
    pub pass: bool,
    pub report_json: String,
    pub report_path: PathBuf,
    pub output_dir: PathBuf,
}

struct StudyOutput {
    pass: bool,
    results: StudyResults,
    plot: Vec<PlotRow>,
    solution: Option<DiscreteSolution>,
}

/// Runs a study end to end: compute, then write `report.json`,
/// `plotdata.csv`, and (for solve runs, on request) `solution.csv` into the
/// output directory. The `RBDSDE_OUT` environment variable overrides the
/// configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig, study: StudyKind) -> Result<RunOutcome> {
    let output = match study {
        StudyKind::Solve => solve_study(cfg)?,
        StudyKind::VerifyEstimates => verify_estimates_study(cfg)?,
        StudyKind::TruncationStudy => truncation_study(cfg)?,
        StudyKind::ConvergenceStudy => convergence_study(cfg)?,
        StudyKind::OracleCompare => oracle_compare_study(cfg)?,
    };

    let spec = cfg.build_problem()?;
    let report = Report::new(
        study,
        spec.label(),
        cfg.ensemble.seed,
        cfg.ensemble.paths,
        cfg.grid.steps,
        cfg.ensemble.dim,
        cfg.problem.exponent_p,
        output.pass,
        output.results,
    );

    let output_dir = resolve_output_dir(cfg);
    io::ensure_dir(&output_dir)?;
    let report_json = report.to_json();
    let report_path = output_dir.join("report.json");
    io::write_text(&report_path, &report_json)?;
    io::write_plotdata(&output.plot, &output_dir.join("plotdata.csv"))?;
    if let Some(sol) = &output.solution {
        if cfg.emit_solution_csv {
            io::write_solution_csv(sol, &output_dir.join("solution.csv"))?;
        }
    }

    Ok(RunOutcome {
        pass: output.pass,
        report_json,
        report_path,
        output_dir,
    })
}

fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os("RBDSDE_OUT") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output_dir.clone(),
    }
}

fn build_ensemble(cfg: &ExperimentConfig) -> Result<Arc<PathEnsemble>> {
    let grid = make_grid(cfg.grid.horizon, cfg.grid.steps)?;
    Ok(simulate_ensemble(
        &grid,
        cfg.ensemble.paths,
        cfg.ensemble.dim,
        cfg.ensemble.seed,
    )?)
}

fn solve_on(cfg: &ExperimentConfig, spec: &ProblemSpec, ensemble: &Arc<PathEnsemble>) -> Result<DiscreteSolution> {
    Ok(solve_reflected_bdsde(
        spec,
        ensemble,
        &cfg.solver.to_solver_config(),
    )?)
}

fn y0_stats(sol: &DiscreteSolution) -> (f64, f64) {
    let n = sol.n_paths();
    let mean = sol.mean_y0();
    if n < 2 {
        return (mean, 0.0);
    }
    let var = (0..n)
        .map(|nn| {
            let d = sol.y(nn, 0) - mean;
            d * d
        })
        .sum::<f64>()
        / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

fn solve_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let spec = cfg.build_problem()?;
    let validation = validate_problem(&spec, PILOT_PATHS.min(cfg.ensemble.paths.max(16)), cfg.ensemble.seed)?;
    let ensemble = build_ensemble(cfg)?;
    let sol = solve_on(cfg, &spec, &ensemble)?;
    let invariants = check_solution_invariants(&sol, &spec)?;
    let (_, gap_max) = equation_gap(&sol, &spec)?;
    let skorokhod = skorokhod_residual(&sol, &spec)?;
    let norms = lp_norms(&sol, spec.exponent_p());
    let (y0_mean, y0_se) = y0_stats(&sol);

    let pass = validation.pass && invariants.pass;

    let m = sol.grid().steps();
    let dt = sol.grid().dt();
    let n = sol.n_paths() as f64;
    let mut plot = Vec::with_capacity(2 * (m + 1));
    for i in 0..=m {
        let t = i as f64 * dt;
        let mean_y = (0..sol.n_paths()).map(|nn| sol.y(nn, i)).sum::<f64>() / n;
        let mean_k = (0..sol.n_paths()).map(|nn| sol.k(nn, i)).sum::<f64>() / n;
        plot.push(PlotRow::new("mean_y", t, mean_y));
        plot.push(PlotRow::new("mean_k", t, mean_k));
    }

    Ok(StudyOutput {
        pass,
        results: StudyResults::Solve(SolveResults {
            validation,
            invariants,
            equation_gap: gap_max,
            skorokhod_residual: skorokhod,
            norms,
            y0_mean,
            y0_se,
        }),
        plot,
        solution: Some(sol),
    })
}

fn martingale_diag(stat: rbdsde_core::estimates::TermStat) -> MartingaleDiagnostic {
    MartingaleDiagnostic {
        mean: stat.mean,
        se: stat.se,
        pass: stat.mean.abs() <= 3.0 * stat.se + 1e-12,
    }
}

fn verify_estimates_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let spec = cfg.build_problem()?;
    let ensemble = build_ensemble(cfg)?;
    let sol = solve_on(cfg, &spec, &ensemble)?;
    let est = &cfg.estimates;

    let lemma31 = check_lemma31(&sol, &spec, est.d_lemma31)?;
    let lemma32 = check_lemma32(&sol, &spec, est.d_lemma32)?;

    // Stability checker: perturb both the terminal condition and the driver,
    // re-solve on the same noise, and bound the solution gap by the data gap.
    let perturbed_spec = shift_f(
        &shift_terminal(&spec, est.perturb_terminal),
        est.perturb_f,
    );
    let perturbed_sol = solve_on(cfg, &perturbed_spec, &ensemble)?;
    let lemma33 = check_lemma33(&perturbed_sol, &sol, &perturbed_spec, &spec, est.d_lemma33)?;

    let m = sol.grid().steps();
    let ito_p = check_ito_p(&sol, &spec, 0, m, est.ito_tolerance)?;
    let (fwd, bwd) = rbdsde_core::estimates::ito_martingale_terms(&sol, &spec, 0, m)?;
    let forward_martingale = martingale_diag(fwd);
    let backward_martingale = martingale_diag(bwd);

    let skorokhod = skorokhod_residual(&sol, &spec)?;
    let skorokhod_pass = skorokhod <= 1e-12;

    let pass = lemma31.pass
        && lemma32.pass
        && lemma33.pass
        && ito_p.pass
        && forward_martingale.pass
        && backward_martingale.pass
        && skorokhod_pass;

    let plot = vec![
        PlotRow::new("slack", 1.0, lemma31.slack),
        PlotRow::new("slack", 2.0, lemma32.slack),
        PlotRow::new("slack", 3.0, lemma33.slack),
        PlotRow::new("slack", 4.0, ito_p.slack),
        PlotRow::new("martingale_mean", 1.0, forward_martingale.mean),
        PlotRow::new("martingale_mean", 2.0, backward_martingale.mean),
        PlotRow::new("skorokhod", 0.0, skorokhod),
    ];

    Ok(StudyOutput {
        pass,
        results: StudyResults::VerifyEstimates(EstimateResults {
            lemma31,
            lemma32,
            lemma33,
            ito_p,
            forward_martingale,
            backward_martingale,
            skorokhod_residual: skorokhod,
            skorokhod_pass,
        }),
        plot,
        solution: Some(sol),
    })
}

fn truncation_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let section = cfg
        .truncation
        .as_ref()
        .ok_or_else(|| LabError::Config("missing truncation section".into()))?;
    let spec = cfg.build_problem()?;
    let ensemble = build_ensemble(cfg)?;
    let levels = TruncationLevels::new(section.n_levels.clone(), section.m_levels.clone())?;
    let cauchy = rbdsde_core::cauchy_study(&spec, &ensemble, &cfg.solver.to_solver_config(), &levels)?;

    let distances: Vec<f64> = cauchy.data_pairs.iter().map(|p| p.distance_d).collect();
    // Each consecutive gap must shrink; once a gap hits the numerical floor
    // the sequence has converged and later gaps are not required to shrink
    // further.
    let strictly_decreasing = distances
        .windows(2)
        .all(|w| w[1] < w[0] || w[1] <= CONVERGED_FLOOR);
    let final_over_first = match (distances.first(), distances.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => Some(last / first),
        _ => None,
    };
    let cap_ok = match (section.final_over_first_max, final_over_first) {
        (Some(cap), Some(ratio)) => ratio <= cap,
        (Some(_), None) => distances.iter().all(|&d| d <= CONVERGED_FLOOR),
        (None, _) => true,
    };
    let pass = strictly_decreasing && cap_ok;

    let mut plot = Vec::new();
    for pair in &cauchy.data_pairs {
        let x = pair.to_level as f64;
        plot.push(PlotRow::new("distance_d", x, pair.distance_d));
        plot.push(PlotRow::new("driver_r", x, pair.driver_r));
        if let Some(ratio) = pair.ratio {
            plot.push(PlotRow::new("stability_ratio", x, ratio));
        }
        plot.push(PlotRow::new("k_gap", x, pair.k_gap));
    }
    for level in &cauchy.barrier_levels {
        let x = level.level as f64;
        plot.push(PlotRow::new(
            "barrier_skorokhod",
            x,
            level.skorokhod_vs_untruncated,
        ));
        if let Some(d) = level.distance_from_previous {
            plot.push(PlotRow::new("barrier_distance", x, d));
        }
    }

    Ok(StudyOutput {
        pass,
        results: StudyResults::TruncationStudy(TruncationResults {
            cauchy,
            strictly_decreasing,
            final_over_first,
            final_over_first_max: section.final_over_first_max,
        }),
        plot,
        solution: None,
    })
}

/// Least-squares slope of `log(error)` against `log(dt)`. Errors are floored
/// away from zero so a vanishing error cannot produce infinities.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(dt, err)| (dt.ln(), err.max(1e-16).ln()))
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn convergence_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let section = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| LabError::Config("missing convergence section".into()))?;
    let spec = cfg.build_problem()?;

    // Each refinement is an independent deterministic solve; run them in
    // parallel. Results depend only on (seed, steps), not on scheduling.
    let points: Vec<ConvergencePoint> = section
        .step_schedule
        .par_iter()
        .map(|&steps| -> Result<ConvergencePoint> {
            let grid = make_grid(cfg.grid.horizon, steps)?;
            let ensemble = simulate_ensemble(
                &grid,
                cfg.ensemble.paths,
                cfg.ensemble.dim,
                cfg.ensemble.seed,
            )?;
            let sol = solve_on(cfg, &spec, &ensemble)?;
            let (y0_mean, y0_se) = y0_stats(&sol);
            Ok(ConvergencePoint {
                steps,
                dt: grid.dt(),
                y0_mean,
                y0_se,
                error: (y0_mean - section.reference_y0).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let slope = fit_loglog_slope(
        &points
            .iter()
            .map(|pt| (pt.dt, pt.error))
            .collect::<Vec<_>>(),
    );
    let pass = slope >= section.min_slope;

    let mut plot = Vec::new();
    for pt in &points {
        plot.push(PlotRow::new("y0_error", pt.dt, pt.error));
        plot.push(PlotRow::new("y0_mean", pt.dt, pt.y0_mean));
    }

    Ok(StudyOutput {
        pass,
        results: StudyResults::ConvergenceStudy(ConvergenceResults {
            reference_y0: section.reference_y0,
            points,
            slope,
            min_slope: section.min_slope,
        }),
        plot,
        solution: None,
    })
}

fn oracle_compare_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let section = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| LabError::Config("missing oracle section".into()))?;
    let spec = cfg.build_problem()?;
    let ensemble = build_ensemble(cfg)?;
    let sol = solve_on(cfg, &spec, &ensemble)?;
    let y0_solver = sol.mean_y0();

    let results = match section.mode {
        OracleMode::Catalog => {
            let case = CatalogCase::parse(
                section
                    .case
                    .as_deref()
                    .ok_or_else(|| LabError::Config("catalog mode requires 'case'".into()))?,
            )?;
            let reference = catalog_solution(case, &ensemble)?;
            let detail = compare_solutions(&sol, &reference, spec.exponent_p())?;
            let y0_reference = reference.mean_y0();
            OracleResults {
                mode: "catalog".to_string(),
                reference: case.id().to_string(),
                y0_solver,
                y0_reference,
                y0_error: (y0_solver - y0_reference).abs(),
                y0_tolerance: section.y0_tolerance,
                detail: Some(detail),
                sup_tolerance: section.sup_tolerance,
            }
        }
        OracleMode::Lattice => {
            let steps = section
                .lattice_steps
                .ok_or_else(|| LabError::Config("lattice mode requires 'lattice_steps'".into()))?;
            let lattice = snell_lattice(&spec, steps)?;
            OracleResults {
                mode: "lattice".to_string(),
                reference: format!("lattice({steps} steps)"),
                y0_solver,
                y0_reference: lattice.y0(),
                y0_error: lattice_y0_error(&sol, &lattice),
                y0_tolerance: section.y0_tolerance,
                detail: None,
                sup_tolerance: None,
            }
        }
    };

    let y0_ok = results.y0_error <= results.y0_tolerance;
    let sup_ok = match (&results.detail, results.sup_tolerance) {
        (Some(detail), Some(cap)) => detail.sup_y_error <= cap,
        _ => true,
    };
    let pass = y0_ok && sup_ok;

    let plot = vec![
        PlotRow::new("y0_solver", 0.0, results.y0_solver),
        PlotRow::new("y0_reference", 0.0, results.y0_reference),
        PlotRow::new("y0_error", 0.0, results.y0_error),
    ];

    Ok(StudyOutput {
        pass,
        results: StudyResults::OracleCompare(results),
        plot,
        solution: Some(sol),
    })
}
