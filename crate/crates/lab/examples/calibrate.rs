//! One-off calibration sweep: prints, for every battery instance, the raw
//! lhs/rhs ratios of the three inequality checkers and the tolerance
//! multiplier the expansion identity would need. Used to freeze the
//! constants in `constants.rs`; not part of the test suite.

use std::sync::Arc;

use rbdsde_core::families::{battery, shift_f, shift_terminal};
use rbdsde_core::paths::{make_grid, simulate_ensemble};
use rbdsde_core::solver::{solve_reflected_bdsde, SolverConfig};
use rbdsde_core::{check_ito_p, check_lemma31, check_lemma32, check_lemma33};

fn main() {
    let n = 10_000;
    let m = 50;
    let seed = 2026;
    let cfg = SolverConfig::default();

    let mut worst31 = 0.0f64;
    let mut worst32 = 0.0f64;
    let mut worst33 = 0.0f64;
    let mut worst_ito = 0.0f64;

    for spec in battery() {
        let grid = make_grid(spec.horizon(), m).unwrap();
        let ensemble = simulate_ensemble(&grid, n, spec.dim(), seed).unwrap();
        let sol = solve_reflected_bdsde(&spec, &ensemble, &cfg).unwrap();

        let l31 = check_lemma31(&sol, &spec, 1.0).unwrap();
        let r31 = if l31.rhs > 0.0 { l31.lhs / l31.rhs } else { 0.0 };

        let l32 = check_lemma32(&sol, &spec, 1.0).unwrap();
        let r32 = if l32.rhs > 0.0 { l32.lhs / l32.rhs } else { 0.0 };

        let pspec = shift_f(&shift_terminal(&spec, 0.1), 0.05);
        let psol = solve_reflected_bdsde(&pspec, &Arc::clone(&ensemble), &cfg).unwrap();
        let l33 = check_lemma33(&psol, &sol, &pspec, &spec, 1.0).unwrap();
        let r33 = if l33.rhs > 0.0 { l33.lhs / l33.rhs } else { 0.0 };

        let ito = check_ito_p(&sol, &spec, 0, m, 1.0).unwrap();
        let needed = if ito.lhs > ito.rhs && ito.tolerance > 0.0 {
            (ito.lhs - ito.rhs) / ito.tolerance
        } else {
            0.0
        };

        println!(
            "{:<42} l31 {:>9.4}  l32 {:>9.4}  l33 {:>9.4}  ito_mult {:>8.4}",
            spec.label(),
            r31,
            r32,
            r33,
            needed
        );
        worst31 = worst31.max(r31);
        worst32 = worst32.max(r32);
        worst33 = worst33.max(r33);
        worst_ito = worst_ito.max(needed);
    }

    println!();
    println!(
        "worst ratios: l31 {worst31:.4}  l32 {worst32:.4}  l33 {worst33:.4}  ito_mult {worst_ito:.4}"
    );
}
