//! Structural reductions the solver must honor exactly, exercised over
//! randomized problem parameters.
//!
//! Two families of identities are bit-exact by design and checked as such:
//! scaling the data by a power of two scales the whole discrete solution by
//! the same factor (every arithmetic step shifts exponents only), and a
//! problem without a barrier solved by the reflected entry point matches
//! the unreflected entry point bit for bit with `K ≡ 0`.

use proptest::prelude::*;
use rbdsde_core::families;
use rbdsde_core::paths::{make_grid, simulate_ensemble};
use rbdsde_core::solver::{solve_bdsde, solve_reflected_bdsde, SolverConfig};
use rbdsde_core::{BarrierSpec, ProblemSpec};

fn affine_spec(a: f64, b: f64, c0: f64, beta: f64, g0: f64) -> ProblemSpec {
    families::affine(a, b, c0, beta, g0, 1.0, 1.5).expect("valid affine instance")
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn power_of_two_scaling_commutes_with_the_solver(
        a in -0.5f64..0.5,
        b in -0.4f64..0.4,
        c0 in -1.0f64..1.0,
        beta in 0.05f64..0.4,
        g0 in -0.3f64..0.3,
        seed in 1u64..1000,
        lambda_exp in -1i32..4,
    ) {
        let lambda = 2.0f64.powi(lambda_exp);
        let spec = affine_spec(a, b, c0, beta, g0);
        let scaled_spec = families::scale_problem(&spec, lambda);
        let grid = make_grid(1.0, 6).unwrap();
        let ens = simulate_ensemble(&grid, 64, 1, seed).unwrap();
        let cfg = SolverConfig::default();

        let base = solve_reflected_bdsde(&spec, &ens, &cfg).unwrap();
        let scaled = solve_reflected_bdsde(&scaled_spec, &ens, &cfg).unwrap();
        let expected = base.scaled(lambda);

        prop_assert_eq!(bits(scaled.y_flat()), bits(expected.y_flat()));
        prop_assert_eq!(bits(scaled.z_flat()), bits(expected.z_flat()));
        prop_assert_eq!(bits(scaled.k_flat()), bits(expected.k_flat()));
    }

    #[test]
    fn unbarriered_problems_reduce_exactly(
        a in -0.5f64..0.5,
        b in -0.4f64..0.4,
        c0 in -1.0f64..1.0,
        seed in 1u64..1000,
    ) {
        let spec = affine_spec(a, b, c0, 0.2, 0.1);
        prop_assert!(matches!(spec.barrier(), BarrierSpec::NoBarrier));
        let grid = make_grid(1.0, 6).unwrap();
        let ens = simulate_ensemble(&grid, 64, 1, seed).unwrap();
        let cfg = SolverConfig::default();

        let reflected = solve_reflected_bdsde(&spec, &ens, &cfg).unwrap();
        let plain = solve_bdsde(&spec, &ens, &cfg).unwrap();

        prop_assert_eq!(bits(reflected.y_flat()), bits(plain.y_flat()));
        prop_assert_eq!(bits(reflected.z_flat()), bits(plain.z_flat()));
        prop_assert!(reflected.k_flat().iter().all(|&k| k == 0.0));
        prop_assert!(plain.k_flat().iter().all(|&k| k == 0.0));
    }

    #[test]
    fn solutions_are_independent_of_ensemble_growth(
        seed in 1u64..500,
        extra in 1usize..40,
    ) {
        // Adding paths to the ensemble must not change the Brownian paths of
        // the existing indices (counter-based streams), though the regression
        // coefficients — and hence the solution — may of course move.
        let grid = make_grid(1.0, 5).unwrap();
        let small = simulate_ensemble(&grid, 32, 2, seed).unwrap();
        let large = simulate_ensemble(&grid, 32 + extra, 2, seed).unwrap();
        for n in 0..32 {
            for i in 0..=5 {
                for j in 0..2 {
                    prop_assert_eq!(
                        small.w(n, i, j).to_bits(),
                        large.w(n, i, j).to_bits()
                    );
                }
                prop_assert_eq!(small.b(n, i).to_bits(), large.b(n, i).to_bits());
            }
        }
    }
}
