//! Numerical laboratory for one-dimensional reflected backward doubly
//! stochastic differential equations (BDSDEs) with a continuous lower barrier.
//!
//! The object of study is the triple `(Y, Z, K)` solving, on `[0, T]`,
//!
//! ```text
//! Y_t = ξ + ∫_t^T f(s, Y_s, Z_s) ds + ∫_t^T g(s, Y_s, Z_s) dB_s
//!           + K_T − K_t − ∫_t^T Z_s · dW_s,          Y_t ≥ L_t,
//! ```
//!
//! where `W` is a d-dimensional Brownian motion integrated in the forward Itô
//! sense, `B` an independent scalar Brownian motion integrated in the
//! *backward* Itô sense, `K` is increasing with `K_0 = 0`, and the reflection
//! is minimal: `∫_0^T (Y_t − L_t) dK_t = 0`. Terminal data, coefficients and
//! barrier are Markovian: `ξ = φ(W_T)`, `L_t = ψ(t, W_t)`, and `f`, `g` are
//! deterministic functions of `(t, y, z)`.
//!
//! The crate provides, in dependency order:
//!
//! * [`paths`] — uniform time grids, coupled `(W, B)` ensembles with one
//!   counter-based RNG stream per path, and discrete forward/backward Itô
//!   integrals;
//! * [`condexp`] — least-squares conditional expectation on a polynomial
//!   basis, plus a brute-force nested Monte Carlo estimator used as an
//!   independent cross-check;
//! * [`model`] — problem descriptions (coefficients, terminal data, barrier)
//!   and statistical validation of the standing integrability/Lipschitz
//!   assumptions;
//! * [`families`] — closed-form test instances used throughout the test and
//!   study suites;
//! * [`solver`] — the backward regression scheme producing discrete
//!   `(Y, Z, K)` triples, with reflection and a global Picard variant;
//! * [`estimates`] — empirical `L^p` norms and checkers for the a-priori
//!   inequalities (martingale-integrand bound, full a-priori bound, stability
//!   under data perturbation, and the pathwise `|Y|^p` inequality);
//! * [`approx`] — truncation of unbounded data and the Cauchy convergence
//!   study for the truncation scheme;
//! * [`oracle`] — independent references: a binomial-lattice dynamic program
//!   and a catalog of closed-form solutions.
//!
//! Everything is deterministic given `(grid, paths, dim, seed)`; no global
//! state is consulted. The crate is `no_std`-compatible (with `alloc`) when
//! the default `std` feature is disabled.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod approx;
pub mod condexp;
pub mod error;
pub mod estimates;
pub mod families;
pub mod model;
pub mod oracle;
pub mod paths;
pub mod solver;

pub use approx::{build_truncated_problem, cauchy_study, truncate, CauchyReport, TruncationLevels};
pub use error::{Error, Result};
pub use estimates::{
    check_ito_p, check_lemma31, check_lemma32, check_lemma33, lp_norms, skorokhod_residual,
    Margin, NormTriple,
};
pub use model::{BarrierSpec, CoefficientSpec, ProblemSpec, TerminalSpec};
pub use oracle::{
    catalog_problem, catalog_residual, catalog_solution, compare_solutions, lattice_y0_error,
    reference_catalog, snell_lattice, CatalogCase, ErrorReport, LatticeSolution,
};
pub use paths::{make_grid, simulate_ensemble, PathEnsemble, TimeGrid};
pub use solver::{
    picard_solve, solve_bdsde, solve_reflected_bdsde, DiscreteSolution, FStepMode, SolverConfig,
};
