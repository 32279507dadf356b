//! Least-squares conditional expectation on a polynomial basis.
//!
//! At grid step `i` the discrete information state is `(W_{t_i}, ΔB_i)`: the
//! current position of the forward motion together with the backward
//! increment spanning the step. A conditional expectation `E[V | W_{t_i},
//! ΔB_i]` is estimated by regressing sampled values of `V` onto all monomials
//! of total degree `≤ max_degree` in these `d + 1` variables. The normal
//! equations are solved by Cholesky factorisation; if the design is
//! numerically singular (as it always is at `t_0`, where the `W` columns are
//! identically zero) a ridge of `1e−10 ·` the trace scale is added to the
//! diagonal before giving up.
//!
//! [`nested_mc_condexp`] provides an independent brute-force estimate of the
//! same quantity by resimulating the forward motion beyond `t_i` while
//! holding `W_{t_i}` and the whole backward path fixed; it is used to
//! cross-check the regression, not inside the solver.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::paths::{path_rng, PathEnsemble, TimeGrid};

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

/// Keeps coefficient magnitudes produced with equal seeds out of lockstep
/// with the draws of `simulate_ensemble` for the same seed.
const NESTED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Default ceiling on `paths · inner_samples · remaining_steps · dim` for
/// nested resimulation.
pub const DEFAULT_NESTED_BUDGET: u64 = 1_000_000_000;

/// Total-degree polynomial basis in the `d + 1` step variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegressionBasis {
    max_degree: usize,
}

impl RegressionBasis {
    pub fn new(max_degree: usize) -> Self {
        RegressionBasis { max_degree }
    }

    #[inline]
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of basis functions for state dimension `dim`:
    /// `C(dim + 1 + max_degree, max_degree)`.
    pub fn size(&self, dim: usize) -> usize {
        binomial(dim + 1 + self.max_degree, self.max_degree)
    }

    /// Exponent multi-indices in graded-lexicographic order; the constant
    /// monomial comes first, so degree 0 reduces to a plain sample mean.
    pub fn exponents(&self, dim: usize) -> Vec<Vec<u8>> {
        let n_vars = dim + 1;
        let mut out = Vec::with_capacity(self.size(dim));
        let mut current = vec![0u8; n_vars];
        for total in 0..=self.max_degree {
            push_exponents(&mut out, &mut current, 0, total as u8);
        }
        out
    }
}

impl Default for RegressionBasis {
    fn default() -> Self {
        RegressionBasis::new(2)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn push_exponents(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: u8) {
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        push_exponents(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// A dense design matrix: one row of basis-function values per path.
#[derive(Clone, Debug)]
pub struct StepFeatures {
    n_paths: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl StepFeatures {
    /// Evaluates the basis at step `i` of the ensemble (features `W_{t_i}`
    /// and `ΔB_i`, so `i` must index an interval: `i < M`).
    pub fn from_ensemble(
        ensemble: &PathEnsemble,
        step: usize,
        basis: &RegressionBasis,
    ) -> Result<StepFeatures> {
        let m = ensemble.grid().steps();
        if step >= m {
            return Err(Error::ShapeError {
                what: "step index",
                expected: m - 1,
                got: step,
            });
        }
        let dim = ensemble.dim();
        let exps = basis.exponents(dim);
        let n_cols = exps.len();
        let n_paths = ensemble.n_paths();
        if n_paths <= n_cols {
            return Err(Error::ShapeError {
                what: "paths for regression",
                expected: n_cols + 1,
                got: n_paths,
            });
        }
        let mut data = vec![0.0; n_paths * n_cols];
        let mut vars = vec![0.0; dim + 1];
        for n in 0..n_paths {
            vars[..dim].copy_from_slice(ensemble.w_node(n, step));
            vars[dim] = ensemble.db(n, step);
            let row = &mut data[n * n_cols..(n + 1) * n_cols];
            for (c, e) in exps.iter().enumerate() {
                let mut v = 1.0;
                for (x, &p) in vars.iter().zip(e.iter()) {
                    for _ in 0..p {
                        v *= *x;
                    }
                }
                row[c] = v;
            }
        }
        Ok(StepFeatures {
            n_paths,
            n_cols,
            data,
        })
    }

    /// Builds a design from explicit columns (used for custom feature sets in
    /// tests and diagnostics). All columns must share one length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<StepFeatures> {
        let n_cols = cols.len();
        if n_cols == 0 {
            return Err(Error::ShapeError {
                what: "feature columns",
                expected: 1,
                got: 0,
            });
        }
        let n_paths = cols[0].len();
        for c in cols {
            if c.len() != n_paths {
                return Err(Error::ShapeError {
                    what: "feature column length",
                    expected: n_paths,
                    got: c.len(),
                });
            }
        }
        if n_paths <= n_cols {
            return Err(Error::ShapeError {
                what: "paths for regression",
                expected: n_cols + 1,
                got: n_paths,
            });
        }
        let mut data = vec![0.0; n_paths * n_cols];
        for n in 0..n_paths {
            for (c, col) in cols.iter().enumerate() {
                data[n * n_cols + c] = col[n];
            }
        }
        Ok(StepFeatures {
            n_paths,
            n_cols,
            data,
        })
    }

    #[inline]
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_cols..(n + 1) * self.n_cols]
    }
}

/// One regression of sampled values onto the step basis.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CondExpEstimate {
    /// Basis coefficients in `RegressionBasis::exponents` order.
    pub coefficients: Vec<f64>,
    /// Fitted values, one per path.
    pub predictions: Vec<f64>,
    /// Root-mean-square of `target − prediction` over paths.
    pub residual_rms: f64,
}

/// A factorised design, ready to fit any number of targets. The normal
/// matrix is factorised once; each target costs one pair of triangular
/// solves plus a matrix-vector product.
///
/// Columns are equilibrated to unit root-mean-square before the normal
/// equations are formed: monomials in `W` and `ΔB` live on very different
/// scales (`ΔB ~ √dt`), and without equilibration the condition number of
/// the normal matrix would erode the near-machine-precision recovery of
/// in-span targets that downstream exactness guarantees rely on.
pub struct FittedStep {
    feats: StepFeatures,
    col_scale: Vec<f64>,
    chol: Vec<f64>,
    used_ridge: bool,
}

impl FittedStep {
    pub fn new(feats: StepFeatures) -> Result<FittedStep> {
        let k = feats.n_cols;
        let n = feats.n_paths;
        let mut col_scale = vec![0.0; k];
        for nn in 0..n {
            let row = feats.row(nn);
            for c in 0..k {
                col_scale[c] += row[c] * row[c];
            }
        }
        // Identically-zero columns (all `W`-monomials at t_0, where W ≡ 0
        // exactly) are excluded from the solve: their least-norm coefficient
        // is zero, and routing them through the ridge would bias every other
        // coefficient at the ridge scale. They keep scale 1 and an identity
        // row in the normal matrix, which forces a zero coefficient.
        let mut inactive = vec![false; k];
        for (c, s) in col_scale.iter_mut().enumerate() {
            if *s == 0.0 || !s.is_finite() {
                inactive[c] = true;
                *s = 1.0;
            } else {
                *s = (*s / n as f64).sqrt();
            }
        }
        let mut xtx = vec![0.0; k * k];
        let mut scaled = vec![0.0; k];
        for nn in 0..n {
            let row = feats.row(nn);
            for c in 0..k {
                scaled[c] = row[c] / col_scale[c];
            }
            for a in 0..k {
                let ra = scaled[a];
                for b in 0..=a {
                    xtx[a * k + b] += ra * scaled[b];
                }
            }
        }
        for a in 0..k {
            for b in (a + 1)..k {
                xtx[a * k + b] = xtx[b * k + a];
            }
        }
        for (c, &off) in inactive.iter().enumerate() {
            if off {
                xtx[c * k + c] = 1.0;
            }
        }
        let mut chol = xtx.clone();
        if cholesky_in_place(&mut chol, k) {
            return Ok(FittedStep {
                feats,
                col_scale,
                chol,
                used_ridge: false,
            });
        }
        let trace: f64 = (0..k).map(|a| xtx[a * k + a]).sum();
        if !(trace > 0.0) {
            return Err(Error::SingularRegression);
        }
        let ridge = 1e-10 * trace / k as f64;
        let mut ridged = xtx;
        for a in 0..k {
            ridged[a * k + a] += ridge;
        }
        if !cholesky_in_place(&mut ridged, k) {
            return Err(Error::SingularRegression);
        }
        Ok(FittedStep {
            feats,
            col_scale,
            chol: ridged,
            used_ridge: true,
        })
    }

    /// Whether the ridge fallback was needed for this step.
    pub fn used_ridge(&self) -> bool {
        self.used_ridge
    }

    pub fn n_paths(&self) -> usize {
        self.feats.n_paths
    }

    /// Solves the normal equations for `targets` and evaluates the fit.
    pub fn fit(&self, targets: &[f64]) -> Result<CondExpEstimate> {
        let n = self.feats.n_paths;
        let k = self.feats.n_cols;
        if targets.len() != n {
            return Err(Error::ShapeError {
                what: "regression targets",
                expected: n,
                got: targets.len(),
            });
        }
        let mut rhs = vec![0.0; k];
        for (nn, &t) in targets.iter().enumerate() {
            let row = self.feats.row(nn);
            for c in 0..k {
                rhs[c] += row[c] / self.col_scale[c] * t;
            }
        }
        cholesky_solve(&self.chol, k, &mut rhs);
        // Undo the column equilibration so coefficients refer to the raw
        // monomials.
        for c in 0..k {
            rhs[c] /= self.col_scale[c];
        }
        let mut predictions = vec![0.0; n];
        let mut ss = 0.0;
        for nn in 0..n {
            let row = self.feats.row(nn);
            let mut p = 0.0;
            for c in 0..k {
                p += row[c] * rhs[c];
            }
            predictions[nn] = p;
            let r = targets[nn] - p;
            ss += r * r;
        }
        Ok(CondExpEstimate {
            coefficients: rhs,
            predictions,
            residual_rms: (ss / n as f64).sqrt(),
        })
    }
}

/// Lower-triangular Cholesky in place; returns `false` when a pivot falls
/// below `1e−12 ·` the largest diagonal entry, which we treat as singular.
fn cholesky_in_place(a: &mut [f64], k: usize) -> bool {
    let mut max_diag = 0.0f64;
    for i in 0..k {
        max_diag = max_diag.max(a[i * k + i].abs());
    }
    let floor = 1e-12 * max_diag;
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for l in 0..j {
                s -= a[i * k + l] * a[j * k + l];
            }
            if i == j {
                if !(s > floor) || !s.is_finite() {
                    return false;
                }
                a[i * k + i] = s.sqrt();
            } else {
                a[i * k + j] = s / a[j * k + j];
            }
        }
        for j in (i + 1)..k {
            a[i * k + j] = 0.0;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place given the lower factor.
fn cholesky_solve(chol: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s -= chol[i * k + j] * b[j];
        }
        b[i] = s / chol[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in (i + 1)..k {
            s -= chol[j * k + i] * b[j];
        }
        b[i] = s / chol[i * k + i];
    }
}

/// Regresses `targets` (one value per path) onto the step-`i` basis.
pub fn condexp_estimate(
    targets: &[f64],
    ensemble: &PathEnsemble,
    step: usize,
    basis: &RegressionBasis,
) -> Result<CondExpEstimate> {
    let feats = StepFeatures::from_ensemble(ensemble, step, basis)?;
    FittedStep::new(feats)?.fit(targets)
}

/// Read-only view of one (possibly resimulated) path handed to nested Monte
/// Carlo targets.
#[derive(Clone, Copy)]
pub struct PathRef<'a> {
    grid: &'a TimeGrid,
    dim: usize,
    w: &'a [f64],
    b: &'a [f64],
}

impl<'a> PathRef<'a> {
    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Component `j` of the forward motion at node `i`.
    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.dim + j]
    }

    /// The backward motion at node `i`.
    #[inline]
    pub fn b(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// Terminal state of the forward motion.
    #[inline]
    pub fn terminal(&self) -> &[f64] {
        &self.w[self.grid.steps() * self.dim..]
    }
}

/// Brute-force conditional expectation at step `i` under the default work
/// budget; see [`nested_mc_condexp_with_budget`].
pub fn nested_mc_condexp<F>(
    target: F,
    ensemble: &PathEnsemble,
    step: usize,
    inner_samples: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(PathRef<'_>) -> f64,
{
    nested_mc_condexp_with_budget(target, ensemble, step, inner_samples, seed, DEFAULT_NESTED_BUDGET)
}

/// For each path, holds `W` up to `t_i` and the entire backward path fixed,
/// resimulates the forward motion beyond `t_i` `inner_samples` times, and
/// averages `target` over the continuations. Refuses outright (budget check,
/// no partial work) when `paths · inner · (M − i) · d` exceeds `budget`.
pub fn nested_mc_condexp_with_budget<F>(
    target: F,
    ensemble: &PathEnsemble,
    step: usize,
    inner_samples: usize,
    seed: u64,
    budget: u64,
) -> Result<Vec<f64>>
where
    F: Fn(PathRef<'_>) -> f64,
{
    let grid = *ensemble.grid();
    let m = grid.steps();
    if step >= m {
        return Err(Error::ShapeError {
            what: "step index",
            expected: m - 1,
            got: step,
        });
    }
    if inner_samples == 0 {
        return Err(Error::ShapeError {
            what: "inner samples",
            expected: 1,
            got: 0,
        });
    }
    let dim = ensemble.dim();
    let required = (ensemble.n_paths() as u64)
        .saturating_mul(inner_samples as u64)
        .saturating_mul((m - step) as u64)
        .saturating_mul(dim as u64);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let sqrt_dt = grid.dt().sqrt();
    let nodes = m + 1;
    let mut out = vec![0.0; ensemble.n_paths()];
    let mut wbuf = vec![0.0; nodes * dim];
    let mut bbuf = vec![0.0; nodes];
    for n in 0..ensemble.n_paths() {
        for i in 0..nodes {
            wbuf[i * dim..(i + 1) * dim].copy_from_slice(ensemble.w_node(n, i));
            bbuf[i] = ensemble.b(n, i);
        }
        let mut rng = path_rng(seed ^ NESTED_SALT, n as u64);
        let mut acc = 0.0;
        for _ in 0..inner_samples {
            for i in step..m {
                for j in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    wbuf[(i + 1) * dim + j] = wbuf[i * dim + j] + sqrt_dt * z;
                }
            }
            acc += target(PathRef {
                grid: &grid,
                dim,
                w: &wbuf,
                b: &bbuf,
            });
        }
        out[n] = acc / inner_samples as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{make_grid, simulate_ensemble};

    #[test]
    fn basis_sizes_match_the_binomial_count() {
        assert_eq!(RegressionBasis::new(0).size(1), 1);
        assert_eq!(RegressionBasis::new(1).size(1), 3);
        assert_eq!(RegressionBasis::new(2).size(1), 6);
        assert_eq!(RegressionBasis::new(2).size(2), 10);
        assert_eq!(RegressionBasis::new(3).size(2), 20);
        for degree in 0..4 {
            for dim in 1..4 {
                let b = RegressionBasis::new(degree);
                assert_eq!(b.exponents(dim).len(), b.size(dim));
            }
        }
    }

    #[test]
    fn exponent_order_starts_with_the_constant_and_is_graded() {
        let exps = RegressionBasis::new(2).exponents(1);
        assert_eq!(exps[0], vec![0, 0]);
        let degrees: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let mut sorted = degrees.clone();
        sorted.sort_unstable();
        assert_eq!(degrees, sorted);
    }

    #[test]
    fn in_span_targets_are_recovered_to_machine_precision() {
        let grid = make_grid(1.0, 8).unwrap();
        let ens = simulate_ensemble(&grid, 400, 1, 21).unwrap();
        let step = 4;
        let targets: Vec<f64> = (0..400)
            .map(|n| {
                let w = ens.w(n, step, 0);
                let db = ens.db(n, step);
                3.0 + 2.0 * w - db + 0.5 * w * w
            })
            .collect();
        let est = condexp_estimate(&targets, &ens, step, &RegressionBasis::new(2)).unwrap();
        assert!(est.residual_rms < 1e-10, "rms = {}", est.residual_rms);
        for (p, t) in est.predictions.iter().zip(targets.iter()) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn step_zero_design_is_degenerate_but_needs_no_ridge() {
        // W ≡ 0 at t_0 produces exactly zero columns; these are excluded
        // from the solve rather than ridged, so the constant is recovered
        // at machine precision and the zero columns get zero coefficients.
        let grid = make_grid(1.0, 8).unwrap();
        let ens = simulate_ensemble(&grid, 200, 1, 3).unwrap();
        let feats = StepFeatures::from_ensemble(&ens, 0, &RegressionBasis::new(2)).unwrap();
        let fitted = FittedStep::new(feats).unwrap();
        assert!(!fitted.used_ridge());
        let est = fitted.fit(&vec![2.5; 200]).unwrap();
        for p in &est.predictions {
            assert!((p - 2.5).abs() < 1e-13);
        }
        // Exponent order for d = 1: (w, db). Columns with a w-power are the
        // zero ones at t_0.
        let exps = RegressionBasis::new(2).exponents(1);
        for (c, e) in exps.iter().enumerate() {
            if e[0] > 0 {
                assert_eq!(est.coefficients[c], 0.0);
            }
        }
    }

    #[test]
    fn genuinely_collinear_designs_fall_back_to_the_ridge() {
        let col: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let ones = vec![1.0; 100];
        let feats = StepFeatures::from_columns(&[ones, col.clone(), col.clone()]).unwrap();
        let fitted = FittedStep::new(feats).unwrap();
        assert!(fitted.used_ridge());
        // The fit itself must still reproduce an in-span target well.
        let target: Vec<f64> = col.iter().map(|v| 2.0 + 3.0 * v).collect();
        let est = fitted.fit(&target).unwrap();
        for (p, t) in est.predictions.iter().zip(target.iter()) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_targets_survive_a_long_regression_chain() {
        // Chains 50 successive step regressions of a constant target; the
        // compounded drift must stay near machine precision, which is what
        // the solver's exact constant-solution guarantee rests on.
        let grid = make_grid(1.0, 50).unwrap();
        let ens = simulate_ensemble(&grid, 1000, 1, 33).unwrap();
        let basis = RegressionBasis::new(2);
        let mut vals = vec![1.0; 1000];
        for i in (0..50).rev() {
            vals = condexp_estimate(&vals, &ens, i, &basis).unwrap().predictions;
        }
        for v in &vals {
            assert!((v - 1.0).abs() < 1e-12, "drift = {:e}", (v - 1.0).abs());
        }
    }

    #[test]
    fn refitting_predictions_is_idempotent() {
        let grid = make_grid(1.0, 8).unwrap();
        let ens = simulate_ensemble(&grid, 300, 1, 8).unwrap();
        let targets: Vec<f64> = (0..300).map(|n| ens.w(n, 5, 0).sin() + 0.3).collect();
        let feats = StepFeatures::from_ensemble(&ens, 4, &RegressionBasis::new(2)).unwrap();
        let fitted = FittedStep::new(feats).unwrap();
        let first = fitted.fit(&targets).unwrap();
        let second = fitted.fit(&first.predictions).unwrap();
        for (a, b) in first.predictions.iter().zip(second.predictions.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_errors_cover_paths_columns_and_targets() {
        let grid = make_grid(1.0, 4).unwrap();
        let ens = simulate_ensemble(&grid, 5, 1, 1).unwrap();
        // 5 paths cannot support a 6-column basis.
        assert!(matches!(
            StepFeatures::from_ensemble(&ens, 1, &RegressionBasis::new(2)),
            Err(Error::ShapeError { .. })
        ));
        assert!(matches!(
            StepFeatures::from_columns(&[]),
            Err(Error::ShapeError { .. })
        ));
        assert!(matches!(
            StepFeatures::from_columns(&[vec![1.0; 4], vec![1.0; 3]]),
            Err(Error::ShapeError { .. })
        ));
        let ens = simulate_ensemble(&grid, 50, 1, 1).unwrap();
        let feats = StepFeatures::from_ensemble(&ens, 1, &RegressionBasis::new(1)).unwrap();
        let fitted = FittedStep::new(feats).unwrap();
        assert!(matches!(
            fitted.fit(&vec![0.0; 49]),
            Err(Error::ShapeError { .. })
        ));
    }

    #[test]
    fn step_index_must_address_an_interval() {
        let grid = make_grid(1.0, 4).unwrap();
        let ens = simulate_ensemble(&grid, 50, 1, 1).unwrap();
        assert!(matches!(
            StepFeatures::from_ensemble(&ens, 4, &RegressionBasis::new(1)),
            Err(Error::ShapeError { .. })
        ));
        assert!(matches!(
            nested_mc_condexp(|p| p.b(0), &ens, 4, 10, 0),
            Err(Error::ShapeError { .. })
        ));
    }

    #[test]
    fn nested_budget_is_enforced_before_any_work() {
        let grid = make_grid(1.0, 10).unwrap();
        let ens = simulate_ensemble(&grid, 100, 2, 4).unwrap();
        let err = nested_mc_condexp_with_budget(|p| p.w(10, 0), &ens, 0, 1000, 9, 100_000);
        match err {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, 100 * 1000 * 10 * 2);
                assert_eq!(budget, 100_000);
            }
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
    }

    #[test]
    fn nested_estimate_of_a_known_conditional_mean_is_unbiased() {
        // E[W_T | W_{t_i}, B] = W_{t_i}, so the nested estimate must sit
        // within a few standard errors of the current state.
        let grid = make_grid(1.0, 5).unwrap();
        let ens = simulate_ensemble(&grid, 40, 1, 17).unwrap();
        let step = 2;
        let inner = 4000;
        let est = nested_mc_condexp(|p| p.w(5, 0), &ens, step, inner, 123).unwrap();
        let remaining = grid.horizon() - grid.t(step);
        let se = (remaining / inner as f64).sqrt();
        for n in 0..40 {
            let diff = (est[n] - ens.w(n, step, 0)).abs();
            assert!(diff < 5.0 * se, "path {n}: diff {diff}, se {se}");
        }
    }
}
