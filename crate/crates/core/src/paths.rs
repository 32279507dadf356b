//! Uniform time grids, coupled Brownian ensembles and discrete Itô integrals.
//!
//! Every experiment is driven by two independent Brownian families sampled on
//! the same uniform grid: a d-dimensional motion `W` (integrated forward) and
//! a scalar motion `B` (integrated backward). Increments are drawn from one
//! counter-based ChaCha stream per path, so an ensemble is bit-identical for a
//! given `(grid, n_paths, dim, seed)` no matter how the work is scheduled, and
//! path `n` of a small ensemble equals path `n` of a larger one.
//!
//! Discrete integral conventions on the grid `0 = t_0 < … < t_M = T`:
//!
//! ```text
//! forward:   ∫ a dD ≈ Σ_{i<M} a_i       (D_{i+1} − D_i)     (left endpoint)
//! backward:  ∫ a dD ≈ Σ_{i<M} a_{i+1}   (D_{i+1} − D_i)     (right endpoint)
//! ```
//!
//! so for quadratic-variation effects the two differ by `Σ Δa·ΔD`, and the
//! `½ (ΔD)²` Itô correction flips sign between them.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

/// Uniform partition of `[0, horizon]` into `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    /// Final time `T`.
    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `M`; the grid has `M + 1` nodes.
    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Mesh width `T / M`. All discrete time sums use this constant value.
    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_i = T · i / M`; exact at both endpoints.
    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        self.horizon * (i as f64 / self.steps as f64)
    }
}

/// Builds a uniform grid, rejecting non-positive or non-finite horizons and
/// empty partitions.
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidGrid { horizon, steps });
    }
    Ok(TimeGrid { horizon, steps })
}

/// A coupled `(W, B)` ensemble on a uniform grid.
///
/// Layout is row-major and flat: `w[n][i][j]` at `(n·(M+1) + i)·d + j` and
/// `b[n][i]` at `n·(M+1) + i`, with `W_0 = B_0 = 0` on every path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl PathEnsemble {
    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Component `j` of `W_{t_i}` on path `n`.
    #[inline]
    pub fn w(&self, n: usize, i: usize, j: usize) -> f64 {
        self.w[(n * (self.grid.steps + 1) + i) * self.dim + j]
    }

    /// The d-vector `W_{t_i}` on path `n`.
    #[inline]
    pub fn w_node(&self, n: usize, i: usize) -> &[f64] {
        let start = (n * (self.grid.steps + 1) + i) * self.dim;
        &self.w[start..start + self.dim]
    }

    /// Terminal state `W_T` on path `n`.
    #[inline]
    pub fn terminal(&self, n: usize) -> &[f64] {
        self.w_node(n, self.grid.steps)
    }

    /// `B_{t_i}` on path `n`.
    #[inline]
    pub fn b(&self, n: usize, i: usize) -> f64 {
        self.b[n * (self.grid.steps + 1) + i]
    }

    /// Forward increment `W^j_{t_{i+1}} − W^j_{t_i}`.
    #[inline]
    pub fn dw(&self, n: usize, i: usize, j: usize) -> f64 {
        self.w(n, i + 1, j) - self.w(n, i, j)
    }

    /// Forward increment `B_{t_{i+1}} − B_{t_i}`.
    #[inline]
    pub fn db(&self, n: usize, i: usize) -> f64 {
        self.b(n, i + 1) - self.b(n, i)
    }

    /// Raw flat `W` block (path-major, then node, then component).
    pub fn w_flat(&self) -> &[f64] {
        &self.w
    }

    /// Raw flat `B` block (path-major, then node).
    pub fn b_flat(&self) -> &[f64] {
        &self.b
    }

    /// Reassembles an ensemble from raw blocks, e.g. after deserialisation.
    /// Shapes are validated; the spectral/statistical content is the caller's
    /// responsibility.
    pub fn from_parts(
        grid: TimeGrid,
        n_paths: usize,
        dim: usize,
        seed: u64,
        w: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Arc<Self>> {
        if n_paths == 0 || dim == 0 {
            return Err(Error::ShapeError {
                what: "ensemble dimensions",
                expected: 1,
                got: 0,
            });
        }
        let nodes = grid.steps + 1;
        if w.len() != n_paths * nodes * dim {
            return Err(Error::ShapeError {
                what: "W block",
                expected: n_paths * nodes * dim,
                got: w.len(),
            });
        }
        if b.len() != n_paths * nodes {
            return Err(Error::ShapeError {
                what: "B block",
                expected: n_paths * nodes,
                got: b.len(),
            });
        }
        Ok(Arc::new(PathEnsemble {
            grid,
            n_paths,
            dim,
            seed,
            w,
            b,
        }))
    }
}

/// Draws a coupled `(W, B)` ensemble.
///
/// Path `n` uses `ChaCha8` seeded with `seed` on stream `n`; within a path the
/// draw order is frozen as: for each step, `d` standard normals for the `W`
/// increments followed by one for the `B` increment, each scaled by `√dt`.
/// This makes output independent of path iteration order and lets callers
/// shard path generation without changing results.
pub fn simulate_ensemble(
    grid: &TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
) -> Result<Arc<PathEnsemble>> {
    if n_paths == 0 || dim == 0 {
        return Err(Error::ShapeError {
            what: "ensemble dimensions",
            expected: 1,
            got: 0,
        });
    }
    let m = grid.steps;
    let nodes = m + 1;
    let sqrt_dt = grid.dt().sqrt();
    let mut w = vec![0.0; n_paths * nodes * dim];
    let mut b = vec![0.0; n_paths * nodes];
    for n in 0..n_paths {
        let mut rng = path_rng(seed, n as u64);
        let wrow = &mut w[n * nodes * dim..(n + 1) * nodes * dim];
        let brow = &mut b[n * nodes..(n + 1) * nodes];
        for i in 0..m {
            for j in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                wrow[(i + 1) * dim + j] = wrow[i * dim + j] + sqrt_dt * z;
            }
            let z: f64 = rng.sample(StandardNormal);
            brow[i + 1] = brow[i] + sqrt_dt * z;
        }
    }
    Ok(Arc::new(PathEnsemble {
        grid: *grid,
        n_paths,
        dim,
        seed,
        w,
        b,
    }))
}

/// One ChaCha stream per path: `seed` selects the key, the stream counter the
/// path. Also used by the nested resimulation in `condexp`.
pub(crate) fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Left-endpoint (forward Itô) sum `Σ_{i<M} a_i (D_{i+1} − D_i)` of a sampled
/// integrand against a sampled driver, both given on all `M + 1` nodes.
pub fn forward_ito_integral(integrand: &[f64], driver: &[f64], grid: &TimeGrid) -> Result<f64> {
    check_node_len(integrand, grid, "integrand")?;
    check_node_len(driver, grid, "driver")?;
    let mut acc = 0.0;
    for i in 0..grid.steps {
        acc += integrand[i] * (driver[i + 1] - driver[i]);
    }
    Ok(acc)
}

/// Right-endpoint (backward Itô) sum `Σ_{i<M} a_{i+1} (D_{i+1} − D_i)`.
pub fn backward_ito_integral(integrand: &[f64], driver: &[f64], grid: &TimeGrid) -> Result<f64> {
    check_node_len(integrand, grid, "integrand")?;
    check_node_len(driver, grid, "driver")?;
    let mut acc = 0.0;
    for i in 0..grid.steps {
        acc += integrand[i + 1] * (driver[i + 1] - driver[i]);
    }
    Ok(acc)
}

fn check_node_len(xs: &[f64], grid: &TimeGrid, what: &'static str) -> Result<()> {
    if xs.len() != grid.steps + 1 {
        return Err(Error::ShapeError {
            what,
            expected: grid.steps + 1,
            got: xs.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_are_exact_for_quarter_steps() {
        let grid = make_grid(1.0, 4).unwrap();
        assert_eq!(grid.dt(), 0.25);
        let expected = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(grid.t(i), *e);
        }
        assert_eq!(grid.t(grid.steps()), grid.horizon());
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(matches!(make_grid(0.0, 4), Err(Error::InvalidGrid { .. })));
        assert!(matches!(make_grid(-1.0, 4), Err(Error::InvalidGrid { .. })));
        assert!(matches!(make_grid(1.0, 0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(
            make_grid(f64::NAN, 4),
            Err(Error::InvalidGrid { .. })
        ));
    }

    #[test]
    fn ensemble_starts_at_zero_and_has_matching_shapes() {
        let grid = make_grid(2.0, 8).unwrap();
        let ens = simulate_ensemble(&grid, 5, 3, 7).unwrap();
        assert_eq!(ens.n_paths(), 5);
        assert_eq!(ens.dim(), 3);
        for n in 0..5 {
            for j in 0..3 {
                assert_eq!(ens.w(n, 0, j), 0.0);
            }
            assert_eq!(ens.b(n, 0), 0.0);
        }
        assert_eq!(ens.w_flat().len(), 5 * 9 * 3);
        assert_eq!(ens.b_flat().len(), 5 * 9);
    }

    #[test]
    fn same_seed_reproduces_and_other_seed_differs() {
        let grid = make_grid(1.0, 16).unwrap();
        let a = simulate_ensemble(&grid, 4, 2, 99).unwrap();
        let b = simulate_ensemble(&grid, 4, 2, 99).unwrap();
        let c = simulate_ensemble(&grid, 4, 2, 100).unwrap();
        assert_eq!(a.w_flat(), b.w_flat());
        assert_eq!(a.b_flat(), b.b_flat());
        assert_ne!(a.w_flat(), c.w_flat());
    }

    #[test]
    fn paths_are_stable_under_ensemble_growth() {
        // Counter-based streams: path n never depends on how many other
        // paths were requested.
        let grid = make_grid(1.0, 8).unwrap();
        let small = simulate_ensemble(&grid, 3, 2, 11).unwrap();
        let large = simulate_ensemble(&grid, 10, 2, 11).unwrap();
        for n in 0..3 {
            for i in 0..=8 {
                assert_eq!(small.w_node(n, i), large.w_node(n, i));
                assert_eq!(small.b(n, i), large.b(n, i));
            }
        }
    }

    #[test]
    fn from_parts_round_trips_and_validates_shapes() {
        let grid = make_grid(1.0, 4).unwrap();
        let ens = simulate_ensemble(&grid, 2, 2, 5).unwrap();
        let rebuilt = PathEnsemble::from_parts(
            *ens.grid(),
            2,
            2,
            5,
            ens.w_flat().to_vec(),
            ens.b_flat().to_vec(),
        )
        .unwrap();
        assert_eq!(&*rebuilt, &*ens);
        let bad = PathEnsemble::from_parts(grid, 2, 2, 5, vec![0.0; 3], vec![0.0; 10]);
        assert!(matches!(bad, Err(Error::ShapeError { .. })));
    }

    #[test]
    fn integrals_reject_wrong_lengths() {
        let grid = make_grid(1.0, 4).unwrap();
        let short = [0.0; 4];
        let full = [0.0; 5];
        assert!(matches!(
            forward_ito_integral(&short, &full, &grid),
            Err(Error::ShapeError { .. })
        ));
        assert!(matches!(
            backward_ito_integral(&full, &short, &grid),
            Err(Error::ShapeError { .. })
        ));
    }

    #[test]
    fn forward_backward_difference_is_sum_of_increment_products() {
        let grid = make_grid(1.0, 4).unwrap();
        let a = [1.0, -2.0, 0.5, 3.0, -1.0];
        let d = [0.0, 1.0, -1.0, 2.0, 0.0];
        let fwd = forward_ito_integral(&a, &d, &grid).unwrap();
        let bwd = backward_ito_integral(&a, &d, &grid).unwrap();
        let mut cross = 0.0;
        for i in 0..4 {
            cross += (a[i + 1] - a[i]) * (d[i + 1] - d[i]);
        }
        assert!((bwd - fwd - cross).abs() < 1e-12);
    }

    #[test]
    fn deterministic_integrand_constant_one_telescopes() {
        let grid = make_grid(1.0, 8).unwrap();
        let ones = [1.0; 9];
        let driver = [0.0, 0.25, 0.5, 0.1, -0.3, 0.0, 0.7, 0.9, 1.5];
        let fwd = forward_ito_integral(&ones, &driver, &grid).unwrap();
        let bwd = backward_ito_integral(&ones, &driver, &grid).unwrap();
        assert!((fwd - 1.5).abs() < 1e-12);
        assert!((bwd - 1.5).abs() < 1e-12);
    }
}
