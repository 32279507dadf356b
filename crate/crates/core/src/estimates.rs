//! Empirical norm functionals and a priori inequality checks.
//!
//! The solution spaces are measured by three empirical norms on a discrete
//! solution: `E[sup_i |Y_i|^p]` (the sup-norm space), `E[(Σ_i |Z_i|² dt)^{p/2}]`
//! (the square-function space) and `E[|K_M|^p]` (increasing processes).
//!
//! The inequality checkers turn existential a priori estimates — "there is a
//! constant `d` such that lhs ≤ d·rhs" — into falsifiable regressions: the
//! constant is supplied from configuration (fitted once per instance
//! battery, then frozen) and each check reports both sides, the slack
//! `d·rhs − lhs`, and a pass flag. Time integrals use left-endpoint sums;
//! stochastic `dW` sums use left endpoints and `dB` sums right endpoints,
//! matching the solver's conventions.
//!
//! All checkers are pure: identical inputs produce identical margins.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::DiscreteSolution;

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

/// The constant of the `p`-Itô expansion, `c(p) = p(p−1)/2`.
#[inline]
pub fn c_p(p: f64) -> f64 {
    p * (p - 1.0) / 2.0
}

/// `ŷ = sign(y)·1_{y≠0}`.
#[inline]
fn sgn(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|y|^{p−2}·1_{y≠0}`, the indicator convention avoiding the singular
/// negative power at zero.
#[inline]
fn abs_pow_pm2(y: f64, p: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y.abs().powf(p - 2.0)
    }
}

fn mean_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The three empirical solution norms with Monte Carlo standard errors.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NormTriple {
    /// `E[sup_i |Y_i|^p]`.
    pub sp_norm: f64,
    /// `E[(Σ_i |Z_i|² dt)^{p/2}]`.
    pub mp_norm: f64,
    /// `E[|K_M|^p]`.
    pub k_norm: f64,
    pub sp_se: f64,
    pub mp_se: f64,
    pub k_se: f64,
}

/// One checked inequality: `lhs ≤ constant_d · rhs` within `tolerance`.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Margin {
    pub lhs: f64,
    pub rhs: f64,
    /// The configured constant multiplying `rhs`.
    pub constant_d: f64,
    /// `constant_d·rhs − lhs`; negative means the inequality failed.
    pub slack: f64,
    /// Absolute allowance below zero slack that still passes.
    pub tolerance: f64,
    pub pass: bool,
}

impl Margin {
    fn build(lhs: f64, rhs: f64, constant_d: f64, tolerance: f64) -> Margin {
        let slack = constant_d * rhs - lhs;
        Margin {
            lhs,
            rhs,
            constant_d,
            slack,
            tolerance,
            pass: slack >= -tolerance,
        }
    }
}

/// Mean and standard error of one empirical term.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TermStat {
    pub mean: f64,
    pub se: f64,
}

fn compatible(sol: &DiscreteSolution, spec: &ProblemSpec) -> Result<()> {
    if sol.dim() != spec.dim() {
        return Err(Error::ShapeError {
            what: "solution dimension",
            expected: spec.dim(),
            got: sol.dim(),
        });
    }
    if (sol.grid().horizon() - spec.horizon()).abs() > 1e-12 * spec.horizon() {
        return Err(Error::InvalidGrid {
            horizon: sol.grid().horizon(),
            steps: sol.grid().steps(),
        });
    }
    Ok(())
}

/// Squared-`Z` path integral `Σ_i |Z_i|² dt` for one path.
fn z_square_integral(sol: &DiscreteSolution, n: usize) -> f64 {
    let (m, dt) = (sol.grid().steps(), sol.grid().dt());
    let mut acc = 0.0;
    for i in 0..m {
        let zi = sol.z_row(n, i);
        acc += zi.iter().map(|v| v * v).sum::<f64>() * dt;
    }
    acc
}

/// Evaluates the three empirical norms at exponent `p` (intended range
/// `(1, 2]`).
pub fn lp_norms(sol: &DiscreteSolution, p: f64) -> NormTriple {
    let n = sol.n_paths();
    let m = sol.grid().steps();
    let mut sup_vals = Vec::with_capacity(n);
    let mut z_vals = Vec::with_capacity(n);
    let mut k_vals = Vec::with_capacity(n);
    for nn in 0..n {
        let sup = sol
            .y_path(nn)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        sup_vals.push(sup.powf(p));
        z_vals.push(z_square_integral(sol, nn).powf(p / 2.0));
        k_vals.push(sol.k(nn, m).abs().powf(p));
    }
    let (sp, sp_se) = mean_se(&sup_vals);
    let (mp, mp_se) = mean_se(&z_vals);
    let (kn, k_se) = mean_se(&k_vals);
    NormTriple {
        sp_norm: sp,
        mp_norm: mp,
        k_norm: kn,
        sp_se,
        mp_se,
        k_se,
    }
}

/// Deterministic data integrals `(Σ_i |f⁰(t_i)|² dt)^{p/2}` and the same
/// for `g⁰`.
fn data_integrals(spec: &ProblemSpec, sol: &DiscreteSolution, p: f64) -> (f64, f64) {
    let grid = sol.grid();
    let (m, dt) = (grid.steps(), grid.dt());
    let mut f0 = 0.0;
    let mut g0 = 0.0;
    for i in 0..m {
        let t = grid.t(i);
        let fv = spec.coeffs().f_zero(t, spec.dim());
        let gv = spec.coeffs().g_zero(t, spec.dim());
        f0 += fv * fv * dt;
        g0 += gv * gv * dt;
    }
    (f0.powf(p / 2.0), g0.powf(p / 2.0))
}

fn small_tolerance(lhs: f64, rhs_scaled: f64) -> f64 {
    1e-9 * lhs.abs().max(rhs_scaled.abs()).max(1.0)
}

/// Square-function bound: `E[(Σ|Z|²dt)^{p/2}] ≤ d·E[sup|Y|^p +
/// (Σ|f⁰|²dt)^{p/2} + (Σ|g⁰|²dt)^{p/2}]`.
pub fn check_lemma31(sol: &DiscreteSolution, spec: &ProblemSpec, d_const: f64) -> Result<Margin> {
    compatible(sol, spec)?;
    let p = spec.exponent_p();
    let norms = lp_norms(sol, p);
    let (f0, g0) = data_integrals(spec, sol, p);
    let lhs = norms.mp_norm;
    let rhs = norms.sp_norm + f0 + g0;
    Ok(Margin::build(lhs, rhs, d_const, small_tolerance(lhs, d_const * rhs)))
}

/// Full-solution bound: `sp + mp + k` norms against the data,
///
/// `… ≤ d·E[|ξ|^p + (Σ|f⁰|²dt)^{p/2} + (Σ|g⁰|²dt)^{p/2} + sup(L⁺)^p +
/// Σ|Y|^{p−2}1_{Y≠0}|g⁰|²dt]`.
///
/// The last term is solution-dependent as stated; it vanishes identically
/// when `g⁰ ≡ 0`.
pub fn check_lemma32(sol: &DiscreteSolution, spec: &ProblemSpec, d_const: f64) -> Result<Margin> {
    compatible(sol, spec)?;
    let p = spec.exponent_p();
    let grid = *sol.grid();
    let (n, m, dt) = (sol.n_paths(), grid.steps(), grid.dt());
    let norms = lp_norms(sol, p);
    let lhs = norms.sp_norm + norms.mp_norm + norms.k_norm;

    let (f0, g0) = data_integrals(spec, sol, p);
    let mut rhs_path = Vec::with_capacity(n);
    for nn in 0..n {
        let xi = sol.y(nn, m);
        let mut val = xi.abs().powf(p) + f0 + g0;
        if spec.barrier().is_present() {
            let mut sup_plus = 0.0f64;
            for i in 0..=m {
                let l = spec
                    .barrier_value(grid.t(i), sol.ensemble().w_node(nn, i))
                    .expect("barrier present");
                sup_plus = sup_plus.max(l.max(0.0));
            }
            val += sup_plus.powf(p);
        }
        let mut weighted = 0.0;
        for i in 0..m {
            let gz = spec.coeffs().g_zero(grid.t(i), spec.dim());
            weighted += abs_pow_pm2(sol.y(nn, i), p) * gz * gz * dt;
        }
        val += weighted;
        rhs_path.push(val);
    }
    let (rhs, _) = mean_se(&rhs_path);
    Ok(Margin::build(lhs, rhs, d_const, small_tolerance(lhs, d_const * rhs)))
}

fn ensembles_shared(a: &DiscreteSolution, b: &DiscreteSolution) -> bool {
    if alloc::sync::Arc::ptr_eq(a.ensemble(), b.ensemble()) {
        return true;
    }
    let (ea, eb) = (a.ensemble(), b.ensemble());
    ea.grid().steps() == eb.grid().steps()
        && ea.n_paths() == eb.n_paths()
        && ea.dim() == eb.dim()
        && ea.grid().horizon().to_bits() == eb.grid().horizon().to_bits()
        && ea
            .w_flat()
            .iter()
            .zip(eb.w_flat().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && ea
            .b_flat()
            .iter()
            .zip(eb.b_flat().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn barriers_agree(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    sol: &DiscreteSolution,
) -> bool {
    if spec1.barrier().is_present() != spec2.barrier().is_present() {
        return false;
    }
    if !spec1.barrier().is_present() {
        return true;
    }
    let grid = sol.grid();
    let m = grid.steps();
    // Spot-check every path at three representative nodes.
    for nn in 0..sol.n_paths() {
        for &i in &[0usize, m / 2, m] {
            let w = sol.ensemble().w_node(nn, i);
            let a = spec1.barrier_value(grid.t(i), w).expect("present");
            let b = spec2.barrier_value(grid.t(i), w).expect("present");
            if a.to_bits() != b.to_bits() {
                return false;
            }
        }
    }
    true
}

/// Coupled-difference stability bound between two solutions on one
/// ensemble. `sol1`/`spec1` is the primed data set:
///
/// lhs = `E[sup|Y¹−Y²|^p + (Σ|Z¹−Z²|²dt)^{p/2}]`,
/// rhs = `E[|ξ¹−ξ²|^p + (Σ|f¹−f²|²(t_i,Y²,Z²)dt)^{p/2} +
///        (Σ|g¹−g²|²(t_i,Y²,Z²)dt)^{p/2}]`,
///
/// with both driver differences evaluated along the second solution.
/// Requires both solutions on the same ensemble (common random numbers),
/// the same barrier and the same exponent.
pub fn check_lemma33(
    sol1: &DiscreteSolution,
    sol2: &DiscreteSolution,
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    d_const: f64,
) -> Result<Margin> {
    compatible(sol1, spec1)?;
    compatible(sol2, spec2)?;
    if !ensembles_shared(sol1, sol2) {
        return Err(Error::EnsembleMismatch);
    }
    if !barriers_agree(spec1, spec2, sol2) {
        return Err(Error::EnsembleMismatch);
    }
    if spec1.exponent_p().to_bits() != spec2.exponent_p().to_bits() {
        return Err(Error::InvalidCoefficient {
            what: "exponent_p mismatch",
            value: spec1.exponent_p(),
        });
    }
    let p = spec2.exponent_p();
    let grid = *sol2.grid();
    let (n, m, d, dt) = (sol2.n_paths(), grid.steps(), sol2.dim(), grid.dt());

    let mut lhs_path = Vec::with_capacity(n);
    let mut rhs_path = Vec::with_capacity(n);
    for nn in 0..n {
        let mut sup = 0.0f64;
        for i in 0..=m {
            sup = sup.max((sol1.y(nn, i) - sol2.y(nn, i)).abs());
        }
        let mut dz = 0.0;
        for i in 0..m {
            let z1 = sol1.z_row(nn, i);
            let z2 = sol2.z_row(nn, i);
            let mut s = 0.0;
            for j in 0..d {
                let diff = z1[j] - z2[j];
                s += diff * diff;
            }
            dz += s * dt;
        }
        lhs_path.push(sup.powf(p) + dz.powf(p / 2.0));

        let dxi = (sol1.y(nn, m) - sol2.y(nn, m)).abs();
        let mut df = 0.0;
        let mut dg = 0.0;
        for i in 0..m {
            let t = grid.t(i);
            let y2 = sol2.y(nn, i);
            let z2 = sol2.z_row(nn, i);
            let fd = spec1.coeffs().f(t, y2, z2) - spec2.coeffs().f(t, y2, z2);
            let gd = spec1.coeffs().g(t, y2, z2) - spec2.coeffs().g(t, y2, z2);
            df += fd * fd * dt;
            dg += gd * gd * dt;
        }
        rhs_path.push(dxi.powf(p) + df.powf(p / 2.0) + dg.powf(p / 2.0));
    }
    let (lhs, _) = mean_se(&lhs_path);
    let (rhs, _) = mean_se(&rhs_path);
    Ok(Margin::build(lhs, rhs, d_const, small_tolerance(lhs, d_const * rhs)))
}

/// The two per-path sides of the `p`-Itô expansion between nodes `i ≤ j`.
fn ito_sides(
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    i: usize,
    j: usize,
) -> (Vec<f64>, Vec<f64>) {
    let p = spec.exponent_p();
    let cp = c_p(p);
    let grid = *sol.grid();
    let (n, dt) = (sol.n_paths(), grid.dt());
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for nn in 0..n {
        let mut z_weighted = 0.0;
        let mut k_term = 0.0;
        let mut f_term = 0.0;
        let mut g_weighted = 0.0;
        for s in i..j {
            let t = grid.t(s);
            let ys = sol.y(nn, s);
            let zs = sol.z_row(nn, s);
            let w = abs_pow_pm2(ys, p);
            z_weighted += w * zs.iter().map(|v| v * v).sum::<f64>() * dt;
            let ypm1 = if ys == 0.0 { 0.0 } else { ys.abs().powf(p - 1.0) * sgn(ys) };
            k_term += ypm1 * (sol.k(nn, s + 1) - sol.k(nn, s));
            f_term += ypm1 * spec.coeffs().f(t, ys, zs) * dt;
            let gv = spec.coeffs().g(t, ys, zs);
            g_weighted += w * gv * gv * dt;
        }
        lhs.push(sol.y(nn, i).abs().powf(p) + cp * z_weighted);
        rhs.push(sol.y(nn, j).abs().powf(p) + p * k_term + p * f_term + cp * g_weighted);
    }
    (lhs, rhs)
}

/// Checks the expectation form of the `p`-Itô expansion between grid nodes
/// `t_i ≤ t_j`:
///
/// `E[|Y_i|^p + c(p)·Σ|Y|^{p−2}1|Z|²dt] ≤ E[|Y_j|^p + p·Σ|Y|^{p−1}ŷ·ΔK +
/// p·Σ|Y|^{p−1}ŷ·f·dt + c(p)·Σ|Y|^{p−2}1|g|²dt]`,
///
/// the two stochastic-integral terms being dropped (their expectations
/// vanish; see [`ito_martingale_terms`] for the empirical diagnostic). The
/// tolerance is `d_margin_tolerance · (se_lhs + se_rhs + √dt·scale)`,
/// covering Monte Carlo noise plus the discretisation allowance.
pub fn check_ito_p(
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    i: usize,
    j: usize,
    d_margin_tolerance: f64,
) -> Result<Margin> {
    compatible(sol, spec)?;
    let m = sol.grid().steps();
    if i > j || j > m {
        return Err(Error::ShapeError {
            what: "time index pair",
            expected: j.min(m),
            got: i,
        });
    }
    let (lhs_path, rhs_path) = ito_sides(sol, spec, i, j);
    let (lhs, lhs_se) = mean_se(&lhs_path);
    let (rhs, rhs_se) = mean_se(&rhs_path);
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    let tolerance = d_margin_tolerance * (lhs_se + rhs_se + sol.grid().dt().sqrt() * scale);
    Ok(Margin::build(lhs, rhs, 1.0, tolerance))
}

/// Empirical means of the two dropped martingale terms of the `p`-Itô
/// expansion between nodes `i ≤ j`:
///
/// * forward term `p·Σ_s |Y_s|^{p−1}ŷ_s·(Z_s·ΔW_s)` (left endpoint);
/// * backward term `p·Σ_s |Y_{s+1}|^{p−1}ŷ_{s+1}·g(t_{s+1}, Y_{s+1},
///   Z_{s+1})·ΔB_s` (right endpoint, `Z_M := 0`).
///
/// Both should sit within a few standard errors of zero on solver output.
pub fn ito_martingale_terms(
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    i: usize,
    j: usize,
) -> Result<(TermStat, TermStat)> {
    compatible(sol, spec)?;
    let m = sol.grid().steps();
    if i > j || j > m {
        return Err(Error::ShapeError {
            what: "time index pair",
            expected: j.min(m),
            got: i,
        });
    }
    let p = spec.exponent_p();
    let grid = *sol.grid();
    let (n, d) = (sol.n_paths(), sol.dim());
    let zeros = vec![0.0; d];
    let mut fwd = Vec::with_capacity(n);
    let mut bwd = Vec::with_capacity(n);
    for nn in 0..n {
        let mut acc_w = 0.0;
        let mut acc_b = 0.0;
        for s in i..j {
            let ys = sol.y(nn, s);
            let ypm1 = if ys == 0.0 { 0.0 } else { ys.abs().powf(p - 1.0) * sgn(ys) };
            let mut zw = 0.0;
            for jj in 0..d {
                zw += sol.z(nn, s, jj) * sol.ensemble().dw(nn, s, jj);
            }
            acc_w += ypm1 * zw;

            let yn = sol.y(nn, s + 1);
            let ynpm1 = if yn == 0.0 { 0.0 } else { yn.abs().powf(p - 1.0) * sgn(yn) };
            let zn: &[f64] = if s + 1 < m { sol.z_row(nn, s + 1) } else { &zeros };
            let gv = spec.coeffs().g(grid.t(s + 1), yn, zn);
            acc_b += ynpm1 * gv * sol.ensemble().db(nn, s);
        }
        fwd.push(p * acc_w);
        bwd.push(p * acc_b);
    }
    let (fm, fs) = mean_se(&fwd);
    let (bm, bs) = mean_se(&bwd);
    Ok((
        TermStat { mean: fm, se: fs },
        TermStat { mean: bm, se: bs },
    ))
}

/// Largest per-path complementarity sum `Σ_i (Y_i − L_i)·ΔK_i`. Exactly
/// zero on solver output; zero by convention for barrier-free problems
/// (`K ≡ 0` there, and the absent barrier contributes no product terms).
pub fn skorokhod_residual(sol: &DiscreteSolution, spec: &ProblemSpec) -> Result<f64> {
    compatible(sol, spec)?;
    if !spec.barrier().is_present() {
        return Ok(0.0);
    }
    let grid = *sol.grid();
    let m = grid.steps();
    let mut worst = 0.0f64;
    for nn in 0..sol.n_paths() {
        let mut acc = 0.0;
        for i in 0..m {
            let l = spec
                .barrier_value(grid.t(i), sol.ensemble().w_node(nn, i))
                .expect("barrier present");
            acc += (sol.y(nn, i) - l) * (sol.k(nn, i + 1) - sol.k(nn, i));
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::paths::{make_grid, simulate_ensemble};
    use crate::solver::{solve_reflected_bdsde, SolverConfig};
    use alloc::sync::Arc;

    fn solved(spec: &ProblemSpec, n: usize, m: usize, seed: u64) -> DiscreteSolution {
        let grid = make_grid(spec.horizon(), m).unwrap();
        let ens = simulate_ensemble(&grid, n, spec.dim(), seed).unwrap();
        solve_reflected_bdsde(spec, &ens, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn cp_matches_the_displayed_values() {
        assert_eq!(c_p(2.0), 1.0);
        assert_eq!(c_p(1.5), 0.375);
    }

    #[test]
    fn norms_of_the_constant_solution_are_one_zero_zero() {
        let spec = families::constant(1.0, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 200, 10, 4);
        let norms = lp_norms(&sol, 1.5);
        assert!((norms.sp_norm - 1.0).abs() < 1e-12);
        assert!(norms.mp_norm < 1e-15);
        assert_eq!(norms.k_norm, 0.0);
        assert!(norms.sp_se < 1e-12);
    }

    #[test]
    fn norms_scale_with_lambda_to_the_p() {
        let spec = families::sinusoidal(0.3, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 300, 12, 8);
        let p = 1.5;
        let base = lp_norms(&sol, p);
        let scaled = lp_norms(&sol.scaled(2.0), p);
        let factor = 2.0f64.powf(p);
        for (a, b) in [
            (scaled.sp_norm, base.sp_norm),
            (scaled.mp_norm, base.mp_norm),
            (scaled.k_norm, base.k_norm),
        ] {
            if b == 0.0 {
                assert_eq!(a, 0.0);
            } else {
                assert!((a / b - factor).abs() < 1e-12, "{a} vs {factor}·{b}");
            }
        }
    }

    #[test]
    fn lemma31_passes_on_zero_and_martingale_instances() {
        let zero = families::constant(0.0, 1.0, 1.5).unwrap();
        let sol = solved(&zero, 200, 10, 3);
        let margin = check_lemma31(&sol, &zero, 1.0).unwrap();
        assert_eq!(margin.lhs, 0.0);
        assert_eq!(margin.rhs, 0.0);
        assert!(margin.pass);

        let mart = families::martingale(1.0, 1.5).unwrap();
        let sol = solved(&mart, 2000, 25, 5);
        let margin = check_lemma31(&sol, &mart, 10.0).unwrap();
        assert!(margin.pass, "{margin:?}");
        // Z ≈ 1, so lhs ≈ T^{p/2} = 1.
        assert!((margin.lhs - 1.0).abs() < 0.15, "{margin:?}");
    }

    #[test]
    fn lemma32_passes_on_the_deterministic_barrier_instance() {
        let spec = families::deterministic_barrier(0.5, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 500, 20, 6);
        let margin = check_lemma32(&sol, &spec, 50.0).unwrap();
        assert!(margin.pass, "{margin:?}");
        assert!(margin.lhs > 0.0);
        assert!(margin.rhs > 0.0);
    }

    #[test]
    fn lemma32_g0_term_vanishes_without_inhomogeneous_g() {
        // For two specs differing only in g0 = 0 vs 0.1, the rhs gap
        // reflects the weighted g⁰ term plus the data integral.
        let with_g0 = families::affine(0.5, 0.25, 0.3, 0.2, 0.1, 1.0, 1.5).unwrap();
        let without = families::affine(0.5, 0.25, 0.3, 0.2, 0.0, 1.0, 1.5).unwrap();
        let sol = solved(&without, 400, 16, 9);
        let m_with = check_lemma32(&sol, &with_g0, 50.0).unwrap();
        let m_without = check_lemma32(&sol, &without, 50.0).unwrap();
        assert!(m_with.rhs > m_without.rhs);
    }

    #[test]
    fn lemma33_identical_specs_give_zero_both_sides() {
        let spec = families::sinusoidal(0.3, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 300, 12, 10);
        let margin = check_lemma33(&sol, &sol, &spec, &spec, 50.0).unwrap();
        assert_eq!(margin.lhs, 0.0);
        assert_eq!(margin.rhs, 0.0);
        assert!(margin.pass);
    }

    #[test]
    fn lemma33_terminal_shift_has_rhs_epsilon_to_the_p() {
        let base = families::martingale(1.0, 1.5).unwrap();
        let eps = 0.1;
        let shifted = families::shift_terminal(&base, eps);
        let grid = make_grid(1.0, 12).unwrap();
        let ens = simulate_ensemble(&grid, 400, 1, 11).unwrap();
        let cfg = SolverConfig::default();
        let sol_b = solve_reflected_bdsde(&base, &ens, &cfg).unwrap();
        let sol_s = solve_reflected_bdsde(&shifted, &ens, &cfg).unwrap();
        let margin = check_lemma33(&sol_s, &sol_b, &shifted, &base, 50.0).unwrap();
        let expected_rhs = eps.powf(1.5);
        assert!(
            (margin.rhs - expected_rhs).abs() < 1e-12,
            "rhs = {}, want {expected_rhs}",
            margin.rhs
        );
        assert!(margin.pass, "{margin:?}");
        // lhs is swap-invariant.
        let swapped = check_lemma33(&sol_b, &sol_s, &base, &shifted, 50.0).unwrap();
        assert_eq!(margin.lhs.to_bits(), swapped.lhs.to_bits());
    }

    #[test]
    fn lemma33_rejects_distinct_ensembles_and_barriers() {
        let spec = families::martingale(1.0, 1.5).unwrap();
        let grid = make_grid(1.0, 10).unwrap();
        let e1 = simulate_ensemble(&grid, 200, 1, 1).unwrap();
        let e2 = simulate_ensemble(&grid, 200, 1, 2).unwrap();
        let cfg = SolverConfig::default();
        let s1 = solve_reflected_bdsde(&spec, &e1, &cfg).unwrap();
        let s2 = solve_reflected_bdsde(&spec, &e2, &cfg).unwrap();
        assert!(matches!(
            check_lemma33(&s1, &s2, &spec, &spec, 10.0),
            Err(Error::EnsembleMismatch)
        ));
        // Same ensemble but different barriers.
        let barrier_spec = families::sinusoidal(0.3, 1.0, 1.5).unwrap();
        let s3 = solve_reflected_bdsde(&barrier_spec, &e1, &cfg).unwrap();
        assert!(matches!(
            check_lemma33(&s1, &s3, &spec, &barrier_spec, 10.0),
            Err(Error::EnsembleMismatch)
        ));
    }

    #[test]
    fn ito_p_holds_on_zero_and_deterministic_barrier_instances() {
        let zero = families::constant(0.0, 1.0, 1.5).unwrap();
        let sol = solved(&zero, 200, 10, 3);
        let margin = check_ito_p(&sol, &zero, 0, 10, 1.0).unwrap();
        assert_eq!(margin.lhs, 0.0);
        assert_eq!(margin.rhs, 0.0);
        assert!(margin.pass);

        let det = families::deterministic_barrier(0.5, 1.0, 1.5).unwrap();
        let sol = solved(&det, 400, 20, 7);
        let margin = check_ito_p(&sol, &det, 0, 20, 1.0).unwrap();
        assert!(margin.slack >= 0.0, "{margin:?}");
        assert!(margin.pass);
    }

    #[test]
    fn ito_martingale_terms_are_compatible_with_zero() {
        let spec = families::martingale(1.0, 1.5).unwrap();
        let sol = solved(&spec, 3000, 20, 13);
        let (fwd, bwd) = ito_martingale_terms(&sol, &spec, 0, 20).unwrap();
        assert!(fwd.mean.abs() <= 3.0 * fwd.se.max(1e-12), "{fwd:?}");
        // g ≡ 0 makes the backward term identically zero.
        assert_eq!(bwd.mean, 0.0);
        assert_eq!(bwd.se, 0.0);
    }

    #[test]
    fn ito_rejects_reversed_indices() {
        let spec = families::constant(1.0, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 200, 10, 3);
        assert!(matches!(
            check_ito_p(&sol, &spec, 5, 2, 1.0),
            Err(Error::ShapeError { .. })
        ));
        assert!(matches!(
            ito_martingale_terms(&sol, &spec, 0, 11),
            Err(Error::ShapeError { .. })
        ));
    }

    #[test]
    fn skorokhod_residual_is_zero_on_solver_output_and_positive_when_violated() {
        let spec = families::deterministic_barrier(0.5, 1.0, 1.5).unwrap();
        let sol = solved(&spec, 300, 15, 5);
        assert_eq!(skorokhod_residual(&sol, &spec).unwrap(), 0.0);

        let free = families::martingale(1.0, 1.5).unwrap();
        let sol_free = solved(&free, 300, 15, 5);
        assert_eq!(skorokhod_residual(&sol_free, &free).unwrap(), 0.0);

        // Hand-built violation: ΔK > 0 where Y − L = 1 contributes exactly
        // the injected product.
        let grid = make_grid(1.0, 2).unwrap();
        let ens = simulate_ensemble(&grid, 1, 1, 1).unwrap();
        let flat = families::deterministic_barrier(0.0, 1.0, 1.5).unwrap();
        // Barrier level 0 ⇒ L ≡ 0; choose Y ≡ 1 and a K jump of 0.25 on the
        // first interval.
        let meta = crate::solver::SolutionMeta {
            problem: alloc::string::String::from("hand-built"),
            seed: 1,
            basis_degree: 0,
            f_step_mode: crate::solver::FStepMode::Explicit,
            inner_picard_iters: 1,
            barrier_applied: true,
            exponent_p: 1.5,
        };
        let bad = DiscreteSolution::from_parts(
            Arc::clone(&ens),
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.25, 0.25],
            meta,
        )
        .unwrap();
        let res = skorokhod_residual(&bad, &flat).unwrap();
        assert!((res - 0.25).abs() < 1e-15, "res = {res}");
    }
}
