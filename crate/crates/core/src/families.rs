//! Named problem families with exact declared Lipschitz data.
//!
//! Every constructor returns a fully labelled [`ProblemSpec`] whose declared
//! `(C, α)` provably dominate the true Lipschitz constants of its closed-form
//! coefficients, and whose structure flags (`g ≡ 0`, `z`-dependence of `f`)
//! are set truthfully so that reference oracles can gate on them.
//!
//! [`battery`] assembles the ten canonical desk-scale instances used by the
//! estimate checks and regression suites. [`shift_terminal`], [`shift_f`]
//! and [`scale_problem`] are the structural transforms behind the stability
//! and homogeneity studies.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::model::{
    zero_coeff, BarrierSpec, CoeffStructure, CoefficientSpec, ProblemSpec, TerminalSpec,
};

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

fn zero_coeffs() -> Result<CoefficientSpec> {
    Ok(CoefficientSpec::new(zero_coeff(), zero_coeff(), 1.0, 0.5)?
        .with_structure(CoeffStructure {
            g_identically_zero: true,
            f_depends_on_z: false,
        }))
}

/// `f = g = 0`, `ξ ≡ value`, no barrier: the solution is `Y ≡ value`,
/// `Z ≡ 0`, `K ≡ 0`.
pub fn constant(value: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let terminal = TerminalSpec::new(Arc::new(move |_w: &[f64]| value));
    Ok(
        ProblemSpec::new(zero_coeffs()?, terminal, BarrierSpec::NoBarrier, horizon, 1, p)?
            .with_label(format!("constant(value={value})")),
    )
}

/// `f = g = 0`, `ξ = W_T¹`, no barrier: `Y_t = W_t¹`, `Z¹ ≡ 1`, `K ≡ 0`.
pub fn martingale(horizon: f64, p: f64) -> Result<ProblemSpec> {
    let terminal = TerminalSpec::new(Arc::new(|w: &[f64]| w[0]));
    Ok(
        ProblemSpec::new(zero_coeffs()?, terminal, BarrierSpec::NoBarrier, horizon, 1, p)?
            .with_label("martingale"),
    )
}

/// `f = g = 0`, `ξ = 0`, deterministic decreasing barrier `L_t =
/// level·(1 − t/T)`: the solution is the barrier itself, with
/// `K_t = level·t/T` and `Z ≡ 0`.
pub fn deterministic_barrier(level: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let terminal = TerminalSpec::new(Arc::new(|_w: &[f64]| 0.0));
    let t_max = horizon;
    let barrier = BarrierSpec::Barrier(Arc::new(move |t, _w: &[f64]| level * (1.0 - t / t_max)));
    Ok(
        ProblemSpec::new(zero_coeffs()?, terminal, barrier, horizon, 1, p)?
            .with_label(format!("deterministic_barrier(level={level})")),
    )
}

/// `f = −rate·y`, `g = 0`, `ξ ≡ 1`, no barrier: the deterministic solution
/// of the backward linear equation, `Y_t = e^{−rate·(T−t)}`.
pub fn linear_f_ode(rate: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let coeffs = CoefficientSpec::new(
        Arc::new(move |_t, y: f64, _z: &[f64]| -rate * y),
        zero_coeff(),
        rate,
        0.5,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: true,
        f_depends_on_z: false,
    });
    let terminal = TerminalSpec::new(Arc::new(|_w: &[f64]| 1.0));
    Ok(
        ProblemSpec::new(coeffs, terminal, BarrierSpec::NoBarrier, horizon, 1, p)?
            .with_label(format!("linear_f_ode(rate={rate})")),
    )
}

/// `f = 0`, `g = beta·y`, `ξ = W_T¹`, no barrier. Closed form
/// `Y_t = W_t¹ · exp(beta·(B_T − B_t) − ½beta²(T − t))`, `Z¹_t` = the same
/// exponential factor; validated in the reference-catalog test suite by
/// substituting into the discrete equation on a fine grid.
pub fn linear_g(beta: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let coeffs = CoefficientSpec::new(
        zero_coeff(),
        Arc::new(move |_t, y: f64, _z: &[f64]| beta * y),
        // |Δg|² = beta²|Δy|², so C must dominate beta².
        (beta * beta).max(1e-6),
        0.5,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: false,
        f_depends_on_z: false,
    });
    let terminal = TerminalSpec::new(Arc::new(|w: &[f64]| w[0]));
    Ok(
        ProblemSpec::new(coeffs, terminal, BarrierSpec::NoBarrier, horizon, 1, p)?
            .with_label(format!("linear_g(beta={beta})")),
    )
}

/// Affine drivers with non-zero inhomogeneous parts: `f = a·y + b·z₁ + c0`,
/// `g = beta·y + g0`, `ξ = W_T¹`, no barrier. `g0 ≠ 0` deliberately breaks
/// H4 so the `g⁰` terms of the a priori estimates are exercised.
#[allow(clippy::too_many_arguments)]
pub fn affine(
    a: f64,
    b: f64,
    c0: f64,
    beta: f64,
    g0: f64,
    horizon: f64,
    p: f64,
) -> Result<ProblemSpec> {
    let declared_c = a.abs().max(b.abs()).max(beta * beta).max(1e-6);
    let coeffs = CoefficientSpec::new(
        Arc::new(move |_t, y: f64, z: &[f64]| a * y + b * z[0] + c0),
        Arc::new(move |_t, y: f64, _z: &[f64]| beta * y + g0),
        declared_c,
        0.5,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: false,
        f_depends_on_z: b != 0.0,
    });
    let terminal = TerminalSpec::new(Arc::new(|w: &[f64]| w[0]));
    Ok(
        ProblemSpec::new(coeffs, terminal, BarrierSpec::NoBarrier, horizon, 1, p)?
            .with_label(format!("affine(a={a},b={b},c0={c0},beta={beta},g0={g0})")),
    )
}

/// Bounded smooth drivers with a sometimes-binding barrier:
/// `f = sin(y) + cos(z₁)` (so `f⁰ ≡ 1`), `g = kappa·sin(z₁)`,
/// `ξ = sin(W_T¹)`, `L_t = sin(W_t¹) − ½`.
pub fn sinusoidal(kappa: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let coeffs = CoefficientSpec::new(
        Arc::new(|_t, y: f64, z: &[f64]| y.sin() + z[0].cos()),
        Arc::new(move |_t, _y, z: &[f64]| kappa * z[0].sin()),
        1.0,
        (kappa * kappa).max(1e-6),
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: false,
        f_depends_on_z: true,
    });
    let terminal = TerminalSpec::new(Arc::new(|w: &[f64]| w[0].sin()));
    let barrier = BarrierSpec::Barrier(Arc::new(|_t, w: &[f64]| w[0].sin() - 0.5));
    Ok(ProblemSpec::new(coeffs, terminal, barrier, horizon, 1, p)?
        .with_label(format!("sinusoidal(kappa={kappa})")))
}

/// Optioned payoff under discounting: `ξ = (strike − e^{sigma·W_T¹})⁺`,
/// time-flat barrier at the same payoff, `f = −rate·y`, `g = 0`, `d = 1` —
/// the configuration a binomial lattice can price independently.
pub fn american_put(strike: f64, sigma: f64, rate: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let payoff = move |w: &[f64]| (strike - (sigma * w[0]).exp()).max(0.0);
    let coeffs = CoefficientSpec::new(
        Arc::new(move |_t, y: f64, _z: &[f64]| -rate * y),
        zero_coeff(),
        rate.max(1e-6),
        0.5,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: true,
        f_depends_on_z: false,
    });
    let terminal = TerminalSpec::new(Arc::new(payoff));
    let barrier = BarrierSpec::Barrier(Arc::new(move |_t, w: &[f64]| payoff(w)));
    Ok(ProblemSpec::new(coeffs, terminal, barrier, horizon, 1, p)?
        .with_label(format!("american_put(strike={strike},sigma={sigma},rate={rate})")))
}

/// Optioned payoff over a constant floor: `ξ = (strike − e^{sigma·W_T¹})⁺`,
/// flat barrier `L ≡ level` (any `level ≤ 0` is compatible with the
/// nonnegative payoff), `f = −rate·y`, `g = 0`, `d = 1`. With the floor at
/// or below zero the reflection binds only where regression error pushes
/// fitted values negative, so the lattice and the regression solver target
/// the same discounted-payoff value — the cleanest oracle-equivalence
/// instance.
pub fn put_flat_barrier(
    strike: f64,
    sigma: f64,
    rate: f64,
    level: f64,
    horizon: f64,
    p: f64,
) -> Result<ProblemSpec> {
    let coeffs = CoefficientSpec::new(
        Arc::new(move |_t, y: f64, _z: &[f64]| -rate * y),
        zero_coeff(),
        rate.max(1e-6),
        0.5,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: true,
        f_depends_on_z: false,
    });
    let terminal =
        TerminalSpec::new(Arc::new(move |w: &[f64]| (strike - (sigma * w[0]).exp()).max(0.0)));
    let barrier = BarrierSpec::Barrier(Arc::new(move |_t, _w: &[f64]| level));
    Ok(ProblemSpec::new(coeffs, terminal, barrier, horizon, 1, p)?.with_label(format!(
        "put_flat_barrier(strike={strike},sigma={sigma},rate={rate},level={level})"
    )))
}

/// Terminal data with a finite `p`-th but infinite second moment:
///
/// `ξ = exp(sigma_b·min(|W_T¹|, knee) + c·max((W_T¹)² − knee², 0))`.
///
/// Below the knee the tail is log-linear (slope `sigma_b`), which is what a
/// desk-scale sample actually sees; beyond the knee the exponent turns
/// quadratic, which is what decides integrability: for `W_T ~ N(0, T)`,
/// `E[exp(q·W_T²)]` is finite iff `2qT < 1`, so `E|ξ|^p < ∞` iff
/// `2·p·c·T < 1` while `E|ξ|² = ∞` iff `4·c·T ≥ 1`. The defaults
/// `(c, knee, sigma_b) = (0.3, 5, 0.8)` with `T = 1`, `p = 1.5` satisfy
/// both. `f = g = 0`; a small oscillating barrier `L_t =
/// (1 − t/T)·(1 + cos(W_t¹))` occasionally binds and vanishes at `T`
/// (below `ξ > 0`), keeping the barrier-truncation machinery honest.
pub fn heavy_tail(c: f64, knee: f64, sigma_b: f64, horizon: f64, p: f64) -> Result<ProblemSpec> {
    let terminal = TerminalSpec::new(Arc::new(move |w: &[f64]| {
        let a = w[0].abs();
        (sigma_b * a.min(knee) + c * (w[0] * w[0] - knee * knee).max(0.0)).exp()
    }))
    .with_moment_flags(2.0 * p * c * horizon < 1.0, 4.0 * c * horizon < 1.0);
    let t_max = horizon;
    let barrier =
        BarrierSpec::Barrier(Arc::new(move |t, w: &[f64]| (1.0 - t / t_max) * (1.0 + w[0].cos())));
    Ok(ProblemSpec::new(zero_coeffs()?, terminal, barrier, horizon, 1, p)?
        .with_label(format!("heavy_tail(c={c},knee={knee},sigma_b={sigma_b})")))
}

/// Two-dimensional driving motion with coupled drivers and a binding
/// barrier: `f = 0.25(y + z₁ − z₂)`, `g = 0.2(z₁ + z₂)`,
/// `ξ = max(W_T¹, W_T²)`, `L_t = (W_t¹ + W_t²)/2 − 1`.
pub fn two_dim(horizon: f64, p: f64) -> Result<ProblemSpec> {
    let coeffs = CoefficientSpec::new(
        Arc::new(|_t, y: f64, z: &[f64]| 0.25 * (y + z[0] - z[1])),
        Arc::new(|_t, _y, z: &[f64]| 0.2 * (z[0] + z[1])),
        // sup |Δf|/(|Δy| + |Δz|) = 0.25·√2 ≈ 0.354 along the z-diagonal.
        0.5,
        // sup |Δg|²/|Δz|² = 2·0.2² = 0.08 along the diagonal.
        0.1,
    )?
    .with_structure(CoeffStructure {
        g_identically_zero: false,
        f_depends_on_z: true,
    });
    let terminal = TerminalSpec::new(Arc::new(|w: &[f64]| w[0].max(w[1])));
    let barrier = BarrierSpec::Barrier(Arc::new(|_t, w: &[f64]| 0.5 * (w[0] + w[1]) - 1.0));
    Ok(ProblemSpec::new(coeffs, terminal, barrier, horizon, 2, p)?.with_label("two_dim"))
}

/// The ten canonical desk-scale instances (horizon 1, exponent 1.5)
/// exercised by the estimate battery: zero drivers, martingale terminal,
/// deterministic barrier, both linear closed forms, affine drivers with
/// `g⁰ ≠ 0`, bounded smooth drivers with a barrier, an optioned payoff, a
/// heavy-tailed terminal, and a two-dimensional instance.
pub fn battery() -> Vec<ProblemSpec> {
    vec![
        constant(1.0, 1.0, 1.5).expect("valid battery instance"),
        martingale(1.0, 1.5).expect("valid battery instance"),
        deterministic_barrier(0.5, 1.0, 1.5).expect("valid battery instance"),
        linear_f_ode(0.1, 1.0, 1.5).expect("valid battery instance"),
        linear_g(0.3, 1.0, 1.5).expect("valid battery instance"),
        affine(0.5, 0.25, 0.3, 0.2, 0.1, 1.0, 1.5).expect("valid battery instance"),
        sinusoidal(0.3, 1.0, 1.5).expect("valid battery instance"),
        american_put(1.0, 0.4, 0.06, 1.0, 1.5).expect("valid battery instance"),
        heavy_tail(0.3, 5.0, 0.8, 1.0, 1.5).expect("valid battery instance"),
        two_dim(1.0, 1.5).expect("valid battery instance"),
    ]
}

/// Shifts the terminal data: `ξ ↦ ξ + eps`. With `eps ≥ 0` the barrier
/// compatibility `L_T ≤ ξ` is preserved.
pub fn shift_terminal(spec: &ProblemSpec, eps: f64) -> ProblemSpec {
    let phi = spec.terminal().clone();
    let shifted = TerminalSpec::new(Arc::new(move |w: &[f64]| phi.phi(w) + eps))
        .with_moment_flags(spec.terminal().p_moment_finite(), spec.terminal().sq_moment_finite());
    spec.rebuilt(spec.coeffs().clone(), shifted, spec.barrier().clone())
        .with_label(format!("{}+xi_shift({eps})", spec.label()))
}

/// Shifts the driver `f` by a constant: `f ↦ f + delta`. Lipschitz data are
/// unchanged.
pub fn shift_f(spec: &ProblemSpec, delta: f64) -> ProblemSpec {
    let coeffs = spec.coeffs().clone();
    let inner = spec.coeffs().clone();
    let shifted = coeffs.with_f(Arc::new(move |t, y, z: &[f64]| inner.f(t, y, z) + delta));
    spec.rebuilt(shifted, spec.terminal().clone(), spec.barrier().clone())
        .with_label(format!("{}+f_shift({delta})", spec.label()))
}

/// Scales the whole data set by `lambda > 0`:
///
/// `ξ ↦ λξ`, `L ↦ λL`, `f(t,y,z) ↦ λ·f(t, y/λ, z/λ)`, `g` likewise.
///
/// The scaled problem is solved by `(λY, λZ, λK)` whenever `(Y, Z, K)`
/// solves the original; Lipschitz data are invariant under this conjugation.
/// For `lambda` a power of two all the floating-point scalings are exact,
/// making the correspondence bit-exact on a shared ensemble.
pub fn scale_problem(spec: &ProblemSpec, lambda: f64) -> ProblemSpec {
    let dim = spec.dim();
    let f_inner = spec.coeffs().clone();
    let g_inner = spec.coeffs().clone();
    let scaled_f: crate::model::CoeffFn = Arc::new(move |t, y, z: &[f64]| {
        let zs: Vec<f64> = z.iter().map(|v| v / lambda).collect();
        debug_assert_eq!(zs.len(), dim);
        lambda * f_inner.f(t, y / lambda, &zs)
    });
    let scaled_g: crate::model::CoeffFn = Arc::new(move |t, y, z: &[f64]| {
        let zs: Vec<f64> = z.iter().map(|v| v / lambda).collect();
        lambda * g_inner.g(t, y / lambda, &zs)
    });
    let coeffs = CoefficientSpec::new(
        scaled_f,
        scaled_g,
        spec.coeffs().lipschitz_c(),
        spec.coeffs().contraction_alpha(),
    )
    .expect("constants unchanged")
    .with_structure(spec.coeffs().structure());
    let phi = spec.terminal().clone();
    let terminal = TerminalSpec::new(Arc::new(move |w: &[f64]| lambda * phi.phi(w)))
        .with_moment_flags(spec.terminal().p_moment_finite(), spec.terminal().sq_moment_finite());
    let barrier = match spec.barrier() {
        BarrierSpec::NoBarrier => BarrierSpec::NoBarrier,
        BarrierSpec::Barrier(psi) => {
            let psi = psi.clone();
            BarrierSpec::Barrier(Arc::new(move |t, w: &[f64]| lambda * psi(t, w)))
        }
    };
    spec.rebuilt(coeffs, terminal, barrier)
        .with_label(format!("{}*scale({lambda})", spec.label()))
}
