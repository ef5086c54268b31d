//! Explicit Gittins-index formulas.
//!
//! Three diffusions admit closed forms, all of them exponential-weight
//! integrals of the reward:
//!
//! * pure Brownian motion `dX = σ dW`:
//!   `M(x) = (1/α) ∫₀^∞ h[x + σz/√(2α)] e^{−z} dz`;
//! * drifted Brownian motion `dX = μ dt + σ dW`:
//!   `M(x) = (1/α) ∫₀^∞ h[x + z/β] e^{−z} dz` with
//!   `β = (√(μ² + 2ασ²) − μ)/σ²`;
//! * the super-diffusive spread process `dX = σ²A tanh(AX) dt + σ dW`
//!   (`A = √(2Γ)/σ`):
//!   `M(x) = ρ₋(x) S₋(x) + ρ₊(x) S₊(x)` with
//!   `ρ±(x) = 2 / (2α + σ²(B±A)² e^{±2Ax})`,
//!   `S±(x) = ∫₀^∞ h[x + s/(B±A)] e^{−s} ds` and `B = √(2(α+Γ))/σ`.
//!
//! The `e^{±2Ax}` factors are evaluated so that only decaying exponentials
//! appear, which keeps wide `x` sweeps finite: the overflowing branch drives
//! its `ρ` to zero and the surviving term carries the index.
//!
//! The spread formula is proven for `Γ < α/2`; larger spreads are rejected
//! unless the caller opts into the unproven regime.

use crate::error::{ensure_finite, ensure_nonneg, ensure_positive, Error, Result};
use crate::numerics::QuadratureRule;
use crate::rewards::RewardStructure;

/// The rate constants `A`, `B`, `B₀` shared by the two-armed analysis.
#[derive(Debug, Clone, Copy)]
pub struct DerivedConstants {
    /// `A = √(2Γ)/σ₂`.
    pub a_const: f64,
    /// `B = √(2(α+Γ))/σ₂`.
    pub b_const: f64,
    /// `B₀ = √(2α)/σ₁`.
    pub b0_const: f64,
}

/// Compute `A`, `B`, `B₀` for arm volatilities `σ₁`, `σ₂`, spread `γ` and
/// discount `α`.
pub fn derived_constants(
    sigma1: f64,
    sigma2: f64,
    gamma: f64,
    alpha: f64,
) -> Result<DerivedConstants> {
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma2", sigma2)?;
    ensure_nonneg("gamma", gamma)?;
    ensure_positive("alpha", alpha)?;
    Ok(DerivedConstants {
        a_const: (2.0 * gamma).sqrt() / sigma2,
        b_const: (2.0 * (alpha + gamma)).sqrt() / sigma2,
        b0_const: (2.0 * alpha).sqrt() / sigma1,
    })
}

/// Decay rate `β = (√(μ² + 2ασ²) − μ)/σ²` of the drifted-Brownian index.
///
/// For `μ > 0` the subtraction is rearranged to avoid cancellation.
pub fn drifted_decay_rate(mu: f64, sigma: f64, alpha: f64) -> f64 {
    let root = (mu * mu + 2.0 * alpha * sigma * sigma).sqrt();
    if mu > 0.0 {
        2.0 * alpha / (root + mu)
    } else {
        (root - mu) / (sigma * sigma)
    }
}

/// Gittins index of pure Brownian motion with volatility `sigma`.
pub fn gittins_bm(
    x: f64,
    sigma: f64,
    rs: &RewardStructure,
    rule: &QuadratureRule,
) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("sigma", sigma)?;
    let alpha = rs.alpha();
    let scale = sigma / (2.0 * alpha).sqrt();
    let integral = rule.exp_weighted_integral(|z| rs.eval_raw(x + scale * z))?;
    Ok(integral / alpha)
}

/// Gittins index of drifted Brownian motion `dX = μ dt + σ dW`.
pub fn gittins_drifted_bm(
    x: f64,
    mu: f64,
    sigma: f64,
    rs: &RewardStructure,
    rule: &QuadratureRule,
) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("mu", mu)?;
    ensure_positive("sigma", sigma)?;
    let alpha = rs.alpha();
    if mu == 0.0 {
        // β reduces to √(2α)/σ; share the Brownian code path so the
        // reduction is a bit-for-bit identity.
        return gittins_bm(x, sigma, rs, rule);
    }
    let beta = drifted_decay_rate(mu, sigma, alpha);
    let integral = rule.exp_weighted_integral(|z| rs.eval_raw(x + z / beta))?;
    Ok(integral / alpha)
}

/// The mixture weights `ρ₋(x)`, `ρ₊(x)` of the spread-process index,
/// evaluated in the numerically safe direction.
pub fn dmps_weights(x: f64, sigma: f64, gamma: f64, alpha: f64) -> Result<(f64, f64)> {
    let consts = derived_constants(sigma, sigma, gamma, alpha)?;
    let (a, b) = (consts.a_const, consts.b_const);
    let two_alpha = 2.0 * alpha;
    let minus_sq = (sigma * (b - a)).powi(2);
    let plus_sq = (sigma * (b + a)).powi(2);
    // ρ± = 2 / (2α + c± e^{±2Ax}); rewrite with e^{−|2Ax|} when the direct
    // exponent is positive.
    let e = 2.0 * a * x;
    let rho_minus = if e >= 0.0 {
        2.0 / (two_alpha + minus_sq * (-e).exp())
    } else {
        let w = e.exp();
        2.0 * w / (two_alpha * w + minus_sq)
    };
    let rho_plus = if e <= 0.0 {
        2.0 / (two_alpha + plus_sq * e.exp())
    } else {
        let w = (-e).exp();
        2.0 * w / (two_alpha * w + plus_sq)
    };
    Ok((rho_minus, rho_plus))
}

/// Gittins index of the dynamic mean-preserving spread process.
///
/// Requires `gamma < alpha/2`, the regime in which the formula is proven.
pub fn gittins_dmps(
    x: f64,
    sigma: f64,
    gamma: f64,
    rs: &RewardStructure,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_spread_regime(gamma, rs.alpha())?;
    gittins_dmps_unrestricted(x, sigma, gamma, rs, rule)
}

/// Spread-process index without the `gamma < alpha/2` regime guard.
///
/// The formula itself evaluates for any `gamma ≥ 0`; outside the proven
/// regime its optimality is conjectural.
pub fn gittins_dmps_unrestricted(
    x: f64,
    sigma: f64,
    gamma: f64,
    rs: &RewardStructure,
    rule: &QuadratureRule,
) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("sigma", sigma)?;
    ensure_nonneg("gamma", gamma)?;
    let alpha = rs.alpha();
    let consts = derived_constants(sigma, sigma, gamma, alpha)?;
    let (a, b) = (consts.a_const, consts.b_const);
    let (rho_minus, rho_plus) = dmps_weights(x, sigma, gamma, alpha)?;
    let s_minus = rule.exp_weighted_integral(|s| rs.eval_raw(x + s / (b - a)))?;
    let s_plus = rule.exp_weighted_integral(|s| rs.eval_raw(x + s / (b + a)))?;
    Ok(rho_minus * s_minus + rho_plus * s_plus)
}

/// Reject spreads at or beyond `alpha / 2`.
pub fn check_spread_regime(gamma: f64, alpha: f64) -> Result<()> {
    ensure_nonneg("gamma", gamma)?;
    ensure_positive("alpha", alpha)?;
    if gamma >= alpha / 2.0 {
        return Err(Error::Regime(format!(
            "spread gamma = {gamma} is not below alpha/2 = {}; the spread index is only \
             proven there (pass --allow-unproven-regime to evaluate anyway)",
            alpha / 2.0
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::RewardFamily;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn logistic_unit() -> RewardStructure {
        RewardStructure::new(1.0, 0.0, 1.0, RewardFamily::Logistic { c: 1.0 }).unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn derived_constants_zero_spread() {
        let c = derived_constants(1.0, 1.0, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(c.a_const, 0.0);
        assert_abs_diff_eq!(c.b_const, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn derived_constants_direct_evaluation() {
        let c = derived_constants(1.0, 1.0, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(c.a_const, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.b_const, 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rate_identities() {
        for (s2, gamma, alpha) in [(1.0, 0.5, 0.5), (0.7, 0.2, 1.3), (2.1, 0.05, 0.4)] {
            let c = derived_constants(1.0, s2, gamma, alpha).unwrap();
            let (a, b) = (c.a_const, c.b_const);
            // σ₂²(B² − A²) = 2α.
            assert_relative_eq!(s2 * s2 * (b * b - a * a), 2.0 * alpha, max_relative = 1e-10);
            // σ₂²(B−A)²/(2α) = 2α/(σ₂²(B+A)²): conjugate-surd identity.
            let lhs = s2 * s2 * (b - a).powi(2) / (2.0 * alpha);
            let rhs = 2.0 * alpha / (s2 * s2 * (b + a).powi(2));
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn constant_reward_gives_value_over_alpha() {
        let rs =
            RewardStructure::degenerate(2.0, 0.0, 1.0, RewardFamily::Constant { value: 0.7 })
                .unwrap();
        let m = gittins_bm(1.3, 0.9, &rs, &rule()).unwrap();
        assert_abs_diff_eq!(m, 0.35, epsilon = 1e-12);
    }

    #[test]
    fn linear_probe_at_origin() {
        // ∫ (z/√2) e^{−z} dz = 1/√2.
        let rs = RewardStructure::degenerate(1.0, -10.0, 10.0, RewardFamily::Linear).unwrap();
        let m = gittins_bm(0.0, 1.0, &rs, &rule()).unwrap();
        assert_abs_diff_eq!(m, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn drifted_reduces_to_brownian_at_zero_drift() {
        let rs = logistic_unit();
        let r = rule();
        for x in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let bm = gittins_bm(x, 1.0, &rs, &r).unwrap();
            let drifted = gittins_drifted_bm(x, 0.0, 1.0, &rs, &r).unwrap();
            assert_abs_diff_eq!(bm, drifted, epsilon = 1e-12);
        }
    }

    #[test]
    fn drifted_decay_rate_example() {
        // μ = 1, σ = 1, α = 1 ⇒ β = √3 − 1.
        assert_abs_diff_eq!(
            drifted_decay_rate(1.0, 1.0, 1.0),
            3.0_f64.sqrt() - 1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn drift_increases_index_for_increasing_reward() {
        let rs = logistic_unit();
        let r = rule();
        let lo = gittins_drifted_bm(0.0, -0.5, 1.0, &rs, &r).unwrap();
        let mid = gittins_drifted_bm(0.0, 0.0, 1.0, &rs, &r).unwrap();
        let hi = gittins_drifted_bm(0.0, 0.5, 1.0, &rs, &r).unwrap();
        assert!(lo < mid && mid < hi);
    }

    #[test]
    fn dmps_zero_spread_reduces_to_brownian() {
        let rs = logistic_unit();
        let r = rule();
        for i in 0..=200 {
            let x = -10.0 + 0.1 * i as f64;
            let bm = gittins_bm(x, 1.0, &rs, &r).unwrap();
            let spread = gittins_dmps(x, 1.0, 0.0, &rs, &r).unwrap();
            assert!((bm - spread).abs() <= 1e-12, "gap at x = {x}");
        }
    }

    #[test]
    fn dmps_constant_reward_and_weight_normalization() {
        let alpha = 1.0;
        let rs =
            RewardStructure::degenerate(alpha, -1.0, 1.0, RewardFamily::Constant { value: 0.4 })
                .unwrap();
        let r = rule();
        for i in 0..=40 {
            let x = -20.0 + i as f64;
            let (rm, rp) = dmps_weights(x, 1.0, 0.4, alpha).unwrap();
            assert_relative_eq!(rm + rp, 1.0 / alpha, max_relative = 1e-10);
            let m = gittins_dmps(x, 1.0, 0.4, &rs, &r).unwrap();
            assert_abs_diff_eq!(m, 0.4, epsilon = 1e-10);
        }
    }

    #[test]
    fn dmps_saturates_at_upper_bound() {
        let rs = logistic_unit();
        let m = gittins_dmps(40.0, 1.0, 0.4, &rs, &rule()).unwrap();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn spread_regime_guard() {
        let rs = logistic_unit();
        let r = rule();
        let err = gittins_dmps(0.0, 1.0, 0.6, &rs, &r).unwrap_err();
        assert!(matches!(err, Error::Regime(_)));
        assert!(gittins_dmps_unrestricted(0.0, 1.0, 0.6, &rs, &r).is_ok());
    }

    #[test]
    fn indices_are_strictly_increasing_and_bounded() {
        let rs = logistic_unit();
        let r = rule();
        let mut prev_bm = f64::NEG_INFINITY;
        let mut prev_dr = f64::NEG_INFINITY;
        let mut prev_sp = f64::NEG_INFINITY;
        for i in 0..=200 {
            let x = -10.0 + 0.1 * i as f64;
            let bm = gittins_bm(x, 1.0, &rs, &r).unwrap();
            let dr = gittins_drifted_bm(x, 0.7, 1.0, &rs, &r).unwrap();
            let sp = gittins_dmps(x, 1.0, 0.4, &rs, &r).unwrap();
            for v in [bm, dr, sp] {
                assert!(v >= rs.k_low() && v <= rs.k_high(), "bound violated at {x}");
            }
            assert!(bm > prev_bm && dr > prev_dr && sp > prev_sp, "monotone at {x}");
            prev_bm = bm;
            prev_dr = dr;
            prev_sp = sp;
        }
    }

    #[test]
    fn larger_volatility_dominates_pointwise_at_zero_spread() {
        let rs = logistic_unit();
        let r = rule();
        for i in 0..=40 {
            let x = -10.0 + 0.5 * i as f64;
            let narrow = gittins_bm(x, 0.8, &rs, &r).unwrap();
            let wide = gittins_bm(x, 1.6, &rs, &r).unwrap();
            assert!(wide > narrow, "sigma-monotonicity failed at x = {x}");
        }
    }

    #[test]
    fn weights_survive_extreme_states() {
        // |2Ax| far beyond exp overflow must degrade to the single
        // surviving term instead of producing NaN.
        let (rm, rp) = dmps_weights(400.0, 1.0, 0.4, 1.0).unwrap();
        assert!(rm.is_finite() && rp.is_finite());
        assert!(rp >= 0.0 && rp < 1e-100);
        assert_relative_eq!(rm + rp, 1.0, max_relative = 1e-10);
        let (rm2, rp2) = dmps_weights(-400.0, 1.0, 0.4, 1.0).unwrap();
        assert!(rm2 >= 0.0 && rm2 < 1e-100);
        assert_relative_eq!(rm2 + rp2, 1.0, max_relative = 1e-10);
    }
}
