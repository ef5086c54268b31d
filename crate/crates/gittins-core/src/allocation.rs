//! Two-armed allocation analysis: index difference, phase classification,
//! threshold location.
//!
//! Arm 1 is pure Brownian motion with volatility `σ₁`; arm 2 is the spread
//! process with volatility `σ₂` and spread `Γ`. The optimal policy engages
//! arm 2 wherever `Δ(x) = M⁽²⁾(x) − M⁽¹⁾(x) > 0`.
//!
//! The sign structure of `Δ` is controlled by the volatility ratio: with
//! `g = Γ/α`,
//!
//! ```text
//! ratio < √(1+g) − √g   ⇒  Δ < 0 everywhere   (always engage arm 1)
//! ratio > √(1+g) + √g   ⇒  Δ > 0 everywhere   (always engage arm 2)
//! ```
//!
//! and in between the sign switches at state-dependent thresholds. Inside the
//! mixed band the rates interleave, `B−A < B₀ < B+A`, and the classifier also
//! reports `K = ((B+A) − B₀)/(B₀ − (B−A))` together with the analytic level
//! `x₁ = log[σ₂²(B−A)²K/(2α)] / (2A)` beyond which `Δ(x) > 0` is guaranteed.

use serde::Serialize;

use crate::closed_form::{
    check_spread_regime, derived_constants, gittins_bm, gittins_dmps_unrestricted,
    DerivedConstants,
};
use crate::error::{ensure_positive, Error, Result};
use crate::numerics::{find_sign_changes, QuadratureRule};
use crate::rewards::RewardStructure;

/// Parameters of the two-armed problem.
#[derive(Debug, Clone)]
pub struct TabConfig {
    sigma1: f64,
    sigma2: f64,
    gamma: f64,
    rs: RewardStructure,
}

impl TabConfig {
    /// Build a configuration inside the proven spread regime `Γ < α/2`.
    pub fn new(sigma1: f64, sigma2: f64, gamma: f64, rs: RewardStructure) -> Result<Self> {
        check_spread_regime(gamma, rs.alpha())?;
        Self::new_unrestricted(sigma1, sigma2, gamma, rs)
    }

    /// Build a configuration without the spread-regime guard.
    pub fn new_unrestricted(
        sigma1: f64,
        sigma2: f64,
        gamma: f64,
        rs: RewardStructure,
    ) -> Result<Self> {
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("sigma2", sigma2)?;
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!(
                "`gamma` must be non-negative, got {gamma}"
            )));
        }
        Ok(Self {
            sigma1,
            sigma2,
            gamma,
            rs,
        })
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn reward(&self) -> &RewardStructure {
        &self.rs
    }
    pub fn alpha(&self) -> f64 {
        self.rs.alpha()
    }

    pub fn constants(&self) -> Result<DerivedConstants> {
        derived_constants(self.sigma1, self.sigma2, self.gamma, self.alpha())
    }
}

/// `Δ(x) = M⁽²⁾(x) − M⁽¹⁾(x)`.
pub fn index_difference(cfg: &TabConfig, x: f64, rule: &QuadratureRule) -> Result<f64> {
    let m2 = gittins_dmps_unrestricted(x, cfg.sigma2, cfg.gamma, &cfg.rs, rule)?;
    let m1 = gittins_bm(x, cfg.sigma1, &cfg.rs, rule)?;
    Ok(m2 - m1)
}

/// Phase-diagram region of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseRegion {
    /// Below the band: arm 1 dominates everywhere.
    AlwaysArm1,
    /// Mixed band with `σ₂ ≤ σ₁`.
    MixedLowSigma2,
    /// Mixed band with `σ₂ > σ₁`.
    MixedHighSigma2,
    /// Above the band: arm 2 dominates everywhere.
    AlwaysArm2,
}

impl PhaseRegion {
    pub fn is_mixed(self) -> bool {
        matches!(self, PhaseRegion::MixedLowSigma2 | PhaseRegion::MixedHighSigma2)
    }

    /// Short label used in raster exports: a | b1 | b2 | c.
    pub fn code(self) -> &'static str {
        match self {
            PhaseRegion::AlwaysArm1 => "a",
            PhaseRegion::MixedLowSigma2 => "b1",
            PhaseRegion::MixedHighSigma2 => "b2",
            PhaseRegion::AlwaysArm2 => "c",
        }
    }
}

/// Classification of one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    pub region: PhaseRegion,
    /// `√(1+Γ/α) − √(Γ/α)`.
    pub lower_bound: f64,
    /// `√(1+Γ/α) + √(Γ/α)`.
    pub upper_bound: f64,
    /// `σ₂/σ₁`.
    pub ratio: f64,
    /// `K = ((B+A) − B₀)/(B₀ − (B−A))`; mixed region only.
    pub kappa: Option<f64>,
    /// Analytic level beyond which `Δ > 0`; mixed region with `Γ > 0` only.
    pub x1_bound: Option<f64>,
    /// Ratio fell exactly on a band edge.
    pub boundary_degenerate: bool,
    /// Sign-change points of `Δ`, when a scan was requested.
    pub thresholds: Vec<f64>,
}

/// Classify the configuration against the phase boundaries.
pub fn classify_phase(cfg: &TabConfig) -> Result<PhaseReport> {
    let g = cfg.gamma / cfg.alpha();
    let lower_bound = (1.0 + g).sqrt() - g.sqrt();
    let upper_bound = (1.0 + g).sqrt() + g.sqrt();
    let ratio = cfg.sigma2 / cfg.sigma1;
    let boundary_degenerate = ratio == lower_bound || ratio == upper_bound;
    let region = if ratio <= lower_bound {
        PhaseRegion::AlwaysArm1
    } else if ratio >= upper_bound {
        PhaseRegion::AlwaysArm2
    } else if ratio <= 1.0 {
        PhaseRegion::MixedLowSigma2
    } else {
        PhaseRegion::MixedHighSigma2
    };
    let (kappa, x1_bound) = if region.is_mixed() && cfg.gamma > 0.0 {
        let c = cfg.constants()?;
        let (a, b, b0) = (c.a_const, c.b_const, c.b0_const);
        let kappa = ((b + a) - b0) / (b0 - (b - a));
        let x1 = (cfg.sigma2 * cfg.sigma2 * (b - a).powi(2) * kappa / (2.0 * cfg.alpha())).ln()
            / (2.0 * a);
        (Some(kappa), Some(x1))
    } else {
        (None, None)
    };
    Ok(PhaseReport {
        region,
        lower_bound,
        upper_bound,
        ratio,
        kappa,
        x1_bound,
        boundary_degenerate,
        thresholds: Vec::new(),
    })
}

/// Result of scanning `Δ` for sign changes.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdScan {
    pub roots: Vec<f64>,
    /// The scan window was doubled once after an empty first pass.
    pub widened: bool,
    /// `Δ(x) > 0` held at every sample in `[x₁, hi]` (mixed region only).
    pub positive_beyond_x1: Option<bool>,
    pub note: Option<String>,
}

const THRESHOLD_SCAN_POINTS: usize = 801;

/// Locate the switching thresholds of `Δ` on `[lo, hi]`.
///
/// Outside the mixed region this returns no roots with a note. Inside it, an
/// empty first scan is retried once on the doubled window. All sign changes
/// found are reported; the guaranteed-positivity of `Δ` beyond `x₁` is audited
/// on 50 samples when `x₁` falls inside the window.
pub fn find_thresholds(
    cfg: &TabConfig,
    lo: f64,
    hi: f64,
    tol: f64,
    rule: &QuadratureRule,
) -> Result<ThresholdScan> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("scan window [{lo}, {hi}] is empty")));
    }
    ensure_positive("tol", tol)?;
    let report = classify_phase(cfg)?;
    if !report.region.is_mixed() {
        return Ok(ThresholdScan {
            roots: Vec::new(),
            widened: false,
            positive_beyond_x1: None,
            note: Some(format!(
                "parameters lie in region {}; the index difference keeps one sign",
                report.region.code()
            )),
        });
    }

    let mut failure: Option<Error> = None;
    let mut delta = |x: f64| -> f64 {
        match index_difference(cfg, x, rule) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut roots = find_sign_changes(&mut delta, lo, hi, THRESHOLD_SCAN_POINTS, tol);
    let mut widened = false;
    if roots.is_empty() {
        widened = true;
        roots = find_sign_changes(&mut delta, 2.0 * lo, 2.0 * hi, THRESHOLD_SCAN_POINTS, tol);
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let positive_beyond_x1 = match report.x1_bound {
        Some(x1) if x1 <= hi => {
            let start = x1.max(lo);
            let mut ok = true;
            for i in 0..50 {
                let x = start + (hi - start) * i as f64 / 49.0;
                if index_difference(cfg, x, rule)? <= 0.0 {
                    ok = false;
                    break;
                }
            }
            Some(ok)
        }
        _ => None,
    };

    let note = if roots.is_empty() {
        Some("mixed-region parameters but no sign change found in the widened window".into())
    } else {
        None
    };
    Ok(ThresholdScan {
        roots,
        widened,
        positive_beyond_x1,
        note,
    })
}

/// `Δ(0)` computed by quadrature alongside its Laplace-transform form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OriginComparison {
    /// Direct `M⁽²⁾(0) − M⁽¹⁾(0)`.
    pub quadrature: f64,
    /// `(h̃(B+A) + h̃(B−A))/(σ₂²B) − 2 h̃(B₀)/(σ₁²B₀)`.
    pub laplace_form: f64,
}

/// Laplace transform `h̃(s) = ∫₀^∞ h(u) e^{−su} du`, via the substitution
/// `u = z/s`.
pub fn laplace_transform_reward(
    rs: &RewardStructure,
    s: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    ensure_positive("s", s)?;
    Ok(rule.exp_weighted_integral(|z| rs.eval_raw(z / s))? / s)
}

/// Compare `Δ(0)` against its closed Laplace form.
///
/// Substituting `u = z/(B±A)` into the spread integrals at the origin and
/// using `2α + σ₂²(B±A)² = 2σ₂²B(B±A)` gives
/// `M⁽²⁾(0) = (h̃(B+A) + h̃(B−A))/(σ₂²B)` and `M⁽¹⁾(0) = 2h̃(B₀)/(σ₁²B₀)`;
/// both routes are returned so their agreement can be asserted.
pub fn delta_at_origin(cfg: &TabConfig, rule: &QuadratureRule) -> Result<OriginComparison> {
    let quadrature = index_difference(cfg, 0.0, rule)?;
    let c = cfg.constants()?;
    let (a, b, b0) = (c.a_const, c.b_const, c.b0_const);
    let h_plus = laplace_transform_reward(&cfg.rs, b + a, rule)?;
    let h_minus = laplace_transform_reward(&cfg.rs, b - a, rule)?;
    let h_zero = laplace_transform_reward(&cfg.rs, b0, rule)?;
    let laplace_form = (h_plus + h_minus) / (cfg.sigma2 * cfg.sigma2 * b)
        - 2.0 * h_zero / (cfg.sigma1 * cfg.sigma1 * b0);
    Ok(OriginComparison {
        quadrature,
        laplace_form,
    })
}

/// One cell of a phase-diagram raster.
#[derive(Debug, Clone, Serialize)]
pub struct RasterCell {
    pub ratio: f64,
    pub gamma_over_alpha: f64,
    pub region: PhaseRegion,
    pub x_plus: Option<f64>,
    pub x_minus: Option<f64>,
    pub kappa: Option<f64>,
}

/// Sweep `(σ₂/σ₁) × (Γ/α)` cells, locating thresholds in mixed cells.
///
/// `σ₁ = 1` throughout; `Γ = g·α` per cell (cells with `g ≥ 1/2` evaluate the
/// spread formula outside its proven regime). Cells are computed in parallel
/// and returned row-major in deterministic order.
pub fn phase_raster(
    ratios: &[f64],
    gammas_over_alpha: &[f64],
    rs: &RewardStructure,
    scan_lo: f64,
    scan_hi: f64,
    tol: f64,
    rule: &QuadratureRule,
) -> Result<Vec<RasterCell>> {
    use rayon::prelude::*;
    let alpha = rs.alpha();
    let cells: Vec<(f64, f64)> = gammas_over_alpha
        .iter()
        .flat_map(|&g| ratios.iter().map(move |&r| (r, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(ratio, g)| {
            ensure_positive("ratio", ratio)?;
            let cfg = TabConfig::new_unrestricted(1.0, ratio, g * alpha, rs.clone())?;
            let mut report = classify_phase(&cfg)?;
            let (x_plus, x_minus) = if report.region.is_mixed() {
                let scan = find_thresholds(&cfg, scan_lo, scan_hi, tol, rule)?;
                report.thresholds = scan.roots.clone();
                (
                    scan.roots.last().copied(),
                    scan.roots.first().copied(),
                )
            } else {
                (None, None)
            };
            Ok(RasterCell {
                ratio,
                gamma_over_alpha: g,
                region: report.region,
                x_plus,
                x_minus,
                kappa: report.kappa,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::RewardFamily;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn logistic_unit() -> RewardStructure {
        RewardStructure::new(1.0, 0.0, 1.0, RewardFamily::Logistic { c: 1.0 }).unwrap()
    }

    fn mixed_cfg() -> TabConfig {
        TabConfig::new(1.0, 1.0, 0.4, logistic_unit()).unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn identical_arms_have_zero_difference() {
        let cfg = TabConfig::new(1.3, 1.3, 0.0, logistic_unit()).unwrap();
        let r = rule();
        for x in [-5.0, 0.0, 2.5] {
            assert_abs_diff_eq!(index_difference(&cfg, x, &r).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wider_second_arm_dominates_at_zero_spread() {
        let cfg = TabConfig::new(1.0, 1.5, 0.0, logistic_unit()).unwrap();
        let r = rule();
        for i in 0..=40 {
            let x = -10.0 + 0.5 * i as f64;
            assert!(index_difference(&cfg, x, &r).unwrap() > 0.0, "x = {x}");
        }
    }

    #[test]
    fn mixed_region_difference_changes_sign() {
        let cfg = mixed_cfg();
        let r = rule();
        let lo = index_difference(&cfg, -20.0, &r).unwrap();
        let hi = index_difference(&cfg, 20.0, &r).unwrap();
        assert!(lo < 0.0 && hi > 0.0, "Δ(−20) = {lo}, Δ(20) = {hi}");
    }

    #[test]
    fn boundary_product_is_one() {
        for g in [0.0_f64, 0.2, 1.0, 2.0, 7.5] {
            let lower = (1.0 + g).sqrt() - g.sqrt();
            let upper = (1.0 + g).sqrt() + g.sqrt();
            assert_relative_eq!(lower * upper, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_spread_band_collapses() {
        let narrow = TabConfig::new(1.0, 0.8, 0.0, logistic_unit()).unwrap();
        assert_eq!(classify_phase(&narrow).unwrap().region, PhaseRegion::AlwaysArm1);
        let wide = TabConfig::new(1.0, 1.2, 0.0, logistic_unit()).unwrap();
        assert_eq!(classify_phase(&wide).unwrap().region, PhaseRegion::AlwaysArm2);
    }

    #[test]
    fn unit_gamma_over_alpha_bounds() {
        let rs = logistic_unit();
        let cfg = TabConfig::new_unrestricted(1.0, 1.0, 1.0, rs).unwrap();
        let report = classify_phase(&cfg).unwrap();
        assert_abs_diff_eq!(report.lower_bound, 2.0_f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.upper_bound, 2.0_f64.sqrt() + 1.0, epsilon = 1e-12);
        assert!(report.region.is_mixed());
    }

    #[test]
    fn large_ratio_classifies_always_arm2() {
        let rs = logistic_unit();
        let cfg = TabConfig::new_unrestricted(1.0, 3.0, 1.0, rs).unwrap();
        assert_eq!(classify_phase(&cfg).unwrap().region, PhaseRegion::AlwaysArm2);
    }

    #[test]
    fn kappa_positive_and_rates_interleave_in_mixed_region() {
        let cfg = mixed_cfg();
        let report = classify_phase(&cfg).unwrap();
        let c = cfg.constants().unwrap();
        assert!(c.b_const - c.a_const < c.b0_const);
        assert!(c.b0_const < c.b_const + c.a_const);
        assert!(report.kappa.unwrap() > 0.0);
    }

    #[test]
    fn kappa_monotone_along_ratio_path() {
        // κ → ∞ at the lower band edge, → 0 at the upper edge.
        let rs = logistic_unit();
        let alpha = 1.0_f64;
        let gamma = 0.4_f64;
        let g = gamma / alpha;
        let lower = (1.0 + g).sqrt() - g.sqrt();
        let upper = (1.0 + g).sqrt() + g.sqrt();
        let mut prev = f64::INFINITY;
        let mut kappas = Vec::new();
        for i in 1..=9 {
            let ratio = lower + (upper - lower) * i as f64 / 10.0;
            let cfg = TabConfig::new(1.0 / ratio, 1.0, gamma, rs.clone()).unwrap();
            let k = classify_phase(&cfg).unwrap().kappa.unwrap();
            assert!(k < prev, "kappa must decrease along the ratio path");
            prev = k;
            kappas.push(k);
        }
        assert!(kappas[0] > 10.0, "near lower edge: {}", kappas[0]);
        assert!(kappas[8] < 0.1, "near upper edge: {}", kappas[8]);
    }

    #[test]
    fn thresholds_empty_outside_mixed_region() {
        let cfg = TabConfig::new(2.0, 1.0, 0.0, logistic_unit()).unwrap();
        let scan = find_thresholds(&cfg, -20.0, 20.0, 1e-8, &rule()).unwrap();
        assert!(scan.roots.is_empty());
        assert!(scan.note.is_some());
    }

    #[test]
    fn mixed_region_threshold_and_positivity_audit() {
        let cfg = mixed_cfg();
        let scan = find_thresholds(&cfg, -20.0, 20.0, 1e-8, &rule()).unwrap();
        assert!(!scan.roots.is_empty(), "expected at least one threshold");
        assert_eq!(scan.positive_beyond_x1, Some(true));
        // The threshold must sit at or below the analytic level x₁.
        let x1 = classify_phase(&cfg).unwrap().x1_bound.unwrap();
        assert!(scan.roots.iter().all(|&r| r <= x1 + 1e-6));
    }

    #[test]
    fn delta_decomposition_matches_direct_difference() {
        // Δ = ρ₀[(S₋ − S₀) − y/(1+y)(S₋ − S₊)] with
        // y = σ₂²(A−B)² e^{−2Ax}/(2α).
        let cfg = mixed_cfg();
        let r = rule();
        let c = cfg.constants().unwrap();
        let (a, b, b0) = (c.a_const, c.b_const, c.b0_const);
        let alpha = cfg.alpha();
        let rs = cfg.reward();
        for i in 0..=20 {
            let x = -5.0 + 0.5 * i as f64;
            let s_minus = r
                .exp_weighted_integral(|z| rs.eval_raw(x + z / (b - a)))
                .unwrap();
            let s_plus = r
                .exp_weighted_integral(|z| rs.eval_raw(x + z / (b + a)))
                .unwrap();
            let s_zero = r.exp_weighted_integral(|z| rs.eval_raw(x + z / b0)).unwrap();
            let y = cfg.sigma2().powi(2) * (a - b).powi(2) * (-2.0 * a * x).exp() / (2.0 * alpha);
            let decomposed =
                (1.0 / alpha) * ((s_minus - s_zero) - y / (1.0 + y) * (s_minus - s_plus));
            let direct = index_difference(&cfg, x, &r).unwrap();
            assert_relative_eq!(direct, decomposed, max_relative = 1e-10, epsilon = 1e-13);
            // The same y reproduces both mixture weights.
            let (rho_m, rho_p) =
                crate::closed_form::dmps_weights(x, cfg.sigma2(), cfg.gamma(), alpha).unwrap();
            assert_relative_eq!(rho_m, (1.0 / alpha) / (1.0 + y), max_relative = 1e-10);
            assert_relative_eq!(rho_p, y * rho_m, max_relative = 1e-10);
        }
    }

    #[test]
    fn origin_laplace_form_matches_quadrature() {
        let r = rule();
        let cases = [
            (1.0, 1.0, 0.4, 1.0),
            (1.0, 1.5, 0.3, 1.0),
            (0.8, 1.1, 0.2, 0.7),
        ];
        for (s1, s2, gamma, alpha) in cases {
            let rs = RewardStructure::new(alpha, 0.0, 1.0, RewardFamily::Logistic { c: 1.0 })
                .unwrap();
            let cfg = TabConfig::new(s1, s2, gamma, rs).unwrap();
            let cmp = delta_at_origin(&cfg, &r).unwrap();
            assert_abs_diff_eq!(cmp.quadrature, cmp.laplace_form, epsilon = 1e-8);
        }
    }

    #[test]
    fn origin_difference_vanishes_for_identical_arms() {
        let cfg = TabConfig::new(1.0, 1.0, 0.0, logistic_unit()).unwrap();
        let cmp = delta_at_origin(&cfg, &rule()).unwrap();
        assert_abs_diff_eq!(cmp.quadrature, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.laplace_form, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn origin_difference_positive_in_always_arm2_region() {
        let rs = logistic_unit();
        let cfg = TabConfig::new_unrestricted(1.0, 3.0, 1.0, rs).unwrap();
        let cmp = delta_at_origin(&cfg, &rule()).unwrap();
        assert!(cmp.quadrature > 0.0);
    }

    #[test]
    fn raster_cells_cover_grid_in_order() {
        let rs = logistic_unit();
        let ratios = [0.5, 1.0, 2.5];
        let gs = [0.0, 1.0];
        let cells = phase_raster(&ratios, &gs, &rs, -20.0, 20.0, 1e-8, &rule()).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].ratio, 0.5);
        assert_eq!(cells[0].gamma_over_alpha, 0.0);
        assert_eq!(cells[4].ratio, 1.0);
        assert_eq!(cells[4].gamma_over_alpha, 1.0);
        assert!(cells[4].region.is_mixed());
        assert!(cells[4].x_plus.is_some());
    }
}
