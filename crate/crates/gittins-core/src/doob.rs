//! General Gittins engine on numerically solved ODE bases, and the
//! change-of-measure transform.
//!
//! For a scalar diffusion `dX = μ(X) dt + σ dW` with killed generator
//! `ℒ_α[f] = ½σ²f″ + μf′ − αf`, the index is a ratio of Wronskians:
//!
//! ```text
//! M_α(x) = W[φ_α, η_α](x) / W[φ_α, 1](x) · ∫_x^∞ 2 h(s) φ_α(s) ds / (σ² W[φ_α, η_α](s))
//! ```
//!
//! where `φ_α` decays at `+∞` and `η_α` decays at `−∞`. The basis is built by
//! fourth-order integration from the truncated ends with the asymptotic slope
//! ratios `f′/f = (−μ ∓ √(μ² + 2ασ²))/σ²` — integrating each solution *into*
//! its growing direction, which damps boundary-slope contamination
//! exponentially. Queries are restricted to an interior margin of the grid.
//!
//! Sign convention: `W[f, g] = f g′ − f′ g`, so `W[φ, 1] = −φ′ > 0` for a
//! decaying positive `φ`; with this choice the Brownian case reproduces the
//! closed-form exponential-weight integral exactly.
//!
//! The change-of-measure machinery: given `F_Γ = p φ_Γ + q η_Γ > 0`, the
//! drift-modified process `m = μ + σ²(ln F_Γ)′` has index
//!
//! ```text
//! M_{α,Γ}(x) = W[φ_{α+Γ}, η_{α+Γ}](x) / W[φ_{α+Γ}, F_Γ](x)
//!            · ∫_x^∞ 2 h(s) φ_{α+Γ}(s) F_Γ(s) ds / (σ² W[φ_{α+Γ}, η_{α+Γ}](s))
//! ```
//!
//! and the underlying basis identities `φ_{α,Γ} = φ_{α+Γ}/F_Γ`,
//! `W[φ_{α,Γ}, η_{α,Γ}] = W[φ_{α+Γ}, η_{α+Γ}]/F_Γ²` are verifiable
//! numerically; [`verify_basis_transform`] and [`verify_wronskian_ratios`]
//! do exactly that.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::rewards::RewardStructure;

/// A scalar diffusion arm: state-dependent drift, constant volatility.
#[derive(Clone)]
pub struct ArmModel {
    drift: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sigma: f64,
    label: String,
}

impl fmt::Debug for ArmModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArmModel")
            .field("label", &self.label)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl ArmModel {
    pub fn new(
        label: impl Into<String>,
        sigma: f64,
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure_positive("sigma", sigma)?;
        Ok(Self {
            drift: Arc::new(drift),
            sigma,
            label: label.into(),
        })
    }

    /// Driftless Brownian motion.
    pub fn brownian(sigma: f64) -> Result<Self> {
        Self::new(format!("bm(sigma={sigma})"), sigma, |_| 0.0)
    }

    /// Brownian motion with constant drift.
    pub fn drifted(mu: f64, sigma: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        Self::new(format!("drifted(mu={mu},sigma={sigma})"), sigma, move |_| mu)
    }

    /// The mean-preserving spread process `dX = σ²A tanh(AX) dt + σ dW`,
    /// `A = √(2Γ)/σ`.
    pub fn dmps(sigma: f64, gamma: f64) -> Result<Self> {
        ensure_positive("sigma", sigma)?;
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!("`gamma` must be non-negative, got {gamma}")));
        }
        let a = (2.0 * gamma).sqrt() / sigma;
        let s2a = sigma * sigma * a;
        Self::new(format!("dmps(sigma={sigma},gamma={gamma})"), sigma, move |x| {
            s2a * (a * x).tanh()
        })
    }

    /// The drift-modified model `dX = [μ(X) + σ²(ln F_Γ)′(X)] dt + σ dW`.
    pub fn doob_transformed(
        base: &ArmModel,
        spec: &DoobFactorSpec,
        basis_gamma: &Arc<OdeBasis>,
    ) -> Result<Self> {
        basis_gamma.require_rate(spec.gamma, "basis_gamma")?;
        let base_drift = base.drift.clone();
        let sigma = base.sigma;
        let sigma_sq = sigma * sigma;
        let (p, q) = (spec.p_coef, spec.q_coef);
        let basis = basis_gamma.clone();
        let label = format!(
            "doob(p={p},q={q},gamma={})∘{}",
            spec.gamma, base.label
        );
        Self::new(label, sigma, move |x| {
            let (pv, pd) = basis.phi(x);
            let (ev, ed) = basis.eta(x);
            let f = p * pv + q * ev;
            let fd = p * pd + q * ed;
            base_drift(x) + sigma_sq * fd / f
        })
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Coefficients of the positive factor `F_Γ = p φ_Γ + q η_Γ`.
#[derive(Debug, Clone, Copy)]
pub struct DoobFactorSpec {
    pub p_coef: f64,
    pub q_coef: f64,
    pub gamma: f64,
}

impl DoobFactorSpec {
    pub fn new(p_coef: f64, q_coef: f64, gamma: f64) -> Result<Self> {
        ensure_finite("p_coef", p_coef)?;
        ensure_finite("q_coef", q_coef)?;
        ensure_positive("gamma", gamma)?;
        if p_coef < 0.0 || q_coef < 0.0 || p_coef + q_coef <= 0.0 {
            return Err(Error::Domain(
                "factor coefficients must be non-negative and not both zero".into(),
            ));
        }
        Ok(Self { p_coef, q_coef, gamma })
    }

    /// `F_Γ(x)` and `F_Γ′(x)` from a basis solved at rate `gamma`.
    pub fn factor_at(&self, basis_gamma: &OdeBasis, x: f64) -> (f64, f64) {
        let (pv, pd) = basis_gamma.phi(x);
        let (ev, ed) = basis_gamma.eta(x);
        (
            self.p_coef * pv + self.q_coef * ev,
            self.p_coef * pd + self.q_coef * ed,
        )
    }
}

/// Numerically represented homogeneous solutions `φ`, `η` of `ℒ_α f = 0` on a
/// truncated uniform grid, normalized to 1 at the grid point nearest 0.
#[derive(Debug, Clone)]
pub struct OdeBasis {
    grid: Vec<f64>,
    phi_vals: Vec<f64>,
    phi_derivs: Vec<f64>,
    eta_vals: Vec<f64>,
    eta_derivs: Vec<f64>,
    alpha_rate: f64,
    sigma: f64,
    dx: f64,
}

impl OdeBasis {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn alpha_rate(&self) -> f64 {
        self.alpha_rate
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn x_min(&self) -> f64 {
        self.grid[0]
    }
    pub fn x_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Interior interval trusted for index queries (10% margin per side).
    pub fn trusted_range(&self) -> (f64, f64) {
        let margin = 0.1 * (self.x_max() - self.x_min());
        (self.x_min() + margin, self.x_max() - margin)
    }

    fn require_trusted(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.trusted_range();
        if x < lo || x > hi {
            return Err(Error::Domain(format!(
                "x = {x} lies outside the trusted interior [{lo}, {hi}] of the basis grid \
                 (boundary contamination)"
            )));
        }
        Ok(())
    }

    fn require_rate(&self, rate: f64, name: &str) -> Result<()> {
        if (self.alpha_rate - rate).abs() > 1e-9 * rate.abs().max(1.0) {
            return Err(Error::config(
                name,
                format!("basis was solved at rate {}, expected {rate}", self.alpha_rate),
            ));
        }
        Ok(())
    }

    /// `(φ(x), φ′(x))` by cubic Hermite interpolation.
    pub fn phi(&self, x: f64) -> (f64, f64) {
        hermite(&self.grid, &self.phi_vals, &self.phi_derivs, self.dx, x)
    }

    /// `(η(x), η′(x))` by cubic Hermite interpolation.
    pub fn eta(&self, x: f64) -> (f64, f64) {
        hermite(&self.grid, &self.eta_vals, &self.eta_derivs, self.dx, x)
    }

    /// `W[φ, η](x) = φη′ − φ′η`.
    pub fn wronskian(&self, x: f64) -> f64 {
        let (pv, pd) = self.phi(x);
        let (ev, ed) = self.eta(x);
        pv * ed - pd * ev
    }
}

/// Piecewise cubic Hermite evaluation of `(value, derivative)` on a uniform grid.
fn hermite(grid: &[f64], vals: &[f64], derivs: &[f64], dx: f64, x: f64) -> (f64, f64) {
    let n = grid.len();
    let idx = ((x - grid[0]) / dx).floor() as isize;
    let i = idx.clamp(0, n as isize - 2) as usize;
    let t = (x - grid[i]) / dx;
    let (y0, y1) = (vals[i], vals[i + 1]);
    let (m0, m1) = (derivs[i] * dx, derivs[i + 1] * dx);
    let t2 = t * t;
    let t3 = t2 * t;
    let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * m1;
    let deriv = ((6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * m1)
        / dx;
    (value, deriv)
}

/// Solve the homogeneous basis for `model` at rate `alpha` on `[x_min, x_max]`.
///
/// `φ` is integrated backward from `x_max`, `η` forward from `x_min`, each
/// seeded with the decaying asymptotic slope, then renormalized to 1 at the
/// grid point nearest 0. Construction fails if the ODE residual, decay or
/// Wronskian non-degeneracy invariants do not hold afterwards.
pub fn solve_basis(
    model: &ArmModel,
    alpha: f64,
    x_min: f64,
    x_max: f64,
    n_grid: usize,
) -> Result<OdeBasis> {
    ensure_positive("alpha", alpha)?;
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
        return Err(Error::Domain(format!(
            "invalid basis interval [{x_min}, {x_max}]"
        )));
    }
    if n_grid < 100 {
        return Err(Error::Domain(format!(
            "basis grid needs at least 100 points, got {n_grid}"
        )));
    }
    let cond = check_karatzas_condition(model, alpha, x_min, x_max, 201);
    if !cond.pass {
        return Err(Error::Regime(format!(
            "drift condition alpha - mu'(x) > 0 fails on [{x_min}, {x_max}]: minimum {} at x = {}",
            cond.min_gap, cond.witness
        )));
    }

    let n = n_grid;
    let dx = (x_max - x_min) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| x_min + i as f64 * dx).collect();
    let sigma = model.sigma;
    let sigma_sq = sigma * sigma;

    let asymptotic_slope = |x: f64, decaying_right: bool| -> f64 {
        let mu = model.drift(x);
        let root = (mu * mu + 2.0 * alpha * sigma_sq).sqrt();
        if decaying_right {
            (-mu - root) / sigma_sq
        } else {
            (-mu + root) / sigma_sq
        }
    };

    // φ: backward sweep, stored right-to-left.
    let slope = asymptotic_slope(x_max, true);
    let (mut phi_vals, mut phi_derivs) =
        integrate_sweep(model, alpha, &grid, dx, 1.0, slope, true)?;
    // η: forward sweep.
    let slope = asymptotic_slope(x_min, false);
    let (mut eta_vals, mut eta_derivs) =
        integrate_sweep(model, alpha, &grid, dx, 1.0, slope, false)?;

    // Normalize both solutions to 1 at the grid point nearest 0.
    let i0 = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    for (vals, derivs, name) in [
        (&mut phi_vals, &mut phi_derivs, "phi"),
        (&mut eta_vals, &mut eta_derivs, "eta"),
    ] {
        let scale = vals[i0];
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Convergence(format!(
                "{name} normalization value at x = {} is {scale}",
                grid[i0]
            )));
        }
        for v in vals.iter_mut() {
            *v /= scale;
        }
        for d in derivs.iter_mut() {
            *d /= scale;
        }
    }

    let basis = OdeBasis {
        grid,
        phi_vals,
        phi_derivs,
        eta_vals,
        eta_derivs,
        alpha_rate: alpha,
        sigma,
        dx,
    };
    validate_basis(model, alpha, &basis)?;
    Ok(basis)
}

/// Solve on the default span `[−30, 30]`, doubling the grid until the basis
/// values at interior probes move by less than 1e−8 relative.
pub fn solve_basis_auto(model: &ArmModel, alpha: f64) -> Result<OdeBasis> {
    const PROBES: [f64; 5] = [-2.0, -0.5, 0.0, 0.5, 2.0];
    let (x_min, x_max) = (-30.0, 30.0);
    let mut n = 6001;
    let mut basis = solve_basis(model, alpha, x_min, x_max, n)?;
    for _ in 0..3 {
        let finer_n = 2 * (n - 1) + 1;
        let finer = solve_basis(model, alpha, x_min, x_max, finer_n)?;
        let mut worst = 0.0_f64;
        for &x in &PROBES {
            for (a, b) in [
                (basis.phi(x), finer.phi(x)),
                (basis.eta(x), finer.eta(x)),
            ] {
                worst = worst.max((a.0 - b.0).abs() / b.0.abs().max(1e-300));
                worst = worst.max((a.1 - b.1).abs() / b.1.abs().max(1.0));
            }
        }
        basis = finer;
        n = finer_n;
        if worst < 1e-8 {
            break;
        }
    }
    Ok(basis)
}

/// RK4 sweep of `f″ = (2/σ²)(α f − μ f′)` across the grid.
///
/// `backward` integrates from the last grid point down. The running solution
/// is rescaled (together with everything stored so far) whenever it exceeds
/// 1e250; all downstream formulas are scale-invariant per solution.
fn integrate_sweep(
    model: &ArmModel,
    alpha: f64,
    grid: &[f64],
    dx: f64,
    f0: f64,
    slope0: f64,
    backward: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let sigma_sq = model.sigma * model.sigma;
    let rhs = |x: f64, f: f64, g: f64| -> (f64, f64) {
        (g, (2.0 / sigma_sq) * (alpha * f - model.drift(x) * g))
    };
    let mut vals = vec![0.0; n];
    let mut derivs = vec![0.0; n];
    let h = if backward { -dx } else { dx };
    let mut idx: isize = if backward { n as isize - 1 } else { 0 };
    let step: isize = if backward { -1 } else { 1 };
    let (mut f, mut g) = (f0, slope0 * f0);
    vals[idx as usize] = f;
    derivs[idx as usize] = g;
    for _ in 1..n {
        let x = grid[idx as usize];
        let (k1f, k1g) = rhs(x, f, g);
        let (k2f, k2g) = rhs(x + 0.5 * h, f + 0.5 * h * k1f, g + 0.5 * h * k1g);
        let (k3f, k3g) = rhs(x + 0.5 * h, f + 0.5 * h * k2f, g + 0.5 * h * k2g);
        let (k4f, k4g) = rhs(x + h, f + h * k3f, g + h * k3g);
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        idx += step;
        if !f.is_finite() || !g.is_finite() {
            return Err(Error::Numeric(format!(
                "basis sweep produced a non-finite value near x = {}",
                grid[idx as usize]
            )));
        }
        if f.abs() > 1e250 {
            let scale = 1.0 / f.abs();
            f *= scale;
            g *= scale;
            for v in vals.iter_mut() {
                *v *= scale;
            }
            for d in derivs.iter_mut() {
                *d *= scale;
            }
        }
        vals[idx as usize] = f;
        derivs[idx as usize] = g;
    }
    Ok((vals, derivs))
}

/// Enforce the OdeBasis invariants: ODE residual, directional decay, and a
/// non-degenerate Wronskian of constant sign.
fn validate_basis(model: &ArmModel, alpha: f64, basis: &OdeBasis) -> Result<()> {
    let n = basis.grid.len();
    let dx = basis.dx;
    let sigma_sq = basis.sigma * basis.sigma;
    for (vals, derivs, name) in [
        (&basis.phi_vals, &basis.phi_derivs, "phi"),
        (&basis.eta_vals, &basis.eta_derivs, "eta"),
    ] {
        let mut worst = (0.0_f64, 0.0_f64);
        for i in 2..n - 2 {
            // Fourth-order five-point stencil for f″.
            let fpp = (-vals[i - 2] + 16.0 * vals[i - 1] - 30.0 * vals[i]
                + 16.0 * vals[i + 1]
                - vals[i + 2])
                / (12.0 * dx * dx);
            let x = basis.grid[i];
            let res =
                0.5 * sigma_sq * fpp + model.drift(x) * derivs[i] - alpha * vals[i];
            let rel = res.abs() / (1.0 + vals[i].abs());
            if rel > worst.0 {
                worst = (rel, x);
            }
        }
        if worst.0 > 1e-6 {
            return Err(Error::Convergence(format!(
                "{name} ODE residual {:.3e} at x = {} exceeds 1e-6",
                worst.0, worst.1
            )));
        }
    }

    // Decay: the outer 5% of each solution sits below its center value.
    let edge = (n / 20).max(1);
    let center_phi = basis.phi_vals[n / 2].abs().max(basis.phi_vals[n / 2 - 1].abs());
    let center_eta = basis.eta_vals[n / 2].abs().max(basis.eta_vals[n / 2 - 1].abs());
    let phi_edge_max = basis.phi_vals[n - edge..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eta_edge_max = basis.eta_vals[..edge].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if phi_edge_max >= center_phi {
        return Err(Error::Convergence(
            "phi does not decay toward the right grid edge".into(),
        ));
    }
    if eta_edge_max >= center_eta {
        return Err(Error::Convergence(
            "eta does not decay toward the left grid edge".into(),
        ));
    }

    // Wronskian: constant sign, bounded away from cancellation. The floor is
    // relative to the term magnitudes because W itself scales like
    // exp(−2∫μ/σ²) and legitimately spans hundreds of orders of magnitude.
    let mut sign = 0.0_f64;
    for i in 0..n {
        let t1 = basis.phi_vals[i] * basis.eta_derivs[i];
        let t2 = basis.phi_derivs[i] * basis.eta_vals[i];
        let w = t1 - t2;
        let floor = 1e-12 * (t1.abs() + t2.abs());
        if w.abs() <= floor {
            return Err(Error::Numeric(format!(
                "basis Wronskian degenerate at x = {}",
                basis.grid[i]
            )));
        }
        if sign == 0.0 {
            sign = w.signum();
        } else if w.signum() != sign {
            return Err(Error::Numeric(format!(
                "basis Wronskian changes sign at x = {}",
                basis.grid[i]
            )));
        }
    }
    Ok(())
}

/// Exponentially extrapolated tail `∫_{x_edge}^∞ g(s) ds ≈ g(x_edge)/|λ|`,
/// where `λ < 0` is the analytic log-slope of the integrand at the edge.
fn right_tail(g_edge: f64, log_slope: f64) -> Result<f64> {
    if log_slope >= 0.0 {
        return Err(Error::Numeric(format!(
            "integrand does not decay beyond the grid (log-slope {log_slope})"
        )));
    }
    Ok(-g_edge / log_slope)
}

/// Relative log-derivative `h′/h` of the reward, dropped when `h` vanishes.
fn reward_log_slope(rs: &RewardStructure, x: f64) -> f64 {
    let hv = rs.eval_raw(x);
    if hv.abs() < 1e-300 {
        return 0.0;
    }
    let slope = rs.eval_derivative_raw(x) / hv;
    if slope.is_finite() {
        slope
    } else {
        0.0
    }
}

/// Composite-Simpson integral of `g` over `[a, b]` with `n_sub` subintervals.
fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n_sub: usize) -> f64 {
    let n = if n_sub % 2 == 0 { n_sub } else { n_sub + 1 };
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(a + i as f64 * h);
    }
    acc * h / 3.0
}

const INDEX_SIMPSON_SUBDIVISIONS: usize = 4000;

/// Gittins index from the Wronskian-ratio formula on a solved basis.
pub fn gittins_wronskian_general(
    x: f64,
    model: &ArmModel,
    alpha: f64,
    rs: &RewardStructure,
    basis: &OdeBasis,
) -> Result<f64> {
    ensure_finite("x", x)?;
    basis.require_rate(alpha, "basis")?;
    basis.require_trusted(x)?;
    let sigma_sq = basis.sigma * basis.sigma;
    let integrand = |s: f64| 2.0 * rs.eval_raw(s) * basis.phi(s).0 / (sigma_sq * basis.wronskian(s));
    let x_max = basis.x_max();
    let body = simpson(&integrand, x, x_max, INDEX_SIMPSON_SUBDIVISIONS);
    let (phi_e, dphi_e) = basis.phi(x_max);
    let log_slope =
        reward_log_slope(rs, x_max) + dphi_e / phi_e + 2.0 * model.drift(x_max) / sigma_sq;
    let tail = right_tail(integrand(x_max), log_slope)?;
    let (phi_x, dphi_x) = basis.phi(x);
    let _ = phi_x;
    let ratio = basis.wronskian(x) / (-dphi_x);
    let m = ratio * (body + tail);
    if !m.is_finite() {
        return Err(Error::Numeric(format!("index evaluated to {m} at x = {x}")));
    }
    Ok(m)
}

/// Particular solution `p_α(x)` of `ℒ_α p = h` built from the basis by
/// variation of parameters:
/// `p = −φ ∫_{−∞}^x 2hη/(σ²W) − η ∫_x^∞ 2hφ/(σ²W)`.
///
/// Both terms carry a minus sign with the convention `W = φη′ − φ′η`; this is
/// what makes the cross terms of `p′` cancel, and it is pinned by the exact
/// fixtures `h ≡ c ⇒ p ≡ −c/α` and (driftless, α = 1) `h(x) = x ⇒ p = −x`.
pub fn particular_solution(
    model: &ArmModel,
    alpha: f64,
    rs: &RewardStructure,
    basis: &OdeBasis,
    x: f64,
) -> Result<f64> {
    ensure_finite("x", x)?;
    basis.require_rate(alpha, "basis")?;
    basis.require_trusted(x)?;
    let sigma_sq = basis.sigma * basis.sigma;
    let (x_min, x_max) = (basis.x_min(), basis.x_max());

    let g_left = |s: f64| 2.0 * rs.eval_raw(s) * basis.eta(s).0 / (sigma_sq * basis.wronskian(s));
    let g_right = |s: f64| 2.0 * rs.eval_raw(s) * basis.phi(s).0 / (sigma_sq * basis.wronskian(s));

    let left_body = simpson(&g_left, x_min, x, INDEX_SIMPSON_SUBDIVISIONS);
    let right_body = simpson(&g_right, x, x_max, INDEX_SIMPSON_SUBDIVISIONS);

    // Tail below x_min: integrand decays toward −∞ when its log-slope is positive.
    let (eta_e, deta_e) = basis.eta(x_min);
    let left_slope =
        reward_log_slope(rs, x_min) + deta_e / eta_e + 2.0 * model.drift(x_min) / sigma_sq;
    if left_slope <= 0.0 {
        return Err(Error::Numeric(format!(
            "left integrand does not decay below the grid (log-slope {left_slope})"
        )));
    }
    let left_tail = g_left(x_min) / left_slope;

    let (phi_e, dphi_e) = basis.phi(x_max);
    let right_slope =
        reward_log_slope(rs, x_max) + dphi_e / phi_e + 2.0 * model.drift(x_max) / sigma_sq;
    let right_tail_val = right_tail(g_right(x_max), right_slope)?;

    let (phi_x, _) = basis.phi(x);
    let (eta_x, _) = basis.eta(x);
    let p = -phi_x * (left_body + left_tail) - eta_x * (right_body + right_tail_val);
    if !p.is_finite() {
        return Err(Error::Numeric(format!(
            "particular solution evaluated to {p} at x = {x}"
        )));
    }
    Ok(p)
}

/// Drift of the transformed process, `m(x) = μ(x) + σ² F_Γ′(x)/F_Γ(x)`.
pub fn doob_drift(
    model: &ArmModel,
    spec: &DoobFactorSpec,
    basis_gamma: &OdeBasis,
    x: f64,
) -> Result<f64> {
    ensure_finite("x", x)?;
    basis_gamma.require_rate(spec.gamma, "basis_gamma")?;
    let (f, fd) = spec.factor_at(basis_gamma, x);
    if f <= 0.0 {
        return Err(Error::Numeric(format!(
            "factor F = {f} is not positive at x = {x}"
        )));
    }
    Ok(model.drift(x) + model.sigma * model.sigma * fd / f)
}

/// Transformed Gittins index via the change-of-measure formula, using bases at
/// rates `alpha + Γ` and `Γ` for the *base* model.
pub fn gittins_change_of_measure(
    x: f64,
    base: &ArmModel,
    spec: &DoobFactorSpec,
    alpha: f64,
    rs: &RewardStructure,
    basis_sum: &OdeBasis,
    basis_gamma: &OdeBasis,
) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("alpha", alpha)?;
    basis_sum.require_rate(alpha + spec.gamma, "basis_sum")?;
    basis_gamma.require_rate(spec.gamma, "basis_gamma")?;
    basis_sum.require_trusted(x)?;

    // Drift condition of the transform theorem: alpha − m′ > 0 across the
    // trusted grid, with m′ from central differences of the numerical drift.
    let (lo, hi) = basis_gamma.trusted_range();
    let n_check = 301;
    let step = (hi - lo) / (n_check - 1) as f64;
    let fd_h = step;
    for i in 0..n_check {
        let xc = lo + i as f64 * step;
        let m_plus = doob_drift(base, spec, basis_gamma, xc + fd_h)?;
        let m_minus = doob_drift(base, spec, basis_gamma, xc - fd_h)?;
        let m_prime = (m_plus - m_minus) / (2.0 * fd_h);
        if alpha - m_prime <= 0.0 {
            return Err(Error::Regime(format!(
                "transform drift condition alpha - m'(x) > 0 fails at x = {xc} \
                 (alpha - m' = {})",
                alpha - m_prime
            )));
        }
    }

    let sigma_sq = base.sigma * base.sigma;
    let integrand = |s: f64| {
        let (f, _) = spec.factor_at(basis_gamma, s);
        2.0 * rs.eval_raw(s) * basis_sum.phi(s).0 * f / (sigma_sq * basis_sum.wronskian(s))
    };
    let x_max = basis_sum.x_max();
    let body = simpson(&integrand, x, x_max, INDEX_SIMPSON_SUBDIVISIONS);
    let (phi_e, dphi_e) = basis_sum.phi(x_max);
    let (f_e, fd_e) = spec.factor_at(basis_gamma, x_max);
    let log_slope = reward_log_slope(rs, x_max)
        + dphi_e / phi_e
        + fd_e / f_e
        + 2.0 * base.drift(x_max) / sigma_sq;
    let tail = right_tail(integrand(x_max), log_slope)?;

    let (phi_x, dphi_x) = basis_sum.phi(x);
    let (f_x, fd_x) = spec.factor_at(basis_gamma, x);
    let w_phi_f = phi_x * fd_x - dphi_x * f_x;
    let ratio = basis_sum.wronskian(x) / w_phi_f;
    let m = ratio * (body + tail);
    if !m.is_finite() {
        return Err(Error::Numeric(format!("index evaluated to {m} at x = {x}")));
    }
    Ok(m)
}

/// One constancy check inside an [`IdentityReport`].
#[derive(Debug, Clone)]
pub struct IdentityEntry {
    pub name: &'static str,
    /// Best-fit proportionality scalar between the two sides.
    pub scalar: f64,
    /// Maximum relative deviation of the pointwise ratio from the scalar.
    pub max_rel_dev: f64,
}

/// Outcome of verifying a transform identity up to per-solution scalars.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
    pub tol: f64,
}

impl IdentityReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_dev < self.tol)
    }
}

const IDENTITY_TOL: f64 = 1e-4;

/// Check how constant `lhs/rhs` is over the trusted grid of `basis`.
fn constancy_entry(
    name: &'static str,
    basis: &OdeBasis,
    lhs: impl Fn(f64) -> f64,
    rhs: impl Fn(f64) -> f64,
) -> IdentityEntry {
    let (lo, hi) = basis.trusted_range();
    let mut ratios = Vec::new();
    for &x in basis.grid() {
        if x < lo || x > hi {
            continue;
        }
        let denom = rhs(x);
        if denom.abs() < 1e-300 {
            continue;
        }
        ratios.push(lhs(x) / denom);
    }
    let scalar = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_rel_dev = ratios
        .iter()
        .map(|r| (r - scalar).abs() / scalar.abs().max(1e-300))
        .fold(0.0_f64, f64::max);
    IdentityEntry {
        name,
        scalar,
        max_rel_dev,
    }
}

/// Verify `φ_{α,Γ} ∝ φ_{α+Γ}/F_Γ` and `η_{α,Γ} ∝ η_{α+Γ}/F_Γ` numerically.
///
/// `modified_basis` is expected to be solved at rate `alpha` for the
/// drift-modified model, but no input consistency is enforced here: feeding
/// mismatched bases is precisely the negative control, and it shows up as a
/// failing (non-constant) report entry rather than an error. Normalization
/// differences make each identity hold only up to a scalar, so the report
/// measures deviation from the best-fit constant.
pub fn verify_basis_transform(
    _base: &ArmModel,
    spec: &DoobFactorSpec,
    _alpha: f64,
    basis_sum: &OdeBasis,
    basis_gamma: &OdeBasis,
    modified_basis: &OdeBasis,
) -> Result<IdentityReport> {
    let phi = constancy_entry(
        "phi_transform",
        modified_basis,
        |x| modified_basis.phi(x).0 * spec.factor_at(basis_gamma, x).0,
        |x| basis_sum.phi(x).0,
    );
    let eta = constancy_entry(
        "eta_transform",
        modified_basis,
        |x| modified_basis.eta(x).0 * spec.factor_at(basis_gamma, x).0,
        |x| basis_sum.eta(x).0,
    );
    Ok(IdentityReport {
        entries: vec![phi, eta],
        tol: IDENTITY_TOL,
    })
}

/// Verify the Wronskian transform identities
/// `W[φ_{α,Γ}, 1] ∝ W[φ_{α+Γ}, F_Γ]/F_Γ²` and
/// `W[φ_{α,Γ}, η_{α,Γ}] ∝ W[φ_{α+Γ}, η_{α+Γ}]/F_Γ²`.
pub fn verify_wronskian_ratios(
    _base: &ArmModel,
    spec: &DoobFactorSpec,
    _alpha: f64,
    basis_sum: &OdeBasis,
    basis_gamma: &OdeBasis,
    modified_basis: &OdeBasis,
) -> Result<IdentityReport> {
    let against_one = constancy_entry(
        "wronskian_phi_one",
        modified_basis,
        |x| -modified_basis.phi(x).1,
        |x| {
            let (f, fd) = spec.factor_at(basis_gamma, x);
            let (pv, pd) = basis_sum.phi(x);
            (pv * fd - pd * f) / (f * f)
        },
    );
    let against_eta = constancy_entry(
        "wronskian_phi_eta",
        modified_basis,
        |x| modified_basis.wronskian(x),
        |x| {
            let (f, _) = spec.factor_at(basis_gamma, x);
            basis_sum.wronskian(x) / (f * f)
        },
    );
    Ok(IdentityReport {
        entries: vec![against_one, against_eta],
        tol: IDENTITY_TOL,
    })
}

/// Outcome of probing the drift condition `alpha − μ′(x) > 0` on a grid.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    pub min_gap: f64,
    pub max_gap: f64,
    /// Grid point attaining the minimum gap.
    pub witness: f64,
    pub pass: bool,
}

/// Probe `alpha − μ′(x)` over `n` grid points on `[x_min, x_max]`, with `μ′`
/// from central differences at step 1e−5.
pub fn check_karatzas_condition(
    model: &ArmModel,
    alpha: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> ConditionReport {
    let n = n.max(2);
    let step = (x_max - x_min) / (n - 1) as f64;
    let fd = 1e-5;
    let mut min_gap = f64::INFINITY;
    let mut max_gap = f64::NEG_INFINITY;
    let mut witness = x_min;
    for i in 0..n {
        let x = x_min + i as f64 * step;
        let mu_prime = (model.drift(x + fd) - model.drift(x - fd)) / (2.0 * fd);
        let gap = alpha - mu_prime;
        if gap < min_gap {
            min_gap = gap;
            witness = x;
        }
        max_gap = max_gap.max(gap);
    }
    ConditionReport {
        min_gap,
        max_gap,
        witness,
        pass: min_gap > 0.0,
    }
}
