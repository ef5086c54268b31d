//! Independent lattice oracle for the Gittins index via retirement
//! calibration.
//!
//! The index of a diffusion arm at `x` is the retirement reward `m` at which
//! stopping immediately becomes optimal in the problem
//!
//! ```text
//! V_m(x) = sup_τ  E_x[ ∫₀^τ h(X_s) e^{−αs} ds + e^{−ατ} m ]
//! ```
//!
//! The diffusion is discretized to a birth–death lattice with spacing `dx`,
//! time step `dt = dx²/σ²` and one-step probabilities
//! `p± = ½ ± μ(x) dx / (2σ²)` (the time step maximizes `dt` per `dx`, giving a
//! two-point walk; the constructor shrinks `dx` until `|μ| dx ≤ σ²` keeps the
//! probabilities valid). Boundaries reflect; the truncation is benign because
//! `h′` vanishes in the tails.
//!
//! `V_m` is the fixed point of `V = max(m, r + e^{−α dt} P V)` with the
//! per-step reward `r = h(x)(1 − e^{−α dt})/α`, i.e. the within-step integral
//! `∫₀^dt h e^{−αs} ds` with `h` frozen on the step. Using the exact step
//! discount (rather than `h·dt`) keeps two exact fixtures exact: retiring
//! dominates everywhere as soon as `m ≥ K`, and `h ≡ c` is indifferent at
//! `m = c/α` to machine precision.
//!
//! The fixed point is found by policy iteration over stop/continue sets —
//! each evaluation is one tridiagonal solve — and verified afterwards against
//! the Bellman operator to a sup-norm residual of 1e−10. The index is then a
//! bisection over `m`.

use crate::doob::ArmModel;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::rewards::RewardStructure;

/// Reflecting birth–death lattice matched to a diffusion.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub x_center: f64,
    pub half_width: f64,
    pub n_states: usize,
    /// Implied time step `dx²/σ²`.
    pub dt: f64,
    dx: f64,
    /// Up-move probability per state.
    p_up: Vec<f64>,
}

impl LatticeSpec {
    /// Build a lattice for `model`, refining `dx` until the one-step
    /// probabilities are valid at every state.
    pub fn new(
        model: &ArmModel,
        x_center: f64,
        half_width: f64,
        n_states: usize,
    ) -> Result<Self> {
        ensure_finite("x_center", x_center)?;
        ensure_positive("half_width", half_width)?;
        if n_states < 3 || n_states % 2 == 0 {
            return Err(Error::config(
                "n_states",
                format!("must be an odd count of at least 3, got {n_states}"),
            ));
        }
        let sigma_sq = model.sigma() * model.sigma();
        let mut n = n_states;
        loop {
            let dx = 2.0 * half_width / (n - 1) as f64;
            let mut max_drift = 0.0_f64;
            for i in 0..n {
                let x = x_center - half_width + i as f64 * dx;
                max_drift = max_drift.max(model.drift(x).abs());
            }
            if max_drift * dx <= sigma_sq {
                let p_up = (0..n)
                    .map(|i| {
                        let x = x_center - half_width + i as f64 * dx;
                        0.5 + model.drift(x) * dx / (2.0 * sigma_sq)
                    })
                    .collect();
                return Ok(Self {
                    x_center,
                    half_width,
                    n_states: n,
                    dt: dx * dx / sigma_sq,
                    dx,
                    p_up,
                });
            }
            n = 2 * (n - 1) + 1;
            if n > 20_000_001 {
                return Err(Error::config(
                    "n_states",
                    "drift too strong for a valid lattice at any tractable resolution",
                ));
            }
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn state(&self, i: usize) -> f64 {
        self.x_center - self.half_width + i as f64 * self.dx
    }

    /// Index of the lattice state nearest to `x`; errors outside the lattice.
    pub fn snap(&self, x: f64) -> Result<usize> {
        ensure_finite("x", x)?;
        let lo = self.x_center - self.half_width;
        let hi = self.x_center + self.half_width;
        if x < lo || x > hi {
            return Err(Error::Domain(format!(
                "x = {x} lies outside the lattice [{lo}, {hi}]"
            )));
        }
        Ok(((x - lo) / self.dx).round() as usize)
    }

    /// Continuation value `p⁻ V(i−1) + p⁺ V(i+1)` with reflecting ends.
    fn expected_next(&self, values: &[f64], i: usize) -> f64 {
        let n = self.n_states;
        let up = self.p_up[i];
        let down = 1.0 - up;
        let v_down = if i == 0 { values[0] } else { values[i - 1] };
        let v_up = if i == n - 1 { values[n - 1] } else { values[i + 1] };
        down * v_down + up * v_up
    }
}

/// Value function of the retirement problem with reward `m`, on all states.
pub fn retirement_value(
    model: &ArmModel,
    rs: &RewardStructure,
    lattice: &LatticeSpec,
    m: f64,
) -> Result<Vec<f64>> {
    ensure_finite("m", m)?;
    let n = lattice.n_states;
    let alpha = rs.alpha();
    let discount = (-alpha * lattice.dt).exp();
    // Exact within-step discounted reward for a frozen state.
    let step_scale = (1.0 - discount) / alpha;
    let rewards: Vec<f64> = (0..n).map(|i| rs.eval_raw(lattice.state(i)) * step_scale).collect();
    let _ = model;

    // Policy iteration over stop sets; each policy evaluation is one
    // tridiagonal solve of the continuation system.
    let mut stop = vec![true; n];
    let mut values = vec![m; n];
    let mut converged = false;
    for _ in 0..1000 {
        values = evaluate_policy(lattice, &rewards, discount, &stop, m);
        let mut changed = false;
        for i in 0..n {
            let continuation = rewards[i] + discount * lattice.expected_next(&values, i);
            let should_stop = m >= continuation;
            if should_stop != stop[i] {
                stop[i] = should_stop;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "retirement policy iteration did not settle within 1000 rounds".into(),
        ));
    }
    for v in values.iter_mut() {
        *v = v.max(m);
    }

    // Certify the fixed point against the Bellman operator.
    let mut residual = 0.0_f64;
    for i in 0..n {
        let bellman = m.max(rewards[i] + discount * lattice.expected_next(&values, i));
        residual = residual.max((values[i] - bellman).abs());
    }
    if residual > 1e-10 {
        // Polish by direct Bellman sweeps; contraction rate e^{−α dt}.
        for _ in 0..200_000 {
            let mut next = vec![0.0; n];
            let mut delta = 0.0_f64;
            for i in 0..n {
                next[i] = m.max(rewards[i] + discount * lattice.expected_next(&values, i));
                delta = delta.max((next[i] - values[i]).abs());
            }
            values = next;
            if delta < 1e-12 {
                break;
            }
        }
        let mut residual = 0.0_f64;
        for i in 0..n {
            let bellman = m.max(rewards[i] + discount * lattice.expected_next(&values, i));
            residual = residual.max((values[i] - bellman).abs());
        }
        if residual > 1e-10 {
            return Err(Error::Convergence(format!(
                "retirement value residual {residual:.3e} exceeds 1e-10"
            )));
        }
    }
    Ok(values)
}

/// Solve `V = r + γ P V` on the continuation set, `V = m` on the stop set.
fn evaluate_policy(
    lattice: &LatticeSpec,
    rewards: &[f64],
    discount: f64,
    stop: &[bool],
    m: f64,
) -> Vec<f64> {
    let n = lattice.n_states;
    // Tridiagonal rows: stopped rows are identity with rhs m; continuing rows
    // couple to the neighbours, with reflections folded into the diagonal.
    let mut sub = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        if stop[i] {
            rhs[i] = m;
            continue;
        }
        let up = lattice.p_up[i];
        let down = 1.0 - up;
        rhs[i] = rewards[i];
        if i == 0 {
            diag[i] = 1.0 - discount * down;
            sup[i] = -discount * up;
        } else if i == n - 1 {
            diag[i] = 1.0 - discount * up;
            sub[i] = -discount * down;
        } else {
            sub[i] = -discount * down;
            sup[i] = -discount * up;
        }
    }
    // Thomas algorithm; the system is strictly diagonally dominant.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = sup[0] / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c_prime[i - 1];
        c_prime[i] = sup[i] / denom;
        d_prime[i] = (rhs[i] - sub[i] * d_prime[i - 1]) / denom;
    }
    let mut values = vec![0.0; n];
    values[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        values[i] = d_prime[i] - c_prime[i] * values[i + 1];
    }
    values
}

/// Gittins index at `x` by bisecting the retirement reward until indifference.
pub fn lattice_gittins(
    model: &ArmModel,
    rs: &RewardStructure,
    lattice: &LatticeSpec,
    x: f64,
    tol: f64,
) -> Result<f64> {
    ensure_positive("tol", tol)?;
    let ix = lattice.snap(x)?;
    let indifference = 1e-9 * rs.k_high().abs().max(1.0);
    let mut lo = rs.k_low();
    let mut hi = rs.k_high();
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let values = retirement_value(model, rs, lattice, mid)?;
        if values[ix] > mid + indifference {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::gittins_bm;
    use crate::numerics::QuadratureRule;
    use crate::rewards::RewardFamily;

    fn logistic_unit() -> RewardStructure {
        RewardStructure::new(1.0, 0.0, 1.0, RewardFamily::Logistic { c: 1.0 }).unwrap()
    }

    fn constant_reward(alpha: f64, value: f64) -> RewardStructure {
        RewardStructure::degenerate(
            alpha,
            value / alpha - 1.0,
            value / alpha + 1.0,
            RewardFamily::Constant { value },
        )
        .unwrap()
    }

    fn small_lattice(model: &ArmModel) -> LatticeSpec {
        LatticeSpec::new(model, 0.0, 10.0, 401).unwrap()
    }

    #[test]
    fn high_retirement_reward_dominates() {
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        let rs = logistic_unit();
        let m = rs.k_high();
        let values = retirement_value(&model, &rs, &lattice, m).unwrap();
        for (i, v) in values.iter().enumerate() {
            assert!((v - m).abs() < 1e-12, "V({}) = {v} at state {i}", lattice.state(i));
        }
    }

    #[test]
    fn constant_reward_is_indifferent_at_value_over_alpha() {
        let alpha = 2.0;
        let rs = constant_reward(alpha, 0.7);
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        let values = retirement_value(&model, &rs, &lattice, 0.35).unwrap();
        for v in &values {
            assert!((v - 0.35).abs() < 1e-10, "V = {v}");
        }
    }

    #[test]
    fn low_retirement_reward_always_continues() {
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        let rs = logistic_unit();
        let m = rs.k_low() - 1.0;
        let values = retirement_value(&model, &rs, &lattice, m).unwrap();
        for i in 1..lattice.n_states - 1 {
            assert!(values[i] > m, "interior state {i} should continue");
        }
    }

    #[test]
    fn value_is_monotone_in_retirement_reward() {
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        let rs = logistic_unit();
        let v_low = retirement_value(&model, &rs, &lattice, 0.3).unwrap();
        let v_high = retirement_value(&model, &rs, &lattice, 0.6).unwrap();
        for (a, b) in v_low.iter().zip(&v_high) {
            assert!(*a <= *b + 1e-12);
        }
    }

    #[test]
    fn constant_reward_index() {
        let alpha = 2.0;
        let rs = constant_reward(alpha, 0.7);
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        let m = lattice_gittins(&model, &rs, &lattice, 0.0, 1e-6).unwrap();
        assert!((m - 0.35).abs() < 1e-5, "index {m}");
    }

    #[test]
    fn index_is_monotone_in_state_and_bracketed() {
        let rs = logistic_unit();
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = LatticeSpec::new(&model, 0.0, 10.0, 251).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for x in [-4.0, -2.0, 0.0, 2.0, 4.0] {
            let m = lattice_gittins(&model, &rs, &lattice, x, 1e-5).unwrap();
            assert!(m >= rs.k_low() && m <= rs.k_high());
            assert!(m >= prev, "index not monotone at x = {x}");
            prev = m;
        }
    }

    #[test]
    fn brownian_index_matches_closed_form() {
        let rs = logistic_unit();
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = LatticeSpec::new(&model, 0.0, 12.0, 1201).unwrap();
        let rule = QuadratureRule::default();
        let m_lattice = lattice_gittins(&model, &rs, &lattice, 0.0, 1e-6).unwrap();
        let m_closed = gittins_bm(0.0, 1.0, &rs, &rule).unwrap();
        assert!(
            ((m_lattice - m_closed) / m_closed).abs() < 0.01,
            "{m_lattice} vs {m_closed}"
        );
    }

    #[test]
    fn lattice_shrinks_dx_under_strong_drift() {
        let model = ArmModel::drifted(80.0, 0.5).unwrap();
        let lattice = LatticeSpec::new(&model, 0.0, 5.0, 101).unwrap();
        assert!(lattice.n_states > 101);
        let sigma_sq = 0.25;
        assert!(80.0 * lattice.dx() <= sigma_sq + 1e-12);
    }

    #[test]
    fn snapping_rejects_outside_states() {
        let model = ArmModel::brownian(1.0).unwrap();
        let lattice = small_lattice(&model);
        assert!(lattice.snap(10.5).is_err());
        assert_eq!(lattice.snap(0.004).unwrap(), 200);
    }
}
