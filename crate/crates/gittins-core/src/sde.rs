//! Path simulation, exact transition sampling, transition densities, and the
//! two-armed policy tournament.
//!
//! Reproducibility: every path owns a counter-based ChaCha stream keyed by
//! `(seed, path index)`, so ensembles are bit-identical for a fixed seed and
//! independent of how paths are scheduled across threads. Per-path results
//! are written into slots indexed by path id and reduced sequentially, which
//! makes means and standard errors exactly thread-count invariant.
//!
//! The spread process admits exact transition sampling: from `x₀` the
//! time-`t` law is a two-Gaussian mixture, branch `±` with weight
//! `e^{±Ax₀}/(2cosh(Ax₀))`, mean `x₀ ± σ²At` and variance `σ²t`
//! (`A = √(2Γ)/σ`). Equivalently the density is the Brownian kernel tilted by
//! `e^{−Γt} cosh(Ax)/cosh(Ax₀)`. Its second moment from the origin is
//! `σ²t + (σ²At)²`, super-diffusive in `t`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::TabConfig;
use crate::closed_form::{gittins_bm, gittins_dmps_unrestricted};
use crate::doob::ArmModel;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::QuadratureRule;

/// Per-path RNG stream for a given master seed.
fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Seeded Monte Carlo sample paths recorded at thinned times.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    /// Recorded times, starting at 0.
    pub times: Vec<f64>,
    states: Vec<f64>, // row-major: n_paths × times.len()
    pub n_paths: usize,
    pub seed: u64,
    pub arm_label: String,
    /// Paths that hit a non-finite state and were frozen at the last finite one.
    pub flagged_paths: usize,
}

impl PathEnsemble {
    pub fn state(&self, path: usize, time_index: usize) -> f64 {
        self.states[path * self.times.len() + time_index]
    }

    /// All path states at one recorded time.
    pub fn states_at(&self, time_index: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.state(p, time_index)).collect()
    }

    pub fn mean_at(&self, time_index: usize) -> f64 {
        self.states_at(time_index).iter().sum::<f64>() / self.n_paths as f64
    }

    pub fn second_moment_at(&self, time_index: usize) -> f64 {
        self.states_at(time_index).iter().map(|x| x * x).sum::<f64>() / self.n_paths as f64
    }
}

/// Explicit Euler–Maruyama ensemble for `arm`, recording every
/// `record_stride`-th step (plus the initial and final states).
pub fn euler_maruyama(
    arm: &ArmModel,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    record_stride: usize,
) -> Result<PathEnsemble> {
    ensure_finite("x0", x0)?;
    ensure_positive("horizon", horizon)?;
    ensure_positive("dt", dt)?;
    if dt > horizon {
        return Err(Error::Domain(format!(
            "dt = {dt} exceeds horizon = {horizon}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::config("n_paths", "must be at least 1"));
    }
    let stride = record_stride.max(1);
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let mut record_steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *record_steps.last().unwrap() != n_steps {
        record_steps.push(n_steps);
    }
    let times: Vec<f64> = record_steps.iter().map(|&s| s as f64 * dt).collect();
    let n_times = times.len();

    let sigma = arm.sigma();
    let sqrt_dt = dt.sqrt();
    let mut states = vec![0.0_f64; n_paths * n_times];
    let flagged: usize = states
        .par_chunks_mut(n_times)
        .enumerate()
        .map(|(path, row)| {
            let mut rng = path_rng(seed, path as u64);
            let mut x = x0;
            let mut flagged = false;
            let mut slot = 0;
            if record_steps[0] == 0 {
                row[0] = x;
                slot = 1;
            }
            for step in 1..=n_steps {
                let noise: f64 = rng.sample(StandardNormal);
                let next = x + arm.drift(x) * dt + sigma * sqrt_dt * noise;
                if next.is_finite() {
                    x = next;
                } else {
                    flagged = true;
                }
                if slot < n_times && record_steps[slot] == step {
                    row[slot] = x;
                    slot += 1;
                }
            }
            usize::from(flagged)
        })
        .sum();

    Ok(PathEnsemble {
        times,
        states,
        n_paths,
        seed,
        arm_label: arm.label().to_string(),
        flagged_paths: flagged,
    })
}

/// Draw `n` exact samples of the spread process at time `t` started from `x0`.
pub fn exact_transition_sample_dmps(
    x0: f64,
    sigma: f64,
    gamma: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    ensure_finite("x0", x0)?;
    ensure_positive("sigma", sigma)?;
    ensure_positive("t", t)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!("`gamma` must be non-negative, got {gamma}")));
    }
    let a = (2.0 * gamma).sqrt() / sigma;
    let shift = sigma * sigma * a * t;
    let std = sigma * t.sqrt();
    // e^{Ax₀} / (2 cosh(Ax₀)) = logistic(2Ax₀).
    let w_plus = 1.0 / (1.0 + (-2.0 * a * x0).exp());
    let mut rng = path_rng(seed, 0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let up = rng.random::<f64>() < w_plus;
        let noise: f64 = rng.sample(StandardNormal);
        let mean = if up { x0 + shift } else { x0 - shift };
        out.push(mean + std * noise);
    }
    Ok(out)
}

/// Brownian transition density `P(x, t | x0, 0)` for `dX = σ dW`.
pub fn transition_density_bm(x: f64, t: f64, x0: f64, sigma: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    ensure_positive("sigma", sigma)?;
    let var = sigma * sigma * t;
    Ok((-(x - x0).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
}

/// `ln cosh(y)` without overflow.
fn ln_cosh(y: f64) -> f64 {
    y.abs() + (-2.0 * y.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

/// Spread-process transition density `P(x, t | x0, 0)`: the Brownian kernel
/// tilted by `e^{−Γt} cosh(Ax)/cosh(Ax0)`.
pub fn transition_density_dmps(x: f64, t: f64, x0: f64, sigma: f64, gamma: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    ensure_positive("sigma", sigma)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!("`gamma` must be non-negative, got {gamma}")));
    }
    let var = sigma * sigma * t;
    let a = (2.0 * gamma).sqrt() / sigma;
    let log_density = -(x - x0).powi(2) / (2.0 * var)
        - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
        - gamma * t
        + ln_cosh(a * x)
        - ln_cosh(a * x0);
    Ok(log_density.exp())
}

/// Second moment `E[X_t²]` of the spread process started at the origin.
pub fn dmps_second_moment(sigma: f64, gamma: f64, t: f64) -> f64 {
    let a = (2.0 * gamma).sqrt() / sigma;
    sigma * sigma * t + (sigma * sigma * a * t).powi(2)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Allocation policy for the two-armed tournament.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Engage the arm with the larger precomputed index; random tie-break.
    GittinsIndex,
    AlwaysArm1,
    AlwaysArm2,
    /// Engage arm 2 exactly when its own state is at or above `x_star`.
    FixedThreshold { x_star: f64 },
}

impl PolicySpec {
    pub fn name(&self) -> String {
        match self {
            PolicySpec::GittinsIndex => "gittins".into(),
            PolicySpec::AlwaysArm1 => "always1".into(),
            PolicySpec::AlwaysArm2 => "always2".into(),
            PolicySpec::FixedThreshold { x_star } => format!("threshold:{x_star}"),
        }
    }
}

/// Monte Carlo settings for the tournament.
#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimSettings {
    /// Default horizon `14/α`, for which the truncated discounted tail is
    /// below 1e−6 of the reward scale.
    pub fn with_default_horizon(alpha: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            horizon: 14.0 / alpha,
            dt,
            n_paths,
            seed,
        }
    }
}

/// Estimated discounted cumulative reward of one policy.
#[derive(Debug, Clone, Serialize)]
pub struct RewardEstimate {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// Index curves sampled on a uniform grid, linearly interpolated with
/// boundary clamping; used by the index policy inside the simulator.
#[derive(Debug, Clone)]
pub struct IndexCurves {
    x_lo: f64,
    dx: f64,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl IndexCurves {
    pub fn build(
        cfg: &TabConfig,
        rule: &QuadratureRule,
        x_lo: f64,
        x_hi: f64,
        n: usize,
    ) -> Result<Self> {
        if n < 2 || !(x_lo < x_hi) {
            return Err(Error::config("index_grid", "need at least 2 points and x_lo < x_hi"));
        }
        let dx = (x_hi - x_lo) / (n - 1) as f64;
        let mut m1 = Vec::with_capacity(n);
        let mut m2 = Vec::with_capacity(n);
        for i in 0..n {
            let x = x_lo + i as f64 * dx;
            m1.push(gittins_bm(x, cfg.sigma1(), cfg.reward(), rule)?);
            m2.push(gittins_dmps_unrestricted(
                x,
                cfg.sigma2(),
                cfg.gamma(),
                cfg.reward(),
                rule,
            )?);
        }
        Ok(Self { x_lo, dx, m1, m2 })
    }

    fn interp(vals: &[f64], x_lo: f64, dx: f64, x: f64) -> f64 {
        let pos = (x - x_lo) / dx;
        if pos <= 0.0 {
            return vals[0];
        }
        let last = vals.len() - 1;
        if pos >= last as f64 {
            return vals[last];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        vals[i] * (1.0 - t) + vals[i + 1] * t
    }

    pub fn arm1_index(&self, x: f64) -> f64 {
        Self::interp(&self.m1, self.x_lo, self.dx, x)
    }

    pub fn arm2_index(&self, x: f64) -> f64 {
        Self::interp(&self.m2, self.x_lo, self.dx, x)
    }
}

/// Step-by-step record of one simulated path.
#[derive(Debug, Clone, Default)]
pub struct PolicyTrace {
    /// Engaged arm per step (1 or 2).
    pub engaged: Vec<u8>,
    /// Arm states at the start of each step.
    pub states1: Vec<f64>,
    pub states2: Vec<f64>,
    /// Arm-local engaged clocks at the start of each step.
    pub clocks1: Vec<f64>,
    pub clocks2: Vec<f64>,
    pub discounted_reward: f64,
}

struct TournamentSetup {
    sigma1: f64,
    sigma2: f64,
    drift2_scale: f64, // σ₂²A
    drift2_rate: f64,  // A
    alpha: f64,
    curves: Option<IndexCurves>,
}

fn run_path(
    cfg: &TabConfig,
    setup: &TournamentSetup,
    policy: &PolicySpec,
    sim: &SimSettings,
    path: u64,
    mut trace: Option<&mut PolicyTrace>,
) -> f64 {
    let mut rng = path_rng(sim.seed, path);
    let n_steps = (sim.horizon / sim.dt).round().max(1.0) as usize;
    let dt = sim.dt;
    let sqrt_dt = dt.sqrt();
    let decay = (-setup.alpha * dt).exp();
    let mut disc = 1.0_f64;
    let (mut x1, mut x2) = (0.0_f64, 0.0_f64);
    let (mut clock1, mut clock2) = (0.0_f64, 0.0_f64);
    let mut reward = 0.0_f64;
    for _ in 0..n_steps {
        let engage_second = match policy {
            PolicySpec::AlwaysArm1 => false,
            PolicySpec::AlwaysArm2 => true,
            PolicySpec::FixedThreshold { x_star } => x2 >= *x_star,
            PolicySpec::GittinsIndex => {
                let curves = setup.curves.as_ref().expect("curves prepared");
                let m1 = curves.arm1_index(x1);
                let m2 = curves.arm2_index(x2);
                if m2 > m1 {
                    true
                } else if m1 > m2 {
                    false
                } else {
                    rng.random::<bool>()
                }
            }
        };
        if let Some(t) = trace.as_deref_mut() {
            t.engaged.push(if engage_second { 2 } else { 1 });
            t.states1.push(x1);
            t.states2.push(x2);
            t.clocks1.push(clock1);
            t.clocks2.push(clock2);
        }
        let engaged_state = if engage_second { x2 } else { x1 };
        reward += cfg.reward().eval_raw(engaged_state) * disc * dt;
        let noise: f64 = rng.sample(StandardNormal);
        let (frozen1, frozen2) = (x1, x2);
        if engage_second {
            let drift = setup.drift2_scale * (setup.drift2_rate * x2).tanh();
            x2 += drift * dt + setup.sigma2 * sqrt_dt * noise;
            clock2 += dt;
            debug_assert_eq!(x1, frozen1, "disengaged arm 1 must stay frozen");
        } else {
            x1 += setup.sigma1 * sqrt_dt * noise;
            clock1 += dt;
            debug_assert_eq!(x2, frozen2, "disengaged arm 2 must stay frozen");
        }
        disc *= decay;
    }
    if let Some(t) = trace {
        t.discounted_reward = reward;
    }
    reward
}

fn tournament_setup(
    cfg: &TabConfig,
    policy: &PolicySpec,
    sim: &SimSettings,
    rule: &QuadratureRule,
) -> Result<TournamentSetup> {
    if sim.n_paths == 0 {
        return Err(Error::config("n_paths", "must be at least 1"));
    }
    ensure_positive("dt", sim.dt)?;
    ensure_positive("horizon", sim.horizon)?;
    if sim.dt > sim.horizon {
        return Err(Error::config("dt", "must not exceed the horizon"));
    }
    let alpha = cfg.alpha();
    if (-alpha * sim.horizon).exp() >= 1e-6 {
        return Err(Error::config(
            "horizon",
            format!(
                "horizon {} leaves a discounted tail above 1e-6; need at least {}",
                sim.horizon,
                14.0 / alpha
            ),
        ));
    }
    let curves = if matches!(policy, PolicySpec::GittinsIndex) {
        Some(
            IndexCurves::build(cfg, rule, -20.0, 20.0, 2001).map_err(|e| {
                Error::config("policy", format!("index curves unavailable: {e}"))
            })?,
        )
    } else {
        None
    };
    let a = (2.0 * cfg.gamma()).sqrt() / cfg.sigma2();
    Ok(TournamentSetup {
        sigma1: cfg.sigma1(),
        sigma2: cfg.sigma2(),
        drift2_scale: cfg.sigma2() * cfg.sigma2() * a,
        drift2_rate: a,
        alpha,
        curves,
    })
}

/// Estimate the expected discounted cumulative reward of `policy`.
///
/// Both arms start at the origin; the disengaged arm stays frozen. Rewards
/// accumulate as `h(engaged state) e^{−α·t} dt` against the global clock.
pub fn simulate_tab(
    cfg: &TabConfig,
    policy: &PolicySpec,
    sim: &SimSettings,
    rule: &QuadratureRule,
) -> Result<RewardEstimate> {
    let setup = tournament_setup(cfg, policy, sim, rule)?;
    let mut rewards = vec![0.0_f64; sim.n_paths];
    rewards
        .par_iter_mut()
        .enumerate()
        .for_each(|(p, slot)| *slot = run_path(cfg, &setup, policy, sim, p as u64, None));
    let n = sim.n_paths as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = if sim.n_paths > 1 {
        rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n * (n - 1.0))
    } else {
        0.0
    };
    Ok(RewardEstimate {
        policy: policy.name(),
        mean,
        std_error: var.sqrt(),
        n_paths: sim.n_paths,
        horizon: sim.horizon,
        dt: sim.dt,
        seed: sim.seed,
    })
}

/// Replay a single path with full bookkeeping, reproducing the exact draws
/// the ensemble run used for that path index.
pub fn trace_single_path(
    cfg: &TabConfig,
    policy: &PolicySpec,
    sim: &SimSettings,
    path: u64,
    rule: &QuadratureRule,
) -> Result<PolicyTrace> {
    let setup = tournament_setup(cfg, policy, sim, rule)?;
    let mut trace = PolicyTrace::default();
    run_path(cfg, &setup, policy, sim, path, Some(&mut trace));
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::{RewardFamily, RewardStructure};

    fn logistic_unit() -> RewardStructure {
        RewardStructure::new(1.0, 0.0, 1.0, RewardFamily::Logistic { c: 1.0 }).unwrap()
    }

    #[test]
    fn vanishing_noise_keeps_paths_at_start() {
        let arm = ArmModel::new("still", 1e-15, |_| 0.0).unwrap();
        let ens = euler_maruyama(&arm, 0.7, 1.0, 0.01, 16, 9, 10).unwrap();
        for p in 0..ens.n_paths {
            for t in 0..ens.times.len() {
                assert!((ens.state(p, t) - 0.7).abs() < 1e-10);
            }
        }
        assert_eq!(ens.flagged_paths, 0);
    }

    #[test]
    fn zero_spread_ensemble_mean_is_centered() {
        let arm = ArmModel::dmps(1.0, 0.0).unwrap();
        let n = 10_000;
        let ens = euler_maruyama(&arm, 0.0, 1.0, 1e-2, n, 42, 100).unwrap();
        let last = ens.times.len() - 1;
        let mean = ens.mean_at(last);
        let se = (ens.second_moment_at(last) / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} vs 3·SE {}", 3.0 * se);
    }

    #[test]
    fn ensembles_are_reproducible() {
        let arm = ArmModel::dmps(1.0, 0.2).unwrap();
        let a = euler_maruyama(&arm, 0.0, 1.0, 1e-2, 64, 7, 10).unwrap();
        let b = euler_maruyama(&arm, 0.0, 1.0, 1e-2, 64, 7, 10).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn exact_sampler_balanced_at_origin() {
        let samples = exact_transition_sample_dmps(0.0, 1.0, 0.2, 1.0, 20_000, 3).unwrap();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let second = samples.iter().map(|x| x * x).sum::<f64>() / n;
        let se = (second / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn exact_sampler_zero_spread_is_single_gaussian() {
        let samples = exact_transition_sample_dmps(0.4, 1.0, 0.0, 2.0, 20_000, 5).unwrap();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 0.4).abs() < 3.0 * (2.0_f64 / n).sqrt());
        assert!((var - 2.0).abs() < 0.1);
    }

    #[test]
    fn exact_sampler_saturated_branch_weight() {
        // x0 = 10/A makes the up-branch weight ≈ 1/(1+e^{−20}).
        let (sigma, gamma) = (1.0_f64, 0.3_f64);
        let a = (2.0 * gamma).sqrt() / sigma;
        let x0 = 10.0 / a;
        let t = 0.25;
        let samples = exact_transition_sample_dmps(x0, sigma, gamma, t, 10_000, 11).unwrap();
        let shift = sigma * sigma * a * t;
        // Classify each draw by the nearer branch mean.
        let up_fraction = samples
            .iter()
            .filter(|&&x| (x - (x0 + shift)).abs() < (x - (x0 - shift)).abs())
            .count() as f64
            / samples.len() as f64;
        assert!(up_fraction > 0.999, "up fraction {up_fraction}");
    }

    #[test]
    fn density_even_from_origin() {
        for x in [0.3, 1.1, 4.0] {
            let plus = transition_density_dmps(x, 1.0, 0.0, 1.0, 0.25).unwrap();
            let minus = transition_density_dmps(-x, 1.0, 0.0, 1.0, 0.25).unwrap();
            assert!((plus - minus).abs() < 1e-15);
        }
    }

    #[test]
    fn density_normalizes_on_a_parameter_grid() {
        let (sigma, gamma) = (1.0_f64, 0.2_f64);
        let a = (2.0 * gamma).sqrt() / sigma;
        for t in [0.5_f64, 1.0, 2.0] {
            for x0 in [-1.0, 0.0, 2.0] {
                let spread = sigma * sigma * a * t;
                let lo = x0 - 12.0 * sigma * t.sqrt() - 2.0 * spread;
                let hi = x0 + 12.0 * sigma * t.sqrt() + 2.0 * spread;
                let n = 4000;
                let h = (hi - lo) / n as f64;
                let mut acc = 0.0;
                for i in 0..=n {
                    let x = lo + i as f64 * h;
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * transition_density_dmps(x, t, x0, sigma, gamma).unwrap();
                }
                let integral = acc * h / 3.0;
                assert!(
                    (integral - 1.0).abs() < 1e-6,
                    "normalization {integral} at t = {t}, x0 = {x0}"
                );
            }
        }
    }

    #[test]
    fn density_ratio_matches_tilt_factor() {
        let (sigma, gamma) = (1.0_f64, 0.3_f64);
        let a = (2.0 * gamma).sqrt() / sigma;
        for t in [0.4_f64, 1.7] {
            for x in [-2.0, 0.1, 3.5] {
                let ratio = transition_density_dmps(x, t, 0.0, sigma, gamma).unwrap()
                    / transition_density_bm(x, t, 0.0, sigma).unwrap();
                let expected = (-gamma * t).exp() * (a * x).cosh();
                assert!(
                    ((ratio - expected) / expected).abs() < 1e-10,
                    "tilt mismatch at x = {x}, t = {t}"
                );
            }
        }
    }

    #[test]
    fn zero_reward_gives_zero_estimate() {
        let rs =
            RewardStructure::degenerate(1.0, -1.0, 1.0, RewardFamily::Constant { value: 0.0 })
                .unwrap();
        let cfg = TabConfig::new(1.0, 1.0, 0.1, rs).unwrap();
        let sim = SimSettings::with_default_horizon(1.0, 0.05, 32, 17);
        let est = simulate_tab(&cfg, &PolicySpec::AlwaysArm1, &sim, &QuadratureRule::default())
            .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn identical_arms_policies_agree() {
        let cfg = TabConfig::new(1.0, 1.0, 0.0, logistic_unit()).unwrap();
        let sim = SimSettings::with_default_horizon(1.0, 0.02, 4000, 23);
        let rule = QuadratureRule::default();
        let a = simulate_tab(&cfg, &PolicySpec::AlwaysArm1, &sim, &rule).unwrap();
        let b = simulate_tab(&cfg, &PolicySpec::AlwaysArm2, &sim, &rule).unwrap();
        let joint_se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 3.0 * joint_se,
            "means {} vs {} (joint SE {joint_se})",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn trace_freezes_disengaged_arm() {
        let cfg = TabConfig::new(1.0, 1.0, 0.4, logistic_unit()).unwrap();
        let sim = SimSettings::with_default_horizon(1.0, 0.05, 1, 31);
        let trace =
            trace_single_path(&cfg, &PolicySpec::GittinsIndex, &sim, 0, &QuadratureRule::default())
                .unwrap();
        let steps = trace.engaged.len();
        assert!(steps > 2);
        for i in 1..steps {
            if trace.engaged[i - 1] == 1 {
                assert_eq!(trace.states2[i], trace.states2[i - 1], "arm 2 moved while frozen");
                assert_eq!(trace.clocks2[i], trace.clocks2[i - 1]);
            } else {
                assert_eq!(trace.states1[i], trace.states1[i - 1], "arm 1 moved while frozen");
                assert_eq!(trace.clocks1[i], trace.clocks1[i - 1]);
            }
        }
        let total_clock = trace.clocks1.last().unwrap() + trace.clocks2.last().unwrap();
        assert!((total_clock - (sim.horizon - sim.dt)).abs() < 1e-9);
    }

    #[test]
    fn horizon_below_truncation_bound_is_rejected() {
        let cfg = TabConfig::new(1.0, 1.0, 0.0, logistic_unit()).unwrap();
        let sim = SimSettings {
            horizon: 5.0,
            dt: 0.01,
            n_paths: 8,
            seed: 1,
        };
        let err = simulate_tab(&cfg, &PolicySpec::AlwaysArm1, &sim, &QuadratureRule::default())
            .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn ks_distance_of_identical_samples_is_zero() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_distance(&xs, &xs), 0.0);
    }
}
