//! Shared quadrature, root-finding and differentiation kernels.
//!
//! Every index formula in this crate reduces to integrals of the form
//! `∫₀^∞ f(z) e^{−z} dz` with `f` bounded and smooth, plus occasional
//! sign-change location for thresholds. Two independent quadrature routes are
//! provided so they can cross-check each other in the test suite:
//!
//! * Gauss–Laguerre: nodes/weights for the weight `e^{−z}` on `[0, ∞)`,
//!   computed once by Newton iteration on the Laguerre recurrence.
//! * Adaptive truncated Simpson on `[0, z_max]`; for bounded `f` the tail
//!   beyond `z_max` is at most `sup|f| · e^{−z_max}`.

use crate::error::{ensure_positive, Error, Result};

/// Quadrature rule for integrals against the exponential weight `e^{−z}` on `[0, ∞)`.
#[derive(Debug, Clone)]
pub enum QuadratureRule {
    /// Fixed-node Gauss–Laguerre rule; exact for polynomials of degree ≤ 2n−1.
    GaussLaguerre { nodes: Vec<f64>, weights: Vec<f64> },
    /// Adaptive Simpson on `[0, z_max]` with absolute tolerance `tol`.
    AdaptiveTruncated { z_max: f64, tol: f64 },
}

impl QuadratureRule {
    /// Build a Gauss–Laguerre rule with `n` nodes.
    ///
    /// Nodes are the roots of the Laguerre polynomial `L_n`, found by Newton
    /// iteration from the classical initial guesses; weights use
    /// `w_i = x_i / ((n+1)² L_{n+1}(x_i)²)`. Construction fails if the weights
    /// do not sum to 1 within 1e−12 (they integrate `e^{−z}` exactly).
    pub fn gauss_laguerre(n: usize) -> Result<Self> {
        if n < 2 || n > 256 {
            return Err(Error::Domain(format!(
                "Gauss-Laguerre node count must be in [2, 256], got {n}"
            )));
        }
        let (nodes, weights) = gauss_laguerre_nodes(n)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Numeric(format!(
                "Gauss-Laguerre weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Numeric(
                "Gauss-Laguerre produced a non-positive weight".into(),
            ));
        }
        Ok(QuadratureRule::GaussLaguerre { nodes, weights })
    }

    /// Adaptive truncated rule on `[0, z_max]` with tolerance `tol`.
    pub fn adaptive_truncated(z_max: f64, tol: f64) -> Result<Self> {
        ensure_positive("z_max", z_max)?;
        ensure_positive("tol", tol)?;
        Ok(QuadratureRule::AdaptiveTruncated { z_max, tol })
    }

    /// Evaluate `∫₀^∞ f(z) e^{−z} dz`.
    ///
    /// A non-finite evaluation of `f` at any node aborts with a numeric error
    /// carrying the offending node.
    pub fn exp_weighted_integral(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        match self {
            QuadratureRule::GaussLaguerre { nodes, weights } => {
                let mut acc = 0.0;
                for (&z, &w) in nodes.iter().zip(weights) {
                    let v = f(z);
                    if !v.is_finite() {
                        return Err(Error::Numeric(format!(
                            "integrand evaluated to {v} at node z = {z}"
                        )));
                    }
                    acc += w * v;
                }
                Ok(acc)
            }
            QuadratureRule::AdaptiveTruncated { z_max, tol } => {
                let g = |z: f64| -> Result<f64> {
                    let v = f(z);
                    if !v.is_finite() {
                        return Err(Error::Numeric(format!(
                            "integrand evaluated to {v} at node z = {z}"
                        )));
                    }
                    Ok(v * (-z).exp())
                };
                adaptive_simpson(&g, 0.0, *z_max, *tol)
            }
        }
    }
}

impl Default for QuadratureRule {
    /// The crate-wide default: 64 Gauss–Laguerre nodes.
    fn default() -> Self {
        QuadratureRule::gauss_laguerre(64).expect("64-node Gauss-Laguerre construction")
    }
}

/// Nodes and weights of the n-point Gauss–Laguerre rule (weight `e^{−x}`).
fn gauss_laguerre_nodes(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut x = 0.0_f64;
    for i in 0..n {
        // Initial guesses from Stroud & Secrest.
        x = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => x + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let step = (1.0 + 2.55 * (i as f64 - 1.0)) / (1.9 * (i as f64 - 1.0));
                x + step * (x - nodes[i - 2])
            }
        };
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..100 {
            let (ln, ln1) = laguerre_pair(n, x);
            // L_n'(x) = n (L_n(x) − L_{n−1}(x)) / x
            let deriv = nf * (ln - ln1) / x;
            let dx = ln / deriv;
            x -= dx;
            let step = dx.abs();
            // Quadratic convergence stalls at rounding level; accept either a
            // tiny step or a step that stopped shrinking once already small.
            if step <= 1e-14 * x.abs().max(1.0) || (step >= last_step && step <= 1e-10) {
                converged = true;
                break;
            }
            last_step = step;
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "Laguerre root {i} of {n} did not converge"
            )));
        }
        let lnp1 = laguerre_pair(n + 1, x).0;
        let w = x / (((nf + 1.0) * lnp1).powi(2));
        nodes.push(x);
        weights.push(w);
    }
    Ok((nodes, weights))
}

/// Evaluate `(L_n(x), L_{n−1}(x))` by the three-term recurrence.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0_f64; // L_0
    let mut cur = 1.0 - x; // L_1
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0 - x) * cur - (kf - 1.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    if n == 0 {
        (1.0, f64::NAN)
    } else {
        (cur, prev)
    }
}

/// Recursive adaptive Simpson for `∫_a^b g` with absolute tolerance `tol`.
fn adaptive_simpson(g: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = g(a)?;
    let fb = g(b)?;
    let m = 0.5 * (a + b);
    let fm = g(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(g, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    g: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm)?;
    let frm = g(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let half = 0.5 * tol;
        Ok(simpson_step(g, a, m, fa, flm, fm, left, half, depth - 1)?
            + simpson_step(g, m, b, fm, frm, fb, right, half, depth - 1)?)
    }
}

/// Locate sign changes of `f` on `[lo, hi]`.
///
/// Scans `n_scan` equispaced points, brackets every sign change and bisects
/// each bracket until it is narrower than `tol`. Returns the sorted midpoints.
/// No sign change yields an empty list; NaN evaluations never bracket.
pub fn find_sign_changes(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    n_scan: usize,
    tol: f64,
) -> Vec<f64> {
    assert!(lo < hi, "find_sign_changes: lo must be below hi");
    assert!(n_scan >= 2, "find_sign_changes: need at least 2 scan points");
    let mut roots = Vec::new();
    let step = (hi - lo) / (n_scan - 1) as f64;
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    for i in 1..n_scan {
        let x = lo + i as f64 * step;
        let fx = f(x);
        if prev_f == 0.0 {
            roots.push(prev_x);
        } else if prev_f * fx < 0.0 {
            roots.push(bisect(&mut f, prev_x, x, prev_f, tol));
        }
        prev_x = x;
        prev_f = fx;
    }
    if prev_f == 0.0 {
        roots.push(prev_x);
    }
    roots
}

fn bisect(f: &mut impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    0.5 * (lo + hi)
}

/// Central finite difference `(f(x+h) − f(x−h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
