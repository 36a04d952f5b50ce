//! Observation model: logistic link from latent score to success probability,
//! then an ordered probit over equally spaced cutpoints in (0, 1).
//!
//! For category `c` with interior edges `v_1 < … < v_{C-1}` and sentinels
//! `v_0 = -∞`, `v_C = +∞`:
//!
//! ```text
//! P(x = c | p, σ) = Φ((v_{c+1} - p) / σ) - Φ((v_c - p) / σ)
//! ```
//!
//! `σ` scales the distance between the success probability and the edges; it
//! is not integrated out as additive latent noise.

use alloc::format;
use alloc::vec::Vec;

use libm::exp;

use crate::error::{domain, Result};
use crate::math::{log_normal_interval, sigmoid, std_normal_log_pdf};

/// Probability of success on a single item, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SuccessProbability(f64);

impl SuccessProbability {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(domain(format!("success probability {p} not in (0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Strictly positive noise scale of the ordered probit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseScale(f64);

impl NoiseScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && !sigma.is_nan() {
            Ok(Self(sigma))
        } else {
            Err(domain(format!("noise scale {sigma} must be positive")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `1 / (1 + e^{-θ})`. Saturated results are nudged back inside (0, 1) so
/// the returned value always satisfies the [`SuccessProbability`] invariant.
pub fn logistic(theta: f64) -> Result<SuccessProbability> {
    if !theta.is_finite() {
        return Err(domain(format!("latent score {theta} is not finite")));
    }
    let p = sigmoid(theta).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    Ok(SuccessProbability(p))
}

/// Interior edges of the ordered probit, `k / C` for `k = 1..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointLadder {
    edges: Vec<f64>,
}

impl CutpointLadder {
    pub fn equally_spaced(category_count: usize) -> Result<Self> {
        if category_count < 2 {
            return Err(crate::error::config(format!(
                "need at least two score categories, got {category_count}"
            )));
        }
        let c = category_count as f64;
        let edges = (1..category_count).map(|k| k as f64 / c).collect();
        Ok(Self { edges })
    }

    /// Explicit edges; must be strictly increasing and inside (0, 1).
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(domain("cutpoint ladder needs at least one edge"));
        }
        if edges.iter().any(|&v| !(v > 0.0 && v < 1.0)) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("cutpoints must be strictly increasing inside (0, 1)"));
        }
        Ok(Self { edges })
    }

    #[inline]
    pub fn category_count(&self) -> usize {
        self.edges.len() + 1
    }

    #[inline]
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Largest admissible score, `C - 1`.
    #[inline]
    pub fn max_score(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    fn lower(&self, x: usize) -> f64 {
        if x == 0 {
            f64::NEG_INFINITY
        } else {
            self.edges[x - 1]
        }
    }

    #[inline]
    fn upper(&self, x: usize) -> f64 {
        if x == self.edges.len() {
            f64::INFINITY
        } else {
            self.edges[x]
        }
    }
}

/// Convenience wrapper for [`CutpointLadder::equally_spaced`].
pub fn make_cutpoints(category_count: usize) -> Result<CutpointLadder> {
    CutpointLadder::equally_spaced(category_count)
}

/// Full probability vector over the `C` categories.
pub fn ordered_probit_pmf(p: SuccessProbability, v: &CutpointLadder, sigma: NoiseScale) -> Vec<f64> {
    (0..v.category_count())
        .map(|x| exp(log_pmf_unchecked(p.0, v, sigma.0, x)))
        .collect()
}

/// `log P(x | p, σ)`; see [`crate::math::log_normal_interval`] for the tail
/// handling.
pub fn ordered_probit_log_pmf(
    p: SuccessProbability,
    v: &CutpointLadder,
    sigma: NoiseScale,
    x: usize,
) -> Result<f64> {
    if x > v.max_score() {
        return Err(domain(format!("score {x} outside 0..={}", v.max_score())));
    }
    Ok(log_pmf_unchecked(p.0, v, sigma.0, x))
}

#[inline]
pub(crate) fn log_pmf_unchecked(p: f64, v: &CutpointLadder, sigma: f64, x: usize) -> f64 {
    let lo = (v.lower(x) - p) / sigma;
    let hi = (v.upper(x) - p) / sigma;
    log_normal_interval(lo, hi)
}

/// Log-pmf together with its partial derivatives with respect to the success
/// probability and the noise scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogPmfGrad {
    pub value: f64,
    pub d_p: f64,
    pub d_sigma: f64,
}

#[inline]
pub(crate) fn log_pmf_with_grad(p: f64, v: &CutpointLadder, sigma: f64, x: usize) -> LogPmfGrad {
    let lo = (v.lower(x) - p) / sigma;
    let hi = (v.upper(x) - p) / sigma;
    let value = log_normal_interval(lo, hi);
    // φ(z) / (Φ(hi) - Φ(lo)), evaluated in log space; zero at infinite edges.
    let ratio = |z: f64| {
        if z.is_finite() {
            exp(std_normal_log_pdf(z) - value)
        } else {
            0.0
        }
    };
    let (r_lo, r_hi) = (ratio(lo), ratio(hi));
    let zr = |z: f64, r: f64| if z.is_finite() { z * r } else { 0.0 };
    LogPmfGrad {
        value,
        d_p: (r_lo - r_hi) / sigma,
        d_sigma: (zr(lo, r_lo) - zr(hi, r_hi)) / sigma,
    }
}
