//! Split-chain R̂ and rank-normalized bulk effective sample size, computed on
//! the unconstrained coordinates.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::math::std_normal_quantile;
use crate::sampler::PosteriorDraws;

/// Numeric convergence gate applied to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub max_rhat: f64,
    pub min_ess: f64,
}

impl Default for Gate {
    fn default() -> Self {
        Self { max_rhat: 1.01, min_ess: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub divergence_fraction: f64,
}

impl Diagnostics {
    pub fn from_draws(draws: &PosteriorDraws) -> Self {
        let (rhat, ess_bulk) = (0..draws.dim())
            .map(|p| {
                let t = draws.traces(p);
                (rhat(&t), ess_bulk(&t))
            })
            .unzip();
        Self { rhat, ess_bulk, divergence_fraction: draws.divergence_fraction() }
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess_bulk.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Coordinates failing the gate.
    pub fn failures(&self, gate: &Gate) -> Vec<usize> {
        (0..self.rhat.len())
            .filter(|&p| !(self.rhat[p] <= gate.max_rhat) || !(self.ess_bulk[p] >= gate.min_ess))
            .collect()
    }

    pub fn converged(&self, gate: &Gate) -> bool {
        self.failures(gate).is_empty()
    }
}

/// Each chain cut into two halves (the middle draw of an odd-length chain is
/// dropped).
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(&c[..h]);
        out.push(&c[c.len() - h..]);
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-chain potential scale reduction. A parameter with no variation at
/// all reports 1.
pub fn rhat(chains: &[Vec<f64>]) -> f64 {
    let parts = split(chains);
    let n = parts.first().map_or(0, |p| p.len());
    if parts.len() < 2 || n < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().map(|p| var(p)).sum::<f64>() / parts.len() as f64;
    let b = n as f64 * var(&means);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let nf = n as f64;
    sqrt(((nf - 1.0) / nf * w + b / nf) / w)
}

/// Blom-style normal scores of the pooled ranks (ties share their average
/// rank), reshaped like the input.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut idx: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (c, xs) in chains.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            idx.push((x, c, i));
        }
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let s = total as f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = std_normal_quantile((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &idx[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

/// Effective sample size from Geyer's initial monotone sequence over the
/// chain-combined autocorrelation.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let total = (m * n) as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let acov = |c: usize, lag: usize| -> f64 {
        let x = &chains[c][..n];
        let mu = means[c];
        (0..n - lag).map(|i| (x[i] - mu) * (x[i + lag] - mu)).sum::<f64>() / nf
    };
    let acov0: Vec<f64> = (0..m).map(|c| acov(c, 0)).collect();
    let mean_var = acov0.iter().map(|a| a * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&means);
    }
    if !(var_plus > 0.0) {
        return total;
    }
    let rho = |lag: usize| -> f64 {
        let mean_acov = (0..m).map(|c| if lag == 0 { acov0[c] } else { acov(c, lag) }).sum::<f64>() / m as f64;
        1.0 - (mean_var - mean_acov) / var_plus
    };

    let mut rhos = vec![1.0, rho(1)];
    let mut t = 1;
    while t + 2 < n {
        let even = rho(t + 1);
        let odd = rho(t + 2);
        if !(even + odd > 0.0) {
            break;
        }
        rhos.push(even);
        rhos.push(odd);
        t += 2;
    }
    let max_t = t;
    // Pairs Γ_k = ρ_{2k} + ρ_{2k+1}, forced monotone non-increasing.
    let mut prev = rhos[0] + rhos[1];
    let mut k = 2;
    while k + 1 <= max_t {
        let pair = rhos[k] + rhos[k + 1];
        if pair > prev {
            rhos[k] = prev / 2.0;
            rhos[k + 1] = prev / 2.0;
        }
        prev = rhos[k] + rhos[k + 1];
        k += 2;
    }
    let tau = -1.0 + 2.0 * rhos[..=max_t].iter().sum::<f64>();
    let tau = tau.max(1.0 / libm::log10(total));
    (total / tau).min(total)
}

/// Bulk ESS: [`ess`] of the rank-normalized split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    let z = rank_normalize(chains);
    let parts: Vec<Vec<f64>> = split(&z).into_iter().map(|p| p.to_vec()).collect();
    ess(&parts)
}
