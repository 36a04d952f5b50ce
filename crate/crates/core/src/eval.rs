//! Predictive scoring on the log-score scale (higher is better).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, expm1, log, log1p, sqrt};

use crate::data::{natural_cmp, ResponseRow, ResponseTable, ScoreKind};
use crate::density::Model;
use crate::data::Observation;
use crate::error::{config, Result};
use crate::math::{log_mean_exp, log_sum_exp, sample_variance};
use crate::sampler::PosteriorDraws;

/// `S × N` matrix of per-draw, per-observation log-likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseLogLik {
    draws: usize,
    obs: usize,
    values: Vec<f64>,
}

impl PointwiseLogLik {
    pub fn new(draws: usize, obs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != draws * obs {
            return Err(config(format!("expected {draws}×{obs} log-likelihood values, got {}", values.len())));
        }
        Ok(Self { draws, obs, values })
    }

    /// The matrix recorded by the sampler for the training observations.
    pub fn from_draws(d: &PosteriorDraws) -> Self {
        Self { draws: d.total_draws(), obs: d.n_obs(), values: d.pointwise().to_vec() }
    }

    /// Log-likelihood of `rows` under every draw of `model`.
    pub fn for_rows(model: &Model, draws: &PosteriorDraws, rows: &[Observation]) -> Self {
        let n = rows.len();
        let mut values = vec![0.0; draws.total_draws() * n];
        for (s, q) in draws.iter().enumerate() {
            model.loglik_rows(q, rows, &mut values[s * n..(s + 1) * n]);
        }
        Self { draws: draws.total_draws(), obs: n, values }
    }

    pub fn n_draws(&self) -> usize {
        self.draws
    }

    pub fn n_obs(&self) -> usize {
        self.obs
    }

    pub fn get(&self, s: usize, i: usize) -> f64 {
        self.values[s * self.obs + i]
    }

    /// Column `i`: the observation's log-likelihood across draws.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.draws).map(|s| self.get(s, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub method: String,
    /// Per-observation elpd contributions.
    pub pointwise: Vec<f64>,
    pub total: f64,
    /// `total / n`; zero when there are no observations.
    pub per_obs: f64,
    /// `√(N · var(pointwise))`; absent for scores with nothing learned.
    pub se: Option<f64>,
    /// Effective number of parameters (WAIC, LOO).
    pub p_eff: Option<f64>,
    /// Pareto shape estimate per observation (PSIS-LOO).
    pub pareto_k: Option<Vec<f64>>,
}

impl ScoreReport {
    pub fn from_pointwise(method: impl Into<String>, pointwise: Vec<f64>) -> Self {
        let total: f64 = pointwise.iter().sum();
        let n = pointwise.len();
        let se = (n >= 2).then(|| sqrt(n as f64 * sample_variance(&pointwise)));
        Self {
            method: method.into(),
            total,
            per_obs: if n == 0 { 0.0 } else { total / n as f64 },
            pointwise,
            se,
            p_eff: None,
            pareto_k: None,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.pointwise.len()
    }

    /// Pools several reports (e.g. participants or rounds) into one.
    pub fn pooled(method: impl Into<String>, parts: &[ScoreReport]) -> Self {
        let pointwise: Vec<f64> = parts.iter().flat_map(|r| r.pointwise.iter().copied()).collect();
        let mut out = Self::from_pointwise(method, pointwise);
        if parts.iter().all(|r| r.p_eff.is_some()) && !parts.is_empty() {
            out.p_eff = Some(parts.iter().filter_map(|r| r.p_eff).sum());
        }
        if parts.iter().all(|r| r.pareto_k.is_some()) && !parts.is_empty() {
            out.pareto_k = Some(parts.iter().flat_map(|r| r.pareto_k.clone().unwrap()).collect());
        }
        if parts.iter().any(|r| r.se.is_none()) {
            out.se = None;
        }
        out
    }

    /// Mean pointwise score per group key.
    pub fn group_means<K: Ord + Clone>(&self, keys: &[K]) -> BTreeMap<K, f64> {
        let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
        for (k, v) in keys.iter().zip(&self.pointwise) {
            let e = acc.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Observations whose Pareto shape exceeds 0.7.
    pub fn high_pareto_k(&self) -> Vec<usize> {
        self.pareto_k
            .as_ref()
            .map(|k| (0..k.len()).filter(|&i| k[i] > 0.7).collect())
            .unwrap_or_default()
    }
}

/// Discrete uniform score over `categories` outcomes for `n` observations.
pub fn baseline_log_score(n: usize, categories: usize) -> ScoreReport {
    let mut r = ScoreReport::from_pointwise("baseline", vec![-log(categories as f64); n]);
    r.se = None;
    r
}

/// `log mean_s p(x_i | θ_s)` per observation.
pub fn heldout_log_lik(ll: &PointwiseLogLik) -> ScoreReport {
    let pointwise = (0..ll.n_obs()).map(|i| log_mean_exp(&ll.column(i))).collect();
    ScoreReport::from_pointwise("heldout", pointwise)
}

/// WAIC with the posterior-variance penalty (denominator `S − 1`; zero when
/// `S = 1`).
pub fn waic(ll: &PointwiseLogLik) -> ScoreReport {
    let mut penalty = 0.0;
    let pointwise = (0..ll.n_obs())
        .map(|i| {
            let col = ll.column(i);
            let p = if col.len() > 1 { sample_variance(&col) } else { 0.0 };
            penalty += p;
            log_mean_exp(&col) - p
        })
        .collect();
    let mut r = ScoreReport::from_pointwise("waic", pointwise);
    r.p_eff = Some(penalty);
    r
}

/// Generalized Pareto fit `(k, σ)` to positive exceedances sorted ascending,
/// by the profile-likelihood grid estimator with a weak prior pulling `k`
/// toward 0.5.
pub fn gpd_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let nf = n as f64;
    let m = 30 + libm::floor(sqrt(nf)) as usize;
    let prior = 3.0;
    let xstar = x[((nf / 4.0 + 0.5).floor() as usize).saturating_sub(1).min(n - 1)];
    let xmax = x[n - 1];
    let profile = |theta: f64| -> f64 {
        let k = x.iter().map(|&v| log1p(-theta * v)).sum::<f64>() / nf;
        nf * (log(-theta / k) - k - 1.0)
    };
    let thetas: Vec<f64> =
        (1..=m).map(|j| 1.0 / xmax + (1.0 - sqrt(m as f64 / (j as f64 - 0.5))) / prior / xstar).collect();
    let lp: Vec<f64> = thetas.iter().map(|&t| profile(t)).collect();
    let weights: Vec<f64> = lp
        .iter()
        .map(|&li| {
            let s: f64 = lp.iter().map(|&lj| exp(lj - li)).sum();
            1.0 / s
        })
        .collect();
    let theta: f64 = thetas.iter().zip(&weights).filter(|(_, w)| w.is_finite()).map(|(t, w)| t * w).sum();
    let k = x.iter().map(|&v| log1p(-theta * v)).sum::<f64>() / nf;
    let sigma = -k / theta;
    let k = (k * nf + 10.0 * 0.5) / (nf + 10.0);
    (k, sigma)
}

fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * log1p(-p)
    } else {
        sigma * expm1(-k * log1p(-p)) / k
    }
}

/// Pareto-smoothed log weights. Returns the smoothed (unnormalized) log
/// weights and the fitted shape, `NaN` when smoothing was skipped.
pub fn psis_smooth(log_ratios: &[f64]) -> (Vec<f64>, f64) {
    let s = log_ratios.len();
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|r| r - max).collect();
    let tail = (ceil(0.2 * s as f64) as usize).max(5);
    if tail >= s {
        return (lw, f64::NAN);
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let tail_idx = &order[s - tail..];
    let cutoff = lw[order[s - tail - 1]];
    let exceed: Vec<f64> = tail_idx.iter().map(|&i| exp(lw[i]) - exp(cutoff)).collect();
    if exceed.iter().all(|&e| e <= 0.0) || exceed[tail - 1] == exceed[0] {
        return (lw, f64::NAN);
    }
    let (k, sigma) = gpd_fit(&exceed);
    if !(k.is_finite() && sigma.is_finite() && sigma > 0.0) {
        return (lw, k);
    }
    for (rank, &i) in tail_idx.iter().enumerate() {
        let p = (rank as f64 + 0.5) / tail as f64;
        lw[i] = log(gpd_quantile(p, k, sigma) + exp(cutoff)).min(0.0);
    }
    (lw, k)
}

/// PSIS leave-one-out. Importance ratios are `1 / p(x_i | θ_s)`.
pub fn psis_loo(ll: &PointwiseLogLik) -> ScoreReport {
    let n = ll.n_obs();
    let mut ks = Vec::with_capacity(n);
    let mut lpd = 0.0;
    let pointwise = (0..n)
        .map(|i| {
            let col = ll.column(i);
            lpd += log_mean_exp(&col);
            let ratios: Vec<f64> = col.iter().map(|l| -l).collect();
            let (lw, k) = psis_smooth(&ratios);
            ks.push(k);
            let num: Vec<f64> = lw.iter().zip(&col).map(|(w, l)| w + l).collect();
            log_sum_exp(&num) - log_sum_exp(&lw)
        })
        .collect();
    let mut r = ScoreReport::from_pointwise("loo", pointwise);
    r.p_eff = Some(lpd - r.total);
    r.pareto_k = Some(ks);
    r
}

/// Rows of `kind` split into training rows and each participant's last `n`
/// problem sets in chronological order (round, then position, then set id).
pub fn split_final_sets(table: &ResponseTable, kind: ScoreKind, n: usize) -> Result<(ResponseTable, ResponseTable)> {
    let mut by_participant: BTreeMap<&str, Vec<&ResponseRow>> = BTreeMap::new();
    for r in table.rows().iter().filter(|r| r.kind == kind) {
        by_participant.entry(&r.participant).or_default().push(r);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in by_participant.values_mut() {
        rows.sort_by(|a, b| {
            a.round
                .cmp(&b.round)
                .then(a.position.cmp(&b.position))
                .then_with(|| natural_cmp(&a.problem_set, &b.problem_set))
        });
        let cut = rows.len().saturating_sub(n);
        train.extend(rows[..cut].iter().map(|r| (*r).clone()));
        test.extend(rows[cut..].iter().map(|r| (*r).clone()));
    }
    Ok((ResponseTable::new(train, table.max_score())?, ResponseTable::new(test, table.max_score())?))
}

/// Rejects overlapping (participant, problem set) pairs between training and
/// held-out rows.
pub fn check_disjoint(train: &[Observation], heldout: &[Observation]) -> Result<()> {
    for h in heldout {
        if train.iter().any(|t| t.participant == h.participant && t.set == h.set) {
            return Err(config(format!(
                "held-out observation (participant {}, set {}) also appears in training",
                h.participant, h.set
            )));
        }
    }
    Ok(())
}

/// Training rounds and scored round of each next-round evaluation: rounds
/// `2..=R` trained on every earlier round, plus round 1 trained on nothing
/// when `include_first`.
pub fn next_round_splits(rounds: &[u32], include_first: bool) -> Result<Vec<(Vec<u32>, u32)>> {
    let mut rs = rounds.to_vec();
    rs.sort_unstable();
    rs.dedup();
    if rs.is_empty() || rs.iter().enumerate().any(|(i, &r)| r != i as u32 + 1) {
        return Err(config("next-round scoring needs rounds labelled 1, 2, …, R without gaps"));
    }
    let first = if include_first { 1 } else { 2 };
    Ok((first..=*rs.last().unwrap()).map(|t| ((1..t).collect(), t)).collect())
}
