//! No-U-Turn sampler with multinomial trajectory sampling, the generalized
//! U-turn criterion, dual-averaging step-size adaptation and a diagonal
//! metric estimated in expanding warmup windows.
//!
//! Warmup schedule (in iterations, for warmup ≥ 150): a 75-iteration initial
//! buffer tuning only the step size, slow windows of 25, 50, 100, ...
//! iterations after each of which the metric is re-estimated from the
//! window's draws, and a 50-iteration terminal buffer. The last slow window
//! covers roughly the second half of warmup, so the final metric is the
//! (regularized) variance of those draws. Shorter warmups scale the buffers
//! to 15% / 75% / 10%.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::density::LogDensity;
use crate::error::{config, Error, Result};
use crate::math::log_sum_exp;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub warmup: usize,
    pub samples: usize,
    pub chains: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    /// Initial unconstrained values are uniform on `(-r, r)`.
    pub init_radius: f64,
    pub max_init_attempts: usize,
    /// Energy error above which a trajectory is declared divergent.
    pub max_energy_error: f64,
}

impl SamplerConfig {
    /// 800 warmup iterations, 1500 retained draws, three chains.
    pub fn underlying(seed: u64) -> Self {
        Self { warmup: 800, samples: 1500, chains: 3, ..Self::new(seed) }
    }

    /// 600 warmup iterations, 1000 retained draws, two chains.
    pub fn per_participant(seed: u64) -> Self {
        Self { warmup: 600, samples: 1000, chains: 2, ..Self::new(seed) }
    }

    /// 1000 warmup iterations, 1000 retained draws, four chains.
    pub fn new(seed: u64) -> Self {
        Self {
            warmup: 1000,
            samples: 1000,
            chains: 4,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed,
            init_radius: 2.0,
            max_init_attempts: 100,
            max_energy_error: 1000.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.chains == 0 || self.max_tree_depth == 0 {
            return Err(config("samples, chains and tree depth must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(config("target acceptance must lie in (0, 1)"));
        }
        if !(self.init_radius > 0.0) {
            return Err(config("initialization radius must be positive"));
        }
        Ok(())
    }
}

/// Per-chain adaptation results and trajectory statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    /// Divergent transitions among the retained draws.
    pub divergences: usize,
    pub mean_accept: f64,
    pub mean_tree_depth: f64,
    pub max_depth_hits: usize,
    pub total_leapfrogs: u64,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub draws: Vec<f64>,
    pub pointwise: Vec<f64>,
    pub stats: ChainStats,
    pub log_density: Vec<f64>,
}

/// Retained draws of all chains, in the unconstrained space.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    dim: usize,
    chains: usize,
    samples: usize,
    n_obs: usize,
    /// `chains × samples × dim`, chain-major.
    draws: Vec<f64>,
    /// `(chains · samples) × n_obs`, rows in draw order.
    pointwise: Vec<f64>,
    log_density: Vec<f64>,
    chain_stats: Vec<ChainStats>,
}

impl PosteriorDraws {
    /// Assembles chains in index order.
    pub fn from_chains(dim: usize, n_obs: usize, chains: Vec<ChainDraws>) -> Result<Self> {
        let samples = chains.first().map(|c| c.log_density.len()).unwrap_or(0);
        let mut out = Self {
            dim,
            chains: chains.len(),
            samples,
            n_obs,
            draws: Vec::with_capacity(chains.len() * samples * dim),
            pointwise: Vec::with_capacity(chains.len() * samples * n_obs),
            log_density: Vec::with_capacity(chains.len() * samples),
            chain_stats: Vec::with_capacity(chains.len()),
        };
        for c in chains {
            if c.log_density.len() != samples || c.draws.len() != samples * dim || c.pointwise.len() != samples * n_obs {
                return Err(config("chains have inconsistent shapes"));
            }
            out.draws.extend_from_slice(&c.draws);
            out.pointwise.extend_from_slice(&c.pointwise);
            out.log_density.extend_from_slice(&c.log_density);
            out.chain_stats.push(c.stats);
        }
        Ok(out)
    }

    /// A single pseudo-draw, used by models without free parameters.
    pub fn single_point<T: LogDensity + ?Sized>(target: &T, q: &[f64]) -> Self {
        let n_obs = target.n_pointwise();
        let mut pointwise = vec![0.0; n_obs];
        target.pointwise_loglik(q, &mut pointwise);
        Self {
            dim: q.len(),
            chains: 1,
            samples: 1,
            n_obs,
            draws: q.to_vec(),
            pointwise,
            log_density: vec![target.log_density(q)],
            chain_stats: vec![ChainStats {
                step_size: 0.0,
                inv_metric: vec![1.0; q.len()],
                divergences: 0,
                mean_accept: 1.0,
                mean_tree_depth: 0.0,
                max_depth_hits: 0,
                total_leapfrogs: 0,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn samples_per_chain(&self) -> usize {
        self.samples
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.samples
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Draw `s` in overall order (chain-major).
    pub fn draw(&self, s: usize) -> &[f64] {
        &self.draws[s * self.dim..(s + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.total_draws()).map(move |s| self.draw(s))
    }

    pub fn chain_draw(&self, chain: usize, i: usize) -> &[f64] {
        self.draw(chain * self.samples + i)
    }

    pub fn raw(&self) -> &[f64] {
        &self.draws
    }

    /// Per-chain traces of coordinate `p`.
    pub fn traces(&self, p: usize) -> Vec<Vec<f64>> {
        (0..self.chains)
            .map(|c| (0..self.samples).map(|i| self.chain_draw(c, i)[p]).collect())
            .collect()
    }

    pub fn pointwise(&self) -> &[f64] {
        &self.pointwise
    }

    /// Log-likelihood row of draw `s`.
    pub fn pointwise_row(&self, s: usize) -> &[f64] {
        &self.pointwise[s * self.n_obs..(s + 1) * self.n_obs]
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn chain_stats(&self) -> &[ChainStats] {
        &self.chain_stats
    }

    pub fn divergences(&self) -> usize {
        self.chain_stats.iter().map(|c| c.divergences).sum()
    }

    pub fn divergence_fraction(&self) -> f64 {
        if self.total_draws() == 0 {
            0.0
        } else {
            self.divergences() as f64 / self.total_draws() as f64
        }
    }

    /// Flagged when more than 10% of retained transitions diverged.
    pub fn flagged(&self) -> bool {
        self.divergence_fraction() > 0.1
    }

    /// Element-wise mean of `f(draw)` over all draws.
    pub fn mean_of(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for d in self.iter() {
            let v = f(d);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
        }
        let n = self.total_draws().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Runs every chain sequentially and assembles the result.
pub fn sample<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if target.dim() == 0 {
        return Err(config("nothing to sample: the model has no free parameters"));
    }
    let chains = (0..cfg.chains).map(|c| sample_chain(target, cfg, c)).collect::<Result<Vec<_>>>()?;
    PosteriorDraws::from_chains(target.dim(), target.n_pointwise(), chains)
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

/// Subtree summary. `minus` / `plus` are the earliest and latest states in
/// integration time.
struct Tree {
    minus: State,
    plus: State,
    proposal: State,
    log_weight: f64,
    rho: Vec<f64>,
}

struct Outcome {
    tree: Option<Tree>,
    divergent: bool,
}

struct Integrator<'a, T: ?Sized> {
    target: &'a T,
    inv_metric: Vec<f64>,
    step_size: f64,
    max_energy_error: f64,
    h0: f64,
    n_leapfrog: u64,
    sum_accept: f64,
}

impl<'a, T: LogDensity + ?Sized> Integrator<'a, T> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, s: &State) -> f64 {
        let h = -s.logp + self.kinetic(&s.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn leapfrog(&self, s: &State, eps: f64) -> State {
        let dim = s.q.len();
        let mut p = vec![0.0; dim];
        let mut q = vec![0.0; dim];
        for i in 0..dim {
            p[i] = s.p[i] + 0.5 * eps * s.grad[i];
            q[i] = s.q[i] + eps * self.inv_metric[i] * p[i];
        }
        let mut grad = vec![0.0; dim];
        let logp = self.target.log_density_grad(&q, &mut grad);
        let logp = if logp.is_nan() { f64::NEG_INFINITY } else { logp };
        if logp.is_finite() {
            for i in 0..dim {
                p[i] += 0.5 * eps * grad[i];
            }
        }
        State { q, p, grad, logp }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    /// Generalized no-U-turn check on the span from `minus` to `plus`.
    fn no_u_turn(&self, minus: &[f64], plus: &[f64], rho: &[f64]) -> bool {
        let sm = self.p_sharp(minus);
        let sp = self.p_sharp(plus);
        dot(&sp, rho) > 0.0 && dot(&sm, rho) > 0.0
    }

    /// Merges two adjacent subtrees given in time order; `None` when the
    /// merged trajectory turns back on itself.
    fn merge(&self, left: Tree, right: Tree, proposal: State, log_weight: f64) -> Option<Tree> {
        let rho: Vec<f64> = left.rho.iter().zip(&right.rho).map(|(a, b)| a + b).collect();
        let mut ok = self.no_u_turn(&left.minus.p, &right.plus.p, &rho);
        if ok {
            let ext: Vec<f64> = left.rho.iter().zip(&right.minus.p).map(|(a, b)| a + b).collect();
            ok = self.no_u_turn(&left.minus.p, &right.minus.p, &ext);
        }
        if ok {
            let ext: Vec<f64> = right.rho.iter().zip(&left.plus.p).map(|(a, b)| a + b).collect();
            ok = self.no_u_turn(&left.plus.p, &right.plus.p, &ext);
        }
        ok.then(|| Tree { minus: left.minus, plus: right.plus, proposal, log_weight, rho })
    }

    fn build(&mut self, edge: &State, forward: bool, depth: usize, rng: &mut ChaCha8Rng) -> Outcome {
        if depth == 0 {
            let eps = if forward { self.step_size } else { -self.step_size };
            let s = self.leapfrog(edge, eps);
            self.n_leapfrog += 1;
            let h = self.hamiltonian(&s);
            let log_weight = self.h0 - h;
            self.sum_accept += if log_weight > 0.0 { 1.0 } else { exp(log_weight) };
            if !(h - self.h0 <= self.max_energy_error) {
                return Outcome { tree: None, divergent: true };
            }
            let rho = s.p.clone();
            return Outcome {
                tree: Some(Tree { minus: s.clone(), plus: s.clone(), proposal: s, log_weight, rho }),
                divergent: false,
            };
        }
        let first = self.build(edge, forward, depth - 1, rng);
        let Some(t1) = first.tree else { return first };
        let far = if forward { t1.plus.clone() } else { t1.minus.clone() };
        let second = self.build(&far, forward, depth - 1, rng);
        let Some(t2) = second.tree else { return second };

        let log_weight = log_sum_exp(&[t1.log_weight, t2.log_weight]);
        let take_second = rng.random::<f64>() < exp(t2.log_weight - log_weight);
        let (left, right) = if forward { (t1, t2) } else { (t2, t1) };
        let proposal = match (take_second, forward) {
            (true, true) | (false, false) => right.proposal.clone(),
            _ => left.proposal.clone(),
        };
        Outcome { tree: self.merge(left, right, proposal, log_weight), divergent: false }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Transition {
    state: State,
    accept: f64,
    depth: usize,
    divergent: bool,
    n_leapfrog: u64,
}

fn transition<T: LogDensity + ?Sized>(
    target: &T,
    current: &State,
    inv_metric: &[f64],
    step_size: f64,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let dim = current.q.len();
    let mut start = current.clone();
    for i in 0..dim {
        let z: f64 = rng.sample(StandardNormal);
        start.p[i] = z / sqrt(inv_metric[i]);
    }
    let mut integ = Integrator {
        target,
        inv_metric: inv_metric.to_vec(),
        step_size,
        max_energy_error: cfg.max_energy_error,
        h0: 0.0,
        n_leapfrog: 0,
        sum_accept: 0.0,
    };
    integ.h0 = integ.hamiltonian(&start);

    let mut tree = Tree {
        minus: start.clone(),
        plus: start.clone(),
        proposal: start.clone(),
        log_weight: 0.0,
        rho: start.p.clone(),
    };
    let mut sample = start;
    let mut depth = 0;
    let mut divergent = false;
    while depth < cfg.max_tree_depth {
        let forward = rng.random::<f64>() > 0.5;
        let edge = if forward { tree.plus.clone() } else { tree.minus.clone() };
        let out = integ.build(&edge, forward, depth, rng);
        depth += 1;
        let Some(sub) = out.tree else {
            divergent = out.divergent;
            break;
        };
        // Biased progressive sampling favours the new subtree.
        if sub.log_weight > tree.log_weight || rng.random::<f64>() < exp(sub.log_weight - tree.log_weight) {
            sample = sub.proposal.clone();
        }
        let log_weight = log_sum_exp(&[tree.log_weight, sub.log_weight]);
        let proposal = sample.clone();
        let (left, right) = if forward { (tree, sub) } else { (sub, tree) };
        match integ.merge(left, right, proposal, log_weight) {
            Some(t) => tree = t,
            None => break,
        }
    }
    let accept = if integ.n_leapfrog > 0 { integ.sum_accept / integ.n_leapfrog as f64 } else { 0.0 };
    Transition { state: sample, accept, depth, divergent, n_leapfrog: integ.n_leapfrog }
}

/// Dual averaging of the log step size toward a target acceptance rate.
struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(step_size: f64, target: f64) -> Self {
        Self { mu: log(10.0 * step_size), target, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * sqrt(self.counter) / Self::GAMMA;
        let x_eta = libm::pow(self.counter, -Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        exp(x)
    }

    fn final_step_size(&self) -> f64 {
        exp(self.x_bar)
    }
}

/// Slow-adaptation windows `[start, end)` for a warmup of `n` iterations.
pub(crate) fn metric_windows(n: usize) -> Vec<(usize, usize)> {
    if n < 20 {
        return Vec::new();
    }
    let (init, term, base) = if 75 + 50 + 25 > n {
        let init = n * 15 / 100;
        let term = n / 10;
        (init, term, n - init - term)
    } else {
        (75, 50, 25)
    };
    let end_slow = n - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < end_slow {
        let mut end = (start + size).min(end_slow);
        if end + 2 * size > end_slow {
            end = end_slow;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

fn find_reasonable_step_size<T: LogDensity + ?Sized>(
    target: &T,
    state: &State,
    inv_metric: &[f64],
    initial: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let dim = state.q.len();
    let mut eps = initial;
    let mut s = state.clone();
    for i in 0..dim {
        let z: f64 = rng.sample(StandardNormal);
        s.p[i] = z / sqrt(inv_metric[i]);
    }
    let integ = Integrator {
        target,
        inv_metric: inv_metric.to_vec(),
        step_size: eps,
        max_energy_error: f64::INFINITY,
        h0: 0.0,
        n_leapfrog: 0,
        sum_accept: 0.0,
    };
    let h0 = integ.hamiltonian(&s);
    let delta_h = |eps: f64| h0 - integ.hamiltonian(&integ.leapfrog(&s, eps));
    let direction = if delta_h(eps) > log(0.8) { 1.0 } else { -1.0 };
    for _ in 0..100 {
        eps = if direction > 0.0 { eps * 2.0 } else { eps * 0.5 };
        let dh = delta_h(eps);
        if (direction > 0.0 && !(dh > log(0.8))) || (direction < 0.0 && dh > log(0.8)) {
            break;
        }
        if !(1e-12..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-12, 1e7)
}

fn initial_state<T: LogDensity + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<State> {
    let dim = target.dim();
    for _ in 0..cfg.max_init_attempts.max(1) {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-cfg.init_radius..cfg.init_radius)).collect();
        let mut grad = vec![0.0; dim];
        let logp = target.log_density_grad(&q, &mut grad);
        if logp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(State { q, p: vec![0.0; dim], grad, logp });
        }
    }
    Err(Error::Initialization { chain, attempts: cfg.max_init_attempts })
}

/// Runs chain `chain` of `cfg`. The chain's random stream depends only on
/// `(cfg.seed, chain)`.
pub fn sample_chain<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainDraws> {
    cfg.validate()?;
    let dim = target.dim();
    let n_obs = target.n_pointwise();
    let mut rng = seed::rng(seed::derive(cfg.seed, chain as u64));
    let mut state = initial_state(target, cfg, chain, &mut rng)?;

    let mut inv_metric = vec![1.0; dim];
    let mut step_size = find_reasonable_step_size(target, &state, &inv_metric, 1.0, &mut rng);
    let mut averaging = DualAveraging::new(step_size, cfg.target_accept);
    let windows = metric_windows(cfg.warmup);
    let mut window_draws: Vec<f64> = Vec::new();

    for it in 0..cfg.warmup {
        let t = transition(target, &state, &inv_metric, step_size, cfg, &mut rng);
        state = t.state;
        step_size = averaging.update(t.accept);
        if let Some(&(start, end)) = windows.iter().find(|(s, e)| it >= *s && it < *e) {
            window_draws.extend_from_slice(&state.q);
            if it + 1 == end {
                let n = end - start;
                inv_metric = regularized_variance(&window_draws, n, dim);
                window_draws.clear();
                step_size = find_reasonable_step_size(target, &state, &inv_metric, step_size, &mut rng);
                averaging = DualAveraging::new(step_size, cfg.target_accept);
            }
        }
    }
    if cfg.warmup > 0 {
        step_size = averaging.final_step_size();
    }

    let mut draws = Vec::with_capacity(cfg.samples * dim);
    let mut pointwise = vec![0.0; cfg.samples * n_obs];
    let mut log_density = Vec::with_capacity(cfg.samples);
    let mut stats = ChainStats {
        step_size,
        inv_metric: inv_metric.clone(),
        divergences: 0,
        mean_accept: 0.0,
        mean_tree_depth: 0.0,
        max_depth_hits: 0,
        total_leapfrogs: 0,
    };
    for i in 0..cfg.samples {
        let t = transition(target, &state, &inv_metric, step_size, cfg, &mut rng);
        state = t.state;
        stats.divergences += t.divergent as usize;
        stats.mean_accept += t.accept;
        stats.mean_tree_depth += t.depth as f64;
        stats.max_depth_hits += (t.depth >= cfg.max_tree_depth) as usize;
        stats.total_leapfrogs += t.n_leapfrog;
        draws.extend_from_slice(&state.q);
        log_density.push(state.logp);
        if n_obs > 0 {
            target.pointwise_loglik(&state.q, &mut pointwise[i * n_obs..(i + 1) * n_obs]);
        }
    }
    stats.mean_accept /= cfg.samples as f64;
    stats.mean_tree_depth /= cfg.samples as f64;
    Ok(ChainDraws { draws, pointwise, stats, log_density })
}

fn regularized_variance(draws: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..dim)
        .map(|p| {
            let m = (0..n).map(|i| draws[i * dim + p]).sum::<f64>() / nf;
            let var = if n > 1 {
                (0..n).map(|i| (draws[i * dim + p] - m) * (draws[i * dim + p] - m)).sum::<f64>() / (nf - 1.0)
            } else {
                1.0
            };
            (nf / (nf + 5.0)) * var + 1e-3 * (5.0 / (nf + 5.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct StdNormal(usize);

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
            for (gi, qi) in g.iter_mut().zip(q) {
                *gi = -qi;
            }
            -0.5 * dot(q, q)
        }
    }

    #[test]
    fn window_schedule_covers_slow_phase() {
        let w = metric_windows(1000);
        assert_eq!(w.first().unwrap().0, 75);
        assert_eq!(w.last().unwrap().1, 950);
        for pair in w.windows(2) {
            assert_eq!(pair[0].1, pair[1].0);
        }
        let short = metric_windows(100);
        assert_eq!(short.first().unwrap().0, 15);
        assert_eq!(short.last().unwrap().1, 90);
        assert!(metric_windows(10).is_empty());
    }

    #[test]
    fn same_seed_gives_identical_draws() {
        let cfg = SamplerConfig { warmup: 100, samples: 50, chains: 2, ..SamplerConfig::per_participant(11) };
        let a = sample(&StdNormal(3), &cfg).unwrap();
        let b = sample(&StdNormal(3), &cfg).unwrap();
        assert_eq!(a.raw(), b.raw());
        let c = sample(&StdNormal(3), &cfg.clone().with_seed(12)).unwrap();
        assert_ne!(a.raw(), c.raw());
    }

    #[test]
    fn zero_dimensional_target_is_rejected() {
        let cfg = SamplerConfig::per_participant(1);
        assert!(sample(&StdNormal(0), &cfg).is_err());
        let single = PosteriorDraws::single_point(&StdNormal(0), &[]);
        assert_eq!(single.total_draws(), 1);
    }

    struct Nowhere;

    impl LogDensity for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn log_density_grad(&self, _q: &[f64], _g: &mut [f64]) -> f64 {
            f64::NEG_INFINITY
        }
    }

    #[test]
    fn non_finite_density_fails_initialization() {
        let cfg = SamplerConfig::per_participant(1);
        assert!(matches!(sample(&Nowhere, &cfg), Err(Error::Initialization { attempts: 100, .. })));
    }
}
