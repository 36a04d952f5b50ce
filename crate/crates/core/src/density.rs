//! Joint log density (priors + likelihood + log-Jacobians) of every model in
//! the family, with hand-derived gradients with respect to the unconstrained
//! vector.
//!
//! Every observation contributes
//! `log OrderedProbit(x | logistic(a[p, load(j)] − d[j]), v, σ)`.
//! Prior constants:
//!
//! * σ, σ^s, σ_a, σ_d (self), σ_δ ~ half-Cauchy(0, 2); σ_d (underlying,
//!   fully differentiated) ~ half-Cauchy(0, 5);
//! * μ_d ~ N(0, 2); γ, Λ, μ_δ ~ N(0, 1);
//! * multidimensional underlying abilities ~ MVN(0, diag(s)·L_Ω·L_Ωᵀ·diag(s))
//!   with s ~ half-N(0, 2.5) and L_Ω ~ LKJ(1); otherwise abilities ~ N(0, 1).
//!
//! Per-participant hierarchical blocks (self-perceived ability and
//! difficulty, fully differentiated difficulty, one-dimensional δ) are
//! sampled non-centered; the posterior over constrained values is unchanged.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::math::{sigmoid, LN_2PI};
use crate::observation::{log_pmf_unchecked, log_pmf_with_grad};
use crate::priors::{half_cauchy_lpdf_grad, half_normal_lpdf_grad, lkj_kernel, normal_lpdf_grad};
use crate::spec::{Dimensionality, ModelSpec, OtherVariant, Tier};
use crate::transform::{cholesky_corr_backprop, constrain_cholesky_corr};

use libm::{exp, log, sqrt};

pub(crate) const NOISE_SCALE: f64 = 2.0;
pub(crate) const DIFFICULTY_SPREAD_SCALE: f64 = 5.0;
pub(crate) const DIFFICULTY_MEAN_SD: f64 = 2.0;
pub(crate) const ABILITY_SCALE_SD: f64 = 2.5;
pub(crate) const LKJ_SHAPE: f64 = 1.0;

/// A differentiable log density on an unconstrained space.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` (length [`LogDensity::dim`]) and
    /// returns the log density. A non-finite return marks an inadmissible
    /// point; the gradient is then unspecified.
    fn log_density_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, q: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.log_density_grad(q, &mut g)
    }

    /// Number of likelihood terms recorded per draw.
    fn n_pointwise(&self) -> usize {
        0
    }

    /// Per-observation log-likelihood at `q`.
    fn pointwise_loglik(&self, _q: &[f64], _out: &mut [f64]) {}
}

/// A model specification bound to its training observations.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    obs: Vec<Observation>,
}

/// Constrained quantities the likelihood needs.
struct LikelihoodInputs {
    /// `n_participants × ability_dim`, row-major.
    ability: Vec<f64>,
    difficulty: Vec<f64>,
    sigma: f64,
}

impl Model {
    pub fn new(spec: ModelSpec, obs: Vec<Observation>) -> Result<Self> {
        let max = spec.ladder.max_score();
        for o in &obs {
            if o.participant >= spec.n_participants() || o.set >= spec.n_sets() {
                return Err(Error::Config(alloc::format!("observation {o:?} does not index into the model")));
            }
            if o.score > max {
                return Err(Error::Domain(alloc::format!("score {} outside 0..={max}", o.score)));
            }
        }
        Ok(Self { spec, obs })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    /// Checked joint log density.
    pub fn joint_log_density(&self, q: &[f64]) -> Result<f64> {
        self.spec.check_len(q)?;
        let v = self.log_density(q);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Checked gradient of [`Model::joint_log_density`].
    pub fn grad_log_density(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_len(q)?;
        let mut g = vec![0.0; q.len()];
        let v = self.log_density_grad(q, &mut g);
        if v.is_finite() && g.iter().all(|x| x.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Log-likelihood of arbitrary rows (e.g. held-out ones) at draw `q`.
    pub fn loglik_rows(&self, q: &[f64], rows: &[Observation], out: &mut [f64]) {
        let inputs = self.likelihood_inputs(q);
        let a = self.spec.ability_dim();
        for (o, slot) in rows.iter().zip(out.iter_mut()) {
            let theta = inputs.ability[o.participant * a + self.spec.loading(o.set)] - inputs.difficulty[o.set];
            *slot = log_pmf_unchecked(sigmoid(theta), &self.spec.ladder, inputs.sigma, o.score);
        }
    }

    /// Score distribution of problem set `set` for participant index
    /// `participant` at draw `q`.
    pub fn predictive_pmf(&self, q: &[f64], participant: usize, set: usize) -> Vec<f64> {
        let inputs = self.likelihood_inputs(q);
        let a = self.spec.ability_dim();
        let theta = inputs.ability[participant * a + self.spec.loading(set)] - inputs.difficulty[set];
        let p = sigmoid(theta);
        (0..self.spec.ladder.category_count())
            .map(|x| exp(log_pmf_unchecked(p, &self.spec.ladder, inputs.sigma, x)))
            .collect()
    }

    fn likelihood_inputs(&self, q: &[f64]) -> LikelihoodInputs {
        let s = &self.spec;
        let fixed = &s.fixed;
        let values = s.constrain(q).expect("parameter vector matches the model layout");
        let get = |name: &str| values.get(name).unwrap_or_default().to_vec();
        match s.tier {
            Tier::Underlying | Tier::SelfAssessment => LikelihoodInputs {
                ability: get("ability"),
                difficulty: get("difficulty"),
                sigma: values.scalar("sigma").unwrap_or(f64::NAN),
            },
            Tier::Other(OtherVariant::Undifferentiated) => LikelihoodInputs {
                ability: fixed.self_ability.clone().unwrap_or_default(),
                difficulty: fixed.self_difficulty.clone().unwrap_or_default(),
                sigma: fixed.self_noise.unwrap_or(f64::NAN),
            },
            Tier::Other(OtherVariant::DifferentiatedByAbility) => {
                let base = fixed.self_ability.as_deref().unwrap_or_default();
                let delta = get("delta");
                LikelihoodInputs {
                    ability: base.iter().zip(&delta).map(|(b, d)| b + d).collect(),
                    difficulty: fixed.self_difficulty.clone().unwrap_or_default(),
                    sigma: fixed.self_noise.unwrap_or(f64::NAN),
                }
            }
            Tier::Other(OtherVariant::FullyDifferentiated) => LikelihoodInputs {
                ability: get("ability"),
                difficulty: get("difficulty"),
                sigma: fixed.self_noise.unwrap_or(f64::NAN),
            },
        }
    }

    /// Likelihood over the training rows; accumulates `∂/∂ability`,
    /// `∂/∂difficulty` and `∂/∂σ` into whichever sinks are provided.
    fn likelihood(
        &self,
        ability: &[f64],
        difficulty: &[f64],
        sigma: f64,
        mut g_ability: Option<&mut [f64]>,
        mut g_difficulty: Option<&mut [f64]>,
        g_sigma: Option<&mut f64>,
    ) -> f64 {
        let a = self.spec.ability_dim();
        let ladder = &self.spec.ladder;
        let mut total = 0.0;
        let mut gs = 0.0;
        for o in &self.obs {
            let ai = o.participant * a + self.spec.loading(o.set);
            let theta = ability[ai] - difficulty[o.set];
            let p = sigmoid(theta);
            let t = log_pmf_with_grad(p, ladder, sigma, o.score);
            total += t.value;
            let d_theta = t.d_p * p * (1.0 - p);
            if let Some(g) = g_ability.as_deref_mut() {
                g[ai] += d_theta;
            }
            if let Some(g) = g_difficulty.as_deref_mut() {
                g[o.set] -= d_theta;
            }
            gs += t.d_sigma;
        }
        if let Some(g) = g_sigma {
            *g += gs;
        }
        total
    }

    /// Abilities are sampled in Helmert coordinates and difficulties relative
    /// to the topic mean ability (both linear with unit Jacobian); the
    /// density is evaluated on the constrained values and pulled back.
    fn underlying(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let (a, j, n) = (s.ability_dim(), s.n_sets(), s.n_participants());
        let (oa, od) = (l.offset("ability"), l.offset("difficulty"));
        let (os, omu, osd) = (l.offset("sigma"), l.offset("mu_d"), l.offset("sigma_d"));
        let sigma = exp(q[os]);
        let (mu_d, sigma_d) = (q[omu], exp(q[osd]));

        let helmert = &q[oa..oa + n * a];
        let mut ability = vec![0.0; n * a];
        s.helmert_inverse(helmert, &mut ability);
        let difficulty: Vec<f64> = (0..j).map(|jj| q[od + jj] + s.topic_mean(helmert, jj)).collect();
        let mut g_ability = vec![0.0; n * a];
        let mut g_difficulty = vec![0.0; j];

        let mut g_sigma = 0.0;
        let mut lp = self.likelihood(
            &ability,
            &difficulty,
            sigma,
            Some(&mut g_ability),
            Some(&mut g_difficulty),
            Some(&mut g_sigma),
        );

        let (v, dv) = half_cauchy_lpdf_grad(sigma, NOISE_SCALE);
        lp += v + q[os];
        grad[os] += (g_sigma + dv) * sigma + 1.0;

        let mut g_mu = 0.0;
        let mut g_sd = 0.0;
        for (jj, &d) in difficulty.iter().enumerate() {
            let t = normal_lpdf_grad(d, mu_d, sigma_d);
            lp += t.value;
            g_difficulty[jj] += t.d_x;
            g_mu += t.d_mu;
            g_sd += t.d_sigma;
        }
        let t = normal_lpdf_grad(mu_d, 0.0, DIFFICULTY_MEAN_SD);
        lp += t.value;
        grad[omu] += g_mu + t.d_x;
        let (v, dv) = half_cauchy_lpdf_grad(sigma_d, DIFFICULTY_SPREAD_SCALE);
        lp += v + q[osd];
        grad[osd] += (g_sd + dv) * sigma_d + 1.0;

        match s.dims {
            Dimensionality::One => {
                for (x, g) in ability.iter().zip(g_ability.iter_mut()) {
                    lp += -0.5 * x * x - 0.5 * LN_2PI;
                    *g -= x;
                }
            }
            Dimensionality::Multi => lp += self.ability_mvn_prior(q, &ability, &mut g_ability, grad),
        }

        // H is orthogonal, so ∂/∂y = H·∂/∂x; each difficulty also moves with
        // its topic's mean coordinate.
        let mut g_helmert = vec![0.0; n * a];
        s.helmert_forward(&g_ability, &mut g_helmert);
        let root_n = sqrt(n as f64);
        for (jj, g) in g_difficulty.iter().enumerate() {
            grad[od + jj] += g;
            g_helmert[s.loading(jj)] += g / root_n;
        }
        for (slot, g) in grad[oa..oa + n * a].iter_mut().zip(&g_helmert) {
            *slot += g;
        }
        lp
    }

    /// MVN(0, diag(s)·L_Ω·L_Ωᵀ·diag(s)) over every participant's ability
    /// vector, plus the scale and LKJ priors and their Jacobians.
    fn ability_mvn_prior(&self, q: &[f64], ability: &[f64], g_ability: &mut [f64], grad: &mut [f64]) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let (k, n) = (s.ability_dim(), s.n_participants());
        let (osc, oc) = (l.offset("ability_scale"), l.offset("ability_corr"));
        let ycorr = &q[oc..oc + crate::transform::free_len(k)];
        let scale: Vec<f64> = q[osc..osc + k].iter().map(|&u| exp(u)).collect();

        let mut omega = vec![0.0; k * k];
        let mut lp = constrain_cholesky_corr(ycorr, k, &mut omega);
        let mut g_omega = vec![0.0; k * k];
        lp += lkj_kernel(k, &omega, LKJ_SHAPE, Some(&mut g_omega));

        // Covariance factor L = diag(s)·Ω.
        let mut chol = vec![0.0; k * k];
        for i in 0..k {
            for jj in 0..=i {
                chol[i * k + jj] = scale[i] * omega[i * k + jj];
            }
        }
        let mut g_chol = vec![0.0; k * k];
        let mut w = vec![0.0; k];
        let mut u = vec![0.0; k];
        for p in 0..n {
            let av = &ability[p * k..(p + 1) * k];
            // w = L⁻¹ a
            for i in 0..k {
                let mut acc = av[i];
                for m in 0..i {
                    acc -= chol[i * k + m] * w[m];
                }
                w[i] = acc / chol[i * k + i];
            }
            // u = L⁻ᵀ w
            for i in (0..k).rev() {
                let mut acc = w[i];
                for m in i + 1..k {
                    acc -= chol[m * k + i] * u[m];
                }
                u[i] = acc / chol[i * k + i];
            }
            lp -= 0.5 * w.iter().map(|x| x * x).sum::<f64>();
            for i in 0..k {
                g_ability[p * k + i] -= u[i];
                for m in 0..=i {
                    g_chol[i * k + m] += u[i] * w[m];
                }
            }
        }
        let mut log_det = 0.0;
        for i in 0..k {
            log_det += log(chol[i * k + i]);
            g_chol[i * k + i] -= n as f64 / chol[i * k + i];
        }
        lp -= n as f64 * (log_det + 0.5 * k as f64 * LN_2PI);

        for i in 0..k {
            let mut gs = 0.0;
            for m in 0..=i {
                gs += g_chol[i * k + m] * omega[i * k + m];
                g_omega[i * k + m] += g_chol[i * k + m] * scale[i];
            }
            let (v, dv) = half_normal_lpdf_grad(scale[i], ABILITY_SCALE_SD);
            lp += v + q[osc + i];
            grad[osc + i] += (gs + dv) * scale[i] + 1.0;
        }
        cholesky_corr_backprop(ycorr, k, &omega, &g_omega, &mut grad[oc..oc + ycorr.len()]);
        lp
    }

    /// Non-centered: `a^s = a + σ_a·z_a`, `d^s = γ·d + Λ + σ_d·z_d`.
    fn self_assessment(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let (a, j) = (s.ability_dim(), s.n_sets());
        let base_a = s.fixed.underlying_ability.as_deref().unwrap_or_default();
        let base_d = s.fixed.underlying_difficulty.as_deref().unwrap_or_default();
        let (oa, od, os) = (l.offset("ability"), l.offset("difficulty"), l.offset("sigma"));
        let (og, olam, osd, osa) = (l.offset("gamma"), l.offset("lambda"), l.offset("sigma_d"), l.offset("sigma_a"));
        let sigma = exp(q[os]);
        let (gamma, lambda) = (q[og], q[olam]);
        let (sigma_d, sigma_a) = (exp(q[osd]), exp(q[osa]));
        let (za, zd) = (&q[oa..oa + a], &q[od..od + j]);
        let ability: Vec<f64> = (0..a).map(|k| base_a[k] + sigma_a * za[k]).collect();
        let difficulty: Vec<f64> = (0..j).map(|jj| gamma * base_d[jj] + lambda + sigma_d * zd[jj]).collect();

        let (mut ga, mut gd, mut g_sigma) = (vec![0.0; a], vec![0.0; j], 0.0);
        let mut lp = self.likelihood(&ability, &difficulty, sigma, Some(&mut ga), Some(&mut gd), Some(&mut g_sigma));
        lp += std_normal_block(&q[oa..oa + a], &mut grad[oa..oa + a]);
        lp += std_normal_block(&q[od..od + j], &mut grad[od..od + j]);

        let (v, dv) = half_cauchy_lpdf_grad(sigma, NOISE_SCALE);
        lp += v + q[os];
        grad[os] += (g_sigma + dv) * sigma + 1.0;

        let mut g_sa = 0.0;
        for k in 0..a {
            grad[oa + k] += ga[k] * sigma_a;
            g_sa += ga[k] * za[k];
        }
        let (v, dv) = half_cauchy_lpdf_grad(sigma_a, NOISE_SCALE);
        lp += v + q[osa];
        grad[osa] += (g_sa + dv) * sigma_a + 1.0;

        let (mut g_gamma, mut g_lambda, mut g_sd) = (0.0, 0.0, 0.0);
        for jj in 0..j {
            grad[od + jj] += gd[jj] * sigma_d;
            g_gamma += gd[jj] * base_d[jj];
            g_lambda += gd[jj];
            g_sd += gd[jj] * zd[jj];
        }
        for (off, x, extra) in [(og, gamma, g_gamma), (olam, lambda, g_lambda)] {
            let t = normal_lpdf_grad(x, 0.0, 1.0);
            lp += t.value;
            grad[off] += extra + t.d_x;
        }
        let (v, dv) = half_cauchy_lpdf_grad(sigma_d, NOISE_SCALE);
        lp += v + q[osd];
        grad[osd] += (g_sd + dv) * sigma_d + 1.0;
        lp
    }

    /// One-dimensional: `δ = μ_δ + σ_δ·z` (non-centered).
    fn by_ability(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let a = s.ability_dim();
        let base_a = s.fixed.self_ability.as_deref().unwrap_or_default();
        let base_d = s.fixed.self_difficulty.as_deref().unwrap_or_default();
        let sigma = s.fixed.self_noise.unwrap_or(f64::NAN);
        let od = l.offset("delta");
        match s.dims {
            Dimensionality::Multi => {
                let ability: Vec<f64> = (0..a).map(|k| base_a[k] + q[od + k]).collect();
                let mut lp = self.likelihood(&ability, base_d, sigma, Some(&mut grad[od..od + a]), None, None);
                lp += std_normal_block(&q[od..od + a], &mut grad[od..od + a]);
                lp
            }
            Dimensionality::One => {
                let (om, osd) = (l.offset("mu_delta"), l.offset("sigma_delta"));
                let (mu, sd, z) = (q[om], exp(q[osd]), q[od]);
                let delta = mu + sd * z;
                let mut g = [0.0];
                let mut lp = self.likelihood(&[base_a[0] + delta], base_d, sigma, Some(&mut g), None, None);
                lp += std_normal_block(&q[od..od + 1], &mut grad[od..od + 1]);
                grad[od] += g[0] * sd;
                let tm = normal_lpdf_grad(mu, 0.0, 1.0);
                lp += tm.value;
                grad[om] += g[0] + tm.d_x;
                let (v, dv) = half_cauchy_lpdf_grad(sd, NOISE_SCALE);
                lp += v + q[osd];
                grad[osd] += (g[0] * z + dv) * sd + 1.0;
                lp
            }
        }
    }

    /// Difficulties non-centered: `d^o = μ_d + σ_d·z`.
    fn fully_differentiated(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let s = &self.spec;
        let l = s.layout();
        let (a, j) = (s.ability_dim(), s.n_sets());
        let sigma = s.fixed.self_noise.unwrap_or(f64::NAN);
        let (oa, od, omu, osd) = (l.offset("ability"), l.offset("difficulty"), l.offset("mu_d"), l.offset("sigma_d"));
        let (mu_d, sigma_d) = (q[omu], exp(q[osd]));
        let zd = &q[od..od + j];
        let difficulty: Vec<f64> = zd.iter().map(|z| mu_d + sigma_d * z).collect();
        let mut gd = vec![0.0; j];
        let mut lp = self.likelihood(&q[oa..oa + a], &difficulty, sigma, Some(&mut grad[oa..oa + a]), Some(&mut gd), None);
        lp += std_normal_block(&q[oa..oa + a], &mut grad[oa..oa + a]);
        lp += std_normal_block(zd, &mut grad[od..od + j]);
        let (mut g_mu, mut g_sd) = (0.0, 0.0);
        for jj in 0..j {
            grad[od + jj] += gd[jj] * sigma_d;
            g_mu += gd[jj];
            g_sd += gd[jj] * zd[jj];
        }
        let t = normal_lpdf_grad(mu_d, 0.0, DIFFICULTY_MEAN_SD);
        lp += t.value;
        grad[omu] += g_mu + t.d_x;
        let (v, dv) = half_cauchy_lpdf_grad(sigma_d, DIFFICULTY_SPREAD_SCALE);
        lp += v + q[osd];
        grad[osd] += (g_sd + dv) * sigma_d + 1.0;
        lp
    }
}

/// Σ log N(x; 0, 1), accumulating its gradient.
fn std_normal_block(x: &[f64], grad: &mut [f64]) -> f64 {
    let mut lp = 0.0;
    for (g, &v) in grad.iter_mut().zip(x) {
        lp += -0.5 * v * v - 0.5 * LN_2PI;
        *g -= v;
    }
    lp
}

impl LogDensity for Model {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_density_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(q.len(), self.spec.dim());
        grad.iter_mut().for_each(|g| *g = 0.0);
        match self.spec.tier {
            Tier::Underlying => self.underlying(q, grad),
            Tier::SelfAssessment => self.self_assessment(q, grad),
            Tier::Other(OtherVariant::Undifferentiated) => {
                let inputs = self.likelihood_inputs(q);
                self.likelihood(&inputs.ability, &inputs.difficulty, inputs.sigma, None, None, None)
            }
            Tier::Other(OtherVariant::DifferentiatedByAbility) => self.by_ability(q, grad),
            Tier::Other(OtherVariant::FullyDifferentiated) => self.fully_differentiated(q, grad),
        }
    }

    fn n_pointwise(&self) -> usize {
        self.obs.len()
    }

    fn pointwise_loglik(&self, q: &[f64], out: &mut [f64]) {
        self.loglik_rows(q, &self.obs, out);
    }
}

/// Joint log density of `spec` on `obs` at the unconstrained point `q`.
pub fn joint_log_density(q: &[f64], spec: &ModelSpec, obs: &[Observation]) -> Result<f64> {
    Model::new(spec.clone(), obs.to_vec())?.joint_log_density(q)
}

/// Gradient of [`joint_log_density`] with respect to `q`.
pub fn grad_log_density(q: &[f64], spec: &ModelSpec, obs: &[Observation]) -> Result<Vec<f64>> {
    Model::new(spec.clone(), obs.to_vec())?.grad_log_density(q)
}
