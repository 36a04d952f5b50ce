//! Staged fitting of the hierarchy and posterior summaries.
//!
//! Stage 1 fits the underlying model to every participant's true scores.
//! Stage 2 fits one self-assessment model per participant with the stage-1
//! posterior means as fixed inputs; stage 3 fits every requested
//! other-assessment variant per participant with the stage-2 posterior means
//! as fixed inputs. Seeds are derived from the master seed, the stage and the
//! participant id, never from the position in the plan.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ResponseTable, ScoreKind, SetCatalog};
use crate::density::{LogDensity, Model};
use crate::error::{config, Error, Result};
use crate::eval::{check_disjoint, heldout_log_lik, next_round_splits, split_final_sets, PointwiseLogLik, ScoreReport};
use crate::math::sigmoid;
use crate::data::observations_for;
use crate::sampler::{sample, PosteriorDraws, SamplerConfig};
use crate::seed;
use crate::spec::{
    build_other, build_self, build_underlying, Dimensionality, FixedInputs, ModelSpec, OtherVariant, ParamValues,
    PointEstimates, Tier, Transform,
};

fn tier_code(tier: Tier) -> u64 {
    match tier {
        Tier::Underlying => 1,
        Tier::SelfAssessment => 2,
        Tier::Other(OtherVariant::Undifferentiated) => 3,
        Tier::Other(OtherVariant::DifferentiatedByAbility) => 4,
        Tier::Other(OtherVariant::FullyDifferentiated) => 5,
    }
}

/// Seed of the fit of `tier` for `participant` (`None` for the joint
/// underlying fit), with `extra` distinguishing repeated fits such as
/// next-round training windows.
pub fn fit_seed(master: u64, tier: Tier, participant: Option<&str>, extra: u64) -> u64 {
    seed::derive_path(master, &[tier_code(tier), participant.map_or(0, seed::hash_str), extra])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedFit {
    pub id: usize,
    pub tier: Tier,
    pub participant: Option<String>,
    pub seed: u64,
    /// Plan id of the fit whose posterior means become this fit's fixed
    /// inputs.
    pub inputs_from: Option<usize>,
}

impl PlannedFit {
    pub fn label(&self) -> String {
        match &self.participant {
            Some(p) => format!("{}/{p}", self.tier.label()),
            None => self.tier.label().to_string(),
        }
    }
}

/// Ordered, immutable fit plan.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub dims: Dimensionality,
    pub master_seed: u64,
    pub participants: Vec<String>,
    pub variants: Vec<OtherVariant>,
    pub fits: Vec<PlannedFit>,
}

/// Builds the `1 + N + N·V` fit plan.
pub fn stage_hierarchy(
    data: &ResponseTable,
    dims: Dimensionality,
    variants: &[OtherVariant],
    master_seed: u64,
) -> Result<StagePlan> {
    for kind in ScoreKind::ALL {
        if !data.has_kind(kind) {
            return Err(config(format!("staged fitting needs `{kind}` scores")));
        }
    }
    let participants = data.participants();
    let mut fits = vec![PlannedFit {
        id: 0,
        tier: Tier::Underlying,
        participant: None,
        seed: fit_seed(master_seed, Tier::Underlying, None, 0),
        inputs_from: None,
    }];
    let mut self_ids = BTreeMap::new();
    for p in &participants {
        let id = fits.len();
        self_ids.insert(p.clone(), id);
        fits.push(PlannedFit {
            id,
            tier: Tier::SelfAssessment,
            participant: Some(p.clone()),
            seed: fit_seed(master_seed, Tier::SelfAssessment, Some(p), 0),
            inputs_from: Some(0),
        });
    }
    for p in &participants {
        for &v in variants {
            let tier = Tier::Other(v);
            fits.push(PlannedFit {
                id: fits.len(),
                tier,
                participant: Some(p.clone()),
                seed: fit_seed(master_seed, tier, Some(p), 0),
                inputs_from: Some(self_ids[p]),
            });
        }
    }
    Ok(StagePlan { dims, master_seed, participants, variants: variants.to_vec(), fits })
}

/// Samples `model`, or evaluates it at its single point when it has no free
/// parameters.
pub fn fit_model(model: &Model, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    if model.dim() == 0 {
        Ok(PosteriorDraws::single_point(model, &[]))
    } else {
        sample(model, cfg)
    }
}

/// One model to fit.
#[derive(Debug, Clone)]
pub struct FitJob {
    pub label: String,
    pub model: Model,
    pub config: SamplerConfig,
}

/// Executes fit jobs. The default runs everything in order on the calling
/// thread; implementations may run jobs or chains concurrently but must
/// return results in job order.
pub trait Runner: Sync {
    fn fit(&self, model: &Model, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
        fit_model(model, cfg)
    }

    fn fit_all(&self, jobs: &[FitJob]) -> Vec<Result<PosteriorDraws>> {
        jobs.iter().map(|j| self.fit(&j.model, &j.config)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {}

/// Where a fit's fixed inputs came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub summary: &'static str,
    pub fixed: FixedInputs,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub planned: PlannedFit,
    pub model: Model,
    pub draws: PosteriorDraws,
    pub provenance: Option<Provenance>,
}

impl Fit {
    pub fn label(&self) -> String {
        self.planned.label()
    }
}

/// Sampler settings per stage; seeds are replaced by the plan's.
///
/// Self fits default to a 0.95 acceptance target: with one person's data the
/// noise scale reaches small values where the likelihood is nearly a step
/// function, and 0.8 leaves roughly a tenth of transitions divergent.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSettings {
    pub underlying: SamplerConfig,
    pub self_tier: SamplerConfig,
    pub per_participant: SamplerConfig,
}

impl Default for StageSettings {
    fn default() -> Self {
        Self {
            underlying: SamplerConfig::underlying(0),
            self_tier: SamplerConfig { target_accept: 0.95, ..SamplerConfig::per_participant(0) },
            per_participant: SamplerConfig::per_participant(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StagedFits {
    pub plan: StagePlan,
    pub underlying: Fit,
    pub underlying_means: PointEstimates,
    pub selves: Vec<Fit>,
    pub self_means: PointEstimates,
    pub others: Vec<Fit>,
}

impl StagedFits {
    pub fn all(&self) -> impl Iterator<Item = &Fit> {
        core::iter::once(&self.underlying).chain(&self.selves).chain(&self.others)
    }

    pub fn other(&self, participant: &str, variant: OtherVariant) -> Option<&Fit> {
        self.others
            .iter()
            .find(|f| f.planned.tier == Tier::Other(variant) && f.planned.participant.as_deref() == Some(participant))
    }
}

/// Element-wise posterior mean of every constrained block.
pub fn posterior_mean(spec: &ModelSpec, draws: &PosteriorDraws) -> Result<ParamValues> {
    let mut sums: Vec<(&'static str, Vec<f64>)> = Vec::new();
    for q in draws.iter() {
        let v = spec.constrain(q)?;
        if sums.is_empty() {
            sums = v.iter().map(|(n, x)| (n, vec![0.0; x.len()])).collect();
        }
        for ((_, acc), (_, x)) in sums.iter_mut().zip(v.iter()) {
            acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        }
    }
    let n = draws.total_draws().max(1) as f64;
    let mut out = ParamValues::new();
    for (name, mut acc) in sums {
        acc.iter_mut().for_each(|a| *a /= n);
        out.set(name, acc);
    }
    Ok(out)
}

/// Posterior means of the underlying fit as next-stage inputs.
pub fn underlying_point_estimates(spec: &ModelSpec, draws: &PosteriorDraws) -> Result<PointEstimates> {
    let m = posterior_mean(spec, draws)?;
    let a = spec.ability_dim();
    let ability = m.get("ability").ok_or_else(|| config("underlying fit lacks abilities"))?;
    let mut out = PointEstimates::default();
    for (i, p) in spec.participants.iter().enumerate() {
        out.ability.insert(p.clone(), ability[i * a..(i + 1) * a].to_vec());
    }
    out.difficulty.insert(PointEstimates::SHARED.into(), m.get("difficulty").unwrap_or_default().to_vec());
    out.noise.insert(PointEstimates::SHARED.into(), m.scalar("sigma").unwrap_or(f64::NAN));
    Ok(out)
}

/// Posterior means of per-participant self fits.
pub fn self_point_estimates<'a>(fits: impl IntoIterator<Item = (&'a ModelSpec, &'a PosteriorDraws)>) -> Result<PointEstimates> {
    let mut out = PointEstimates::default();
    for (spec, draws) in fits {
        let m = posterior_mean(spec, draws)?;
        let p = spec.participants[0].clone();
        out.ability.insert(p.clone(), m.get("ability").unwrap_or_default().to_vec());
        out.difficulty.insert(p.clone(), m.get("difficulty").unwrap_or_default().to_vec());
        out.noise.insert(p, m.scalar("sigma").unwrap_or(f64::NAN));
    }
    Ok(out)
}

fn collect(jobs: &[FitJob], results: Vec<Result<PosteriorDraws>>) -> Result<Vec<PosteriorDraws>> {
    results
        .into_iter()
        .zip(jobs)
        .map(|(r, j)| r.map_err(|e| Error::Config(format!("fit {} failed: {e}", j.label))))
        .collect()
}

/// Runs a plan stage by stage.
pub fn execute<R: Runner + ?Sized>(
    plan: &StagePlan,
    data: &ResponseTable,
    catalog: &SetCatalog,
    settings: &StageSettings,
    runner: &R,
) -> Result<StagedFits> {
    let u_plan = plan.fits[0].clone();
    let (spec, obs) = build_underlying(plan.dims, data, ScoreKind::True, catalog)?;
    let model = Model::new(spec, obs)?;
    let draws = runner.fit(&model, &settings.underlying.clone().with_seed(u_plan.seed))?;
    let underlying_means = underlying_point_estimates(model.spec(), &draws)?;
    let underlying = Fit { planned: u_plan, model, draws, provenance: None };

    let self_plans: Vec<&PlannedFit> = plan.fits.iter().filter(|f| f.tier == Tier::SelfAssessment).collect();
    let mut jobs = Vec::with_capacity(self_plans.len());
    for f in &self_plans {
        let p = f.participant.as_deref().unwrap_or_default();
        let (spec, obs) = build_self(plan.dims, &underlying_means, data, p, catalog)?;
        jobs.push(FitJob {
            label: f.label(),
            model: Model::new(spec, obs)?,
            config: settings.self_tier.clone().with_seed(f.seed),
        });
    }
    let results = collect(&jobs, runner.fit_all(&jobs))?;
    let selves: Vec<Fit> = self_plans
        .iter()
        .zip(jobs)
        .zip(results)
        .map(|((f, j), draws)| Fit {
            planned: (*f).clone(),
            provenance: Some(Provenance {
                source: underlying.label(),
                summary: "posterior mean",
                fixed: j.model.spec().fixed.clone(),
            }),
            model: j.model,
            draws,
        })
        .collect();
    let self_means = self_point_estimates(selves.iter().map(|f| (f.model.spec(), &f.draws)))?;

    let other_plans: Vec<&PlannedFit> = plan.fits.iter().filter(|f| matches!(f.tier, Tier::Other(_))).collect();
    let mut jobs = Vec::with_capacity(other_plans.len());
    for f in &other_plans {
        let Tier::Other(v) = f.tier else { unreachable!() };
        let p = f.participant.as_deref().unwrap_or_default();
        let (spec, obs) = build_other(v, plan.dims, &self_means, data, p, catalog)?;
        jobs.push(FitJob {
            label: f.label(),
            model: Model::new(spec, obs)?,
            config: settings.per_participant.clone().with_seed(f.seed),
        });
    }
    let results = collect(&jobs, runner.fit_all(&jobs))?;
    let others = other_plans
        .iter()
        .zip(jobs)
        .zip(results)
        .map(|((f, j), draws)| {
            let source = f.inputs_from.map(|i| plan.fits[i].label()).unwrap_or_default();
            Fit {
                planned: (*f).clone(),
                provenance: Some(Provenance { source, summary: "posterior mean", fixed: j.model.spec().fixed.clone() }),
                model: j.model,
                draws,
            }
        })
        .collect();

    Ok(StagedFits { plan: plan.clone(), underlying, underlying_means, selves, self_means, others })
}

/// Posterior mean of the ability correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSummary {
    pub topics: Vec<String>,
    /// Row-major `K × K`.
    pub mean: Vec<f64>,
}

impl CorrelationSummary {
    pub fn dim(&self) -> usize {
        self.topics.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mean[i * self.dim() + j]
    }
}

/// Averages `R = L·Lᵀ` over draws.
pub fn extract_correlations(spec: &ModelSpec, draws: &PosteriorDraws) -> Result<CorrelationSummary> {
    let block = spec
        .layout()
        .block("ability_corr")
        .copied()
        .ok_or_else(|| Error::Unsupported("correlations need a multidimensional underlying-structure model".into()))?;
    let Transform::CholeskyCorr { dim: k } = block.transform else { unreachable!() };
    let mut mean = vec![0.0; k * k];
    let mut l = vec![0.0; k * k];
    for q in draws.iter() {
        crate::transform::constrain_cholesky_corr(&q[block.range()], k, &mut l);
        for i in 0..k {
            for j in 0..k {
                mean[i * k + j] += (0..k).map(|m| l[i * k + m] * l[j * k + m]).sum::<f64>();
            }
        }
    }
    let n = draws.total_draws().max(1) as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    for i in 0..k {
        mean[i * k + i] = 1.0;
        for j in 0..i {
            let s = 0.5 * (mean[i * k + j] + mean[j * k + i]);
            mean[i * k + j] = s;
            mean[j * k + i] = s;
        }
    }
    Ok(CorrelationSummary { topics: spec.catalog.topics().to_vec(), mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSummary {
    /// Topic names, or a single `"all"` entry for the one-dimensional model.
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    /// Central 90% interval.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Linear-interpolated sample quantile (type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean and central 90% interval of δ per ability dimension.
pub fn delta_summary(spec: &ModelSpec, draws: &PosteriorDraws) -> Result<DeltaSummary> {
    if spec.tier != Tier::Other(OtherVariant::DifferentiatedByAbility) {
        return Err(Error::Unsupported(format!("δ is only defined for {}", OtherVariant::DifferentiatedByAbility)));
    }
    let labels = match spec.dims {
        Dimensionality::Multi => spec.catalog.topics().to_vec(),
        Dimensionality::One => vec![String::from("all")],
    };
    let deltas = draws
        .iter()
        .map(|q| Ok(spec.constrain(q)?.get("delta").ok_or_else(|| config("missing δ block"))?.to_vec()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let (mut mean, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..labels.len() {
        let mut xs: Vec<f64> = deltas.iter().map(|d| d[k]).collect();
        mean.push(xs.iter().sum::<f64>() / xs.len().max(1) as f64);
        xs.sort_by(f64::total_cmp);
        lower.push(quantile(&xs, 0.05));
        upper.push(quantile(&xs, 0.95));
    }
    Ok(DeltaSummary { labels, mean, lower, upper })
}

/// Change, in percentage points, of the latent success probability when
/// self-perceived ability `a_self` is shifted by `delta` on a set of
/// difficulty `d_self`.
pub fn latent_probability_shift(a_self: f64, d_self: f64, delta: f64) -> Result<f64> {
    if !(a_self.is_finite() && d_self.is_finite() && delta.is_finite()) {
        return Err(Error::Domain("latent probability shift needs finite inputs".into()));
    }
    Ok(100.0 * (sigmoid(a_self + delta - d_self) - sigmoid(a_self - d_self)))
}

/// Held-out score of the underlying-structure model on each participant's
/// final `n_heldout` problem sets of `kind`.
pub fn heldout_final_sets<R: Runner + ?Sized>(
    data: &ResponseTable,
    kind: ScoreKind,
    dims: Dimensionality,
    n_heldout: usize,
    catalog: &SetCatalog,
    cfg: &SamplerConfig,
    runner: &R,
) -> Result<(ScoreReport, Vec<String>)> {
    let (train, test) = split_final_sets(data, kind, n_heldout)?;
    let (spec, obs) = build_underlying(dims, &train, kind, catalog)?;
    let test_obs = observations_for(&test, kind, &spec.participants, catalog)?;
    check_disjoint(&obs, &test_obs)?;
    let model = Model::new(spec, obs)?;
    let draws = runner.fit(&model, cfg)?;
    let report = heldout_log_lik(&PointwiseLogLik::for_rows(&model, &draws, &test_obs));
    let owners = test_obs.iter().map(|o| model.spec().participants[o.participant].clone()).collect();
    Ok((report, owners))
}

/// Next-round score of one (participant, variant, round).
#[derive(Debug, Clone, PartialEq)]
pub struct NextRoundEntry {
    pub participant: String,
    pub variant: OtherVariant,
    pub round: u32,
    pub report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NextRoundReport {
    pub entries: Vec<NextRoundEntry>,
}

impl NextRoundReport {
    /// Every scored observation of `variant`, pooled over participants and
    /// rounds.
    pub fn pooled(&self, variant: OtherVariant) -> ScoreReport {
        let parts: Vec<ScoreReport> =
            self.entries.iter().filter(|e| e.variant == variant).map(|e| e.report.clone()).collect();
        ScoreReport::pooled(variant.as_str(), &parts)
    }

    /// Pooled over the participants in `keep`.
    pub fn pooled_where(&self, variant: OtherVariant, keep: impl Fn(&str) -> bool) -> ScoreReport {
        let parts: Vec<ScoreReport> = self
            .entries
            .iter()
            .filter(|e| e.variant == variant && keep(&e.participant))
            .map(|e| e.report.clone())
            .collect();
        ScoreReport::pooled(variant.as_str(), &parts)
    }

    /// Variant with the highest pooled per-observation score.
    pub fn best(&self, variants: &[OtherVariant]) -> Option<OtherVariant> {
        variants
            .iter()
            .map(|&v| (v, self.pooled(v).per_obs))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(v, _)| v)
    }
}

/// Next-round log-likelihood of other-assessments: for each round `t`, the
/// variant is refitted on rounds `1..t` and scored on round `t`. Self
/// estimates are the stage-2 posterior means (fitted once on all self data).
#[allow(clippy::too_many_arguments)]
pub fn next_round_log_lik<R: Runner + ?Sized>(
    data: &ResponseTable,
    dims: Dimensionality,
    variants: &[OtherVariant],
    self_means: &PointEstimates,
    catalog: &SetCatalog,
    cfg: &SamplerConfig,
    include_first: bool,
    runner: &R,
) -> Result<NextRoundReport> {
    let other = data.of_kind(ScoreKind::Other);
    let splits = next_round_splits(&other.rounds(), include_first)?;
    let mut jobs = Vec::new();
    let mut meta = Vec::new();
    for p in other.participants() {
        for &v in variants {
            for (train_rounds, t) in &splits {
                let train = other.filter(|r| r.participant == p && train_rounds.contains(&r.round));
                let test = other.filter(|r| r.participant == p && r.round == *t);
                if test.is_empty() {
                    continue;
                }
                let (spec, obs) = build_other(v, dims, self_means, &train_or_empty(&train, data), &p, catalog)?;
                let test_obs = observations_for(&test, ScoreKind::Other, &spec.participants, catalog)?;
                check_disjoint(&obs, &test_obs)?;
                let seed = fit_seed(cfg.seed, Tier::Other(v), Some(&p), *t as u64);
                jobs.push(FitJob {
                    label: format!("{}/{p}/round{t}", v.as_str()),
                    model: Model::new(spec, obs)?,
                    config: cfg.clone().with_seed(seed),
                });
                meta.push((p.clone(), v, *t, test_obs));
            }
        }
    }
    let results = collect(&jobs, runner.fit_all(&jobs))?;
    let entries = jobs
        .iter()
        .zip(results)
        .zip(meta)
        .map(|((job, draws), (participant, variant, round, test_obs))| {
            let ll = PointwiseLogLik::for_rows(&job.model, &draws, &test_obs);
            NextRoundEntry { participant, variant, round, report: heldout_log_lik(&ll) }
        })
        .collect();
    Ok(NextRoundReport { entries })
}

/// An empty training table keeps the original score range so the ladder is
/// unchanged.
fn train_or_empty(train: &ResponseTable, data: &ResponseTable) -> ResponseTable {
    if train.is_empty() {
        data.filter(|_| false)
    } else {
        train.clone()
    }
}
