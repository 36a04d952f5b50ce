//! Run configuration, the parallel fit runner, result bundles and the five
//! commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ommirt_core::data::{Counterpart, SetCatalog};
use ommirt_core::diagnostics::{Diagnostics, Gate};
use ommirt_core::eval::{baseline_log_score, psis_loo, waic, PointwiseLogLik, ScoreReport};
use ommirt_core::sampler::{sample_chain, PosteriorDraws, SamplerConfig};
use ommirt_core::sim::{
    simulate_experiment, AssessmentGenerator, ExperimentDesign, GroundTruth, OtherParams, UnderlyingGenerator,
    DEFAULT_TOPICS,
};
use ommirt_core::spec::build_underlying;
use ommirt_core::staging::{
    delta_summary, execute, extract_correlations, fit_model, fit_seed, heldout_final_sets, next_round_log_lik,
    posterior_mean, stage_hierarchy, CorrelationSummary, Fit, FitJob, Runner, StageSettings, StagedFits,
};
use ommirt_core::{Dimensionality, LogDensity, Model, OtherVariant, ResponseTable, ScoreKind, Tier};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, IngestOptions, SamplerEcho};
use crate::plots::{emit_plot_data, Figure, PlotInputs};
use crate::summary::{empirical_summary, EmpiricalSummary, ALPHA};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Chains of one fit, and independent fits, run on the rayon pool. Results
/// are collected in index order, so output does not depend on scheduling.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Runner for Parallel {
    fn fit(&self, model: &Model, cfg: &SamplerConfig) -> ommirt_core::Result<PosteriorDraws> {
        if model.dim() == 0 {
            return fit_model(model, cfg);
        }
        cfg.validate()?;
        let chains = (0..cfg.chains)
            .into_par_iter()
            .map(|c| sample_chain(model, cfg, c))
            .collect::<ommirt_core::Result<Vec<_>>>()?;
        PosteriorDraws::from_chains(model.dim(), model.n_pointwise(), chains)
    }

    fn fit_all(&self, jobs: &[FitJob]) -> Vec<ommirt_core::Result<PosteriorDraws>> {
        jobs.par_iter().map(|j| self.fit(&j.model, &j.config)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    /// R̂ ≤ 1.01 and bulk ESS ≥ 100 on every coordinate of every fit.
    Strict,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    Heldout,
    NextRound,
    Waic,
    Loo,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Baseline, Method::Heldout, Method::NextRound, Method::Waic, Method::Loo];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Simulate,
    Evaluate,
    Compare,
    Recover,
}

mod dims_str {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Dimensionality, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(d.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Dimensionality, D::Error> {
        String::deserialize(d)?.parse().map_err(|e: ommirt_core::Error| D::Error::custom(e.to_string()))
    }
}

mod variants_str {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[OtherVariant], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<OtherVariant>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(|e: ommirt_core::Error| D::Error::custom(e.to_string())))
            .collect()
    }
}

mod variant_str {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &OtherVariant, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(v.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<OtherVariant, D::Error> {
        String::deserialize(d)?.parse().map_err(|e: ommirt_core::Error| D::Error::custom(e.to_string()))
    }
}

/// Synthetic experiment settings for `simulate` and `recover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub participants: usize,
    /// Structure of the generated other-assessments.
    #[serde(with = "variant_str")]
    pub variant: OtherVariant,
    /// `one` draws a single ability shared by all topics.
    #[serde(with = "dims_str")]
    pub truth_dims: Dimensionality,
    /// Off-diagonal ability correlation (multidimensional truth).
    pub rho: f64,
    /// Mean of δ per topic (differentiated by ability).
    pub delta_mean: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            participants: 20,
            variant: OtherVariant::DifferentiatedByAbility,
            truth_dims: Dimensionality::Multi,
            rho: 0.5,
            delta_mean: 0.8,
        }
    }
}

/// Everything a run depends on; echoed into the bundle so a run can be
/// replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    #[serde(with = "dims_str")]
    pub dims: Dimensionality,
    #[serde(with = "variants_str")]
    pub variants: Vec<OtherVariant>,
    pub warmup: Option<usize>,
    pub samples: Option<usize>,
    pub chains: Option<usize>,
    pub target_accept: Option<f64>,
    pub rounds_heldout: usize,
    pub gate: GateMode,
    /// Score round 1 of the next-round evaluation from the prior.
    pub include_first_round: bool,
    pub methods: Vec<Method>,
    /// Keep only participants with (`true`) or without feedback.
    pub feedback: Option<bool>,
    pub max_score: u32,
    pub simulation: SimSettings,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            input: None,
            out: out.into(),
            seed,
            dims: Dimensionality::Multi,
            variants: OtherVariant::ALL.to_vec(),
            warmup: None,
            samples: None,
            chains: None,
            target_accept: None,
            rounds_heldout: 4,
            gate: GateMode::Strict,
            include_first_round: false,
            methods: Method::ALL.to_vec(),
            feedback: None,
            max_score: 12,
            simulation: SimSettings::default(),
        }
    }

    fn apply(&self, mut c: SamplerConfig) -> SamplerConfig {
        c.warmup = self.warmup.unwrap_or(c.warmup);
        c.samples = self.samples.unwrap_or(c.samples);
        c.chains = self.chains.unwrap_or(c.chains);
        c.target_accept = self.target_accept.unwrap_or(c.target_accept);
        c
    }

    pub fn underlying_config(&self, seed: u64) -> SamplerConfig {
        self.apply(SamplerConfig::underlying(seed))
    }

    pub fn per_participant_config(&self, seed: u64) -> SamplerConfig {
        self.apply(SamplerConfig::per_participant(seed))
    }

    pub fn stage_settings(&self) -> StageSettings {
        let d = StageSettings::default();
        StageSettings {
            underlying: self.apply(d.underlying),
            self_tier: self.apply(d.self_tier),
            per_participant: self.apply(d.per_participant),
        }
    }

    pub fn wants(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    pub fn gate(&self) -> Option<Gate> {
        (self.gate == GateMode::Strict).then(Gate::default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceRecord {
    pub source: String,
    pub summary: String,
    pub underlying_ability: Option<Vec<f64>>,
    pub underlying_difficulty: Option<Vec<f64>>,
    pub self_ability: Option<Vec<f64>>,
    pub self_difficulty: Option<Vec<f64>>,
    pub self_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub label: String,
    pub tier: String,
    pub participant: Option<String>,
    pub parameters: usize,
    /// Draw file relative to the output directory.
    pub draws: Option<String>,
    pub sampler: Option<SamplerEcho>,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub divergences: usize,
    pub divergence_fraction: f64,
    /// Coordinates failing the gate.
    pub gate_failures: Vec<String>,
    pub provenance: Option<ProvenanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub method: String,
    pub model: String,
    pub group: String,
    pub n_obs: usize,
    pub total: f64,
    pub per_obs: f64,
    /// `total` divided by the number of participants scored.
    pub per_participant: Option<f64>,
    pub se: Option<f64>,
    pub p_eff: Option<f64>,
    /// Observations with Pareto k̂ above 0.7.
    pub high_pareto_k: usize,
}

impl ScoreRow {
    fn new(model: &str, group: &str, r: &ScoreReport, participants: Option<usize>) -> Self {
        Self {
            method: r.method.clone(),
            model: model.into(),
            group: group.into(),
            n_obs: r.n_obs(),
            total: r.total,
            per_obs: r.per_obs,
            per_participant: participants.filter(|&n| n > 0).map(|n| r.total / n as f64),
            se: r.se,
            p_eff: r.p_eff,
            high_pareto_k: r.high_pareto_k().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
}

/// Rows are models (or topics), columns are counterpart groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn value(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.label == row)?.values[c]
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n{:<28}", self.title, "");
        for c in &self.columns {
            out.push_str(&format!("{c:>20}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:<28}", r.label));
            for (v, se) in r.values.iter().zip(&r.se) {
                let cell = match (v, se) {
                    (Some(v), Some(se)) => format!("{v:.2} ± {se:.1}"),
                    (Some(v), None) => format!("{v:.2}"),
                    _ => "-".into(),
                };
                out.push_str(&format!("{cell:>20}"));
            }
            out.push('\n');
        }
        out
    }

    fn write_csv(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec![String::from("model")];
        for c in &self.columns {
            header.push(c.clone());
            header.push(format!("{c}_se"));
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            for (v, se) in r.values.iter().zip(&r.se) {
                rec.push(v.map(|x| x.to_string()).unwrap_or_default());
                rec.push(se.map(|x| x.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(Error::io(&path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRecord {
    pub group: String,
    pub topics: Vec<String>,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRecord {
    pub participant: String,
    pub counterpart: String,
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Truth-versus-estimate summary of a `recover` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    /// Pearson correlation of posterior-mean and true abilities.
    pub ability_correlation: f64,
    pub max_correlation_error: Option<f64>,
    pub sigma_true: f64,
    pub sigma_estimate: f64,
    /// Mean absolute error of posterior-mean δ (differentiated by ability).
    pub delta_mean_abs_error: Option<f64>,
    #[serde(serialize_with = "ser_variant")]
    pub true_variant: OtherVariant,
    /// Winner of the next-round comparison, when run.
    pub selected_variant: Option<String>,
}

fn ser_variant<S: serde::Serializer>(v: &OtherVariant, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultBundle {
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub converged: bool,
    pub fits: Vec<FitRecord>,
    pub scores: Vec<ScoreRow>,
    pub tables: Vec<Table>,
    pub correlations: Vec<CorrelationRecord>,
    pub deltas: Vec<DeltaRecord>,
    pub recovery: Option<Recovery>,
    pub summary: Option<EmpiricalSummary>,
    pub notes: Vec<String>,
}

impl ResultBundle {
    fn new(command: Command, cfg: &RunConfig) -> Self {
        Self {
            version: VERSION.into(),
            command,
            config: cfg.clone(),
            converged: true,
            fits: Vec::new(),
            scores: Vec::new(),
            tables: Vec::new(),
            correlations: Vec::new(),
            deltas: Vec::new(),
            recovery: None,
            summary: None,
            notes: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Fits that failed the gate, by label.
    pub fn gate_failures(&self) -> Vec<String> {
        self.fits.iter().filter(|f| !f.gate_failures.is_empty()).map(|f| f.label.clone()).collect()
    }

    fn record(&mut self, fit: FitRecord) {
        if !fit.gate_failures.is_empty() {
            self.converged = false;
        }
        self.fits.push(fit);
    }
}

/// Runs `command`, writing every artifact under `cfg.out` (including
/// `bundle.json`) before returning, so outputs survive a failed gate.
pub fn run(command: Command, cfg: &RunConfig) -> Result<ResultBundle> {
    fs::create_dir_all(&cfg.out).map_err(Error::io(&cfg.out))?;
    let mut bundle = ResultBundle::new(command, cfg);
    match command {
        Command::Fit => fit_command(cfg, &mut bundle)?,
        Command::Simulate => {
            simulate_command(cfg, &mut bundle)?;
        }
        Command::Evaluate => evaluate_command(cfg, &mut bundle)?,
        Command::Compare => compare_command(cfg, &mut bundle)?,
        Command::Recover => recover_command(cfg, &mut bundle)?,
    }
    for t in &bundle.tables {
        t.write_csv(&cfg.out)?;
    }
    io::write_json(&cfg.out.join("bundle.json"), &bundle)?;
    Ok(bundle)
}

pub fn load_table(cfg: &RunConfig) -> Result<ResponseTable> {
    let path = cfg.input.as_ref().ok_or_else(|| Error::MissingInput("--input is required".into()))?;
    let table = io::ingest(path, &IngestOptions { max_score: cfg.max_score, max_round: None })?;
    Ok(match cfg.feedback {
        Some(f) => table.filter(|r| r.condition.feedback == f),
        None => table,
    })
}

pub fn catalog_for(table: &ResponseTable) -> Result<SetCatalog> {
    let order: Vec<String> = DEFAULT_TOPICS.iter().map(|t| t.to_string()).collect();
    Ok(SetCatalog::from_table(table, &order)?)
}

/// Counterpart groups present in the data, as column label and members.
pub fn groups(table: &ResponseTable) -> Vec<(String, BTreeSet<String>)> {
    let mut out = Vec::new();
    for (label, cp) in [("Humans", Counterpart::Human), ("AI", Counterpart::Ai)] {
        let members: BTreeSet<String> =
            table.rows().iter().filter(|r| r.condition.counterpart == cp).map(|r| r.participant.clone()).collect();
        if !members.is_empty() {
            out.push((label.to_string(), members));
        }
    }
    out
}

fn stem(label: &str) -> String {
    label.replace('/', "-")
}

fn fit_record(fit: &Fit, cfg: &RunConfig, sampler: Option<&SamplerConfig>, draws_dir: Option<&Path>) -> Result<FitRecord> {
    let spec = fit.model.spec();
    let draws_file = match draws_dir {
        Some(dir) => {
            let path = io::write_draws(dir, &stem(&fit.label()), &fit.label(), spec, &fit.draws, sampler)?;
            Some(path.strip_prefix(&cfg.out).unwrap_or(&path).to_string_lossy().into_owned())
        }
        None => None,
    };
    let (mut max_rhat, mut min_ess, mut gate_failures) = (None, None, Vec::new());
    if fit.model.dim() > 0 {
        let diag = Diagnostics::from_draws(&fit.draws);
        max_rhat = Some(diag.max_rhat());
        min_ess = Some(diag.min_ess());
        if let Some(gate) = cfg.gate() {
            let names = spec.unconstrained_names();
            gate_failures = diag
                .failures(&gate)
                .into_iter()
                .map(|p| format!("{} (R̂ {:.3}, ESS {:.0})", names[p], diag.rhat[p], diag.ess_bulk[p]))
                .collect();
        }
    }
    if fit.draws.flagged() {
        warn!("{}: {:.1}% divergent transitions", fit.label(), 100.0 * fit.draws.divergence_fraction());
    }
    let provenance = fit.provenance.as_ref().map(|p| ProvenanceRecord {
        source: p.source.clone(),
        summary: p.summary.into(),
        underlying_ability: p.fixed.underlying_ability.clone(),
        underlying_difficulty: p.fixed.underlying_difficulty.clone(),
        self_ability: p.fixed.self_ability.clone(),
        self_difficulty: p.fixed.self_difficulty.clone(),
        self_noise: p.fixed.self_noise,
    });
    Ok(FitRecord {
        label: fit.label(),
        tier: spec.tier.label().into(),
        participant: fit.planned.participant.clone(),
        parameters: fit.model.dim(),
        draws: draws_file,
        sampler: sampler.filter(|_| fit.model.dim() > 0).map(SamplerEcho::from),
        max_rhat,
        min_ess,
        divergences: fit.draws.divergences(),
        divergence_fraction: fit.draws.divergence_fraction(),
        gate_failures,
        provenance,
    })
}

fn sampler_for(fit: &Fit, settings: &StageSettings) -> SamplerConfig {
    let base = match fit.planned.tier {
        Tier::Underlying => &settings.underlying,
        Tier::SelfAssessment => &settings.self_tier,
        Tier::Other(_) => &settings.per_participant,
    };
    base.clone().with_seed(fit.planned.seed)
}

fn run_stages(cfg: &RunConfig, table: &ResponseTable, cat: &SetCatalog, variants: &[OtherVariant]) -> Result<StagedFits> {
    let plan = stage_hierarchy(table, cfg.dims, variants, cfg.seed)?;
    info!("staged plan: {} fits", plan.fits.len());
    Ok(execute(&plan, table, cat, &cfg.stage_settings(), &Parallel)?)
}

fn record_stages(cfg: &RunConfig, staged: &StagedFits, draws_dir: Option<&Path>, bundle: &mut ResultBundle) -> Result<()> {
    let settings = cfg.stage_settings();
    for fit in staged.all() {
        let record = fit_record(fit, cfg, Some(&sampler_for(fit, &settings)), draws_dir)?;
        bundle.record(record);
    }
    Ok(())
}

fn counterpart_of(table: &ResponseTable, participant: &str) -> String {
    table.condition_of(participant).map(|c| c.counterpart.as_str().to_string()).unwrap_or_default()
}

fn collect_summaries(table: &ResponseTable, staged: &StagedFits, bundle: &mut ResultBundle) -> Result<()> {
    if staged.plan.dims == Dimensionality::Multi {
        let c = extract_correlations(staged.underlying.model.spec(), &staged.underlying.draws)?;
        bundle.correlations.push(CorrelationRecord { group: "true".into(), topics: c.topics, mean: c.mean });
    }
    for f in staged.others.iter().filter(|f| f.planned.tier == Tier::Other(OtherVariant::DifferentiatedByAbility)) {
        let d = delta_summary(f.model.spec(), &f.draws)?;
        let p = f.planned.participant.clone().unwrap_or_default();
        bundle.deltas.push(DeltaRecord {
            counterpart: counterpart_of(table, &p),
            participant: p,
            labels: d.labels,
            mean: d.mean,
            lower: d.lower,
            upper: d.upper,
        });
    }
    Ok(())
}

fn fit_command(cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let table = load_table(cfg)?;
    let cat = catalog_for(&table)?;
    let staged = run_stages(cfg, &table, &cat, &cfg.variants)?;
    let dir = cfg.out.join("draws");
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    record_stages(cfg, &staged, Some(&dir), bundle)?;
    collect_summaries(&table, &staged, bundle)?;
    bundle.summary = Some(empirical_summary(&table, ALPHA));
    write_plots(cfg, bundle, Some(&table))?;
    Ok(())
}

/// Design, generators and variant described by `cfg.simulation`.
pub fn simulate(cfg: &RunConfig) -> Result<(ResponseTable, GroundTruth)> {
    let s = &cfg.simulation;
    let design = ExperimentDesign::standard(s.participants, cfg.seed);
    let k = design.topics.len();
    let mut ugen = UnderlyingGenerator::new(s.truth_dims, k);
    if s.truth_dims == Dimensionality::Multi {
        ugen = ugen.equicorrelated(s.rho);
    }
    let a = if s.truth_dims == Dimensionality::Multi { k } else { 1 };
    let agen = AssessmentGenerator { delta_mean: vec![s.delta_mean; a], ..AssessmentGenerator::new(a) };
    Ok(simulate_experiment(&design, &ugen, &agen, s.variant)?)
}

/// Ground-truth manifest of a simulated experiment.
pub fn truth_manifest(truth: &GroundTruth) -> serde_json::Value {
    use serde_json::json;
    let d = &truth.design;
    let participants: Vec<_> = d
        .participants
        .iter()
        .map(|p| {
            json!({
                "id": p.id,
                "counterpart": p.condition.counterpart.as_str(),
                "accuracy_tier": p.condition.tier.as_str(),
                "feedback": p.condition.feedback,
            })
        })
        .collect();
    let assessments = truth.assessments.as_ref().map(|a| {
        let selfs: BTreeMap<_, _> = a
            .self_params
            .iter()
            .map(|(id, s)| (id.clone(), json!({"ability": s.ability, "difficulty": s.difficulty, "sigma": s.sigma})))
            .collect();
        let others: BTreeMap<_, _> = a
            .other
            .iter()
            .map(|(id, o)| {
                let v = match o {
                    OtherParams::Undifferentiated => json!({"variant": o.variant().as_str()}),
                    OtherParams::DifferentiatedByAbility { delta } => json!({"variant": o.variant().as_str(), "delta": delta}),
                    OtherParams::FullyDifferentiated { ability, difficulty } => {
                        json!({"variant": o.variant().as_str(), "ability": ability, "difficulty": difficulty})
                    }
                };
                (id.clone(), v)
            })
            .collect();
        json!({"self": selfs, "other": others})
    });
    json!({
        "design": {
            "topics": d.topics,
            "rounds": d.rounds,
            "sets_per_topic": d.sets_per_topic,
            "questions_per_set": d.questions_per_set,
            "seed": d.seed,
            "participants": participants,
        },
        "underlying": {
            "ability": truth.underlying.ability,
            "difficulty": truth.underlying.difficulty,
            "sigma": truth.underlying.sigma,
            "correlation": truth.underlying.correlation,
            "scales": truth.underlying.scales,
        },
        "assessments": assessments,
    })
}

fn simulate_command(cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<(ResponseTable, GroundTruth)> {
    let (table, truth) = simulate(cfg)?;
    let data = cfg.out.join("data.csv");
    io::emit(&table, &data)?;
    io::write_json(&cfg.out.join("truth.json"), &truth_manifest(&truth))?;
    bundle.notes.push(format!("{} rows written to data.csv; generative parameters in truth.json", table.len()));
    Ok((table, truth))
}

fn heldout_seed(cfg: &RunConfig, group: &str, dims: Dimensionality) -> u64 {
    fit_seed(cfg.seed, Tier::Underlying, Some(group), 1 + dims as u64)
}

fn group_table(table: &ResponseTable, members: &BTreeSet<String>) -> ResponseTable {
    table.filter(|r| members.contains(&r.participant))
}

fn evaluate_command(cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let table = load_table(cfg)?;
    let cat = catalog_for(&table)?;
    let groups = groups(&table);
    let categories = table.max_score() as usize + 1;
    if cfg.wants(Method::Baseline) {
        let n = table.of_kind(ScoreKind::Other).len();
        let mut row = ScoreRow::new("baseline", "all", &baseline_log_score(n, categories), None);
        row.method = "baseline".into();
        bundle.scores.push(row);
    }
    if cfg.wants(Method::Heldout) {
        for (label, members) in &groups {
            let sub = group_table(&table, members);
            let sampler = cfg.underlying_config(heldout_seed(cfg, label, cfg.dims));
            let (report, _) = heldout_final_sets(&sub, ScoreKind::Other, cfg.dims, cfg.rounds_heldout, &cat, &sampler, &Parallel)?;
            bundle.scores.push(ScoreRow::new(cfg.dims.as_str(), label, &report, Some(members.len())));
        }
    }
    let staged_needed = cfg.wants(Method::NextRound) || cfg.wants(Method::Waic) || cfg.wants(Method::Loo);
    if staged_needed {
        let staged = run_stages(cfg, &table, &cat, &cfg.variants)?;
        record_stages(cfg, &staged, None, bundle)?;
        if cfg.wants(Method::NextRound) {
            let nr = next_round_log_lik(
                &table,
                cfg.dims,
                &cfg.variants,
                &staged.self_means,
                &cat,
                &cfg.per_participant_config(cfg.seed),
                cfg.include_first_round,
                &Parallel,
            )?;
            for (label, members) in &groups {
                for &v in &cfg.variants {
                    let r = nr.pooled_where(v, |p| members.contains(p));
                    let mut row = ScoreRow::new(v.as_str(), label, &r, Some(members.len()));
                    row.method = "next-round".into();
                    bundle.scores.push(row);
                }
            }
        }
        for (method, wanted) in [(Method::Waic, cfg.wants(Method::Waic)), (Method::Loo, cfg.wants(Method::Loo))] {
            if !wanted {
                continue;
            }
            for (label, members) in &groups {
                for &v in &cfg.variants {
                    let r = pooled_information(&staged, v, members, method);
                    bundle.scores.push(ScoreRow::new(v.as_str(), label, &r, Some(members.len())));
                }
            }
        }
    }
    bundle.summary = Some(empirical_summary(&table, ALPHA));
    write_plots(cfg, bundle, Some(&table))?;
    Ok(())
}

fn information(draws: &PosteriorDraws, method: Method) -> ScoreReport {
    let ll = PointwiseLogLik::from_draws(draws);
    match method {
        Method::Loo => psis_loo(&ll),
        _ => waic(&ll),
    }
}

/// WAIC or LOO of the stage-3 fits of `variant`, pooled over `members`.
fn pooled_information(staged: &StagedFits, variant: OtherVariant, members: &BTreeSet<String>, method: Method) -> ScoreReport {
    let parts: Vec<ScoreReport> = staged
        .others
        .iter()
        .filter(|f| f.planned.tier == Tier::Other(variant))
        .filter(|f| f.planned.participant.as_ref().is_some_and(|p| members.contains(p)))
        .map(|f| information(&f.draws, method))
        .collect();
    let label = if method == Method::Loo { "psis-loo" } else { "waic" };
    ScoreReport::pooled(label, &parts)
}

fn dims_label(d: Dimensionality) -> &'static str {
    match d {
        Dimensionality::One => "One-dimensional",
        Dimensionality::Multi => "Multidimensional",
    }
}

fn variant_label(v: OtherVariant) -> &'static str {
    match v {
        OtherVariant::Undifferentiated => "Undifferentiated",
        OtherVariant::DifferentiatedByAbility => "Differentiated by Ability",
        OtherVariant::FullyDifferentiated => "Fully Differentiated",
    }
}

fn table_of(name: &str, title: &str, columns: &[String], rows: Vec<(String, Vec<Option<f64>>, Vec<Option<f64>>)>) -> Table {
    Table {
        name: name.into(),
        title: title.into(),
        columns: columns.to_vec(),
        rows: rows.into_iter().map(|(label, values, se)| TableRow { label, values, se }).collect(),
    }
}

/// Held-out final-set scores of the underlying structure fitted to
/// other-assessments, per counterpart group and dimensionality.
pub fn dimensionality_table(cfg: &RunConfig, table: &ResponseTable, cat: &SetCatalog) -> Result<Table> {
    let groups = groups(table);
    let columns: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
    let base = (1.0 / (table.max_score() as f64 + 1.0)).ln();
    let mut rows = vec![("Baseline".to_string(), vec![Some(base); groups.len()], vec![None; groups.len()])];
    for dims in [Dimensionality::One, Dimensionality::Multi] {
        let mut values = Vec::new();
        for (label, members) in &groups {
            let sub = group_table(table, members);
            let sampler = cfg.underlying_config(heldout_seed(cfg, label, dims));
            let (r, _) = heldout_final_sets(&sub, ScoreKind::Other, dims, cfg.rounds_heldout, cat, &sampler, &Parallel)?;
            values.push(Some(r.per_obs));
        }
        rows.push((dims_label(dims).to_string(), values, vec![None; groups.len()]));
    }
    Ok(table_of("heldout_dimensionality", "Held-out final-set log-likelihood per observation", &columns, rows))
}

fn compare_command(cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let table = load_table(cfg)?;
    let cat = catalog_for(&table)?;
    let groups = groups(&table);
    let columns: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
    let ng = groups.len();
    let categories = table.max_score() as usize + 1;

    if cfg.wants(Method::Heldout) {
        bundle.tables.push(dimensionality_table(cfg, &table, &cat)?);
    }

    // Full-data fits of the underlying structure to other-assessments.
    if cfg.wants(Method::Waic) || cfg.wants(Method::Loo) {
        let mut waic_rows = Vec::new();
        let mut loo_rows = Vec::new();
        let baseline: Vec<Option<f64>> = groups
            .iter()
            .map(|(_, m)| Some(baseline_log_score(group_table(&table, m).of_kind(ScoreKind::Other).len(), categories).total))
            .collect();
        waic_rows.push(("Baseline".to_string(), baseline.clone(), vec![None; ng]));
        loo_rows.push(("Baseline".to_string(), baseline, vec![None; ng]));
        for dims in [Dimensionality::One, Dimensionality::Multi] {
            let (mut wv, mut ws, mut lv, mut ls) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (label, members) in &groups {
                let sub = group_table(&table, members);
                let (spec, obs) = build_underlying(dims, &sub, ScoreKind::Other, &cat)?;
                let model = Model::new(spec, obs)?;
                let sampler = cfg.underlying_config(fit_seed(cfg.seed, Tier::Underlying, Some(label), 10 + dims as u64));
                let draws = Parallel.fit(&model, &sampler)?;
                let fit = Fit {
                    planned: ommirt_core::staging::PlannedFit {
                        id: 0,
                        tier: Tier::Underlying,
                        participant: None,
                        seed: sampler.seed,
                        inputs_from: None,
                    },
                    model,
                    draws,
                    provenance: None,
                };
                let mut record = fit_record(&fit, cfg, Some(&sampler), None)?;
                record.label = format!("underlying/other/{label}/{}", dims.as_str());
                bundle.record(record);
                let w = information(&fit.draws, Method::Waic);
                let l = information(&fit.draws, Method::Loo);
                wv.push(Some(w.total));
                ws.push(w.se);
                lv.push(Some(l.total));
                ls.push(l.se);
                if dims == Dimensionality::Multi {
                    let c: CorrelationSummary = extract_correlations(fit.model.spec(), &fit.draws)?;
                    bundle.correlations.push(CorrelationRecord { group: label.clone(), topics: c.topics, mean: c.mean });
                }
            }
            waic_rows.push((dims_label(dims).to_string(), wv, ws));
            loo_rows.push((dims_label(dims).to_string(), lv, ls));
        }
        if cfg.wants(Method::Waic) {
            bundle.tables.push(table_of("waic_dimensionality", "WAIC of the underlying structure on other-assessments", &columns, waic_rows));
        }
        if cfg.wants(Method::Loo) {
            bundle.tables.push(table_of("loo_dimensionality", "PSIS-LOO of the underlying structure on other-assessments", &columns, loo_rows));
        }
    }

    let staged = run_stages(cfg, &table, &cat, &cfg.variants)?;
    record_stages(cfg, &staged, None, bundle)?;
    collect_summaries(&table, &staged, bundle)?;

    if cfg.wants(Method::NextRound) {
        let nr = next_round_log_lik(
            &table,
            cfg.dims,
            &cfg.variants,
            &staged.self_means,
            &cat,
            &cfg.per_participant_config(cfg.seed),
            cfg.include_first_round,
            &Parallel,
        )?;
        let base = (1.0 / categories as f64).ln();
        let mut rows = vec![("Baseline".to_string(), vec![Some(base); ng], vec![None; ng])];
        for &v in &cfg.variants {
            let values = groups.iter().map(|(_, m)| Some(nr.pooled_where(v, |p| m.contains(p)).per_obs)).collect();
            rows.push((variant_label(v).to_string(), values, vec![None; ng]));
        }
        bundle.tables.push(table_of("next_round_differentiation", "Next-round log-likelihood per observation", &columns, rows));
    }

    for (method, name, title) in [
        (Method::Waic, "waic_differentiation", "Average WAIC per participant"),
        (Method::Loo, "loo_differentiation", "Average PSIS-LOO per participant"),
    ] {
        if !cfg.wants(method) {
            continue;
        }
        let baseline = groups
            .iter()
            .map(|(_, m)| {
                let n = group_table(&table, m).of_kind(ScoreKind::Other).len();
                Some(baseline_log_score(n, categories).total / m.len() as f64)
            })
            .collect();
        let mut rows = vec![("Baseline".to_string(), baseline, vec![None; ng])];
        for &v in &cfg.variants {
            let values = groups
                .iter()
                .map(|(_, m)| Some(pooled_information(&staged, v, m, method).total / m.len() as f64))
                .collect();
            rows.push((variant_label(v).to_string(), values, vec![None; ng]));
        }
        bundle.tables.push(table_of(name, title, &columns, rows));
    }

    if cfg.variants.contains(&OtherVariant::DifferentiatedByAbility) && cfg.dims == Dimensionality::Multi {
        bundle.tables.push(delta_table(&table, bundle, &groups));
    }
    bundle.summary = Some(empirical_summary(&table, ALPHA));
    write_plots(cfg, bundle, Some(&table))?;
    Ok(())
}

/// Mean posterior-mean δ per topic and counterpart group, over
/// participants paired with high-accuracy agents (all participants when
/// none are).
fn delta_table(table: &ResponseTable, bundle: &ResultBundle, groups: &[(String, BTreeSet<String>)]) -> Table {
    let high: BTreeSet<&str> = bundle
        .deltas
        .iter()
        .filter(|d| table.condition_of(&d.participant).is_some_and(|c| c.tier == ommirt_core::data::AccuracyTier::High))
        .map(|d| d.participant.as_str())
        .collect();
    let labels = bundle.deltas.first().map(|d| d.labels.clone()).unwrap_or_default();
    let columns: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
    let mut rows = Vec::new();
    for (k, topic) in labels.iter().enumerate() {
        let values = groups
            .iter()
            .map(|(_, members)| {
                let pick = |d: &&DeltaRecord| members.contains(&d.participant) && (high.is_empty() || high.contains(d.participant.as_str()));
                let xs: Vec<f64> = bundle.deltas.iter().filter(pick).map(|d| d.mean[k]).collect();
                (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
            })
            .collect();
        rows.push((topic.clone(), values, vec![None; groups.len()]));
    }
    table_of("delta", "Mean per-topic ability offset δ", &columns, rows)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Truth-versus-estimate comparison of a staged fit.
pub fn recovery_summary(truth: &GroundTruth, staged: &StagedFits) -> Result<Recovery> {
    let spec = staged.underlying.model.spec();
    let means = posterior_mean(spec, &staged.underlying.draws)?;
    let est = means.get("ability").unwrap_or_default();
    let a = spec.ability_dim();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, p) in truth.design.participants.iter().enumerate() {
        let Some(j) = spec.participants.iter().position(|q| q == &p.id) else { continue };
        let t = &truth.underlying.ability[i];
        for k in 0..a {
            x.push(if t.len() == a { t[k] } else { t[0] });
            y.push(est[j * a + k]);
        }
    }
    let max_correlation_error = match (&truth.underlying.correlation, spec.dims) {
        (Some(r), Dimensionality::Multi) => {
            let c = extract_correlations(spec, &staged.underlying.draws)?;
            Some(r.iter().zip(&c.mean).map(|(t, e)| (t - e).abs()).fold(0.0, f64::max))
        }
        _ => None,
    };
    let mut errors = Vec::new();
    if let Some(params) = &truth.assessments {
        for f in staged.others.iter().filter(|f| f.planned.tier == Tier::Other(OtherVariant::DifferentiatedByAbility)) {
            let p = f.planned.participant.as_deref().unwrap_or_default();
            if let Some(OtherParams::DifferentiatedByAbility { delta }) = params.other.get(p) {
                let d = delta_summary(f.model.spec(), &f.draws)?;
                if d.mean.len() == delta.len() {
                    errors.extend(d.mean.iter().zip(delta).map(|(e, t)| (e - t).abs()));
                }
            }
        }
    }
    let true_variant = truth
        .assessments
        .as_ref()
        .and_then(|a| a.other.values().next().map(|o| o.variant()))
        .unwrap_or(OtherVariant::Undifferentiated);
    Ok(Recovery {
        ability_correlation: pearson(&x, &y),
        max_correlation_error,
        sigma_true: truth.underlying.sigma,
        sigma_estimate: means.scalar("sigma").unwrap_or(f64::NAN),
        delta_mean_abs_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        true_variant,
        selected_variant: None,
    })
}

fn recover_command(cfg: &RunConfig, bundle: &mut ResultBundle) -> Result<()> {
    let (table, truth) = simulate_command(cfg, bundle)?;
    let cat = catalog_for(&table)?;
    let staged = run_stages(cfg, &table, &cat, &cfg.variants)?;
    let dir = cfg.out.join("draws");
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    record_stages(cfg, &staged, Some(&dir), bundle)?;
    collect_summaries(&table, &staged, bundle)?;
    let mut recovery = recovery_summary(&truth, &staged)?;
    if cfg.variants.len() > 1 && cfg.wants(Method::NextRound) {
        let nr = next_round_log_lik(
            &table,
            cfg.dims,
            &cfg.variants,
            &staged.self_means,
            &cat,
            &cfg.per_participant_config(cfg.seed),
            cfg.include_first_round,
            &Parallel,
        )?;
        recovery.selected_variant = nr.best(&cfg.variants).map(|v| v.as_str().to_string());
    }
    bundle.recovery = Some(recovery);
    write_plots(cfg, bundle, Some(&table))?;
    Ok(())
}

/// Writes every figure whose inputs the bundle holds into `out/plots`.
fn write_plots(cfg: &RunConfig, bundle: &ResultBundle, table: Option<&ResponseTable>) -> Result<()> {
    let dir = cfg.out.join("plots");
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let summary = match (&bundle.summary, table) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(t)) => Some(empirical_summary(t, ALPHA)),
        (None, None) => None,
    };
    let inputs = PlotInputs { summary: summary.as_ref(), correlations: &bundle.correlations };
    for figure in Figure::ALL {
        let path = dir.join(format!("{}.csv", figure.as_str()));
        let mut buf = Vec::new();
        match emit_plot_data(&inputs, figure, &mut buf) {
            Ok(()) => fs::write(&path, buf).map_err(Error::io(&path))?,
            Err(Error::MissingInput(why)) => info!("{} skipped: {why}", figure.as_str()),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
