//! Forward simulation of complete experiments with a ground-truth record of
//! every generative parameter.
//!
//! Each participant completes every problem set once. A round holds one set
//! per topic; the topic order is drawn once per participant and reused in
//! every round, and which set of a topic lands in which round is shuffled per
//! participant. Question-level order inside a set is not simulated.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{AccuracyTier, Condition, Counterpart, ResponseRow, ResponseTable, ScoreKind, SetCatalog};
use crate::error::{config, Result};
use crate::math::sigmoid;
use crate::observation::{ordered_probit_pmf, CutpointLadder, NoiseScale, SuccessProbability};
use crate::seed;
use crate::spec::{Dimensionality, OtherVariant};
use crate::transform::CorrelationFactor;

const STREAM_SCHEDULE: u64 = 1;
const STREAM_TRUE: u64 = 2;
const STREAM_SELF: u64 = 3;
const STREAM_OTHER: u64 = 4;

pub const DEFAULT_TOPICS: [&str; 4] = ["History of Art", "Video Games", "Cities", "Math"];

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSpec {
    pub id: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    pub topics: Vec<String>,
    pub rounds: u32,
    pub sets_per_topic: u32,
    pub questions_per_set: u32,
    pub participants: Vec<ParticipantSpec>,
    pub seed: u64,
}

impl ExperimentDesign {
    /// Four topics, four rounds, four sets per topic, twelve questions per
    /// set; participants `1..=n` cycle through the eight conditions.
    pub fn standard(n: usize, seed: u64) -> Self {
        let conditions: Vec<Condition> = [Counterpart::Human, Counterpart::Ai]
            .into_iter()
            .flat_map(|c| {
                [AccuracyTier::High, AccuracyTier::Low].into_iter().flat_map(move |t| {
                    [true, false].into_iter().map(move |f| Condition { counterpart: c, tier: t, feedback: f })
                })
            })
            .collect();
        Self {
            topics: DEFAULT_TOPICS.iter().map(|t| t.to_string()).collect(),
            rounds: 4,
            sets_per_topic: 4,
            questions_per_set: 12,
            participants: (0..n)
                .map(|i| ParticipantSpec { id: (i + 1).to_string(), condition: conditions[i % conditions.len()] })
                .collect(),
            seed,
        }
    }

    /// Same design with every participant in `condition`.
    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.participants.iter_mut().for_each(|p| p.condition = condition);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() || self.rounds == 0 || self.questions_per_set == 0 {
            return Err(config("a design needs topics, rounds and at least one question per set"));
        }
        if self.sets_per_topic != self.rounds {
            return Err(config("every round holds one set per topic, so sets per topic must equal rounds"));
        }
        Ok(())
    }

    pub fn n_sets(&self) -> usize {
        self.topics.len() * self.sets_per_topic as usize
    }

    /// Problem set ids are `1..=K·sets_per_topic`, grouped by topic.
    pub fn set_id(&self, topic: usize, index: usize) -> String {
        (topic * self.sets_per_topic as usize + index + 1).to_string()
    }

    pub fn catalog(&self) -> Result<SetCatalog> {
        let per = self.sets_per_topic as usize;
        SetCatalog::new(
            self.topics.clone(),
            (0..self.n_sets()).map(|s| (s + 1).to_string()).collect(),
            (0..self.n_sets()).map(|s| s / per).collect(),
        )
    }

    pub fn ladder(&self) -> Result<CutpointLadder> {
        CutpointLadder::equally_spaced(self.questions_per_set as usize + 1)
    }

    fn stream(&self, tag: u64, participant: &str) -> ChaCha8Rng {
        seed::rng(seed::derive_path(self.seed, &[tag, seed::hash_str(participant)]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledSet {
    pub round: u32,
    pub position: u32,
    /// Catalog index of the problem set.
    pub set: usize,
    pub topic: usize,
}

/// Order in which participant `index` completes the problem sets.
pub fn randomize_schedule(design: &ExperimentDesign, index: usize) -> Result<Vec<ScheduledSet>> {
    design.validate()?;
    let p = design.participants.get(index).ok_or_else(|| config(format!("no participant #{index}")))?;
    let mut rng = design.stream(STREAM_SCHEDULE, &p.id);
    let k = design.topics.len();
    let per = design.sets_per_topic as usize;
    let mut topic_order: Vec<usize> = (0..k).collect();
    topic_order.shuffle(&mut rng);
    let set_rounds: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let mut v: Vec<usize> = (0..per).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    let mut out = Vec::with_capacity(design.n_sets());
    for r in 0..design.rounds as usize {
        for (pos, &t) in topic_order.iter().enumerate() {
            out.push(ScheduledSet { round: r as u32 + 1, position: pos as u32 + 1, set: t * per + set_rounds[t][r], topic: t });
        }
    }
    Ok(out)
}

/// Generative parameters of actual performance.
#[derive(Debug, Clone, PartialEq)]
pub struct UnderlyingTruth {
    /// Per participant, one entry per ability dimension.
    pub ability: Vec<Vec<f64>>,
    pub difficulty: Vec<f64>,
    pub sigma: f64,
    /// Row-major correlation matrix of the abilities (multidimensional).
    pub correlation: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
}

/// Hyperparameters for drawing an [`UnderlyingTruth`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnderlyingGenerator {
    pub dims: Dimensionality,
    /// Row-major `K × K`; identity when `None`.
    pub correlation: Option<Vec<f64>>,
    /// Per-topic ability scales (multidimensional) or the single scale.
    pub scales: Vec<f64>,
    /// Per-topic ability means, added after scaling.
    pub ability_mean: Vec<f64>,
    pub difficulty_mean: f64,
    pub difficulty_sd: f64,
    pub sigma: f64,
}

impl UnderlyingGenerator {
    pub fn new(dims: Dimensionality, k: usize) -> Self {
        let a = if dims == Dimensionality::Multi { k } else { 1 };
        Self {
            dims,
            correlation: None,
            scales: vec![1.0; a],
            ability_mean: vec![0.0; a],
            difficulty_mean: 0.0,
            difficulty_sd: 0.8,
            sigma: 0.1,
        }
    }

    /// Equicorrelated abilities with off-diagonal `rho`.
    pub fn equicorrelated(mut self, rho: f64) -> Self {
        let k = self.scales.len();
        self.correlation = Some((0..k * k).map(|i| if i / k == i % k { 1.0 } else { rho }).collect());
        self
    }

    pub fn draw(&self, design: &ExperimentDesign) -> Result<UnderlyingTruth> {
        design.validate()?;
        let a = self.scales.len();
        if self.dims == Dimensionality::Multi && a != design.topics.len() {
            return Err(config("one ability scale per topic is required"));
        }
        if self.ability_mean.len() != a {
            return Err(config("one ability mean per ability dimension is required"));
        }
        let identity;
        let r = match &self.correlation {
            Some(r) => r,
            None => {
                identity = CorrelationFactor::identity(a).correlation_matrix();
                &identity
            }
        };
        let l = CorrelationFactor::from_correlation_matrix(a, r)?;
        let mut rng = seed::rng(seed::derive(design.seed, 0x5eed));
        let diff = Normal::new(self.difficulty_mean, self.difficulty_sd).map_err(|_| config("invalid difficulty spread"))?;
        let difficulty = (0..design.n_sets()).map(|_| diff.sample(&mut rng)).collect();
        let ability = design
            .participants
            .iter()
            .map(|_| {
                let z: Vec<f64> = (0..a).map(|_| rng.sample(StandardNormal)).collect();
                (0..a)
                    .map(|i| self.ability_mean[i] + self.scales[i] * (0..=i).map(|j| l.get(i, j) * z[j]).sum::<f64>())
                    .collect()
            })
            .collect();
        Ok(UnderlyingTruth {
            ability,
            difficulty,
            sigma: self.sigma,
            correlation: (self.dims == Dimensionality::Multi).then(|| r.clone()),
            scales: (self.dims == Dimensionality::Multi).then(|| self.scales.clone()),
        })
    }
}

/// Perceived ability, difficulty and noise of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedParams {
    pub ability: Vec<f64>,
    pub difficulty: Vec<f64>,
    pub sigma: f64,
}

/// Other-assessment parameters of one participant.
#[derive(Debug, Clone, PartialEq)]
pub enum OtherParams {
    Undifferentiated,
    DifferentiatedByAbility { delta: Vec<f64> },
    FullyDifferentiated { ability: Vec<f64>, difficulty: Vec<f64> },
}

impl OtherParams {
    pub fn variant(&self) -> OtherVariant {
        match self {
            OtherParams::Undifferentiated => OtherVariant::Undifferentiated,
            OtherParams::DifferentiatedByAbility { .. } => OtherVariant::DifferentiatedByAbility,
            OtherParams::FullyDifferentiated { .. } => OtherVariant::FullyDifferentiated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentParams {
    pub self_params: BTreeMap<String, PerceivedParams>,
    pub other: BTreeMap<String, OtherParams>,
}

/// Hyperparameters for drawing [`AssessmentParams`] around an underlying
/// truth: `a^s ~ N(a, σ_a)`, `d^s ~ N(γ·d + Λ, σ_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentGenerator {
    pub gamma: f64,
    pub lambda: f64,
    pub sigma_a: f64,
    pub sigma_d: f64,
    pub self_sigma: f64,
    /// Mean of δ per ability dimension (differentiated by ability).
    pub delta_mean: Vec<f64>,
    /// Spread of δ across participants.
    pub delta_sd: f64,
    /// Other-agent ability spread and difficulty prior (fully
    /// differentiated).
    pub other_ability_sd: f64,
    pub other_difficulty_mean: f64,
    pub other_difficulty_sd: f64,
}

impl AssessmentGenerator {
    pub fn new(ability_dim: usize) -> Self {
        Self {
            gamma: 1.0,
            lambda: 0.0,
            sigma_a: 0.3,
            sigma_d: 0.3,
            self_sigma: 0.1,
            delta_mean: vec![0.8; ability_dim],
            delta_sd: 0.2,
            other_ability_sd: 1.0,
            other_difficulty_mean: 0.0,
            other_difficulty_sd: 0.8,
        }
    }

    pub fn draw(&self, design: &ExperimentDesign, truth: &UnderlyingTruth, variant: OtherVariant) -> Result<AssessmentParams> {
        let mut rng = seed::rng(seed::derive(design.seed, 0xa55e55));
        let normal = |m: f64, s: f64, rng: &mut ChaCha8Rng| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            m + s * z
        };
        let mut self_params = BTreeMap::new();
        let mut other = BTreeMap::new();
        for (i, p) in design.participants.iter().enumerate() {
            let a = truth.ability.get(i).ok_or_else(|| config("underlying truth lacks a participant"))?;
            let ability: Vec<f64> = a.iter().map(|&x| normal(x, self.sigma_a, &mut rng)).collect();
            let difficulty = truth.difficulty.iter().map(|&d| normal(self.gamma * d + self.lambda, self.sigma_d, &mut rng)).collect();
            self_params.insert(p.id.clone(), PerceivedParams { ability, difficulty, sigma: self.self_sigma });
            let o = match variant {
                OtherVariant::Undifferentiated => OtherParams::Undifferentiated,
                OtherVariant::DifferentiatedByAbility => {
                    if self.delta_mean.len() != a.len() {
                        return Err(config("one δ mean per ability dimension is required"));
                    }
                    OtherParams::DifferentiatedByAbility {
                        delta: self.delta_mean.iter().map(|&m| normal(m, self.delta_sd, &mut rng)).collect(),
                    }
                }
                OtherVariant::FullyDifferentiated => OtherParams::FullyDifferentiated {
                    ability: (0..a.len()).map(|_| normal(0.0, self.other_ability_sd, &mut rng)).collect(),
                    difficulty: (0..design.n_sets())
                        .map(|_| normal(self.other_difficulty_mean, self.other_difficulty_sd, &mut rng))
                        .collect(),
                },
            };
            other.insert(p.id.clone(), o);
        }
        Ok(AssessmentParams { self_params, other })
    }
}

/// Everything used to generate a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub design: ExperimentDesign,
    pub underlying: UnderlyingTruth,
    pub assessments: Option<AssessmentParams>,
}

impl GroundTruth {
    /// Latent propensity and noise behind the score of `kind` for participant
    /// `index` on catalog set `set`.
    pub fn score_inputs(&self, kind: ScoreKind, index: usize, set: usize) -> Result<(f64, f64)> {
        let per = self.design.sets_per_topic as usize;
        let load = |a: &[f64]| if a.len() == 1 { a[0] } else { a[set / per] };
        match kind {
            ScoreKind::True => {
                let a = &self.underlying.ability[index];
                Ok((load(a) - self.underlying.difficulty[set], self.underlying.sigma))
            }
            _ => {
                let params = self.assessments.as_ref().ok_or_else(|| config("no assessment parameters"))?;
                let id = &self.design.participants[index].id;
                let s = params.self_params.get(id).ok_or_else(|| config(format!("no self parameters for {id}")))?;
                if kind == ScoreKind::SelfAssessed {
                    return Ok((load(&s.ability) - s.difficulty[set], s.sigma));
                }
                match params.other.get(id).ok_or_else(|| config(format!("no other parameters for {id}")))? {
                    OtherParams::Undifferentiated => Ok((load(&s.ability) - s.difficulty[set], s.sigma)),
                    OtherParams::DifferentiatedByAbility { delta } => {
                        let shifted: Vec<f64> = s.ability.iter().zip(delta).map(|(a, d)| a + d).collect();
                        Ok((load(&shifted) - s.difficulty[set], s.sigma))
                    }
                    OtherParams::FullyDifferentiated { ability, difficulty } => {
                        Ok((load(ability) - difficulty[set], s.sigma))
                    }
                }
            }
        }
    }
}

/// Draws a score from the ordered-probit distribution at `(θ, σ)`.
pub fn draw_score(theta: f64, sigma: f64, ladder: &CutpointLadder, rng: &mut ChaCha8Rng) -> Result<u32> {
    let pmf = ordered_probit_pmf(SuccessProbability::new(sigmoid(theta))?, ladder, NoiseScale::new(sigma)?);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(x as u32);
        }
    }
    Ok(pmf.iter().rposition(|&p| p > 0.0).unwrap_or(pmf.len() - 1) as u32)
}

fn simulate_kind(truth: &GroundTruth, kind: ScoreKind, tag: u64) -> Result<Vec<ResponseRow>> {
    let design = &truth.design;
    let ladder = design.ladder()?;
    let mut rows = Vec::new();
    for (i, p) in design.participants.iter().enumerate() {
        let mut rng = design.stream(tag, &p.id);
        for s in randomize_schedule(design, i)? {
            let (theta, sigma) = truth.score_inputs(kind, i, s.set)?;
            rows.push(ResponseRow {
                participant: p.id.clone(),
                problem_set: design.set_id(s.topic, s.set % design.sets_per_topic as usize),
                topic: design.topics[s.topic].clone(),
                round: s.round,
                position: Some(s.position),
                kind,
                score: draw_score(theta, sigma, &ladder, &mut rng)?,
                condition: p.condition,
            });
        }
    }
    Ok(rows)
}

/// True scores, in schedule order per participant.
pub fn simulate_true_scores(design: &ExperimentDesign, truth: &UnderlyingTruth) -> Result<Vec<ResponseRow>> {
    if truth.ability.len() != design.participants.len() || truth.difficulty.len() != design.n_sets() {
        return Err(config("underlying truth does not match the design"));
    }
    let gt = GroundTruth { design: design.clone(), underlying: truth.clone(), assessments: None };
    simulate_kind(&gt, ScoreKind::True, STREAM_TRUE)
}

/// Self- and other-assessments. The other-assessment structure follows the
/// variant of each participant's [`OtherParams`].
pub fn simulate_assessments(
    design: &ExperimentDesign,
    underlying: &UnderlyingTruth,
    params: &AssessmentParams,
) -> Result<Vec<ResponseRow>> {
    for p in &design.participants {
        if !params.self_params.contains_key(&p.id) || !params.other.contains_key(&p.id) {
            return Err(config(format!("assessment parameters missing for participant {}", p.id)));
        }
    }
    let gt = GroundTruth { design: design.clone(), underlying: underlying.clone(), assessments: Some(params.clone()) };
    let mut rows = simulate_kind(&gt, ScoreKind::SelfAssessed, STREAM_SELF)?;
    rows.extend(simulate_kind(&gt, ScoreKind::Other, STREAM_OTHER)?);
    Ok(rows)
}

/// Draws all parameters and simulates true, self and other scores.
pub fn simulate_experiment(
    design: &ExperimentDesign,
    underlying: &UnderlyingGenerator,
    assessments: &AssessmentGenerator,
    variant: OtherVariant,
) -> Result<(ResponseTable, GroundTruth)> {
    let truth = underlying.draw(design)?;
    let params = assessments.draw(design, &truth, variant)?;
    let mut rows = simulate_true_scores(design, &truth)?;
    rows.extend(simulate_assessments(design, &truth, &params)?);
    let table = ResponseTable::new(rows, design.questions_per_set)?;
    Ok((table, GroundTruth { design: design.clone(), underlying: truth, assessments: Some(params) }))
}
