//! Declarative description of the model family and the layout of each
//! model's unconstrained parameter vector.
//!
//! Three tiers are fitted in sequence:
//!
//! | tier | data | free parameters | fixed inputs |
//! |------|------|-----------------|--------------|
//! | underlying | true scores, all participants | abilities, difficulties, σ, μ_d, σ_d (+ scales and correlation factor when multidimensional) | none |
//! | self | one participant's self-assessments | a^s, d^s, σ^s, γ, Λ, σ_d, σ_a | underlying a_i, d |
//! | other | one participant's other-assessments | depends on the variant | self a^s, d^s, σ^s |
//!
//! The one-dimensional models are the `A = 1` case of the same code path:
//! every problem set loads on the single ability.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{observations_for, Observation, ResponseTable, ScoreKind, SetCatalog};
use crate::error::{config, domain, Error, Result};
use crate::observation::CutpointLadder;
use crate::transform::{self, free_len, CorrelationFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimensionality {
    One,
    Multi,
}

impl Dimensionality {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimensionality::One => "1",
            Dimensionality::Multi => "multi",
        }
    }
}

impl FromStr for Dimensionality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(Dimensionality::One),
            "multi" | "md" => Ok(Dimensionality::Multi),
            _ => Err(config(format!("unknown dimensionality `{s}` (expected 1 or multi)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OtherVariant {
    /// The other agent is assessed with the participant's own self-model.
    Undifferentiated,
    /// Own difficulties and noise; abilities offset by a learned δ.
    DifferentiatedByAbility,
    /// Independent abilities and difficulties; only the noise is shared.
    FullyDifferentiated,
}

impl OtherVariant {
    pub const ALL: [OtherVariant; 3] = [
        OtherVariant::Undifferentiated,
        OtherVariant::DifferentiatedByAbility,
        OtherVariant::FullyDifferentiated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OtherVariant::Undifferentiated => "undifferentiated",
            OtherVariant::DifferentiatedByAbility => "differentiated_by_ability",
            OtherVariant::FullyDifferentiated => "fully_differentiated",
        }
    }
}

impl fmt::Display for OtherVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OtherVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undifferentiated" | "undiff" => Ok(OtherVariant::Undifferentiated),
            "differentiated_by_ability" | "by_ability" => Ok(OtherVariant::DifferentiatedByAbility),
            "fully_differentiated" | "full" => Ok(OtherVariant::FullyDifferentiated),
            _ => Err(config(format!("unknown other-assessment variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Underlying,
    SelfAssessment,
    Other(OtherVariant),
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::Underlying => "underlying",
            Tier::SelfAssessment => "self",
            Tier::Other(v) => v.as_str(),
        }
    }
}

/// Point values handed from one tier to the next.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedInputs {
    /// Underlying ability of the participant (self tier).
    pub underlying_ability: Option<Vec<f64>>,
    /// Underlying difficulty of every problem set (self tier).
    pub underlying_difficulty: Option<Vec<f64>>,
    /// Self-perceived ability (other tier, except fully differentiated).
    pub self_ability: Option<Vec<f64>>,
    /// Self-perceived difficulty (other tier, except fully differentiated).
    pub self_difficulty: Option<Vec<f64>>,
    /// Self-assessment noise (every other-tier variant).
    pub self_noise: Option<f64>,
}

/// Posterior point values of one tier, keyed by participant id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointEstimates {
    pub ability: BTreeMap<String, Vec<f64>>,
    pub difficulty: BTreeMap<String, Vec<f64>>,
    pub noise: BTreeMap<String, f64>,
}

impl PointEstimates {
    /// Difficulties are shared across participants in the underlying tier;
    /// they are stored under this key.
    pub const SHARED: &'static str = "*";

    pub fn difficulty_for(&self, participant: &str) -> Option<&Vec<f64>> {
        self.difficulty.get(participant).or_else(|| self.difficulty.get(Self::SHARED))
    }

    pub fn noise_for(&self, participant: &str) -> Option<f64> {
        self.noise.get(participant).or_else(|| self.noise.get(Self::SHARED)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Positive,
    /// Cholesky factor of a `dim × dim` correlation matrix.
    CholeskyCorr { dim: usize },
    /// Non-centered: the unconstrained value is `z` and the constrained
    /// value is `loc + scale·z`, with `loc` and `scale` given by other
    /// blocks or fixed inputs (see [`ModelSpec::standardization`]).
    Standardized,
    /// Per ability column, the orthonormal Helmert coordinates of the
    /// participants' values (see [`transform::helmert`]). Row 0 holds
    /// `√n` times each column mean.
    Helmert,
    /// Difficulty relative to the mean ability on its topic:
    /// `d = e + ā_k`, with `ā_k` read from the [`Transform::Helmert`] block.
    MeanShifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub offset: usize,
    /// Unconstrained length.
    pub len: usize,
    pub transform: Transform,
}

impl Block {
    /// Number of constrained values (the correlation factor is stored in
    /// full, `dim × dim`).
    pub fn constrained_len(&self) -> usize {
        match self.transform {
            Transform::CholeskyCorr { dim } => dim * dim,
            _ => self.len,
        }
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Ordered blocks of the unconstrained parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    blocks: Vec<Block>,
    dim: usize,
}

impl ParamLayout {
    fn build(entries: &[(&'static str, usize, Transform)]) -> Self {
        let mut blocks = Vec::with_capacity(entries.len());
        let mut offset = 0;
        for &(name, len, transform) in entries {
            blocks.push(Block { name, offset, len, transform });
            offset += len;
        }
        Self { blocks, dim: offset }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub(crate) fn offset(&self, name: &str) -> usize {
        self.block(name).map(|b| b.offset).unwrap_or(usize::MAX)
    }
}

/// Constrained parameter values by block name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamValues {
    blocks: Vec<(&'static str, Vec<f64>)>,
}

impl ParamValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &'static str, values: Vec<f64>) -> Self {
        self.set(name, values);
        self
    }

    pub fn set(&mut self, name: &'static str, values: Vec<f64>) {
        match self.blocks.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = values,
            None => self.blocks.push((name, values)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_slice())
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|v| v.first().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &[f64])> {
        self.blocks.iter().map(|(n, v)| (*n, v.as_slice()))
    }
}

/// One model structure with its data-independent inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub tier: Tier,
    pub dims: Dimensionality,
    pub catalog: SetCatalog,
    /// Participants covered, in observation-index order. A single entry for
    /// the self and other tiers.
    pub participants: Vec<String>,
    pub fixed: FixedInputs,
    pub ladder: CutpointLadder,
    layout: ParamLayout,
}

impl ModelSpec {
    /// Validates the combination and computes the parameter layout.
    pub fn new(
        tier: Tier,
        dims: Dimensionality,
        catalog: SetCatalog,
        participants: Vec<String>,
        fixed: FixedInputs,
        ladder: CutpointLadder,
    ) -> Result<Self> {
        if catalog.sets().is_empty() || catalog.topics().is_empty() {
            return Err(config("a model needs at least one topic and one problem set"));
        }
        if participants.is_empty() {
            return Err(config("a model needs at least one participant"));
        }
        let mut spec = Self {
            tier,
            dims,
            catalog,
            participants,
            fixed,
            ladder,
            layout: ParamLayout::build(&[]),
        };
        spec.check_fixed_inputs()?;
        spec.layout = spec.compute_layout();
        Ok(spec)
    }

    /// Number of ability dimensions: `K` when multidimensional, else 1.
    pub fn ability_dim(&self) -> usize {
        match self.dims {
            Dimensionality::One => 1,
            Dimensionality::Multi => self.catalog.topics().len(),
        }
    }

    pub fn n_sets(&self) -> usize {
        self.catalog.sets().len()
    }

    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    /// Ability dimension a problem set loads on (the between-items loading).
    #[inline]
    pub fn loading(&self, set: usize) -> usize {
        match self.dims {
            Dimensionality::One => 0,
            Dimensionality::Multi => self.catalog.topic_of_set()[set],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    fn check_fixed_inputs(&self) -> Result<()> {
        if !matches!(self.tier, Tier::Underlying) && self.participants.len() != 1 {
            return Err(config("self and other tiers are fitted one participant at a time"));
        }
        let a = self.ability_dim();
        let j = self.n_sets();
        let need_vec = |v: &Option<Vec<f64>>, len: usize, what: &str| -> Result<()> {
            match v {
                Some(x) if x.len() == len && x.iter().all(|t| t.is_finite()) => Ok(()),
                Some(x) => Err(config(format!("{what} has {} entries, expected {len}", x.len()))),
                None => Err(config(format!("{} tier requires fixed input {what}", self.tier.label()))),
            }
        };
        let f = &self.fixed;
        match self.tier {
            Tier::Underlying => Ok(()),
            Tier::SelfAssessment => {
                need_vec(&f.underlying_ability, a, "underlying ability")?;
                need_vec(&f.underlying_difficulty, j, "underlying difficulty")
            }
            Tier::Other(variant) => {
                match f.self_noise {
                    Some(s) if s > 0.0 && s.is_finite() => {}
                    _ => return Err(config("other tier requires a positive self-assessment noise")),
                }
                if variant != OtherVariant::FullyDifferentiated {
                    need_vec(&f.self_ability, a, "self ability")?;
                    need_vec(&f.self_difficulty, j, "self difficulty")?;
                }
                Ok(())
            }
        }
    }

    fn compute_layout(&self) -> ParamLayout {
        use Transform::*;
        let a = self.ability_dim();
        let j = self.n_sets();
        let n = self.n_participants();
        match (self.tier, self.dims) {
            (Tier::Underlying, dims) => {
                // Abilities and difficulties can shift together on a topic
                // without changing the likelihood; these coordinates move
                // that direction into one prior-only coordinate per topic.
                let mut e = vec![
                    ("ability", n * a, Helmert),
                    ("difficulty", j, MeanShifted),
                    ("sigma", 1, Positive),
                    ("mu_d", 1, Identity),
                    ("sigma_d", 1, Positive),
                ];
                if dims == Dimensionality::Multi {
                    e.push(("ability_scale", a, Positive));
                    e.push(("ability_corr", free_len(a), CholeskyCorr { dim: a }));
                }
                ParamLayout::build(&e)
            }
            (Tier::SelfAssessment, _) => ParamLayout::build(&[
                ("ability", a, Standardized),
                ("difficulty", j, Standardized),
                ("sigma", 1, Positive),
                ("gamma", 1, Identity),
                ("lambda", 1, Identity),
                ("sigma_d", 1, Positive),
                ("sigma_a", 1, Positive),
            ]),
            (Tier::Other(OtherVariant::Undifferentiated), _) => ParamLayout::build(&[]),
            (Tier::Other(OtherVariant::DifferentiatedByAbility), Dimensionality::Multi) => {
                ParamLayout::build(&[("delta", a, Identity)])
            }
            (Tier::Other(OtherVariant::DifferentiatedByAbility), Dimensionality::One) => ParamLayout::build(&[
                ("delta", 1, Standardized),
                ("mu_delta", 1, Identity),
                ("sigma_delta", 1, Positive),
            ]),
            (Tier::Other(OtherVariant::FullyDifferentiated), _) => ParamLayout::build(&[
                ("ability", a, Identity),
                ("difficulty", j, Standardized),
                ("mu_d", 1, Identity),
                ("sigma_d", 1, Positive),
            ]),
        }
    }

    /// Unconstrained → constrained values by block.
    pub fn constrain(&self, q: &[f64]) -> Result<ParamValues> {
        self.check_len(q)?;
        let mut out = ParamValues::new();
        for b in self.layout.blocks() {
            let raw = &q[b.range()];
            let values = match b.transform {
                Transform::Identity | Transform::Standardized | Transform::MeanShifted => raw.to_vec(),
                Transform::Helmert => {
                    let mut x = vec![0.0; raw.len()];
                    self.helmert_inverse(raw, &mut x);
                    x
                }
                Transform::Positive => raw.iter().map(|&u| transform::constrain_positive(u)).collect(),
                Transform::CholeskyCorr { dim } => {
                    let mut l = vec![0.0; dim * dim];
                    transform::constrain_cholesky_corr(raw, dim, &mut l);
                    l
                }
            };
            out.set(b.name, values);
        }
        for b in self.layout.blocks().iter().filter(|b| b.transform == Transform::Standardized) {
            let (loc, scale) = self.standardization(b.name, &out)?;
            let x = q[b.range()].iter().zip(&loc).map(|(z, m)| m + scale * z).collect();
            out.set(b.name, x);
        }
        for b in self.layout.blocks().iter().filter(|b| b.transform == Transform::MeanShifted) {
            let y = &q[self.layout.offset("ability")..];
            let x = q[b.range()].iter().enumerate().map(|(j, e)| e + self.topic_mean(y, j)).collect();
            out.set(b.name, x);
        }
        Ok(out)
    }

    /// Location and scale of a [`Transform::Standardized`] block given the
    /// other (constrained) blocks.
    pub fn standardization(&self, name: &str, values: &ParamValues) -> Result<(Vec<f64>, f64)> {
        let scalar = |n: &str| values.scalar(n).ok_or_else(|| domain(format!("missing parameter block `{n}`")));
        let f = &self.fixed;
        match (self.tier, name) {
            (Tier::SelfAssessment, "ability") => {
                Ok((f.underlying_ability.clone().unwrap_or_default(), scalar("sigma_a")?))
            }
            (Tier::SelfAssessment, "difficulty") => {
                let (gamma, lambda) = (scalar("gamma")?, scalar("lambda")?);
                let base = f.underlying_difficulty.as_deref().unwrap_or_default();
                Ok((base.iter().map(|d| gamma * d + lambda).collect(), scalar("sigma_d")?))
            }
            (Tier::Other(OtherVariant::FullyDifferentiated), "difficulty") => {
                Ok((vec![scalar("mu_d")?; self.n_sets()], scalar("sigma_d")?))
            }
            (Tier::Other(OtherVariant::DifferentiatedByAbility), "delta") => {
                Ok((vec![scalar("mu_delta")?], scalar("sigma_delta")?))
            }
            _ => Err(config(format!("block `{name}` is not standardized"))),
        }
    }

    /// Constrained → unconstrained; every block must be present.
    pub fn unconstrain(&self, values: &ParamValues) -> Result<Vec<f64>> {
        let mut q = vec![0.0; self.dim()];
        for b in self.layout.blocks() {
            let v = values.get(b.name).ok_or_else(|| domain(format!("missing parameter block `{}`", b.name)))?;
            if v.len() != b.constrained_len() {
                return Err(domain(format!(
                    "block `{}` has {} values, expected {}",
                    b.name,
                    v.len(),
                    b.constrained_len()
                )));
            }
            match b.transform {
                Transform::Identity | Transform::Standardized | Transform::MeanShifted | Transform::Helmert => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(domain(format!("block `{}` has non-finite values", b.name)));
                    }
                    if b.transform == Transform::Helmert {
                        self.helmert_forward(v, &mut q[b.range()]);
                    } else {
                        q[b.range()].copy_from_slice(v)
                    }
                }
                Transform::Positive => {
                    for (slot, &x) in q[b.range()].iter_mut().zip(v) {
                        *slot = transform::unconstrain_positive(x)?;
                    }
                }
                Transform::CholeskyCorr { dim } => {
                    let f = CorrelationFactor::from_lower(dim, v.to_vec())?;
                    q[b.range()].copy_from_slice(&f.unconstrain());
                }
            }
        }
        for b in self.layout.blocks().iter().filter(|b| b.transform == Transform::Standardized) {
            let (loc, scale) = self.standardization(b.name, values)?;
            for (slot, m) in q[b.range()].iter_mut().zip(&loc) {
                *slot = (*slot - m) / scale;
            }
        }
        for b in self.layout.blocks().iter().filter(|b| b.transform == Transform::MeanShifted) {
            let shifts: Vec<f64> = (0..b.len).map(|j| self.topic_mean(&q[self.layout.offset("ability")..], j)).collect();
            for (slot, m) in q[b.range()].iter_mut().zip(&shifts) {
                *slot -= m;
            }
        }
        Ok(q)
    }

    /// Column names of the flattened constrained parameters, in the order of
    /// [`ModelSpec::flatten_constrained`].
    pub fn constrained_names(&self) -> Vec<String> {
        let a = self.ability_dim();
        let mut names = Vec::new();
        for b in self.layout.blocks() {
            match (b.name, b.transform) {
                ("ability", _) if matches!(self.tier, Tier::Underlying) => {
                    for p in 0..self.n_participants() {
                        for k in 0..a {
                            names.push(format!("ability[{},{}]", p + 1, k + 1));
                        }
                    }
                }
                (_, Transform::CholeskyCorr { dim }) => {
                    for i in 0..dim {
                        for j in 0..dim {
                            names.push(format!("{}[{},{}]", b.name, i + 1, j + 1));
                        }
                    }
                }
                (name, _) if b.len == 1 && !matches!(name, "ability" | "delta" | "difficulty") => {
                    names.push(String::from(name))
                }
                (name, _) => {
                    for i in 0..b.len {
                        names.push(format!("{name}[{}]", i + 1));
                    }
                }
            }
        }
        names
    }

    pub fn flatten_constrained(&self, q: &[f64]) -> Result<Vec<f64>> {
        let values = self.constrain(q)?;
        Ok(values.iter().flat_map(|(_, v)| v.iter().copied()).collect())
    }

    /// Names of the unconstrained coordinates.
    pub fn unconstrained_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for b in self.layout.blocks() {
            let prefix = match b.transform {
                Transform::Identity => "",
                Transform::Positive => "log_",
                Transform::CholeskyCorr { .. } => "atanh_cpc_",
                Transform::Standardized => "z_",
                Transform::Helmert => "helmert_",
                Transform::MeanShifted => "rel_",
            };
            for i in 0..b.len {
                names.push(format!("{prefix}{}[{}]", b.name, i + 1));
            }
        }
        names
    }

    /// Participant-major abilities → Helmert coordinates, column by column.
    /// Also pulls an ability gradient back onto those coordinates.
    pub(crate) fn helmert_forward(&self, x: &[f64], y: &mut [f64]) {
        self.by_column(x, y, transform::helmert);
    }

    pub(crate) fn helmert_inverse(&self, y: &[f64], x: &mut [f64]) {
        self.by_column(y, x, transform::helmert_inverse);
    }

    fn by_column(&self, src: &[f64], dst: &mut [f64], f: fn(&[f64], &mut [f64])) {
        let (a, n) = (self.ability_dim(), self.n_participants());
        let (mut col, mut out) = (vec![0.0; n], vec![0.0; n]);
        for k in 0..a {
            (0..n).for_each(|p| col[p] = src[p * a + k]);
            f(&col, &mut out);
            (0..n).for_each(|p| dst[p * a + k] = out[p]);
        }
    }

    /// Mean ability on the topic `set` loads on, from Helmert coordinates.
    pub(crate) fn topic_mean(&self, helmert: &[f64], set: usize) -> f64 {
        helmert[self.loading(set)] / libm::sqrt(self.n_participants() as f64)
    }

    pub(crate) fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(config(format!(
                "parameter vector has {} entries, model `{}` expects {}",
                q.len(),
                self.tier.label(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Score kind each tier models by default.
pub fn default_kind(tier: Tier) -> ScoreKind {
    match tier {
        Tier::Underlying => ScoreKind::True,
        Tier::SelfAssessment => ScoreKind::SelfAssessed,
        Tier::Other(_) => ScoreKind::Other,
    }
}

fn ladder_for(table: &ResponseTable) -> Result<CutpointLadder> {
    CutpointLadder::equally_spaced(table.max_score() as usize + 1)
}

/// Underlying model over every participant in `data` for rows of `kind`
/// (true scores in the staged hierarchy; the same structure is also fitted
/// directly to other-assessments when comparing dimensionality).
pub fn build_underlying(
    dims: Dimensionality,
    data: &ResponseTable,
    kind: ScoreKind,
    catalog: &SetCatalog,
) -> Result<(ModelSpec, Vec<Observation>)> {
    let subset = data.of_kind(kind);
    if subset.is_empty() {
        return Err(config(format!("no `{kind}` rows to fit")));
    }
    let participants = subset.participants();
    let obs = observations_for(&subset, kind, &participants, catalog)?;
    let spec = ModelSpec::new(
        Tier::Underlying,
        dims,
        catalog.clone(),
        participants,
        FixedInputs::default(),
        ladder_for(data)?,
    )?;
    Ok((spec, obs))
}

/// Self-assessment model for one participant with the underlying tier's
/// point values as fixed inputs.
pub fn build_self(
    dims: Dimensionality,
    underlying: &PointEstimates,
    data: &ResponseTable,
    participant: &str,
    catalog: &SetCatalog,
) -> Result<(ModelSpec, Vec<Observation>)> {
    let ability = underlying
        .ability
        .get(participant)
        .ok_or_else(|| config(format!("participant {participant} missing from the underlying estimates")))?;
    let difficulty = underlying
        .difficulty_for(participant)
        .ok_or_else(|| config("underlying difficulties missing"))?;
    let participants = vec![String::from(participant)];
    let fixed = FixedInputs {
        underlying_ability: Some(ability.clone()),
        underlying_difficulty: Some(difficulty.clone()),
        ..FixedInputs::default()
    };
    let spec = ModelSpec::new(Tier::SelfAssessment, dims, catalog.clone(), participants, fixed, ladder_for(data)?)?;
    let obs = observations_for(data, ScoreKind::SelfAssessed, &spec.participants, catalog)?;
    Ok((spec, obs))
}

/// Other-assessment model of one participant under `variant`, with the
/// self tier's point values as fixed inputs.
pub fn build_other(
    variant: OtherVariant,
    dims: Dimensionality,
    self_estimates: &PointEstimates,
    data: &ResponseTable,
    participant: &str,
    catalog: &SetCatalog,
) -> Result<(ModelSpec, Vec<Observation>)> {
    let missing = || config(format!("participant {participant} missing from the self-assessment estimates"));
    let noise = self_estimates.noise_for(participant).ok_or_else(missing)?;
    let mut fixed = FixedInputs { self_noise: Some(noise), ..FixedInputs::default() };
    if variant != OtherVariant::FullyDifferentiated {
        fixed.self_ability = Some(self_estimates.ability.get(participant).ok_or_else(missing)?.clone());
        fixed.self_difficulty = Some(self_estimates.difficulty_for(participant).ok_or_else(missing)?.clone());
    }
    let participants = vec![String::from(participant)];
    let spec = ModelSpec::new(Tier::Other(variant), dims, catalog.clone(), participants, fixed, ladder_for(data)?)?;
    let obs = observations_for(data, ScoreKind::Other, &spec.participants, catalog)?;
    Ok((spec, obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) fn catalog(k: usize, per_topic: usize) -> SetCatalog {
        let topics: Vec<String> = (0..k).map(|t| format!("topic{t}")).collect();
        let sets: Vec<String> = (0..k * per_topic).map(|s| (s + 1).to_string()).collect();
        let topic_of = (0..k * per_topic).map(|s| s / per_topic).collect();
        SetCatalog::new(topics, sets, topic_of).unwrap()
    }

    fn people(n: usize) -> Vec<String> {
        (1..=n).map(|i| i.to_string()).collect()
    }

    fn ladder() -> CutpointLadder {
        CutpointLadder::equally_spaced(13).unwrap()
    }

    #[test]
    fn underlying_parameter_counts() {
        let n = 7;
        let md = ModelSpec::new(Tier::Underlying, Dimensionality::Multi, catalog(4, 4), people(n), FixedInputs::default(), ladder()).unwrap();
        assert_eq!(md.dim(), n * 4 + 16 + 1 + 2 + 4 + 6);
        let one = ModelSpec::new(Tier::Underlying, Dimensionality::One, catalog(4, 4), people(n), FixedInputs::default(), ladder()).unwrap();
        assert_eq!(one.dim(), n + 16 + 3);
        assert!(one.layout().block("ability_corr").is_none());
        // Between-items loading: a set of topic 2 loads only on dimension 2.
        assert_eq!(md.loading(9), 2);
        assert_eq!(one.loading(9), 0);
    }

    #[test]
    fn self_and_other_parameter_counts() {
        let fixed = FixedInputs {
            underlying_ability: Some(vec![0.0; 4]),
            underlying_difficulty: Some(vec![0.0; 16]),
            self_ability: Some(vec![0.0; 4]),
            self_difficulty: Some(vec![0.0; 16]),
            self_noise: Some(0.1),
        };
        let mk = |tier| ModelSpec::new(tier, Dimensionality::Multi, catalog(4, 4), people(1), fixed.clone(), ladder()).unwrap();
        assert_eq!(mk(Tier::SelfAssessment).dim(), 4 + 16 + 5);
        assert_eq!(mk(Tier::Other(OtherVariant::Undifferentiated)).dim(), 0);
        assert_eq!(mk(Tier::Other(OtherVariant::DifferentiatedByAbility)).dim(), 4);
        assert_eq!(mk(Tier::Other(OtherVariant::FullyDifferentiated)).dim(), 4 + 16 + 2);
    }

    #[test]
    fn missing_fixed_inputs_are_configuration_errors() {
        let r = ModelSpec::new(
            Tier::Other(OtherVariant::DifferentiatedByAbility),
            Dimensionality::Multi,
            catalog(4, 4),
            people(1),
            FixedInputs { self_noise: Some(0.1), ..Default::default() },
            ladder(),
        );
        assert!(matches!(r, Err(Error::Config(_))));
        let fully = ModelSpec::new(
            Tier::Other(OtherVariant::FullyDifferentiated),
            Dimensionality::Multi,
            catalog(4, 4),
            people(1),
            FixedInputs { self_noise: Some(0.1), ..Default::default() },
            ladder(),
        );
        assert!(fully.is_ok());
        let two = ModelSpec::new(Tier::SelfAssessment, Dimensionality::One, catalog(4, 4), people(2), FixedInputs::default(), ladder());
        assert!(two.is_err());
    }

    #[test]
    fn constrain_round_trip() {
        let spec = ModelSpec::new(Tier::Underlying, Dimensionality::Multi, catalog(3, 2), people(2), FixedInputs::default(), ladder()).unwrap();
        let q: Vec<f64> = (0..spec.dim()).map(|i| libm::sin(i as f64 * 1.7) * 1.5).collect();
        let values = spec.constrain(&q).unwrap();
        let back = spec.unconstrain(&values).unwrap();
        let again = spec.constrain(&back).unwrap();
        for ((_, a), (_, b)) in values.iter().zip(again.iter()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(spec.constrained_names().len(), spec.flatten_constrained(&q).unwrap().len());
        assert_eq!(spec.unconstrained_names().len(), spec.dim());
        // σ = 1 ↦ 0.
        let sigma = spec.layout().block("sigma").unwrap().offset;
        let mut v = values.clone();
        v.set("sigma", vec![1.0]);
        assert_eq!(spec.unconstrain(&v).unwrap()[sigma], 0.0);
        assert!(spec.constrain(&q[1..]).is_err());
    }

    #[test]
    fn standardized_blocks_round_trip() {
        let fixed = FixedInputs {
            underlying_ability: Some(vec![0.2, -0.4, 0.9]),
            underlying_difficulty: Some((0..6).map(|j| 0.3 * j as f64 - 0.8).collect()),
            self_ability: Some(vec![0.5, 0.1, -0.3]),
            self_difficulty: Some((0..6).map(|j| 0.1 - 0.2 * j as f64).collect()),
            self_noise: Some(0.2),
        };
        let mut tiers = vec![Tier::SelfAssessment];
        tiers.extend(OtherVariant::ALL.map(Tier::Other));
        for dims in [Dimensionality::One, Dimensionality::Multi] {
            let mut f = fixed.clone();
            if dims == Dimensionality::One {
                f.underlying_ability = Some(vec![0.2]);
                f.self_ability = Some(vec![0.5]);
            }
            for &tier in &tiers {
                let spec = ModelSpec::new(tier, dims, catalog(3, 2), people(1), f.clone(), ladder()).unwrap();
                let q: Vec<f64> = (0..spec.dim()).map(|i| libm::cos(i as f64 * 0.9) * 1.2).collect();
                let back = spec.unconstrain(&spec.constrain(&q).unwrap()).unwrap();
                for (x, y) in q.iter().zip(&back) {
                    assert!((x - y).abs() < 1e-10, "{} {}", tier.label(), dims.as_str());
                }
            }
        }
    }
}
