//! Long-format response table and its indexed views.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::error::{config, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScoreKind {
    /// Actual number of questions answered correctly.
    True,
    /// The participant's estimate of their own score.
    SelfAssessed,
    /// The participant's estimate of the counterpart's score.
    Other,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::True, ScoreKind::SelfAssessed, ScoreKind::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::True => "true",
            ScoreKind::SelfAssessed => "self",
            ScoreKind::Other => "other",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(ScoreKind::True),
            "self" => Ok(ScoreKind::SelfAssessed),
            "other" => Ok(ScoreKind::Other),
            _ => Err(domain(format!("unknown score kind `{s}` (expected true, self or other)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counterpart {
    Human,
    Ai,
}

impl Counterpart {
    pub fn as_str(self) -> &'static str {
        match self {
            Counterpart::Human => "human",
            Counterpart::Ai => "ai",
        }
    }
}

impl FromStr for Counterpart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Counterpart::Human),
            "ai" => Ok(Counterpart::Ai),
            _ => Err(domain(format!("unknown counterpart kind `{s}` (expected human or ai)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccuracyTier {
    High,
    Low,
}

impl AccuracyTier {
    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyTier::High => "high",
            AccuracyTier::Low => "low",
        }
    }
}

impl FromStr for AccuracyTier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(AccuracyTier::High),
            "low" => Ok(AccuracyTier::Low),
            _ => Err(domain(format!("unknown accuracy tier `{s}` (expected high or low)"))),
        }
    }
}

/// Experimental condition of a participant. Feedback is a label only; none of
/// the generative models conditions on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub counterpart: Counterpart,
    pub tier: AccuracyTier,
    pub feedback: bool,
}

impl Default for Condition {
    fn default() -> Self {
        Self { counterpart: Counterpart::Human, tier: AccuracyTier::High, feedback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub participant: String,
    pub problem_set: String,
    pub topic: String,
    /// 1-based round.
    pub round: u32,
    /// 1-based position within the round, when known.
    pub position: Option<u32>,
    pub kind: ScoreKind,
    pub score: u32,
    pub condition: Condition,
}

impl ResponseRow {
    /// Chronological index within the participant's sequence, 1-based, when
    /// the within-round position is known.
    pub fn sequence_index(&self, sets_per_round: u32) -> Option<u32> {
        self.position.map(|p| (self.round - 1) * sets_per_round + p)
    }
}

/// Validated long-format table of scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    rows: Vec<ResponseRow>,
    max_score: u32,
}

impl ResponseTable {
    /// Validates scores against `0..=max_score`, rounds against `1..`, topic
    /// consistency of each problem set and uniqueness of
    /// (participant, problem set, kind).
    pub fn new(rows: Vec<ResponseRow>, max_score: u32) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut topic_of: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            if r.score > max_score {
                return Err(domain(format!(
                    "row {}: score {} outside 0..={max_score}",
                    i + 1,
                    r.score
                )));
            }
            if r.round == 0 {
                return Err(domain(format!("row {}: rounds are numbered from 1", i + 1)));
            }
            if r.position == Some(0) {
                return Err(domain(format!("row {}: positions are numbered from 1", i + 1)));
            }
            if !seen.insert((r.participant.as_str(), r.problem_set.as_str(), r.kind)) {
                return Err(domain(format!(
                    "row {}: duplicate ({}, {}, {}) observation",
                    i + 1,
                    r.participant,
                    r.problem_set,
                    r.kind
                )));
            }
            match topic_of.get(r.problem_set.as_str()) {
                Some(t) if *t != r.topic => {
                    return Err(domain(format!(
                        "row {}: problem set {} listed under topics {} and {}",
                        i + 1,
                        r.problem_set,
                        t,
                        r.topic
                    )))
                }
                Some(_) => {}
                None => {
                    topic_of.insert(&r.problem_set, &r.topic);
                }
            }
        }
        Ok(Self { rows, max_score })
    }

    pub fn rows(&self) -> &[ResponseRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_score(&self) -> u32 {
        self.max_score
    }

    pub fn into_rows(self) -> Vec<ResponseRow> {
        self.rows
    }

    /// Rows satisfying `keep`, same score range.
    pub fn filter(&self, keep: impl Fn(&ResponseRow) -> bool) -> ResponseTable {
        ResponseTable { rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(), max_score: self.max_score }
    }

    pub fn of_kind(&self, kind: ScoreKind) -> ResponseTable {
        self.filter(|r| r.kind == kind)
    }

    pub fn has_kind(&self, kind: ScoreKind) -> bool {
        self.rows.iter().any(|r| r.kind == kind)
    }

    /// Participant ids in natural order.
    pub fn participants(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.participant.as_str()).collect();
        let mut v: Vec<String> = set.into_iter().map(|s| s.to_string()).collect();
        v.sort_by(|a, b| natural_cmp(a, b));
        v
    }

    pub fn condition_of(&self, participant: &str) -> Option<Condition> {
        self.rows.iter().find(|r| r.participant == participant).map(|r| r.condition)
    }

    pub fn rounds(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.rows.iter().map(|r| r.round).collect();
        set.into_iter().collect()
    }

    /// Concatenation; fails on duplicate observations or differing ranges.
    pub fn merged(&self, other: &ResponseTable) -> Result<ResponseTable> {
        if self.max_score != other.max_score {
            return Err(config("cannot merge tables with different score ranges"));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        ResponseTable::new(rows, self.max_score)
    }
}

/// Compares strings by embedded integers where both are integers, otherwise
/// lexicographically ("2" < "10").
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Problem sets and topics of an experiment, with stable indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SetCatalog {
    topics: Vec<String>,
    sets: Vec<String>,
    topic_of_set: Vec<usize>,
}

impl SetCatalog {
    /// Builds the catalog from a table. Topics keep the order given in
    /// `topic_order` (unknown topics are appended in natural order); sets are
    /// grouped by topic.
    pub fn from_table(table: &ResponseTable, topic_order: &[String]) -> Result<Self> {
        let mut by_set: BTreeMap<&str, &str> = BTreeMap::new();
        for r in table.rows() {
            by_set.insert(&r.problem_set, &r.topic);
        }
        let mut topics: Vec<String> = topic_order.to_vec();
        let mut extra: Vec<String> = by_set
            .values()
            .filter(|t| !topics.iter().any(|x| x == **t))
            .map(|t| t.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        extra.sort_by(|a, b| natural_cmp(a, b));
        topics.extend(extra);
        // Drop requested topics that never occur.
        topics.retain(|t| by_set.values().any(|x| *x == t));
        let mut sets: Vec<(usize, String)> = by_set
            .iter()
            .map(|(s, t)| (topics.iter().position(|x| x == *t).unwrap(), s.to_string()))
            .collect();
        sets.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| natural_cmp(&a.1, &b.1)));
        Self::new(
            topics,
            sets.iter().map(|(_, s)| s.clone()).collect(),
            sets.iter().map(|(t, _)| *t).collect(),
        )
    }

    pub fn new(topics: Vec<String>, sets: Vec<String>, topic_of_set: Vec<usize>) -> Result<Self> {
        if sets.len() != topic_of_set.len() {
            return Err(config("each problem set needs exactly one topic"));
        }
        if let Some(&t) = topic_of_set.iter().find(|&&t| t >= topics.len()) {
            return Err(config(format!("topic index {t} out of range")));
        }
        Ok(Self { topics, sets, topic_of_set })
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn sets(&self) -> &[String] {
        &self.sets
    }

    pub fn topic_of_set(&self) -> &[usize] {
        &self.topic_of_set
    }

    pub fn set_index(&self, id: &str) -> Option<usize> {
        self.sets.iter().position(|s| s == id)
    }

    pub fn topic_index(&self, name: &str) -> Option<usize> {
        self.topics.iter().position(|s| s == name)
    }
}

/// One scored observation, indexed against a model's participant list and
/// set catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub participant: usize,
    pub set: usize,
    pub score: usize,
    pub round: u32,
}

/// Converts rows of one kind into indexed observations for the given
/// participants (in that order). Rows of other participants are skipped.
pub fn observations_for(
    table: &ResponseTable,
    kind: ScoreKind,
    participants: &[String],
    catalog: &SetCatalog,
) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for r in table.rows().iter().filter(|r| r.kind == kind) {
        let Some(p) = participants.iter().position(|x| *x == r.participant) else {
            continue;
        };
        let set = catalog
            .set_index(&r.problem_set)
            .ok_or_else(|| config(format!("problem set {} missing from the catalog", r.problem_set)))?;
        if catalog.topics()[catalog.topic_of_set()[set]] != r.topic {
            return Err(config(format!("problem set {} has inconsistent topic {}", r.problem_set, r.topic)));
        }
        out.push(Observation { participant: p, set, score: r.score as usize, round: r.round });
    }
    Ok(out)
}
