//! File formats.
//!
//! Response tables are long-format delimiter-separated text (comma, or tab
//! when the header contains a tab) with the header
//!
//! ```text
//! participant_id,problem_set_id,topic,round,position,score_kind,score,counterpart_kind,accuracy_tier,feedback
//! ```
//!
//! `position` (1-based slot within the round) is optional; every other
//! column is required and may appear in any order. `score_kind` is one of
//! `true|self|other`, `counterpart_kind` `human|ai`, `accuracy_tier`
//! `high|low`, `feedback` `yes|no`.
//!
//! Posterior draws are written as `<stem>.csv` with the header
//! `chain,draw,lp__,<unconstrained parameter names>` plus a `<stem>.json`
//! sidecar holding the parameter layout and per-chain sampler state. Values
//! use the shortest decimal form that parses back to the same bits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ommirt_core::data::{AccuracyTier, Counterpart};
use ommirt_core::sampler::{ChainDraws, ChainStats, PosteriorDraws, SamplerConfig};
use ommirt_core::spec::Transform;
use ommirt_core::{Condition, ModelSpec, ResponseRow, ResponseTable, ScoreKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 10] = [
    "participant_id",
    "problem_set_id",
    "topic",
    "round",
    "position",
    "score_kind",
    "score",
    "counterpart_kind",
    "accuracy_tier",
    "feedback",
];

const OPTIONAL: &str = "position";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Highest admissible score `V` (scores lie in `0..=V`).
    pub max_score: u32,
    /// Highest admissible round, when bounded.
    pub max_round: Option<u32>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { max_score: 12, max_round: None }
    }
}

pub fn ingest(path: &Path, opts: &IngestOptions) -> Result<ResponseTable> {
    let file = File::open(path).map_err(Error::io(path))?;
    ingest_reader(file, opts)
}

pub fn ingest_reader(mut reader: impl Read, opts: &IngestOptions) -> Result<ResponseTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(Error::io("<input>"))?;
    let header_line = text.lines().next().unwrap_or_default();
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let index = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [usize::MAX; COLUMNS.len()];
    for (slot, name) in cols.iter_mut().zip(COLUMNS) {
        match index(name) {
            Some(i) => *slot = i,
            None if name == OPTIONAL => {}
            None => return Err(Error::MissingColumn(name.into())),
        }
    }

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, column: "*".into(), message: e.to_string() })?;
        let field = |c: usize| -> Result<&str> {
            let name = COLUMNS[c];
            record.get(cols[c]).ok_or_else(|| Error::Parse { row, column: name.into(), message: "missing field".into() })
        };
        let parse_err = |c: usize, message: String| Error::Parse { row, column: COLUMNS[c].into(), message };
        let number = |c: usize| -> Result<u32> {
            let raw = field(c)?;
            raw.parse::<u32>().map_err(|_| parse_err(c, format!("`{raw}` is not a non-negative integer")))
        };
        let round = number(3)?;
        if round == 0 || opts.max_round.is_some_and(|m| round > m) {
            let bound = opts.max_round.map_or(String::from("1.."), |m| format!("1..={m}"));
            return Err(Error::Validation(ommirt_core::Error::Domain(format!("row {row}: round {round} outside {bound}"))));
        }
        let position = if cols[4] == usize::MAX || field(4)?.is_empty() { None } else { Some(number(4)?) };
        let kind: ScoreKind = field(5)?.parse().map_err(|e: ommirt_core::Error| parse_err(5, e.to_string()))?;
        let score = number(6)?;
        let counterpart: Counterpart = field(7)?.parse().map_err(|e: ommirt_core::Error| parse_err(7, e.to_string()))?;
        let tier: AccuracyTier = field(8)?.parse().map_err(|e: ommirt_core::Error| parse_err(8, e.to_string()))?;
        let feedback = match field(9)?.to_ascii_lowercase().as_str() {
            "yes" | "true" | "1" => true,
            "no" | "false" | "0" => false,
            other => return Err(parse_err(9, format!("`{other}` is not yes or no"))),
        };
        let text = |c: usize| -> Result<String> {
            let v = field(c)?;
            if v.is_empty() {
                return Err(parse_err(c, "empty value".into()));
            }
            Ok(v.to_string())
        };
        rows.push(ResponseRow {
            participant: text(0)?,
            problem_set: text(1)?,
            topic: text(2)?,
            round,
            position,
            kind,
            score,
            condition: Condition { counterpart, tier, feedback },
        });
    }
    Ok(ResponseTable::new(rows, opts.max_score)?)
}

pub fn emit(table: &ResponseTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    emit_writer(table, BufWriter::new(file))
}

/// Writes every column, leaving `position` empty where unknown.
pub fn emit_writer(table: &ResponseTable, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in table.rows() {
        let c = r.condition;
        w.write_record([
            r.participant.as_str(),
            r.problem_set.as_str(),
            r.topic.as_str(),
            &r.round.to_string(),
            &r.position.map(|p| p.to_string()).unwrap_or_default(),
            r.kind.as_str(),
            &r.score.to_string(),
            c.counterpart.as_str(),
            c.tier.as_str(),
            if c.feedback { "yes" } else { "no" },
        ])?;
    }
    w.flush().map_err(Error::io("<output>"))?;
    Ok(())
}

/// Serializable copy of [`SamplerConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerEcho {
    pub warmup: usize,
    pub samples: usize,
    pub chains: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    pub init_radius: f64,
    pub max_init_attempts: usize,
    pub max_energy_error: f64,
}

impl From<&SamplerConfig> for SamplerEcho {
    fn from(c: &SamplerConfig) -> Self {
        Self {
            warmup: c.warmup,
            samples: c.samples,
            chains: c.chains,
            target_accept: c.target_accept,
            max_tree_depth: c.max_tree_depth,
            seed: c.seed,
            init_radius: c.init_radius,
            max_init_attempts: c.max_init_attempts,
            max_energy_error: c.max_energy_error,
        }
    }
}

impl From<SamplerEcho> for SamplerConfig {
    fn from(e: SamplerEcho) -> Self {
        SamplerConfig {
            warmup: e.warmup,
            samples: e.samples,
            chains: e.chains,
            target_accept: e.target_accept,
            max_tree_depth: e.max_tree_depth,
            seed: e.seed,
            init_radius: e.init_radius,
            max_init_attempts: e.max_init_attempts,
            max_energy_error: e.max_energy_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub transform: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub divergences: usize,
    pub mean_accept: f64,
    pub mean_tree_depth: f64,
    pub max_depth_hits: usize,
    pub total_leapfrogs: u64,
}

impl From<&ChainStats> for ChainMeta {
    fn from(s: &ChainStats) -> Self {
        Self {
            step_size: s.step_size,
            inv_metric: s.inv_metric.clone(),
            divergences: s.divergences,
            mean_accept: s.mean_accept,
            mean_tree_depth: s.mean_tree_depth,
            max_depth_hits: s.max_depth_hits,
            total_leapfrogs: s.total_leapfrogs,
        }
    }
}

impl From<&ChainMeta> for ChainStats {
    fn from(m: &ChainMeta) -> Self {
        ChainStats {
            step_size: m.step_size,
            inv_metric: m.inv_metric.clone(),
            divergences: m.divergences,
            mean_accept: m.mean_accept,
            mean_tree_depth: m.mean_tree_depth,
            max_depth_hits: m.max_depth_hits,
            total_leapfrogs: m.total_leapfrogs,
        }
    }
}

/// Sidecar of a draw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub label: String,
    pub tier: String,
    pub dims: String,
    pub participants: Vec<String>,
    pub chains: usize,
    pub samples: usize,
    pub parameters: Vec<String>,
    pub constrained: Vec<String>,
    pub blocks: Vec<BlockMeta>,
    pub sampler: Option<SamplerEcho>,
    pub chain_stats: Vec<ChainMeta>,
}

fn transform_name(t: Transform) -> String {
    match t {
        Transform::Identity => "identity".into(),
        Transform::Positive => "log".into(),
        Transform::CholeskyCorr { dim } => format!("cholesky_corr({dim})"),
        Transform::Standardized => "standardized".into(),
        Transform::Helmert => "helmert".into(),
        Transform::MeanShifted => "topic_mean_shifted".into(),
    }
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`; returns the CSV path.
pub fn write_draws(
    dir: &Path,
    stem: &str,
    label: &str,
    spec: &ModelSpec,
    draws: &PosteriorDraws,
    cfg: Option<&SamplerConfig>,
) -> Result<PathBuf> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = File::create(&csv_path).map_err(Error::io(&csv_path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let names = spec.unconstrained_names();
    let mut header = vec![String::from("chain"), String::from("draw"), String::from("lp__")];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for c in 0..draws.chains() {
        for i in 0..draws.samples_per_chain() {
            let s = c * draws.samples_per_chain() + i;
            record.clear();
            record.push((c + 1).to_string());
            record.push((i + 1).to_string());
            record.push(draws.log_density()[s].to_string());
            record.extend(draws.draw(s).iter().map(|x| x.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(Error::io(&csv_path))?;

    let meta = DrawsMeta {
        label: label.into(),
        tier: spec.tier.label().into(),
        dims: spec.dims.as_str().into(),
        participants: spec.participants.clone(),
        chains: draws.chains(),
        samples: draws.samples_per_chain(),
        parameters: names,
        constrained: spec.constrained_names(),
        blocks: spec
            .layout()
            .blocks()
            .iter()
            .map(|b| BlockMeta { name: b.name.into(), offset: b.offset, len: b.len, transform: transform_name(b.transform) })
            .collect(),
        sampler: cfg.map(SamplerEcho::from),
        chain_stats: draws.chain_stats().iter().map(ChainMeta::from).collect(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    write_json(&json_path, &meta)?;
    Ok(csv_path)
}

/// Reads a draw file and its sidecar. Pointwise log-likelihoods are not
/// persisted, so the result has no observations.
pub fn read_draws(csv_path: &Path) -> Result<(DrawsMeta, PosteriorDraws)> {
    let json_path = csv_path.with_extension("json");
    let meta: DrawsMeta = read_json(&json_path)?;
    let dim = meta.parameters.len();
    let mut chains: Vec<ChainDraws> = meta
        .chain_stats
        .iter()
        .map(|s| ChainDraws { draws: Vec::new(), pointwise: Vec::new(), stats: ChainStats::from(s), log_density: Vec::new() })
        .collect();
    let mut rdr = csv::Reader::from_path(csv_path)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let value = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or_default();
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: if c < 3 { ["chain", "draw", "lp__"][c].into() } else { meta.parameters[c - 3].clone() },
                message: format!("`{raw}` is not a number"),
            })
        };
        if record.len() != dim + 3 {
            return Err(Error::Parse { row, column: "*".into(), message: format!("expected {} fields", dim + 3) });
        }
        let chain = value(0)? as usize;
        let target = chains.get_mut(chain.wrapping_sub(1)).ok_or_else(|| Error::Parse {
            row,
            column: "chain".into(),
            message: format!("chain {chain} not in the sidecar"),
        })?;
        target.log_density.push(value(2)?);
        for c in 3..dim + 3 {
            target.draws.push(value(c)?);
        }
    }
    let draws = PosteriorDraws::from_chains(dim, 0, chains)?;
    Ok((meta, draws))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(Error::io(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
