//! Descriptive statistics of raw assessments: other-minus-self differences
//! per condition with one-tailed t-tests, smoothed per-set curves and
//! per-round topic means.

use std::collections::BTreeMap;

use ommirt_core::data::{AccuracyTier, Counterpart};
use ommirt_core::{Condition, ResponseTable, ScoreKind};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Default significance level of every test.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub statistic: f64,
    pub df: f64,
    /// One-tailed p-value.
    pub p_value: f64,
    pub reject: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

fn upper_tail(t: f64, df: f64, alpha: f64) -> TTest {
    let p_value = if t.is_nan() {
        1.0
    } else if t == f64::INFINITY {
        0.0
    } else if t == f64::NEG_INFINITY {
        1.0
    } else {
        StudentsT::new(0.0, 1.0, df).map(|d| 1.0 - d.cdf(t)).unwrap_or(f64::NAN)
    };
    TTest { statistic: t, df, p_value, reject: p_value < alpha }
}

/// Zero spread: ±∞ for a nonzero mean, NaN (never rejected) for a zero one.
fn degenerate(diff: f64) -> f64 {
    if diff == 0.0 {
        f64::NAN
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// One-sample test of `mean(xs) > 0`. `None` below two observations.
pub fn one_sample_greater(xs: &[f64], alpha: f64) -> Option<TTest> {
    if xs.len() < 2 {
        return None;
    }
    let (m, v) = mean_var(xs);
    let n = xs.len() as f64;
    let t = if v > 0.0 { m / (v / n).sqrt() } else { degenerate(m) };
    Some(upper_tail(t, n - 1.0, alpha))
}

/// Welch two-sample test of `mean(a) > mean(b)`.
pub fn welch_greater(a: &[f64], b: &[f64], alpha: f64) -> Option<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let ((ma, va), (mb, vb)) = (mean_var(a), mean_var(b));
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Some(upper_tail(degenerate(ma - mb), (a.len() + b.len() - 2) as f64, alpha));
    }
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Some(upper_tail((ma - mb) / se2.sqrt(), df, alpha))
}

/// Centered moving average; windows are truncated at the ends.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub counterpart: &'static str,
    pub tier: &'static str,
    pub feedback: bool,
    pub n: usize,
    pub mean_difference: f64,
    pub sd: f64,
    /// Count per integer difference (other − self).
    pub histogram: BTreeMap<i32, usize>,
    /// `mean > 0`.
    pub test: Option<TTest>,
}

/// AI-minus-human comparison of differences within one slice of the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterpartComparison {
    /// `all`, or an accuracy tier.
    pub slice: String,
    pub ai_mean: f64,
    pub human_mean: f64,
    /// `mean(ai) > mean(human)`.
    pub test: Option<TTest>,
}

/// Mean score per chronological problem-set index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub counterpart: &'static str,
    pub tier: &'static str,
    pub feedback: bool,
    pub kind: &'static str,
    /// Index `i` holds sequence position `i + 1`; `None` where no data.
    pub raw: Vec<Option<f64>>,
    /// Window-3 moving average over the positions with data.
    pub smoothed: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicRoundMean {
    pub counterpart: &'static str,
    pub kind: &'static str,
    pub round: u32,
    pub topic: String,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub alpha: f64,
    pub conditions: Vec<ConditionSummary>,
    pub comparisons: Vec<CounterpartComparison>,
    pub curves: Vec<Curve>,
    pub topic_rounds: Vec<TopicRoundMean>,
    /// Omitted cells and other caveats.
    pub notices: Vec<String>,
}

fn all_conditions() -> Vec<Condition> {
    let mut out = Vec::new();
    for counterpart in [Counterpart::Human, Counterpart::Ai] {
        for tier in [AccuracyTier::High, AccuracyTier::Low] {
            for feedback in [true, false] {
                out.push(Condition { counterpart, tier, feedback });
            }
        }
    }
    out
}

fn condition_name(c: &Condition) -> String {
    format!("{}/{}/{}", c.counterpart.as_str(), c.tier.as_str(), if c.feedback { "feedback" } else { "no-feedback" })
}

pub fn empirical_summary(table: &ResponseTable, alpha: f64) -> EmpiricalSummary {
    let mut notices = Vec::new();
    let mut selfs: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in table.rows().iter().filter(|r| r.kind == ScoreKind::SelfAssessed) {
        selfs.insert((&r.participant, &r.problem_set), r.score as f64);
    }
    let mut diffs: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for r in table.rows().iter().filter(|r| r.kind == ScoreKind::Other) {
        if let Some(s) = selfs.get(&(r.participant.as_str(), r.problem_set.as_str())) {
            diffs.entry(r.condition).or_default().push(r.score as f64 - s);
        }
    }

    let mut conditions = Vec::new();
    for c in all_conditions() {
        let Some(d) = diffs.get(&c).filter(|d| !d.is_empty()) else {
            notices.push(format!("no paired self/other scores for {}; omitted", condition_name(&c)));
            continue;
        };
        let (m, v) = mean_var(d);
        let mut histogram = BTreeMap::new();
        for x in d {
            *histogram.entry(*x as i32).or_insert(0) += 1;
        }
        conditions.push(ConditionSummary {
            counterpart: c.counterpart.as_str(),
            tier: c.tier.as_str(),
            feedback: c.feedback,
            n: d.len(),
            mean_difference: m,
            sd: v.sqrt(),
            histogram,
            test: one_sample_greater(d, alpha),
        });
    }

    let pooled = |cp: Counterpart, tier: Option<AccuracyTier>| -> Vec<f64> {
        diffs
            .iter()
            .filter(|(c, _)| c.counterpart == cp && tier.map_or(true, |t| c.tier == t))
            .flat_map(|(_, d)| d.iter().copied())
            .collect()
    };
    let mut comparisons = Vec::new();
    for (slice, tier) in [("all", None), ("high", Some(AccuracyTier::High)), ("low", Some(AccuracyTier::Low))] {
        let (ai, human) = (pooled(Counterpart::Ai, tier), pooled(Counterpart::Human, tier));
        if ai.is_empty() || human.is_empty() {
            notices.push(format!("AI/human comparison `{slice}` lacks one group; omitted"));
            continue;
        }
        comparisons.push(CounterpartComparison {
            slice: slice.into(),
            ai_mean: mean_var(&ai).0,
            human_mean: mean_var(&human).0,
            test: welch_greater(&ai, &human, alpha),
        });
    }

    let per_round = table.rows().iter().map(|r| r.topic.as_str()).collect::<std::collections::BTreeSet<_>>().len() as u32;
    let mut sequences: BTreeMap<(Condition, ScoreKind), BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    let mut unpositioned = 0usize;
    for r in table.rows() {
        match r.sequence_index(per_round) {
            Some(i) => sequences.entry((r.condition, r.kind)).or_default().entry(i).or_default().push(r.score as f64),
            None => unpositioned += 1,
        }
    }
    if unpositioned > 0 {
        notices.push(format!("{unpositioned} rows lack a within-round position and are left out of the curves"));
    }
    let curves = sequences
        .into_iter()
        .map(|((c, kind), by_index)| {
            let len = by_index.keys().max().copied().unwrap_or(0) as usize;
            let mut raw = vec![None; len];
            for (i, xs) in &by_index {
                raw[*i as usize - 1] = Some(xs.iter().sum::<f64>() / xs.len() as f64);
            }
            let present: Vec<f64> = raw.iter().flatten().copied().collect();
            let mut smooth = moving_average(&present, 3).into_iter();
            let smoothed = raw.iter().map(|x| x.and_then(|_| smooth.next())).collect();
            Curve {
                counterpart: c.counterpart.as_str(),
                tier: c.tier.as_str(),
                feedback: c.feedback,
                kind: kind.as_str(),
                raw,
                smoothed,
            }
        })
        .collect();

    let mut cells: BTreeMap<(Counterpart, ScoreKind, u32, &str), (f64, usize)> = BTreeMap::new();
    for r in table.rows() {
        let e = cells.entry((r.condition.counterpart, r.kind, r.round, r.topic.as_str())).or_insert((0.0, 0));
        e.0 += r.score as f64;
        e.1 += 1;
    }
    let topic_rounds = cells
        .into_iter()
        .map(|((cp, kind, round, topic), (s, n))| TopicRoundMean {
            counterpart: cp.as_str(),
            kind: kind.as_str(),
            round,
            topic: topic.into(),
            n,
            mean: s / n as f64,
        })
        .collect();

    EmpiricalSummary { alpha, conditions, comparisons, curves, topic_rounds, notices }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_smoothing_by_hand() {
        let ramp: Vec<f64> = (1..=16).map(f64::from).collect();
        let s = moving_average(&ramp, 3);
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], 1.5);
        assert_eq!(s[15], 15.5);
        for i in 1..15 {
            assert_eq!(s[i], ramp[i]);
        }
        assert_eq!(moving_average(&[4.0, 1.0, 7.0], 3), vec![2.5, 4.0, 4.0]);
    }

    #[test]
    fn one_sample_decisions() {
        let shifted = [3.0; 10];
        assert!(one_sample_greater(&shifted, ALPHA).unwrap().reject);
        let zero = [0.0; 10];
        assert!(!one_sample_greater(&zero, ALPHA).unwrap().reject);
        assert!(one_sample_greater(&[1.0], ALPHA).is_none());
        // mean 0.5, sample variance 5/3: t = 0.5 / √(5/12).
        let t = one_sample_greater(&[0.0, 1.0, 2.0, -1.0], ALPHA).unwrap();
        assert!((t.statistic - 0.7745966692414834).abs() < 1e-12);
    }

    #[test]
    fn welch_matches_closed_form() {
        // a: mean 2.2, b: mean 0; both with unit sample sd, n = 50.
        let base: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (49.0f64 / 50.0).sqrt()).collect();
        let a: Vec<f64> = base.iter().map(|x| x + 2.2).collect();
        let t = welch_greater(&a, &base, ALPHA).unwrap();
        assert!((t.statistic - 11.0).abs() < 1e-9, "{}", t.statistic);
        assert!((t.df - 98.0).abs() < 1e-9);
        assert!(t.p_value < 0.01 && t.reject);
    }
}
