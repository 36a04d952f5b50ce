//! Tidy CSV data behind each figure. One row per plotted point, so any
//! plotting tool can render them directly.

use std::io::Write;

use crate::error::{Error, Result};
use crate::pipeline::CorrelationRecord;
use crate::summary::EmpiricalSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Histogram of other − self per condition.
    Fig4,
    /// Raw and smoothed mean scores over the 16 sets, per condition.
    Fig5,
    /// Posterior-mean ability correlations, per group.
    Fig6,
    /// Mean scores per topic and round.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlotInputs<'a> {
    pub summary: Option<&'a EmpiricalSummary>,
    pub correlations: &'a [CorrelationRecord],
}

fn summary<'a>(inputs: &PlotInputs<'a>, figure: Figure) -> Result<&'a EmpiricalSummary> {
    inputs
        .summary
        .ok_or_else(|| Error::MissingInput(format!("{} needs an empirical summary of the response table", figure.as_str())))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the CSV for `figure`. Fails with [`Error::MissingInput`] before
/// writing anything when the inputs lack what the figure needs.
pub fn emit_plot_data(inputs: &PlotInputs, figure: Figure, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match figure {
        Figure::Fig4 => {
            let s = summary(inputs, figure)?;
            w.write_record(["counterpart", "tier", "feedback", "difference", "count"])?;
            for c in &s.conditions {
                for (d, n) in &c.histogram {
                    w.write_record([c.counterpart, c.tier, yes_no(c.feedback), &d.to_string(), &n.to_string()])?;
                }
            }
        }
        Figure::Fig5 => {
            let s = summary(inputs, figure)?;
            w.write_record(["counterpart", "tier", "feedback", "kind", "index", "raw", "smoothed"])?;
            for c in &s.curves {
                for (i, (r, m)) in c.raw.iter().zip(&c.smoothed).enumerate() {
                    w.write_record([
                        c.counterpart,
                        c.tier,
                        yes_no(c.feedback),
                        c.kind,
                        &(i + 1).to_string(),
                        &opt(*r),
                        &opt(*m),
                    ])?;
                }
            }
        }
        Figure::Fig6 => {
            if inputs.correlations.is_empty() {
                return Err(Error::MissingInput("fig6 needs a multidimensional fit".into()));
            }
            w.write_record(["group", "row_topic", "col_topic", "value"])?;
            for c in inputs.correlations {
                let k = c.topics.len();
                for i in 0..k {
                    for j in 0..k {
                        w.write_record([&c.group, &c.topics[i], &c.topics[j], &c.mean[i * k + j].to_string()])?;
                    }
                }
            }
        }
        Figure::Fig7 => {
            let s = summary(inputs, figure)?;
            w.write_record(["counterpart", "kind", "round", "topic", "n", "mean"])?;
            for t in &s.topic_rounds {
                w.write_record([t.counterpart, t.kind, &t.round.to_string(), &t.topic, &t.n.to_string(), &t.mean.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
