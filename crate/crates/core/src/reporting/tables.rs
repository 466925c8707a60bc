use crate::metrics::{GroundingReport, TierSummary};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    #[default]
    Macro,
    Micro,
}

impl Average {
    pub fn as_str(self) -> &'static str {
        match self {
            Average::Macro => "macro",
            Average::Micro => "micro",
        }
    }
}

impl std::str::FromStr for Average {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Average::Macro),
            "micro" => Ok(Average::Micro),
            other => Err(format!("unknown average {other:?} (expected macro or micro)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("no reports")]
    Empty,
    #[error("report {method:?} has tier sets {found:?}, expected {expected:?}")]
    TierSetMismatch {
        method: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub text: String,
    /// Full-precision values; `null` where a metric had no contributions.
    pub json: Value,
}

const METRICS: [(&str, &str); 4] = [("Energy", "energy"), ("Pointing", "pointing"), ("S-IoU", "s_iou"), ("T-IoU", "t_iou")];
const CELL: usize = 8;
const LABEL: usize = 12;

fn metric(s: &TierSummary, key: &str) -> Option<f64> {
    match key {
        "energy" => s.energy,
        "pointing" => s.pointing,
        "s_iou" => s.s_iou,
        _ => s.t_iou,
    }
}

/// Two decimals, ties to even on the exact binary value.
pub fn format_2dp(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    }
}

fn averages(report: &GroundingReport, average: Average) -> &BTreeMap<String, TierSummary> {
    match average {
        Average::Macro => &report.macro_avg,
        Average::Micro => &report.micro_avg,
    }
}

/// Grid of metrics × tier sets with one column group per report, then the
/// T-IoU comparison with the same grouping.
pub fn render_tables(reports: &[GroundingReport], average: Average) -> Result<Tables, TableError> {
    let first = reports.first().ok_or(TableError::Empty)?;
    let tiers = &first.tier_sets;
    for r in reports {
        if r.tier_sets != *tiers {
            return Err(TableError::TierSetMismatch {
                method: r.method.clone(),
                expected: tiers.clone(),
                found: r.tier_sets.clone(),
            });
        }
    }
    let group_width = CELL * tiers.len();
    let mut text = String::new();

    let header = |text: &mut String, first_label: &str| {
        let mut line = format!("{:<LABEL$}", "");
        for r in reports {
            write!(line, "| {:<group_width$}", r.method).unwrap();
        }
        writeln!(text, "{}", line.trim_end()).unwrap();
        let mut line = format!("{first_label:<LABEL$}");
        for _ in reports {
            line.push_str("| ");
            for t in tiers {
                write!(line, "{t:<CELL$}").unwrap();
            }
        }
        writeln!(text, "{}", line.trim_end()).unwrap();
    };
    let row = |text: &mut String, label: &str, key: &str| {
        let mut line = format!("{label:<LABEL$}");
        for r in reports {
            line.push_str("| ");
            let avg = averages(r, average);
            for t in tiers {
                write!(line, "{:<CELL$}", format_2dp(avg.get(t).and_then(|s| metric(s, key)))).unwrap();
            }
        }
        writeln!(text, "{}", line.trim_end()).unwrap();
    };

    writeln!(text, "Grounding metrics ({} average)", average.as_str()).unwrap();
    header(&mut text, "Metric (%)");
    for (label, key) in METRICS {
        row(&mut text, label, key);
    }
    let mut line = format!("{:<LABEL$}", "Acc. (%)");
    for r in reports {
        write!(line, "| {:<group_width$}", format_2dp(r.accuracy)).unwrap();
    }
    writeln!(text, "{}", line.trim_end()).unwrap();
    writeln!(text).unwrap();
    writeln!(text, "T-IoU by method ({} average)", average.as_str()).unwrap();
    header(&mut text, "");
    row(&mut text, "T-IoU", "t_iou");

    let grounding: Vec<Value> = reports
        .iter()
        .map(|r| {
            let avg = averages(r, average);
            let mut metrics = Map::new();
            for (_, key) in METRICS {
                let cells: Map<String, Value> = tiers
                    .iter()
                    .map(|t| (t.clone(), json!(avg.get(t).and_then(|s| metric(s, key)))))
                    .collect();
                metrics.insert(key.into(), Value::Object(cells));
            }
            json!({ "method": r.method, "metrics": metrics, "accuracy": r.accuracy })
        })
        .collect();
    let t_iou: Map<String, Value> = reports
        .iter()
        .map(|r| {
            let avg = averages(r, average);
            let cells: Map<String, Value> =
                tiers.iter().map(|t| (t.clone(), json!(avg.get(t).and_then(|s| s.t_iou)))).collect();
            (r.method.clone(), Value::Object(cells))
        })
        .collect();
    let json = json!({
        "average": average.as_str(),
        "tier_sets": tiers,
        "grounding": grounding,
        "t_iou": t_iou,
    });
    Ok(Tables { text, json })
}
