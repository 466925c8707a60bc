use super::{ClipMetrics, FrameMetrics, MetricsError};
use crate::annotations::TierSet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Metric means for one tier set, as percentages. `None` when no frame (or
/// clip) contributed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TierSummary {
    pub energy: Option<f64>,
    pub pointing: Option<f64>,
    pub s_iou: Option<f64>,
    pub t_iou: Option<f64>,
    pub frames: usize,
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub clips: usize,
    pub accuracy: Option<f64>,
    /// Keyed by tier label; `P < P+S < P+S+C` in map order.
    pub tiers: BTreeMap<String, TierSummary>,
}

/// Per-tier summary of one method over a dataset.
///
/// `macro` averages per-class means with equal class weight; `micro` pools
/// all frames (Energy, Pointing, S-IoU) or clips (T-IoU, accuracy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub method: String,
    pub tier_sets: Vec<String>,
    pub per_class: BTreeMap<String, ClassSummary>,
    #[serde(rename = "macro")]
    pub macro_avg: BTreeMap<String, TierSummary>,
    #[serde(rename = "micro")]
    pub micro_avg: BTreeMap<String, TierSummary>,
    /// Clip-level top-1 accuracy, percent.
    pub accuracy: Option<f64>,
    pub clips: usize,
}

impl GroundingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Default, Clone, Copy)]
struct Sums {
    energy: f64,
    pointing: f64,
    s_iou: f64,
    t_iou: f64,
    frames: usize,
    clips: usize,
}

impl Sums {
    fn summary(&self) -> TierSummary {
        let frame_mean = |s: f64| (self.frames > 0).then(|| 100.0 * s / self.frames as f64);
        TierSummary {
            energy: frame_mean(self.energy),
            pointing: frame_mean(self.pointing),
            s_iou: frame_mean(self.s_iou),
            t_iou: (self.clips > 0).then(|| 100.0 * self.t_iou / self.clips as f64),
            frames: self.frames,
            clips: self.clips,
        }
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Folds frame and clip metrics into a report. Inputs are sorted by
/// `(clip_id, t)` first so the result does not depend on arrival order.
pub fn aggregate(
    method: &str,
    frame_metrics: &[FrameMetrics],
    clip_metrics: &[ClipMetrics],
    classes: &[String],
    tier_sets: &[TierSet],
) -> Result<GroundingReport, MetricsError> {
    if clip_metrics.is_empty() || tier_sets.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut frames: Vec<&FrameMetrics> = frame_metrics.iter().filter(|f| f.valid).collect();
    frames.sort_by(|a, b| (&a.clip_id, a.t, a.tiers).cmp(&(&b.clip_id, b.t, b.tiers)));
    let mut clips: Vec<&ClipMetrics> = clip_metrics.iter().collect();
    clips.sort_by(|a, b| (&a.clip_id, a.tiers).cmp(&(&b.clip_id, b.tiers)));

    let class_slot = |class: &str| {
        classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| MetricsError::UnknownClass {
                clip_id: String::new(),
                class: class.into(),
            })
    };

    // sums[class][tier]
    let mut per_class = vec![vec![Sums::default(); tier_sets.len()]; classes.len()];
    let mut micro = vec![Sums::default(); tier_sets.len()];
    for f in frames {
        let Some(k) = tier_sets.iter().position(|&s| s == f.tiers) else {
            continue;
        };
        let c = class_slot(&f.class)?;
        for s in [&mut per_class[c][k], &mut micro[k]] {
            s.energy += f.energy;
            s.pointing += f64::from(f.pointing);
            s.s_iou += f.s_iou;
            s.frames += 1;
        }
    }

    // Accuracy is per clip; take it from the first tier set's entries.
    let mut class_clips = vec![(0usize, 0usize); classes.len()];
    let (mut total_clips, mut total_correct) = (0usize, 0usize);
    for cm in &clips {
        let Some(k) = tier_sets.iter().position(|&s| s == cm.tiers) else {
            continue;
        };
        let c = class_slot(&cm.class)?;
        for s in [&mut per_class[c][k], &mut micro[k]] {
            s.t_iou += cm.t_iou;
            s.clips += 1;
        }
        if k == 0 {
            class_clips[c].0 += 1;
            class_clips[c].1 += usize::from(cm.correct);
            total_clips += 1;
            total_correct += usize::from(cm.correct);
        }
    }
    if total_clips == 0 {
        return Err(MetricsError::EmptyInput);
    }

    let labels: Vec<String> = tier_sets.iter().map(|s| s.label()).collect();
    let mut per_class_out = BTreeMap::new();
    let mut class_summaries: Vec<Vec<TierSummary>> = Vec::new();
    for (c, class) in classes.iter().enumerate() {
        let (n, correct) = class_clips[c];
        if n == 0 {
            continue;
        }
        let summaries: Vec<TierSummary> = per_class[c].iter().map(Sums::summary).collect();
        per_class_out.insert(
            class.clone(),
            ClassSummary {
                clips: n,
                accuracy: Some(100.0 * correct as f64 / n as f64),
                tiers: labels.iter().cloned().zip(summaries.iter().cloned()).collect(),
            },
        );
        class_summaries.push(summaries);
    }

    let mut macro_avg = BTreeMap::new();
    let mut micro_avg = BTreeMap::new();
    for (k, label) in labels.iter().enumerate() {
        let column = || class_summaries.iter().map(move |s| &s[k]);
        macro_avg.insert(
            label.clone(),
            TierSummary {
                energy: mean(column().map(|s| s.energy)),
                pointing: mean(column().map(|s| s.pointing)),
                s_iou: mean(column().map(|s| s.s_iou)),
                t_iou: mean(column().map(|s| s.t_iou)),
                frames: micro[k].frames,
                clips: micro[k].clips,
            },
        );
        micro_avg.insert(label.clone(), micro[k].summary());
    }

    Ok(GroundingReport {
        method: method.to_owned(),
        tier_sets: labels,
        per_class: per_class_out,
        macro_avg,
        micro_avg,
        accuracy: Some(100.0 * total_correct as f64 / total_clips as f64),
        clips: total_clips,
    })
}
