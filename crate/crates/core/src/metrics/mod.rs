//! Grounding metrics: Energy, Pointing, S-IoU, T-IoU and top-1 accuracy.
//!
//! Frame-level metrics are only computed on frames holding at least one box
//! of the active tier set. A frame whose relevance sums to zero carries no
//! evidence and scores 0 on all three frame-level metrics. All thresholds are
//! inclusive (`≥ 0.5 · max`).

mod aggregate;

use crate::annotations::{rasterize, ClipAnnotation, Mask, TierSet};
use crate::relevance::RelevanceVolume;
use std::collections::BTreeSet;

pub use aggregate::{aggregate, ClassSummary, GroundingReport, TierSummary};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: relevance has {relevance} pixels, mask {height}x{width}")]
    ShapeMismatch {
        relevance: usize,
        height: usize,
        width: usize,
    },
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("clip {clip_id}: {logits} logits for a vocabulary of {classes}")]
    VocabularyMismatch {
        clip_id: String,
        logits: usize,
        classes: usize,
    },
    #[error("clip {clip_id}: class {class:?} not in vocabulary")]
    UnknownClass { clip_id: String, class: String },
    #[error("clip_id mismatch: volume {volume:?}, annotation {annotation:?}")]
    ClipMismatch { volume: String, annotation: String },
    #[error("volume has {volume} frames, annotation needs {needed}")]
    FrameCount { volume: usize, needed: usize },
    #[error("nothing to aggregate")]
    EmptyInput,
}

fn check(frame: &[f64], mask: &Mask) -> Result<(), MetricsError> {
    if frame.len() != mask.height * mask.width {
        return Err(MetricsError::ShapeMismatch {
            relevance: frame.len(),
            height: mask.height,
            width: mask.width,
        });
    }
    if mask.count() == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(())
}

/// Fraction of attribution mass inside the mask; 0 for an all-zero map.
pub fn energy(frame: &[f64], mask: &Mask) -> Result<f64, MetricsError> {
    check(frame, mask)?;
    let mut total = 0.0;
    let mut inside = 0.0;
    for (&e, &b) in frame.iter().zip(&mask.data) {
        total += e;
        if b {
            inside += e;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { inside / total })
}

/// First maximum in row-major order, or `None` if the map is empty.
pub fn argmax(frame: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in frame.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// 1 if the highest pixel lies in the mask; ties go to the first pixel in
/// row-major order. A map whose mass is zero scores 0.
pub fn pointing(frame: &[f64], mask: &Mask) -> Result<u8, MetricsError> {
    check(frame, mask)?;
    if frame.iter().sum::<f64>() == 0.0 {
        return Ok(0);
    }
    let idx = argmax(frame).expect("non-empty frame");
    Ok(u8::from(mask.data[idx]))
}

/// IoU between `{v ≥ 0.5 · max}` and the mask; an all-zero map gives 0.
pub fn s_iou(frame: &[f64], mask: &Mask) -> Result<f64, MetricsError> {
    check(frame, mask)?;
    let max = frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Ok(0.0);
    }
    let threshold = 0.5 * max;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&v, &b) in frame.iter().zip(&mask.data) {
        let salient = v >= threshold;
        inter += usize::from(salient && b);
        union += usize::from(salient || b);
    }
    Ok(inter as f64 / union as f64)
}

/// Mean pixel value of every frame.
pub fn frame_means(volume: &RelevanceVolume) -> Vec<f64> {
    let n = (volume.pixel_h * volume.pixel_w) as f64;
    (0..volume.frames)
        .map(|t| volume.frame(t).iter().sum::<f64>() / n)
        .collect()
}

/// Frames whose mean reaches half the largest frame mean; empty when every
/// frame mean is zero.
pub fn predicted_frames(volume: &RelevanceVolume) -> BTreeSet<usize> {
    let means = frame_means(volume);
    let max = means.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return BTreeSet::new();
    }
    let threshold = 0.5 * max;
    (0..means.len()).filter(|&t| means[t] >= threshold).collect()
}

pub fn set_iou(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

pub fn t_iou(volume: &RelevanceVolume, annotation: &ClipAnnotation, tiers: TierSet) -> f64 {
    set_iou(&annotation.frames_with(tiers), &predicted_frames(volume))
}

/// Index of the largest logit, lowest index on ties.
pub fn predicted_class(logits: &[f64]) -> Option<usize> {
    argmax(logits)
}

/// Fraction of clips whose top logit names the annotated class.
pub fn accuracy(
    predictions: &[(&str, &[f64], &str)],
    vocabulary: &[String],
) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut correct = 0usize;
    for &(clip_id, logits, class) in predictions {
        if logits.len() != vocabulary.len() {
            return Err(MetricsError::VocabularyMismatch {
                clip_id: clip_id.into(),
                logits: logits.len(),
                classes: vocabulary.len(),
            });
        }
        let truth = vocabulary
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| MetricsError::UnknownClass {
                clip_id: clip_id.into(),
                class: class.into(),
            })?;
        correct += usize::from(predicted_class(logits) == Some(truth));
    }
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub clip_id: String,
    pub class: String,
    pub t: usize,
    pub tiers: TierSet,
    pub energy: f64,
    pub pointing: u8,
    pub s_iou: f64,
    /// The frame holds a box of `tiers`; otherwise the metrics are unset (0).
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipMetrics {
    pub clip_id: String,
    pub class: String,
    pub tiers: TierSet,
    pub t_iou: f64,
    pub t_gt: BTreeSet<usize>,
    pub t_pred: BTreeSet<usize>,
    pub predicted_class: Option<usize>,
    pub true_class: usize,
    pub correct: bool,
}

/// All frame and clip metrics of one clip for each tier set.
pub fn evaluate_clip(
    volume: &RelevanceVolume,
    annotation: &ClipAnnotation,
    true_class: usize,
    logits: Option<&[f64]>,
    tier_sets: &[TierSet],
) -> Result<(Vec<FrameMetrics>, Vec<ClipMetrics>), MetricsError> {
    if volume.clip_id != annotation.clip_id {
        return Err(MetricsError::ClipMismatch {
            volume: volume.clip_id.clone(),
            annotation: annotation.clip_id.clone(),
        });
    }
    if let Some(&last) = annotation.frames.keys().next_back() {
        if last >= volume.frames {
            return Err(MetricsError::FrameCount {
                volume: volume.frames,
                needed: last + 1,
            });
        }
    }
    let predicted = logits.and_then(predicted_class);
    let t_pred = predicted_frames(volume);
    let mut frames = Vec::new();
    let mut clips = Vec::new();
    for &tiers in tier_sets {
        for t in 0..volume.frames {
            let mask = rasterize(annotation.boxes(t), tiers, volume.pixel_h, volume.pixel_w);
            let mut fm = FrameMetrics {
                clip_id: annotation.clip_id.clone(),
                class: annotation.event_class.clone(),
                t,
                tiers,
                energy: 0.0,
                pointing: 0,
                s_iou: 0.0,
                valid: false,
            };
            // A box can be too thin to cover any pixel center; such frames are
            // skipped like frames without cues.
            if mask.count() > 0 {
                let frame = volume.frame(t);
                fm.energy = energy(frame, &mask)?;
                fm.pointing = pointing(frame, &mask)?;
                fm.s_iou = s_iou(frame, &mask)?;
                fm.valid = true;
            }
            frames.push(fm);
        }
        let t_gt = annotation.frames_with(tiers);
        clips.push(ClipMetrics {
            clip_id: annotation.clip_id.clone(),
            class: annotation.event_class.clone(),
            tiers,
            t_iou: set_iou(&t_gt, &t_pred),
            t_gt,
            t_pred: t_pred.clone(),
            predicted_class: predicted,
            true_class,
            correct: predicted == Some(true_class),
        });
    }
    Ok((frames, clips))
}
