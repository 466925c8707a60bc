//! Gradient-weighted relevance propagation over attention traces.
//!
//! Two methods are provided. [`Method::Chefer`] propagates relevance through
//! the spatial blocks of each frame independently, extracts a per-patch map
//! (CLS row or pooling probe) and MinMax-normalizes it. [`Method::CheferT`]
//! additionally propagates relevance through time at every patch position,
//! folds in the classifier head's temporal attention, and scales each frame
//! by its normalized temporal importance.
//!
//! All arithmetic is `f64`, whatever the trace's storage precision.

mod combine;
mod propagate;
pub mod upsample;
mod volume_io;

use crate::trace_io::{validate_trace, AttentionTrace, ValidationReport};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use combine::{combine, min_max, CombinedFrames};
pub use propagate::{
    extract_frame_map, positive_contribution, propagate_spatial, propagate_temporal, temporal_weights,
    SpatialRelevance, TemporalRelevance,
};
pub use volume_io::{
    read_relevance_manifest, read_volume, write_relevance_manifest, write_volume, RelevanceManifest,
    VolumeEntry, VolumeFailure, RELEVANCE_MANIFEST_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "chefer")]
    Chefer,
    #[serde(rename = "chefer_t")]
    CheferT,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Chefer => "chefer",
            Method::CheferT => "chefer_t",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chefer" => Ok(Method::Chefer),
            "chefer_t" | "chefer-t" => Ok(Method::CheferT),
            other => Err(format!("unknown method {other:?} (expected chefer or chefer_t)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RelevanceError {
    #[error("invalid trace: {0}")]
    InvalidTrace(ValidationReport),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("frame {frame} out of range for T = {frames}")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("pooling extraction requested but the trace has no pooling record")]
    MissingPooling,
}

/// Per-frame attribution maps for one clip and one target class.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceVolume {
    pub clip_id: String,
    pub target_class: usize,
    pub method: Method,
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub pixel_h: usize,
    pub pixel_w: usize,
    /// `[T × grid_h × grid_w]`; empty for volumes read back from disk.
    pub grids: Vec<f64>,
    /// `[T × pixel_H × pixel_W]`, values in `[0, 1]`.
    pub maps: Vec<f64>,
    /// Normalized temporal weights (max 1 unless all zero).
    pub weights: Vec<f64>,
}

impl RelevanceVolume {
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.pixel_h * self.pixel_w;
        &self.maps[t * n..(t + 1) * n]
    }

    pub fn grid(&self, t: usize) -> &[f64] {
        let n = self.grid_h * self.grid_w;
        &self.grids[t * n..(t + 1) * n]
    }
}

/// Runs the full attribution pipeline on a validated trace.
pub fn attribute(trace: &AttentionTrace, method: Method) -> Result<RelevanceVolume, RelevanceError> {
    let report = validate_trace(trace);
    if !report.is_valid() {
        return Err(RelevanceError::InvalidTrace(report));
    }
    let g = &trace.geometry;
    let frame_maps = (0..g.frames)
        .map(|t| {
            let spatial = propagate_spatial(trace, t)?;
            extract_frame_map(trace, &spatial, t)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let raw_weights = match method {
        Method::Chefer => vec![1.0; g.frames],
        Method::CheferT => temporal_weights(&propagate_temporal(trace)?),
    };
    let combined = combine(&frame_maps, &raw_weights, g)?;
    Ok(RelevanceVolume {
        clip_id: trace.clip_id.clone(),
        target_class: trace.target_class,
        method,
        frames: g.frames,
        grid_h: g.grid_h,
        grid_w: g.grid_w,
        pixel_h: g.pixel_h,
        pixel_w: g.pixel_w,
        grids: combined.grids,
        maps: combined.maps,
        weights: combined.weights,
    })
}
