//! Framework-independent attention traces.
//!
//! A trace holds, for one clip, every post-softmax attention tensor of the
//! model together with the gradient of the target-class logit with respect
//! to it. On disk a trace is a directory:
//!
//! ```text
//! trace/
//!   manifest.json
//!   <record_id>.attn.f32
//!   <record_id>.grad.f32
//! ```
//!
//! Tensor files are raw little-endian IEEE-754 `f32`, row-major (last index
//! fastest), with no header. Record shapes by kind, with `N' = N + 1` in CLS
//! mode (CLS at token 0) and `N' = N` otherwise:
//!
//! | kind            | shape            |
//! |-----------------|------------------|
//! | `spatial`       | `[T, K, N', N']` |
//! | `temporal`      | `[N, K, T, T]`   |
//! | `pooling`       | `[T, K, 1, N]`   |
//! | `head_temporal` | `[K, T, T]`      |

mod container;
mod validate;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

pub use container::{read_trace, write_trace, FORMAT_VERSION, MANIFEST_FILE};
pub use validate::{validate_trace, ValidationReport, Violation, ViolationKind, ROW_SUM_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    Cls,
    Pooling,
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractionMode::Cls => "cls",
            ExtractionMode::Pooling => "pooling",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelGeometry {
    #[serde(rename = "frames_T")]
    pub frames: usize,
    #[serde(rename = "patch_tokens_N")]
    pub patch_tokens: usize,
    #[serde(rename = "heads_K")]
    pub heads: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    #[serde(rename = "pixel_H")]
    pub pixel_h: usize,
    #[serde(rename = "pixel_W")]
    pub pixel_w: usize,
    pub extraction_mode: ExtractionMode,
    pub num_classes: usize,
}

impl ModelGeometry {
    /// Token count seen by spatial attention.
    pub fn spatial_tokens(&self) -> usize {
        match self.extraction_mode {
            ExtractionMode::Cls => self.patch_tokens.saturating_add(1),
            ExtractionMode::Pooling => self.patch_tokens,
        }
    }

    pub fn expected_shape(&self, kind: RecordKind) -> Vec<usize> {
        let (t, n, k) = (self.frames, self.patch_tokens, self.heads);
        match kind {
            RecordKind::Spatial => {
                let np = self.spatial_tokens();
                vec![t, k, np, np]
            }
            RecordKind::Temporal => vec![n, k, t, t],
            RecordKind::Pooling => vec![t, k, 1, n],
            RecordKind::HeadTemporal => vec![k, t, t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Spatial,
    Temporal,
    Pooling,
    HeadTemporal,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Spatial => "spatial",
            RecordKind::Temporal => "temporal",
            RecordKind::Pooling => "pooling",
            RecordKind::HeadTemporal => "head_temporal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "spatial" => RecordKind::Spatial,
            "temporal" => RecordKind::Temporal,
            "pooling" => RecordKind::Pooling,
            "head_temporal" => RecordKind::HeadTemporal,
            _ => return None,
        })
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One captured attention tensor and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub record_id: String,
    pub kind: RecordKind,
    /// Ordinal among records of the same kind.
    pub layer_index: usize,
    pub attn_shape: Vec<usize>,
    pub grad_shape: Vec<usize>,
    pub attn: Vec<f32>,
    pub grad: Vec<f32>,
}

impl AttentionRecord {
    pub fn new(
        record_id: impl Into<String>,
        kind: RecordKind,
        layer_index: usize,
        shape: Vec<usize>,
        attn: Vec<f32>,
        grad: Vec<f32>,
    ) -> Self {
        Self {
            record_id: record_id.into(),
            kind,
            layer_index,
            attn_shape: shape.clone(),
            grad_shape: shape,
            attn,
            grad,
        }
    }

    /// Contiguous `[K, rows, cols]` block at `outer` along the leading axis.
    /// For `head_temporal` records `outer` must be 0.
    pub(crate) fn head_block(&self, outer: usize) -> (&[f32], &[f32]) {
        let block = match self.kind {
            RecordKind::HeadTemporal => self.attn.len(),
            _ => self.attn.len() / self.attn_shape[0],
        };
        let range = outer * block..(outer + 1) * block;
        (&self.attn[range.clone()], &self.grad[range])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub format_version: String,
    pub geometry: ModelGeometry,
    pub clip_id: String,
    pub target_class: usize,
    pub logits: Vec<f64>,
    /// Forward order.
    pub records: Vec<AttentionRecord>,
}

impl AttentionTrace {
    pub fn records_of(&self, kind: RecordKind) -> impl Iterator<Item = &AttentionRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn pooling_record(&self) -> Option<&AttentionRecord> {
        self.records_of(RecordKind::Pooling).next()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported trace format_version {0:?}")]
    UnsupportedVersion(String),
    #[error("record {record_id}: unknown kind {kind:?}")]
    UnknownKind { record_id: String, kind: String },
    #[error("record {record_id}: file {file} is {actual} bytes, shape requires {expected}")]
    SizeMismatch {
        record_id: String,
        file: String,
        expected: u64,
        actual: u64,
    },
    #[error("record {record_id}: file name {file:?} escapes the trace directory")]
    BadFileName { record_id: String, file: String },
    #[error("invalid trace: {0}")]
    Invalid(ValidationReport),
}
