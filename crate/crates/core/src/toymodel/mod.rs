//! A small factored space-time transformer with an exact reverse pass.
//!
//! Each block applies temporal self-attention (across the `T` frames at each
//! patch position) and then spatial self-attention (across the tokens of each
//! frame), both with residual connections. There is no MLP and no layer
//! normalization. A pooling probe (or a CLS token prepended to every frame)
//! reduces each frame to one embedding; classifier-head temporal attention
//! mixes the `T` frame embeddings; their mean goes through a linear layer to
//! the class logits. No parameter has a bias.
//!
//! Every softmax output is captured in trace layout, and [`backward`] returns
//! the exact gradient of one logit with respect to each of them and to the
//! input tokens.

mod attention;
pub mod fixtures;
mod forward;
mod weights;

use crate::trace_io::{ExtractionMode, ModelGeometry, TraceError};
use serde::{Deserialize, Serialize};

pub use fixtures::{
    fixture_classes, fixture_weights, frame_image, generate_fixtures, patchify, synthesize_clip, synthesize_dataset,
    SyntheticClip,
};
pub use forward::{
    backward, emit_trace, forward, forward_from_attention, record_layout, AttentionOverrides, BackwardOutput,
    CapturedAttention, ForwardOutput, RecordSlot,
};
pub use weights::{init_weights, AttentionWeights, ToyModelWeights, WEIGHTS_MANIFEST_FILE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyModelConfig {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub heads: usize,
    /// Model width `D`; must be divisible by `heads`.
    pub width: usize,
    pub blocks: usize,
    pub classes: usize,
    pub extraction_mode: ExtractionMode,
    pub head_blocks: usize,
    /// Side of a square patch in pixels; the image is `grid · patch_size`.
    pub patch_size: usize,
    pub seed: u64,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            frames: 4,
            grid_h: 3,
            grid_w: 3,
            heads: 2,
            width: 8,
            blocks: 2,
            classes: 4,
            extraction_mode: ExtractionMode::Pooling,
            head_blocks: 1,
            patch_size: 11,
            seed: 42,
        }
    }
}

impl ToyModelConfig {
    pub fn check(&self) -> Result<(), ModelError> {
        let counts = [
            ("frames", self.frames),
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("heads", self.heads),
            ("width", self.width),
            ("blocks", self.blocks),
            ("classes", self.classes),
            ("head_blocks", self.head_blocks),
            ("patch_size", self.patch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be >= 1")));
        }
        if self.width % self.heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        Ok(())
    }

    pub fn patch_tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    /// Token count of a frame inside the blocks (CLS adds one).
    pub fn frame_tokens(&self) -> usize {
        self.patch_tokens() + usize::from(self.extraction_mode == ExtractionMode::Cls)
    }

    /// Features per patch token: RGB pixels of a `P × P` patch.
    pub fn input_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }

    pub fn pixel_h(&self) -> usize {
        self.grid_h * self.patch_size
    }

    pub fn pixel_w(&self) -> usize {
        self.grid_w * self.patch_size
    }

    pub fn geometry(&self) -> ModelGeometry {
        ModelGeometry {
            frames: self.frames,
            patch_tokens: self.patch_tokens(),
            heads: self.heads,
            grid_h: self.grid_h,
            grid_w: self.grid_w,
            pixel_h: self.pixel_h(),
            pixel_w: self.pixel_w(),
            extraction_mode: self.extraction_mode,
            num_classes: self.classes,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation after {stage} of block {block}")]
    NonFinite { block: usize, stage: &'static str },
    #[error("target class {target} out of range for {classes} classes")]
    TargetClass { target: usize, classes: usize },
    #[error("unknown attention override {0:?}")]
    UnknownOverride(String),
    #[error("weight file: {0}")]
    WeightFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Image(#[from] crate::reporting::ImageError),
}
