//! Spatiotemporal relevance maps for factored space-time transformers and
//! visual-grounding metrics against tiered cue annotations.
//!
//! The pipeline is: an [`AttentionTrace`] (attention tensors plus the
//! gradients of one class logit) goes through [`relevance::attribute`] to give
//! a [`RelevanceVolume`], which [`metrics`] scores against a
//! [`ClipAnnotation`]. The [`toymodel`] module provides a small factored
//! transformer with an exact backward pass for producing traces without any
//! external framework.

pub mod annotations;
pub mod metrics;
pub mod raw;
pub mod relevance;
pub mod reporting;
pub mod rng;
pub mod tensor;
pub mod toymodel;
pub mod trace_io;

pub use annotations::{ClipAnnotation, CueBox, DatasetManifest, Tier, TierSet};
pub use metrics::{ClipMetrics, FrameMetrics, GroundingReport};
pub use relevance::{attribute, Method, RelevanceVolume};
pub use trace_io::{
    read_trace, validate_trace, write_trace, AttentionRecord, AttentionTrace, ExtractionMode,
    ModelGeometry, RecordKind, TraceError, ValidationReport,
};
