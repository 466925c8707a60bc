//! Inputs shared by the benchmarks.

use groundlens::toymodel::{emit_trace, fixture_weights, patchify, synthesize_dataset, ToyModelConfig, ToyModelWeights};
use groundlens::AttentionTrace;

pub struct Workload {
    pub weights: ToyModelWeights,
    pub tokens: Vec<f64>,
    pub target: usize,
    pub trace: AttentionTrace,
}

/// First seed-42 fixture clip of `config`, with its trace.
pub fn workload(config: &ToyModelConfig) -> Workload {
    let weights = fixture_weights(config, 42).expect("valid config");
    let clip = synthesize_dataset(config, 1, 42).remove(0);
    let tokens = patchify(config, &clip.images).expect("matching images");
    let trace = emit_trace(&weights, &tokens, clip.class_index, &clip.clip_id).expect("trace");
    Workload { weights, tokens, target: clip.class_index, trace }
}
