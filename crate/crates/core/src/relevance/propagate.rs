use super::RelevanceError;
use crate::tensor::Matrix;
use crate::trace_io::{AttentionTrace, ExtractionMode, RecordKind};

/// Token-to-token relevance of one frame after all spatial blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRelevance {
    pub frame: usize,
    pub matrix: Matrix,
}

/// One `[T × T]` relevance matrix per patch position.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRelevance {
    pub per_position: Vec<Matrix>,
}

/// Head-averaged positive contribution `E_h[ReLU(grad ⊙ attn)]`.
///
/// `attn` and `grad` are `[heads, rows, cols]` blocks in row-major order.
/// The head axis is dropped from the result.
pub fn positive_contribution<A, G>(
    attn: &[A],
    grad: &[G],
    heads: usize,
    rows: usize,
    cols: usize,
) -> Result<Matrix, RelevanceError>
where
    A: Copy + Into<f64>,
    G: Copy + Into<f64>,
{
    let len = heads * rows * cols;
    if heads == 0 || attn.len() != len || grad.len() != len {
        return Err(RelevanceError::ShapeMismatch(format!(
            "positive_contribution: [{heads}, {rows}, {cols}] block needs {len} values, got attn {} and grad {}",
            attn.len(),
            grad.len()
        )));
    }
    let block = rows * cols;
    let mut out = vec![0.0f64; block];
    for h in 0..heads {
        let a = &attn[h * block..(h + 1) * block];
        let g = &grad[h * block..(h + 1) * block];
        for ((o, &ai), &gi) in out.iter_mut().zip(a).zip(g) {
            let product = gi.into() * ai.into();
            if product > 0.0 {
                *o += product;
            }
        }
    }
    let k = heads as f64;
    for o in &mut out {
        *o /= k;
    }
    Ok(Matrix::from_vec(rows, cols, out))
}

/// Runs `R ← R + Ā·R` over every spatial record for one frame, from `R = I`.
pub fn propagate_spatial(trace: &AttentionTrace, frame: usize) -> Result<SpatialRelevance, RelevanceError> {
    let g = &trace.geometry;
    if frame >= g.frames {
        return Err(RelevanceError::FrameOutOfRange { frame, frames: g.frames });
    }
    let tokens = g.spatial_tokens();
    let mut r = Matrix::identity(tokens);
    for record in trace.records_of(RecordKind::Spatial) {
        let (attn, grad) = record.head_block(frame);
        let contribution = positive_contribution(attn, grad, g.heads, tokens, tokens)?;
        r.accumulate_product(&contribution);
    }
    Ok(SpatialRelevance { frame, matrix: r })
}

/// Per-patch relevance of one frame (length `N`).
///
/// CLS mode reads row 0 of `R` past the CLS column; pooling mode multiplies
/// the probe's positive contribution into `R`.
pub fn extract_frame_map(
    trace: &AttentionTrace,
    relevance: &SpatialRelevance,
    frame: usize,
) -> Result<Vec<f64>, RelevanceError> {
    let g = &trace.geometry;
    let tokens = g.spatial_tokens();
    if relevance.matrix.rows() != tokens || relevance.matrix.cols() != tokens {
        return Err(RelevanceError::ShapeMismatch(format!(
            "spatial relevance is {}x{}, geometry has {tokens} tokens",
            relevance.matrix.rows(),
            relevance.matrix.cols()
        )));
    }
    if frame >= g.frames {
        return Err(RelevanceError::FrameOutOfRange { frame, frames: g.frames });
    }
    match g.extraction_mode {
        ExtractionMode::Cls => Ok(relevance.matrix.row(0)[1..].to_vec()),
        ExtractionMode::Pooling => {
            let record = trace.pooling_record().ok_or(RelevanceError::MissingPooling)?;
            let (attn, grad) = record.head_block(frame);
            let probe = positive_contribution(attn, grad, g.heads, 1, g.patch_tokens)?;
            Ok(probe.matmul(&relevance.matrix).into_vec())
        }
    }
}

/// Per-position temporal relevance: backbone temporal blocks use the slice at
/// each position, classifier-head blocks apply one shared update to every
/// position.
pub fn propagate_temporal(trace: &AttentionTrace) -> Result<TemporalRelevance, RelevanceError> {
    let g = &trace.geometry;
    let (frames, positions) = (g.frames, g.patch_tokens);
    let mut per_position = vec![Matrix::identity(frames); positions];
    for record in trace.records_of(RecordKind::Temporal) {
        for (p, r) in per_position.iter_mut().enumerate() {
            let (attn, grad) = record.head_block(p);
            let contribution = positive_contribution(attn, grad, g.heads, frames, frames)?;
            r.accumulate_product(&contribution);
        }
    }
    for record in trace.records_of(RecordKind::HeadTemporal) {
        let (attn, grad) = record.head_block(0);
        let contribution = positive_contribution(attn, grad, g.heads, frames, frames)?;
        for r in &mut per_position {
            r.accumulate_product(&contribution);
        }
    }
    Ok(TemporalRelevance { per_position })
}

/// Raw frame importance `w_t = (1 / NT) Σ_p Σ_t' R_p[t', t]`.
pub fn temporal_weights(temporal: &TemporalRelevance) -> Vec<f64> {
    let Some(first) = temporal.per_position.first() else {
        return Vec::new();
    };
    let frames = first.cols();
    let scale = (temporal.per_position.len() * frames) as f64;
    (0..frames)
        .map(|t| {
            let mut total = 0.0;
            for r in &temporal.per_position {
                for row in 0..r.rows() {
                    total += r[(row, t)];
                }
            }
            total / scale
        })
        .collect()
}
