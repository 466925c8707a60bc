//! Forward and reverse passes of the toy model, and trace emission.
//!
//! Input tokens are `[T × N × 3P²]` row-major; see [`super::patchify`].

use super::attention::{attention_backward, attention_forward, linear, linear_back, AttentionCache};
use super::{ModelError, ToyModelConfig, ToyModelWeights};
use crate::trace_io::{AttentionRecord, AttentionTrace, ExtractionMode, RecordKind, FORMAT_VERSION};
use std::collections::HashMap;

/// Replacement probabilities keyed by record id, in trace layout.
pub type AttentionOverrides = HashMap<String, Vec<f64>>;

/// One attention record of the model, in forward order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSlot {
    pub record_id: String,
    pub kind: RecordKind,
    pub layer_index: usize,
    pub shape: Vec<usize>,
}

impl RecordSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedAttention {
    pub slot: RecordSlot,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub attentions: Vec<CapturedAttention>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput {
    pub logits: Vec<f64>,
    pub attentions: Vec<CapturedAttention>,
    /// `∂ logit[target] / ∂A` for each record, aligned with `attentions`.
    pub attention_grads: Vec<Vec<f64>>,
    /// `∂ logit[target] / ∂ tokens`.
    pub input_grad: Vec<f64>,
}

pub fn record_layout(config: &ToyModelConfig) -> Vec<RecordSlot> {
    let geometry = config.geometry();
    let slot = |id: String, kind, layer_index| RecordSlot {
        record_id: id,
        kind,
        layer_index,
        shape: geometry.expected_shape(kind),
    };
    let mut out = Vec::new();
    for b in 0..config.blocks {
        out.push(slot(format!("temporal_{b}"), RecordKind::Temporal, b));
        out.push(slot(format!("spatial_{b}"), RecordKind::Spatial, b));
    }
    if config.extraction_mode == ExtractionMode::Pooling {
        out.push(slot("pooling".into(), RecordKind::Pooling, 0));
    }
    for i in 0..config.head_blocks {
        out.push(slot(format!("head_temporal_{i}"), RecordKind::HeadTemporal, i));
    }
    out
}

struct Tape {
    logits: Vec<f64>,
    /// `[block][patch position]`
    temporal: Vec<Vec<AttentionCache>>,
    /// `[block][frame]`
    spatial: Vec<Vec<AttentionCache>>,
    /// `[frame]`, pooling mode only.
    pooling: Vec<AttentionCache>,
    head: Vec<AttentionCache>,
}

impl Tape {
    fn attentions(&self, config: &ToyModelConfig) -> Vec<CapturedAttention> {
        record_layout(config)
            .into_iter()
            .map(|slot| {
                let caches: Vec<&AttentionCache> = match slot.kind {
                    RecordKind::Temporal => self.temporal[slot.layer_index].iter().collect(),
                    RecordKind::Spatial => self.spatial[slot.layer_index].iter().collect(),
                    RecordKind::Pooling => self.pooling.iter().collect(),
                    RecordKind::HeadTemporal => vec![&self.head[slot.layer_index]],
                };
                let values = caches.iter().flat_map(|c| c.attn.iter().copied()).collect();
                CapturedAttention { slot, values }
            })
            .collect()
    }
}

fn check_finite(h: &[f64], block: usize, stage: &'static str) -> Result<(), ModelError> {
    if h.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { block, stage })
    }
}

fn run(weights: &ToyModelWeights, tokens: &[f64], overrides: Option<&AttentionOverrides>) -> Result<Tape, ModelError> {
    let cfg = &weights.config;
    cfg.check()?;
    let (t_len, n, k, d, din) = (cfg.frames, cfg.patch_tokens(), cfg.heads, cfg.width, cfg.input_dim());
    let np = cfg.frame_tokens();
    let off = np - n;
    if tokens.len() != t_len * n * din {
        return Err(ModelError::ShapeMismatch(format!(
            "tokens have {} values, expected {t_len}×{n}×{din}",
            tokens.len()
        )));
    }
    if let Some(map) = overrides {
        let layout = record_layout(cfg);
        for (id, values) in map {
            let slot = layout
                .iter()
                .find(|s| &s.record_id == id)
                .ok_or_else(|| ModelError::UnknownOverride(id.clone()))?;
            if values.len() != slot.len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "override {id} has {} values, expected {:?}",
                    values.len(),
                    slot.shape
                )));
            }
        }
    }
    let ov = |id: String, index: usize, block: usize| -> Option<&[f64]> {
        overrides
            .and_then(|m| m.get(&id))
            .map(|v| &v[index * block..(index + 1) * block])
    };

    let mut h = vec![0.0; t_len * np * d];
    for ti in 0..t_len {
        if let Some(cls) = &weights.cls_token {
            h[ti * np * d..ti * np * d + d].copy_from_slice(cls);
        }
        let frame = &tokens[ti * n * din..(ti + 1) * n * din];
        let emb = linear(frame, n, &weights.patch_proj, d, din);
        h[(ti * np + off) * d..(ti + 1) * np * d].copy_from_slice(&emb);
    }
    check_finite(&h, 0, "embedding")?;

    let mut temporal = Vec::with_capacity(cfg.blocks);
    let mut spatial = Vec::with_capacity(cfg.blocks);
    for b in 0..cfg.blocks {
        let mut caches = Vec::with_capacity(n);
        for p in 0..n {
            let row = |ti: usize| (ti * np + off + p) * d;
            let x: Vec<f64> = (0..t_len).flat_map(|ti| h[row(ti)..row(ti) + d].to_vec()).collect();
            let (y, cache) =
                attention_forward(&weights.temporal[b], k, &x, t_len, &x, t_len, ov(format!("temporal_{b}"), p, k * t_len * t_len));
            for ti in 0..t_len {
                for (hv, yv) in h[row(ti)..row(ti) + d].iter_mut().zip(&y[ti * d..(ti + 1) * d]) {
                    *hv += yv;
                }
            }
            caches.push(cache);
        }
        temporal.push(caches);
        check_finite(&h, b, "temporal attention")?;

        let mut caches = Vec::with_capacity(t_len);
        for ti in 0..t_len {
            let frame = &mut h[ti * np * d..(ti + 1) * np * d];
            let (y, cache) =
                attention_forward(&weights.spatial[b], k, frame, np, frame, np, ov(format!("spatial_{b}"), ti, k * np * np));
            for (hv, yv) in frame.iter_mut().zip(&y) {
                *hv += yv;
            }
            caches.push(cache);
        }
        spatial.push(caches);
        check_finite(&h, b, "spatial attention")?;
    }

    let mut z = vec![0.0; t_len * d];
    let mut pooling = Vec::new();
    match (&weights.pooling, &weights.probe) {
        (Some(pool), Some(probe)) => {
            for ti in 0..t_len {
                let frame = &h[ti * np * d..(ti + 1) * np * d];
                let (y, cache) = attention_forward(pool, k, probe, 1, frame, np, ov("pooling".into(), ti, k * n));
                z[ti * d..(ti + 1) * d].copy_from_slice(&y);
                pooling.push(cache);
            }
        }
        _ => {
            for ti in 0..t_len {
                z[ti * d..(ti + 1) * d].copy_from_slice(&h[ti * np * d..ti * np * d + d]);
            }
        }
    }

    let mut head = Vec::with_capacity(cfg.head_blocks);
    for (i, w) in weights.head.iter().enumerate() {
        let (y, cache) = attention_forward(w, k, &z, t_len, &z, t_len, ov(format!("head_temporal_{i}"), 0, k * t_len * t_len));
        for (zv, yv) in z.iter_mut().zip(&y) {
            *zv += yv;
        }
        head.push(cache);
        check_finite(&z, i, "head attention")?;
    }

    let mut mean = vec![0.0; d];
    for ti in 0..t_len {
        for (m, zv) in mean.iter_mut().zip(&z[ti * d..(ti + 1) * d]) {
            *m += zv;
        }
    }
    for m in &mut mean {
        *m /= t_len as f64;
    }
    let logits = linear(&mean, 1, &weights.classifier, cfg.classes, d);
    check_finite(&logits, cfg.head_blocks, "classifier")?;
    Ok(Tape { logits, temporal, spatial, pooling, head })
}

pub fn forward(weights: &ToyModelWeights, tokens: &[f64]) -> Result<ForwardOutput, ModelError> {
    let tape = run(weights, tokens, None)?;
    Ok(ForwardOutput { attentions: tape.attentions(&weights.config), logits: tape.logits })
}

/// Runs the model with some attention maps replaced. Records that are not
/// overridden are recomputed from the (possibly changed) activations.
/// Passing every captured map back reproduces the logits bit for bit.
pub fn forward_from_attention(
    weights: &ToyModelWeights,
    tokens: &[f64],
    overrides: &AttentionOverrides,
) -> Result<Vec<f64>, ModelError> {
    Ok(run(weights, tokens, Some(overrides))?.logits)
}

/// Gradients of `logit[target]` with respect to every attention map and to
/// the input tokens. Attention gradients are total derivatives: they include
/// the effect of a map on later softmaxes.
pub fn backward(weights: &ToyModelWeights, tokens: &[f64], target: usize) -> Result<BackwardOutput, ModelError> {
    let cfg = &weights.config;
    if target >= cfg.classes {
        return Err(ModelError::TargetClass { target, classes: cfg.classes });
    }
    let tape = run(weights, tokens, None)?;
    let (t_len, n, k, d, din) = (cfg.frames, cfg.patch_tokens(), cfg.heads, cfg.width, cfg.input_dim());
    let np = cfg.frame_tokens();
    let off = np - n;

    let mut onehot = vec![0.0; cfg.classes];
    onehot[target] = 1.0;
    let dmean = linear_back(&onehot, 1, &weights.classifier, cfg.classes, d);
    let mut dz: Vec<f64> = (0..t_len).flat_map(|_| dmean.iter().map(|v| v / t_len as f64)).collect();

    let mut head_grads = vec![Vec::new(); cfg.head_blocks];
    for i in (0..cfg.head_blocks).rev() {
        let g = attention_backward(&weights.head[i], k, &tape.head[i], &dz);
        for ((dzv, a), b) in dz.iter_mut().zip(&g.xq).zip(&g.xkv) {
            *dzv += a + b;
        }
        head_grads[i] = g.attn;
    }

    let mut dh = vec![0.0; t_len * np * d];
    let mut pooling_grad = Vec::new();
    match &weights.pooling {
        Some(pool) => {
            for ti in 0..t_len {
                let g = attention_backward(pool, k, &tape.pooling[ti], &dz[ti * d..(ti + 1) * d]);
                for (hv, gv) in dh[ti * np * d..(ti + 1) * np * d].iter_mut().zip(&g.xkv) {
                    *hv += gv;
                }
                pooling_grad.extend(g.attn);
            }
        }
        None => {
            for ti in 0..t_len {
                for (hv, gv) in dh[ti * np * d..ti * np * d + d].iter_mut().zip(&dz[ti * d..(ti + 1) * d]) {
                    *hv += gv;
                }
            }
        }
    }

    let mut temporal_grads = vec![Vec::new(); cfg.blocks];
    let mut spatial_grads = vec![Vec::new(); cfg.blocks];
    for b in (0..cfg.blocks).rev() {
        let mut sg = Vec::with_capacity(t_len * k * np * np);
        for ti in 0..t_len {
            let frame = &mut dh[ti * np * d..(ti + 1) * np * d];
            let g = attention_backward(&weights.spatial[b], k, &tape.spatial[b][ti], frame);
            for ((hv, a), c) in frame.iter_mut().zip(&g.xq).zip(&g.xkv) {
                *hv += a + c;
            }
            sg.extend(g.attn);
        }
        spatial_grads[b] = sg;

        let mut tg = Vec::with_capacity(n * k * t_len * t_len);
        for p in 0..n {
            let row = |ti: usize| (ti * np + off + p) * d;
            let dy: Vec<f64> = (0..t_len).flat_map(|ti| dh[row(ti)..row(ti) + d].to_vec()).collect();
            let g = attention_backward(&weights.temporal[b], k, &tape.temporal[b][p], &dy);
            for ti in 0..t_len {
                for c in 0..d {
                    dh[row(ti) + c] += g.xq[ti * d + c] + g.xkv[ti * d + c];
                }
            }
            tg.extend(g.attn);
        }
        temporal_grads[b] = tg;
    }

    let mut input_grad = Vec::with_capacity(t_len * n * din);
    for ti in 0..t_len {
        let rows = &dh[(ti * np + off) * d..(ti + 1) * np * d];
        input_grad.extend(linear_back(rows, n, &weights.patch_proj, d, din));
    }

    let attentions = tape.attentions(cfg);
    let attention_grads = attentions
        .iter()
        .map(|a| match a.slot.kind {
            RecordKind::Temporal => std::mem::take(&mut temporal_grads[a.slot.layer_index]),
            RecordKind::Spatial => std::mem::take(&mut spatial_grads[a.slot.layer_index]),
            RecordKind::Pooling => std::mem::take(&mut pooling_grad),
            RecordKind::HeadTemporal => std::mem::take(&mut head_grads[a.slot.layer_index]),
        })
        .collect();
    Ok(BackwardOutput { logits: tape.logits, attentions, attention_grads, input_grad })
}

/// Runs forward and backward and packages the result as a validated trace,
/// with attention and gradients rounded to `f32`.
pub fn emit_trace(
    weights: &ToyModelWeights,
    tokens: &[f64],
    target: usize,
    clip_id: &str,
) -> Result<AttentionTrace, ModelError> {
    let out = backward(weights, tokens, target)?;
    let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
    let records = out
        .attentions
        .iter()
        .zip(&out.attention_grads)
        .map(|(a, g)| {
            AttentionRecord::new(
                a.slot.record_id.clone(),
                a.slot.kind,
                a.slot.layer_index,
                a.slot.shape.clone(),
                to_f32(&a.values),
                to_f32(g),
            )
        })
        .collect();
    let trace = AttentionTrace {
        format_version: FORMAT_VERSION.into(),
        geometry: weights.config.geometry(),
        clip_id: clip_id.into(),
        target_class: target,
        logits: out.logits,
        records,
    };
    let report = crate::trace_io::validate_trace(&trace);
    if !report.is_valid() {
        return Err(ModelError::Trace(crate::trace_io::TraceError::Invalid(report)));
    }
    Ok(trace)
}
