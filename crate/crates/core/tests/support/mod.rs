//! Dense, loop-by-loop reference implementations used as test oracles, and
//! generators for random traces.
#![allow(dead_code)]

pub mod files;
pub mod fuzz;
pub mod gradcheck;

use groundlens::rng::SplitMix64;
use groundlens::trace_io::FORMAT_VERSION;
use groundlens::{AttentionRecord, AttentionTrace, ExtractionMode, ModelGeometry, RecordKind};

pub type Dense = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Dense {
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i][l] * b[l][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

/// `Ā[i][j] = (1/K) Σ_h max(0, grad · attn)` with an explicit index function.
fn bar(
    record: &AttentionRecord,
    heads: usize,
    rows: usize,
    cols: usize,
    index: impl Fn(usize, usize, usize) -> usize,
) -> Dense {
    let mut out = vec![vec![0.0; cols]; rows];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for h in 0..heads {
                let k = index(h, i, j);
                let p = record.grad[k] as f64 * record.attn[k] as f64;
                s += p.max(0.0);
            }
            *cell = s / heads as f64;
        }
    }
    out
}

pub fn spatial_bar(trace: &AttentionTrace, record: &AttentionRecord, t: usize) -> Dense {
    let g = &trace.geometry;
    let n = g.spatial_tokens();
    let k = g.heads;
    bar(record, k, n, n, |h, i, j| ((t * k + h) * n + i) * n + j)
}

pub fn temporal_bar(trace: &AttentionTrace, record: &AttentionRecord, p: usize) -> Dense {
    let g = &trace.geometry;
    let (tt, k) = (g.frames, g.heads);
    bar(record, k, tt, tt, |h, i, j| ((p * k + h) * tt + i) * tt + j)
}

pub fn pooling_bar(trace: &AttentionTrace, record: &AttentionRecord, t: usize) -> Vec<f64> {
    let g = &trace.geometry;
    let (n, k) = (g.patch_tokens, g.heads);
    bar(record, k, 1, n, |h, _, j| (t * k + h) * n + j).remove(0)
}

pub fn head_bar(trace: &AttentionTrace, record: &AttentionRecord) -> Dense {
    let g = &trace.geometry;
    let (tt, k) = (g.frames, g.heads);
    bar(record, k, tt, tt, |h, i, j| (h * tt + i) * tt + j)
}

fn records<'a>(trace: &'a AttentionTrace, kind: RecordKind) -> Vec<&'a AttentionRecord> {
    trace.records.iter().filter(|r| r.kind == kind).collect()
}

pub fn spatial_relevance(trace: &AttentionTrace, t: usize) -> Dense {
    let mut r = identity(trace.geometry.spatial_tokens());
    for rec in records(trace, RecordKind::Spatial) {
        let a = spatial_bar(trace, rec, t);
        r = add(&r, &matmul(&a, &r));
    }
    r
}

pub fn frame_map(trace: &AttentionTrace, t: usize) -> Vec<f64> {
    let r = spatial_relevance(trace, t);
    let n = trace.geometry.patch_tokens;
    match trace.geometry.extraction_mode {
        ExtractionMode::Cls => (1..=n).map(|j| r[0][j]).collect(),
        ExtractionMode::Pooling => {
            let pool = records(trace, RecordKind::Pooling)[0];
            let a = pooling_bar(trace, pool, t);
            (0..n)
                .map(|p| {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += a[j] * r[j][p];
                    }
                    s
                })
                .collect()
        }
    }
}

pub fn temporal_relevance(trace: &AttentionTrace) -> Vec<Dense> {
    let g = &trace.geometry;
    let mut out = Vec::new();
    for p in 0..g.patch_tokens {
        let mut r = identity(g.frames);
        for rec in records(trace, RecordKind::Temporal) {
            let a = temporal_bar(trace, rec, p);
            r = add(&r, &matmul(&a, &r));
        }
        for rec in records(trace, RecordKind::HeadTemporal) {
            let a = head_bar(trace, rec);
            r = add(&r, &matmul(&a, &r));
        }
        out.push(r);
    }
    out
}

pub fn raw_weights(trace: &AttentionTrace) -> Vec<f64> {
    let g = &trace.geometry;
    let rs = temporal_relevance(trace);
    (0..g.frames)
        .map(|t| {
            let mut s = 0.0;
            for r in &rs {
                for row in r {
                    s += row[t];
                }
            }
            s / (g.patch_tokens * g.frames) as f64
        })
        .collect()
}

pub fn min_max(v: &[f64]) -> Vec<f64> {
    let mut lo = v[0];
    let mut hi = v[0];
    for &x in v {
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    if hi == lo {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Weighted-average form of half-pixel bilinear resampling.
pub fn bilinear(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let coord = |d: usize, s: usize, dn: usize| {
        let mut y = (d as f64 + 0.5) * s as f64 / dn as f64 - 0.5;
        if y < 0.0 {
            y = 0.0;
        }
        if y > (s - 1) as f64 {
            y = (s - 1) as f64;
        }
        let y0 = y.floor() as usize;
        let y1 = if y0 + 1 < s { y0 + 1 } else { s - 1 };
        (y0, y1, y - y0 as f64)
    };
    let mut out = vec![0.0; dh * dw];
    for i in 0..dh {
        let (y0, y1, wy) = coord(i, sh, dh);
        for j in 0..dw {
            let (x0, x1, wx) = coord(j, sw, dw);
            out[i * dw + j] = (1.0 - wy) * (1.0 - wx) * src[y0 * sw + x0]
                + (1.0 - wy) * wx * src[y0 * sw + x1]
                + wy * (1.0 - wx) * src[y1 * sw + x0]
                + wy * wx * src[y1 * sw + x1];
        }
    }
    out
}

pub struct OracleVolume {
    pub grids: Vec<Vec<f64>>,
    pub maps: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

pub fn attribute(trace: &AttentionTrace, temporal: bool) -> OracleVolume {
    let g = &trace.geometry;
    let w = if temporal { raw_weights(trace) } else { vec![1.0; g.frames] };
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let weights: Vec<f64> = w.iter().map(|x| if wmax > 0.0 { x / wmax } else { 0.0 }).collect();
    let mut grids = Vec::new();
    let mut maps = Vec::new();
    for t in 0..g.frames {
        let grid: Vec<f64> = min_max(&frame_map(trace, t)).iter().map(|v| v * weights[t]).collect();
        maps.push(bilinear(&grid, g.grid_h, g.grid_w, g.pixel_h, g.pixel_w));
        grids.push(grid);
    }
    OracleVolume { grids, maps, weights }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- metrics

pub fn energy(frame: &[f64], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut inside = 0.0;
    for i in 0..frame.len() {
        total += frame[i];
        if mask[i] {
            inside += frame[i];
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

pub fn pointing(frame: &[f64], mask: &[bool]) -> u8 {
    if frame.iter().sum::<f64>() == 0.0 {
        return 0;
    }
    let mut best = 0;
    for i in 1..frame.len() {
        if frame[i] > frame[best] {
            best = i;
        }
    }
    mask[best] as u8
}

pub fn s_iou(frame: &[f64], mask: &[bool]) -> f64 {
    let max = frame.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let mut inter = 0;
    let mut union = 0;
    for i in 0..frame.len() {
        let hot = frame[i] >= 0.5 * max;
        if hot && mask[i] {
            inter += 1;
        }
        if hot || mask[i] {
            union += 1;
        }
    }
    inter as f64 / union as f64
}

/// Frame flags from per-frame pixel arrays.
pub fn predicted(frames: &[Vec<f64>]) -> Vec<bool> {
    let means: Vec<f64> = frames.iter().map(|f| f.iter().sum::<f64>() / f.len() as f64).collect();
    let max = means.iter().cloned().fold(0.0, f64::max);
    means.iter().map(|&m| max > 0.0 && m >= 0.5 * max).collect()
}

pub fn t_iou(truth: &[bool], pred: &[bool]) -> f64 {
    let mut inter = 0;
    let mut union = 0;
    for t in 0..truth.len() {
        if truth[t] && pred[t] {
            inter += 1;
        }
        if truth[t] || pred[t] {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

// ---------------------------------------------------------------- traces

pub struct TraceShape {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub heads: usize,
    pub blocks: usize,
    pub head_blocks: usize,
    pub mode: ExtractionMode,
}

impl TraceShape {
    pub fn random(rng: &mut SplitMix64) -> Self {
        let grid_h = 1 + rng.below(3) as usize;
        let grid_w = 1 + rng.below(3) as usize;
        Self {
            frames: 1 + rng.below(4) as usize,
            grid_h,
            grid_w,
            heads: 1 + rng.below(2) as usize,
            blocks: 1 + rng.below(3) as usize,
            head_blocks: rng.below(3) as usize,
            mode: if rng.below(2) == 0 {
                ExtractionMode::Cls
            } else {
                ExtractionMode::Pooling
            },
        }
    }

    pub fn geometry(&self, pixel_scale: usize) -> ModelGeometry {
        ModelGeometry {
            frames: self.frames,
            patch_tokens: self.grid_h * self.grid_w,
            heads: self.heads,
            grid_h: self.grid_h,
            grid_w: self.grid_w,
            pixel_h: self.grid_h * pixel_scale,
            pixel_w: self.grid_w * pixel_scale,
            extraction_mode: self.mode,
            num_classes: 3,
        }
    }
}

/// Softmax rows of width `cols` and mixed-sign gradients.
fn random_record(rng: &mut SplitMix64, id: String, kind: RecordKind, layer: usize, shape: Vec<usize>) -> AttentionRecord {
    let cols = *shape.last().unwrap();
    let len: usize = shape.iter().product();
    let mut attn = Vec::with_capacity(len);
    for _ in 0..len / cols {
        let logits: Vec<f64> = (0..cols).map(|_| rng.symmetric(3.0)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        attn.extend(logits.iter().map(|l| (l.exp() / z) as f32));
    }
    let grad = (0..len).map(|_| rng.symmetric(2.0) as f32).collect();
    AttentionRecord::new(id, kind, layer, shape, attn, grad)
}

pub fn random_trace(rng: &mut SplitMix64, shape: &TraceShape, pixel_scale: usize) -> AttentionTrace {
    let geometry = shape.geometry(pixel_scale);
    let mut records = Vec::new();
    for b in 0..shape.blocks {
        let kind = RecordKind::Temporal;
        records.push(random_record(rng, format!("temporal_{b}"), kind, b, geometry.expected_shape(kind)));
        let kind = RecordKind::Spatial;
        records.push(random_record(rng, format!("spatial_{b}"), kind, b, geometry.expected_shape(kind)));
    }
    if shape.mode == ExtractionMode::Pooling {
        let kind = RecordKind::Pooling;
        records.push(random_record(rng, "pooling".into(), kind, 0, geometry.expected_shape(kind)));
    }
    for i in 0..shape.head_blocks {
        let kind = RecordKind::HeadTemporal;
        records.push(random_record(rng, format!("head_temporal_{i}"), kind, i, geometry.expected_shape(kind)));
    }
    AttentionTrace {
        format_version: FORMAT_VERSION.into(),
        geometry,
        clip_id: "random".into(),
        target_class: 0,
        logits: vec![0.5, -0.25, 1.0],
        records,
    }
}

/// Copy with every temporal and head-temporal gradient set to zero.
pub fn without_temporal_gradients(trace: &AttentionTrace) -> AttentionTrace {
    let mut out = trace.clone();
    for r in &mut out.records {
        if matches!(r.kind, RecordKind::Temporal | RecordKind::HeadTemporal) {
            r.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
    out
}
