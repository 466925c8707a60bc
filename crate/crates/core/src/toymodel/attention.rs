//! Multi-head attention with Q/K/V/output projections and its reverse pass.
//!
//! Matrices are row-major `[out × in]`; activations are row-major
//! `[len × width]`. `linear(x, w)` computes `x · wᵀ`.

use super::weights::AttentionWeights;

pub(crate) fn linear(x: &[f64], rows: usize, w: &[f64], out: usize, inp: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows * inp);
    debug_assert_eq!(w.len(), out * inp);
    let mut y = vec![0.0; rows * out];
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        for o in 0..out {
            let wo = &w[o * inp..(o + 1) * inp];
            y[r * out + o] = xr.iter().zip(wo).map(|(a, b)| a * b).sum();
        }
    }
    y
}

/// Gradient of `linear` w.r.t. its input: `dy · w`.
pub(crate) fn linear_back(dy: &[f64], rows: usize, w: &[f64], out: usize, inp: usize) -> Vec<f64> {
    let mut dx = vec![0.0; rows * inp];
    for r in 0..rows {
        for o in 0..out {
            let g = dy[r * out + o];
            if g == 0.0 {
                continue;
            }
            let wo = &w[o * inp..(o + 1) * inp];
            for (d, &wv) in dx[r * inp..(r + 1) * inp].iter_mut().zip(wo) {
                *d += g * wv;
            }
        }
    }
    dx
}

pub(crate) fn softmax_rows(scores: &mut [f64], cols: usize) {
    for row in scores.chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
}

/// Everything the reverse pass needs from one attention call.
pub(crate) struct AttentionCache {
    pub q_len: usize,
    pub kv_len: usize,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// `[heads × q_len × kv_len]`.
    pub attn: Vec<f64>,
    /// The probabilities came from softmax (not an override).
    pub from_softmax: bool,
}

pub(crate) struct AttentionGrads {
    /// `∂f/∂A`, `[heads × q_len × kv_len]`.
    pub attn: Vec<f64>,
    pub xq: Vec<f64>,
    pub xkv: Vec<f64>,
}

/// `softmax(Q Kᵀ / √d_h) V` per head, concatenated and projected.
pub(crate) fn attention_forward(
    w: &AttentionWeights,
    heads: usize,
    xq: &[f64],
    q_len: usize,
    xkv: &[f64],
    kv_len: usize,
    override_attn: Option<&[f64]>,
) -> (Vec<f64>, AttentionCache) {
    let d = w.width;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(xq, q_len, &w.q, d, d);
    let k = linear(xkv, kv_len, &w.k, d, d);
    let v = linear(xkv, kv_len, &w.v, d, d);

    let attn = match override_attn {
        Some(a) => a.to_vec(),
        None => {
            let mut scores = vec![0.0; heads * q_len * kv_len];
            for h in 0..heads {
                for i in 0..q_len {
                    let qi = &q[i * d + h * dh..i * d + (h + 1) * dh];
                    for j in 0..kv_len {
                        let kj = &k[j * d + h * dh..j * d + (h + 1) * dh];
                        let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
                        scores[(h * q_len + i) * kv_len + j] = dot * scale;
                    }
                }
            }
            softmax_rows(&mut scores, kv_len);
            scores
        }
    };

    let mut o = vec![0.0; q_len * d];
    for h in 0..heads {
        for i in 0..q_len {
            let row = &attn[(h * q_len + i) * kv_len..(h * q_len + i + 1) * kv_len];
            for (j, &a) in row.iter().enumerate() {
                for c in 0..dh {
                    o[i * d + h * dh + c] += a * v[j * d + h * dh + c];
                }
            }
        }
    }
    let y = linear(&o, q_len, &w.o, d, d);
    let cache = AttentionCache {
        q_len,
        kv_len,
        q,
        k,
        v,
        attn,
        from_softmax: override_attn.is_none(),
    };
    (y, cache)
}

pub(crate) fn attention_backward(
    w: &AttentionWeights,
    heads: usize,
    cache: &AttentionCache,
    dy: &[f64],
) -> AttentionGrads {
    let d = w.width;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (lq, lk) = (cache.q_len, cache.kv_len);
    let d_o = linear_back(dy, lq, &w.o, d, d);

    let mut d_attn = vec![0.0; heads * lq * lk];
    let mut d_v = vec![0.0; lk * d];
    for h in 0..heads {
        for i in 0..lq {
            let doi = &d_o[i * d + h * dh..i * d + (h + 1) * dh];
            for j in 0..lk {
                let vj = &cache.v[j * d + h * dh..j * d + (h + 1) * dh];
                d_attn[(h * lq + i) * lk + j] = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                let a = cache.attn[(h * lq + i) * lk + j];
                for c in 0..dh {
                    d_v[j * d + h * dh + c] += a * doi[c];
                }
            }
        }
    }

    let mut d_q = vec![0.0; lq * d];
    let mut d_k = vec![0.0; lk * d];
    if cache.from_softmax {
        for h in 0..heads {
            for i in 0..lq {
                let base = (h * lq + i) * lk;
                let a = &cache.attn[base..base + lk];
                let da = &d_attn[base..base + lk];
                let dot: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
                for j in 0..lk {
                    let ds = a[j] * (da[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for c in 0..dh {
                        d_q[i * d + h * dh + c] += ds * cache.k[j * d + h * dh + c];
                        d_k[j * d + h * dh + c] += ds * cache.q[i * d + h * dh + c];
                    }
                }
            }
        }
    }

    let xq = linear_back(&d_q, lq, &w.q, d, d);
    let mut xkv = linear_back(&d_k, lk, &w.k, d, d);
    for (x, g) in xkv.iter_mut().zip(linear_back(&d_v, lk, &w.v, d, d)) {
        *x += g;
    }
    AttentionGrads { attn: d_attn, xq, xkv }
}
