//! Bilinear resize with half-pixel-center alignment.
//!
//! Output pixel `(i, j)` samples the source at
//! `y = (i + 0.5) · src_h / dst_h − 0.5` (likewise `x`), clamped to
//! `[0, src − 1]`. Each output is a convex blend of its four neighbours and
//! is clamped into their `[min, max]`, so the result never leaves the
//! source range. When `dst / src` is an odd integer the sampling grid hits
//! every source cell exactly and the global maximum is reproduced bit-exactly.

/// `src` is `[src_h × src_w]` row-major; returns `[dst_h × dst_w]`.
pub fn upsample_bilinear(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w, "source length");
    let ys: Vec<(usize, usize, f64)> = (0..dst_h).map(|i| sample_coord(i, src_h, dst_h)).collect();
    let xs: Vec<(usize, usize, f64)> = (0..dst_w).map(|j| sample_coord(j, src_w, dst_w)).collect();
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let v00 = src[y0 * src_w + x0];
            let v01 = src[y0 * src_w + x1];
            let v10 = src[y1 * src_w + x0];
            let v11 = src[y1 * src_w + x1];
            let top = v00 + fx * (v01 - v00);
            let bottom = v10 + fx * (v11 - v10);
            let value = top + fy * (bottom - top);
            let lo = v00.min(v01).min(v10).min(v11);
            let hi = v00.max(v01).max(v10).max(v11);
            out.push(value.clamp(lo, hi));
        }
    }
    out
}

fn sample_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let pos = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    let pos = pos.clamp(0.0, (src_len - 1) as f64);
    let base = pos.floor();
    let i0 = base as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - base)
}
