use super::upsample::upsample_bilinear;
use super::RelevanceError;
use crate::trace_io::ModelGeometry;

/// Per-frame normalized maps before and after upsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFrames {
    /// `[T × grid_h × grid_w]`.
    pub grids: Vec<f64>,
    /// `[T × pixel_H × pixel_W]`.
    pub maps: Vec<f64>,
    /// `w_t / max w`, or all zeros when `max w = 0`.
    pub weights: Vec<f64>,
}

/// `(h − min) / (max − min)`; a constant map becomes all zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

/// Two-stream combination: each frame's MinMax-normalized spatial map is
/// scaled by `w_t / max w`, laid out row-major on the patch grid (token
/// `p = row · grid_w + col`) and bilinearly upsampled to pixel resolution.
pub fn combine(
    frame_maps: &[Vec<f64>],
    weights: &[f64],
    geometry: &ModelGeometry,
) -> Result<CombinedFrames, RelevanceError> {
    let frames = geometry.frames;
    if frame_maps.len() != frames || weights.len() != frames {
        return Err(RelevanceError::ShapeMismatch(format!(
            "combine: {} frame maps and {} weights for T = {frames}",
            frame_maps.len(),
            weights.len()
        )));
    }
    let cells = geometry.grid_h * geometry.grid_w;
    if let Some(bad) = frame_maps.iter().find(|m| m.len() != cells) {
        return Err(RelevanceError::ShapeMismatch(format!(
            "combine: frame map of length {} for a {}x{} grid",
            bad.len(),
            geometry.grid_h,
            geometry.grid_w
        )));
    }

    let max_w = weights.iter().copied().fold(0.0f64, f64::max);
    let scales: Vec<f64> = if max_w > 0.0 {
        weights.iter().map(|&w| w / max_w).collect()
    } else {
        vec![0.0; frames]
    };

    let pixels = geometry.pixel_h * geometry.pixel_w;
    let mut grids = Vec::with_capacity(frames * cells);
    let mut maps = Vec::with_capacity(frames * pixels);
    for (map, &scale) in frame_maps.iter().zip(&scales) {
        let grid: Vec<f64> = min_max(map).into_iter().map(|v| v * scale).collect();
        maps.extend(upsample_bilinear(
            &grid,
            geometry.grid_h,
            geometry.grid_w,
            geometry.pixel_h,
            geometry.pixel_w,
        ));
        grids.extend(grid);
    }
    Ok(CombinedFrames {
        grids,
        maps,
        weights: scales,
    })
}
