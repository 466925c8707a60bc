//! Synthetic clips with planted cue rectangles, and the on-disk fixture set.
//!
//! Each clip belongs to one class. The class picks the grid cell that holds
//! the primary cue: corners first (top-left, top-right, bottom-left,
//! bottom-right), then the remaining cells in row-major order. During a
//! contiguous run of event frames the clip shows
//!
//! - a bright primary rectangle inside that cell,
//! - a dimmer secondary rectangle enclosing it,
//! - a faint common rectangle in a cell holding no other cue,
//!
//! over low-amplitude noise. Frames outside the run are noise only.
//!
//! Layout written by [`generate_fixtures`]:
//!
//! ```text
//! out/manifest.json
//! out/weights/                      toy-model weights
//! out/clips/<id>/annotation.json
//! out/clips/<id>/tokens.f64         [T × N × 3P²]
//! out/clips/<id>/trace/             attention trace for the true class
//! out/clips/<id>/frames/frame_XX.png
//! ```

use super::{emit_trace, init_weights, ModelError, ToyModelConfig, ToyModelWeights};
use crate::annotations::{annotation_to_json, ClipAnnotation, ClipEntry, CueBox, DatasetDefaults, DatasetManifest, Tier, DEFAULT_CLASSES};
use crate::raw;
use crate::reporting::RgbImage;
use crate::rng::SplitMix64;
use crate::trace_io::write_trace;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Clip draws use `SplitMix64::new(seed ^ CLIP_STREAM)`; weights use `seed`.
pub const CLIP_STREAM: u64 = 0xC11B_5EED_0000_0001;

const BACKGROUND: f64 = 0.05;
const PRIMARY: f64 = 0.95;
const SECONDARY: f64 = 0.55;
const COMMON: f64 = 0.35;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub clip_id: String,
    pub class_index: usize,
    /// `[T × 3 × H × W]` in `[0, 1]`.
    pub images: Vec<f64>,
    pub annotation: ClipAnnotation,
}

/// Pixel rectangle `[r0, r1) × [c0, c1)`.
#[derive(Debug, Clone, Copy)]
struct Rect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl Rect {
    fn to_box(self, tier: Tier, h: usize, w: usize) -> CueBox {
        CueBox {
            tier,
            x: self.c0 as f64 / w as f64,
            y: self.r0 as f64 / h as f64,
            w: (self.c1 - self.c0) as f64 / w as f64,
            h: (self.r1 - self.r0) as f64 / h as f64,
        }
    }
}

fn range(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

/// Grid cells in class order: corners, then the rest row-major.
fn cell_order(config: &ToyModelConfig) -> Vec<(usize, usize)> {
    let (gh, gw) = (config.grid_h, config.grid_w);
    let mut cells = Vec::new();
    for c in [(0, 0), (0, gw - 1), (gh - 1, 0), (gh - 1, gw - 1)] {
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    for i in 0..gh {
        for j in 0..gw {
            if !cells.contains(&(i, j)) {
                cells.push((i, j));
            }
        }
    }
    cells
}

/// Clip `clip_id` of class `class_index`. Draws from `rng` in a fixed order:
/// event start and length, primary size and offset, secondary margins,
/// common cell, common size and offset, then the per-pixel noise.
pub fn synthesize_clip(
    config: &ToyModelConfig,
    clip_id: &str,
    class_index: usize,
    class_name: &str,
    rng: &mut SplitMix64,
) -> SyntheticClip {
    let (t_len, p) = (config.frames, config.patch_size);
    let (h, w) = (config.pixel_h(), config.pixel_w());
    let cells = cell_order(config);
    let cell = cells[class_index % cells.len()];

    let len = range(rng, 1.max(t_len / 2), t_len);
    let start = range(rng, 0, t_len - len);

    let side = |rng: &mut SplitMix64| range(rng, 1.max(p / 2), 1.max(p * 4 / 5));
    let (ph, pw) = (side(rng), side(rng));
    let pr0 = cell.0 * p + range(rng, 0, p - ph);
    let pc0 = cell.1 * p + range(rng, 0, p - pw);
    let primary = Rect { r0: pr0, r1: pr0 + ph, c0: pc0, c1: pc0 + pw };
    let mut margin = || range(rng, 1, 1.max(p / 4));
    let secondary = Rect {
        r0: primary.r0.saturating_sub(margin()),
        r1: (primary.r1 + margin()).min(h),
        c0: primary.c0.saturating_sub(margin()),
        c1: (primary.c1 + margin()).min(w),
    };

    let free: Vec<(usize, usize)> = cells
        .iter()
        .copied()
        .filter(|&(i, j)| {
            let (r0, c0) = (i * p, j * p);
            secondary.r1 <= r0 || secondary.r0 >= r0 + p || secondary.c1 <= c0 || secondary.c0 >= c0 + p
        })
        .collect();
    let common = free.get(rng.below(free.len().max(1) as u64) as usize).map(|&(i, j)| {
        let (ch, cw) = (side(rng), side(rng));
        let r0 = i * p + range(rng, 0, p - ch);
        let c0 = j * p + range(rng, 0, p - cw);
        Rect { r0, r1: r0 + ch, c0, c1: c0 + cw }
    });

    let mut images = vec![0.0; t_len * 3 * h * w];
    for v in images.iter_mut() {
        *v = BACKGROUND * rng.next_f64();
    }
    let mut frames = BTreeMap::new();
    for t in start..start + len {
        let mut paint = |r: Rect, level: f64| {
            for ch in 0..3 {
                for i in r.r0..r.r1 {
                    for j in r.c0..r.c1 {
                        images[((t * 3 + ch) * h + i) * w + j] = level;
                    }
                }
            }
        };
        if let Some(c) = common {
            paint(c, COMMON);
        }
        paint(secondary, SECONDARY);
        paint(primary, PRIMARY);
        let mut boxes = vec![primary.to_box(Tier::Primary, h, w), secondary.to_box(Tier::Secondary, h, w)];
        if let Some(c) = common {
            boxes.push(c.to_box(Tier::Common, h, w));
        }
        frames.insert(t, boxes);
    }
    SyntheticClip {
        clip_id: clip_id.into(),
        class_index,
        images,
        annotation: ClipAnnotation {
            clip_id: clip_id.into(),
            event_class: class_name.into(),
            frames,
        },
    }
}

/// `[T × 3 × H × W]` images to `[T × N × 3P²]` tokens. Token `gy·grid_w + gx`
/// covers the patch at grid row `gy`, column `gx`; within a token, feature
/// `c·P² + dy·P + dx` is channel `c` at offset `(dy, dx)` in the patch.
pub fn patchify(config: &ToyModelConfig, images: &[f64]) -> Result<Vec<f64>, ModelError> {
    let (t_len, p, gh, gw) = (config.frames, config.patch_size, config.grid_h, config.grid_w);
    let (h, w) = (config.pixel_h(), config.pixel_w());
    if images.len() != t_len * 3 * h * w {
        return Err(ModelError::ShapeMismatch(format!(
            "images have {} values, expected {t_len}×3×{h}×{w}",
            images.len()
        )));
    }
    let mut tokens = Vec::with_capacity(images.len());
    for t in 0..t_len {
        for gy in 0..gh {
            for gx in 0..gw {
                for c in 0..3 {
                    for dy in 0..p {
                        let row = ((t * 3 + c) * h + gy * p + dy) * w + gx * p;
                        tokens.extend_from_slice(&images[row..row + p]);
                    }
                }
            }
        }
    }
    Ok(tokens)
}

pub fn frame_image(config: &ToyModelConfig, images: &[f64], t: usize) -> RgbImage {
    let (h, w) = (config.pixel_h(), config.pixel_w());
    let mut img = RgbImage::new(w, h);
    for i in 0..h {
        for j in 0..w {
            let px = |c: usize| (images[((t * 3 + c) * h + i) * w + j] * 255.0).round().clamp(0.0, 255.0) as u8;
            img.set_pixel(i, j, [px(0), px(1), px(2)]);
        }
    }
    img
}

/// The class vocabulary of a fixture set: the first `C` default class names,
/// or `class_k` beyond the default list.
pub fn fixture_classes(config: &ToyModelConfig) -> Vec<String> {
    (0..config.classes)
        .map(|k| DEFAULT_CLASSES.get(k).map_or_else(|| format!("class_{k}"), |s| s.to_string()))
        .collect()
}

/// The clips of a fixture set, without touching the disk. Clip `i` has class
/// `i mod C`.
pub fn synthesize_dataset(config: &ToyModelConfig, n_clips: usize, seed: u64) -> Vec<SyntheticClip> {
    let classes = fixture_classes(config);
    let mut rng = SplitMix64::new(seed ^ CLIP_STREAM);
    (0..n_clips)
        .map(|i| {
            let class = i % config.classes;
            synthesize_clip(config, &format!("clip_{i:03}"), class, &classes[class], &mut rng)
        })
        .collect()
}

/// The weights a fixture set is generated with: `config` with its seed
/// replaced by `seed`.
pub fn fixture_weights(config: &ToyModelConfig, seed: u64) -> Result<ToyModelWeights, ModelError> {
    init_weights(&ToyModelConfig { seed, ..config.clone() })
}

/// Writes a fixture set under `out_dir` and returns its manifest. With
/// `n_clips == 0` only the (empty) manifest is written.
pub fn generate_fixtures(
    config: &ToyModelConfig,
    n_clips: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest, ModelError> {
    config.check()?;
    fs::create_dir_all(out_dir)?;
    let mut manifest = DatasetManifest {
        classes: fixture_classes(config),
        defaults: DatasetDefaults {
            frames: config.frames,
            pixel_h: config.pixel_h(),
            pixel_w: config.pixel_w(),
        },
        clips: Vec::new(),
        base_dir: out_dir.to_path_buf(),
    };
    if n_clips > 0 {
        let weights = fixture_weights(config, seed)?;
        weights.write(&out_dir.join("weights"))?;
        for clip in synthesize_dataset(config, n_clips, seed) {
            let rel = PathBuf::from("clips").join(&clip.clip_id);
            let dir = out_dir.join(&rel);
            fs::create_dir_all(dir.join("frames"))?;
            fs::write(dir.join("annotation.json"), annotation_to_json(&clip.annotation))?;
            let tokens = patchify(&weights.config, &clip.images)?;
            raw::write_f64(&dir.join("tokens.f64"), &tokens)?;
            let trace = emit_trace(&weights, &tokens, clip.class_index, &clip.clip_id)?;
            write_trace(&trace, &dir.join("trace"))?;
            for t in 0..config.frames {
                frame_image(config, &clip.images, t)
                    .write_png(&dir.join("frames").join(format!("frame_{t:02}.png")))?;
            }
            manifest.clips.push(ClipEntry {
                clip_id: clip.clip_id.clone(),
                annotation: rel.join("annotation.json"),
                trace: rel.join("trace"),
                frames_dir: Some(rel.join("frames")),
            });
        }
    }
    fs::write(out_dir.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patchify_places_pixels() {
        let config = ToyModelConfig { frames: 1, grid_h: 2, grid_w: 3, patch_size: 2, ..Default::default() };
        let (h, w) = (config.pixel_h(), config.pixel_w());
        let images: Vec<f64> = (0..3 * h * w).map(|k| k as f64).collect();
        let tokens = patchify(&config, &images).unwrap();
        let din = config.input_dim();
        // token 4 = grid (1, 1); feature c=2, dy=1, dx=0 -> pixel (3, 2) of channel 2
        assert_eq!(tokens[4 * din + 2 * 4 + 2], ((2 * h + 3) * w + 2) as f64);
    }

    #[test]
    fn boxes_nest_and_class_picks_cell() {
        let config = ToyModelConfig::default();
        let mut rng = SplitMix64::new(7);
        for class in 0..4 {
            let clip = synthesize_clip(&config, "c", class, "x", &mut rng);
            let cell = cell_order(&config)[class];
            for boxes in clip.annotation.frames.values() {
                let p = boxes.iter().find(|b| b.tier == Tier::Primary).unwrap();
                let s = boxes.iter().find(|b| b.tier == Tier::Secondary).unwrap();
                assert!(s.contains_box(p));
                assert!(boxes.iter().all(|b| b.check().is_ok()));
                let (cy, cx) = (p.y + p.h / 2.0, p.x + p.w / 2.0);
                assert_eq!(((cy * 3.0) as usize, (cx * 3.0) as usize), cell);
            }
            assert!(!clip.annotation.frames.is_empty());
        }
    }

    #[test]
    fn empty_set_writes_only_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_fixtures(&ToyModelConfig::default(), 0, 42, dir.path()).unwrap();
        assert!(m.clips.is_empty());
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, ["manifest.json"]);
    }
}
