use super::colormap::BLUE_RED;
use super::image::{ImageError, RgbImage};
use crate::annotations::{CueBox, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    #[default]
    BlueRed,
}

impl Colormap {
    pub fn table(self) -> &'static [[u8; 3]; 256] {
        match self {
            Colormap::BlueRed => &BLUE_RED,
        }
    }

    /// Entry `round(255 · clamp(v, 0, 1))`; NaN maps to entry 0.
    pub fn color(self, v: f64) -> [u8; 3] {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        self.table()[(v * 255.0).round() as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlaySpec {
    pub colormap: Colormap,
    pub alpha: f64,
    pub draw_boxes: bool,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self { colormap: Colormap::BlueRed, alpha: 0.5, draw_boxes: true }
    }
}

pub fn tier_color(tier: Tier) -> [u8; 3] {
    match tier {
        Tier::Primary => [255, 0, 0],
        Tier::Secondary => [255, 255, 0],
        Tier::Common => [0, 255, 0],
    }
}

/// Blends `relevance` (`H × W`, row-major, values in `[0, 1]`) over `image`
/// and outlines `boxes` when `spec.draw_boxes` is set. Outlines are drawn common
/// first and primary last, so primary wins where outlines overlap.
pub fn render_overlay(
    image: &RgbImage,
    relevance: &[f64],
    boxes: &[CueBox],
    spec: &OverlaySpec,
) -> Result<RgbImage, ImageError> {
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(ImageError::Alpha(spec.alpha));
    }
    let (h, w) = (image.height, image.width);
    if relevance.len() != h * w {
        return Err(ImageError::DataLength(relevance.len(), h, w));
    }
    let a = spec.alpha;
    let mut out = RgbImage::new(w, h);
    for (k, &v) in relevance.iter().enumerate() {
        let c = spec.colormap.color(v);
        for ch in 0..3 {
            let x = (1.0 - a) * f64::from(image.data[k * 3 + ch]) + a * f64::from(c[ch]);
            out.data[k * 3 + ch] = x.round().clamp(0.0, 255.0) as u8;
        }
    }
    if spec.draw_boxes {
        for tier in [Tier::Common, Tier::Secondary, Tier::Primary] {
            for b in boxes.iter().filter(|b| b.tier == tier) {
                outline(&mut out, b, tier_color(tier));
            }
        }
    }
    Ok(out)
}

fn outline(img: &mut RgbImage, b: &CueBox, color: [u8; 3]) {
    let Some(((r0, r1), (c0, c1))) = b.pixel_rect(img.height, img.width) else {
        return;
    };
    for j in c0..c1 {
        img.set_pixel(r0, j, color);
        img.set_pixel(r1 - 1, j, color);
    }
    for i in r0..r1 {
        img.set_pixel(i, c0, color);
        img.set_pixel(i, c1 - 1, color);
    }
}
