//! Relevance overlays and summary tables.

mod colormap;
mod image;
mod overlay;
mod tables;

pub use colormap::BLUE_RED;
pub use image::{ImageError, RgbImage};
pub use overlay::{render_overlay, tier_color, Colormap, OverlaySpec};
pub use tables::{format_2dp, render_tables, Average, TableError, Tables};
