//! On-disk relevance volumes: `relevance_manifest.json` plus one raw
//! little-endian `f32` file per clip, shape `[T, pixel_H, pixel_W]`.

use super::{Method, RelevanceVolume};
use crate::raw;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::Path;

pub const RELEVANCE_MANIFEST_FILE: &str = "relevance_manifest.json";
const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEntry {
    pub clip_id: String,
    pub target_class: usize,
    pub file: String,
    pub shape: [usize; 3],
    pub grid_shape: [usize; 2],
    pub temporal_weights: Vec<f64>,
    /// Model logits from the trace, for accuracy; may be empty.
    #[serde(default)]
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFailure {
    pub clip_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceManifest {
    pub format_version: String,
    pub method: Method,
    pub volumes: Vec<VolumeEntry>,
    #[serde(default)]
    pub failures: Vec<VolumeFailure>,
}

impl RelevanceManifest {
    pub fn new(method: Method) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            method,
            volumes: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn entry(&self, clip_id: &str) -> Option<&VolumeEntry> {
        self.volumes.iter().find(|v| v.clip_id == clip_id)
    }
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

fn safe_file_stem(clip_id: &str) -> bool {
    !clip_id.is_empty()
        && !clip_id.starts_with('.')
        && clip_id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

/// Writes the volume's pixel maps as `<clip_id>.f32` and returns its entry.
pub fn write_volume(dir: &Path, volume: &RelevanceVolume) -> io::Result<VolumeEntry> {
    if !safe_file_stem(&volume.clip_id) {
        return Err(invalid(format!("clip_id {:?} is not usable as a file name", volume.clip_id)));
    }
    let file = format!("{}.f32", volume.clip_id);
    let values: Vec<f32> = volume.maps.iter().map(|&v| v as f32).collect();
    raw::write_f32(&dir.join(&file), &values)?;
    Ok(VolumeEntry {
        clip_id: volume.clip_id.clone(),
        target_class: volume.target_class,
        file,
        shape: [volume.frames, volume.pixel_h, volume.pixel_w],
        grid_shape: [volume.grid_h, volume.grid_w],
        temporal_weights: volume.weights.clone(),
        logits: Vec::new(),
    })
}

pub fn write_relevance_manifest(dir: &Path, manifest: &RelevanceManifest) -> io::Result<()> {
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join(RELEVANCE_MANIFEST_FILE), json)
}

pub fn read_relevance_manifest(dir: &Path) -> io::Result<RelevanceManifest> {
    let bytes = fs::read(dir.join(RELEVANCE_MANIFEST_FILE))?;
    let manifest: RelevanceManifest =
        serde_json::from_slice(&bytes).map_err(|e| invalid(format!("relevance manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(invalid(format!(
            "unsupported relevance manifest version {:?}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads one volume; `grids` is left empty since only pixel maps are stored.
pub fn read_volume(dir: &Path, method: Method, entry: &VolumeEntry) -> io::Result<RelevanceVolume> {
    if Path::new(&entry.file).file_name().is_none_or(|n| n != entry.file.as_str()) {
        return Err(invalid(format!("volume file {:?} escapes the directory", entry.file)));
    }
    let [frames, pixel_h, pixel_w] = entry.shape;
    let expected = raw::element_count(&entry.shape).and_then(|n| n.checked_mul(4));
    let bytes = fs::read(dir.join(&entry.file))?;
    if Some(bytes.len()) != expected {
        return Err(invalid(format!(
            "volume {} is {} bytes, shape {:?} requires {}",
            entry.file,
            bytes.len(),
            entry.shape,
            expected.map_or("overflow".into(), |n| n.to_string())
        )));
    }
    if entry.temporal_weights.len() != frames {
        return Err(invalid(format!(
            "volume {}: {} temporal weights for {frames} frames",
            entry.clip_id,
            entry.temporal_weights.len()
        )));
    }
    let maps = raw::f32_from_bytes(&bytes).into_iter().map(f64::from).collect();
    Ok(RelevanceVolume {
        clip_id: entry.clip_id.clone(),
        target_class: entry.target_class,
        method,
        frames,
        grid_h: entry.grid_shape[0],
        grid_w: entry.grid_shape[1],
        pixel_h,
        pixel_w,
        grids: Vec::new(),
        maps,
        weights: entry.temporal_weights.clone(),
    })
}
