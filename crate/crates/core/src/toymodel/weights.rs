//! Toy-model parameters, deterministic initialization and the `.f64`
//! weight container.
//!
//! Initialization draws from [`SplitMix64`] seeded with the config seed, one
//! value per parameter, in this order (matrices row-major `[out × in]`):
//!
//! 1. `patch_proj` `[D × 3P²]`, uniform in `±1/√(3P²)`
//! 2. `cls_token` `[D]` (CLS mode) or `probe` `[D]` (pooling mode), `±1/√D`
//! 3. for each block `b`: `temporal_b_{q,k,v,o}` then `spatial_b_{q,k,v,o}`,
//!    each `[D × D]`, `±1/√D`
//! 4. pooling mode only: `pooling_{q,k,v,o}`, `±1/√D`
//! 5. for each head block `i`: `head_i_{q,k,v,o}`, `±1/√D`
//! 6. `classifier` `[C × D]`, `±1/√D`
//!
//! A uniform draw is `(2u − 1) · scale` with `u` from
//! [`SplitMix64::next_f64`]. The weight file lists arrays in the same order.

use super::{ModelError, ToyModelConfig};
use crate::raw;
use crate::rng::SplitMix64;
use crate::trace_io::ExtractionMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const WEIGHTS_MANIFEST_FILE: &str = "weights_manifest.json";
const WEIGHTS_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub width: usize,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub o: Vec<f64>,
}

impl AttentionWeights {
    fn draw(width: usize, rng: &mut SplitMix64, scale: f64) -> Self {
        let mut m = || (0..width * width).map(|_| rng.symmetric(scale)).collect::<Vec<_>>();
        let (q, k, v, o) = (m(), m(), m(), m());
        Self { width, q, k, v, o }
    }

    fn arrays(&self) -> [(&'static str, &Vec<f64>); 4] {
        [("q", &self.q), ("k", &self.k), ("v", &self.v), ("o", &self.o)]
    }

    fn arrays_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 4] {
        [("q", &mut self.q), ("k", &mut self.k), ("v", &mut self.v), ("o", &mut self.o)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModelWeights {
    pub config: ToyModelConfig,
    pub patch_proj: Vec<f64>,
    /// CLS mode only.
    pub cls_token: Option<Vec<f64>>,
    /// Pooling mode only: the learnable query of the pooling head.
    pub probe: Option<Vec<f64>>,
    pub temporal: Vec<AttentionWeights>,
    pub spatial: Vec<AttentionWeights>,
    /// Pooling mode only.
    pub pooling: Option<AttentionWeights>,
    pub head: Vec<AttentionWeights>,
    pub classifier: Vec<f64>,
}

pub fn init_weights(config: &ToyModelConfig) -> Result<ToyModelWeights, ModelError> {
    config.check()?;
    let d = config.width;
    let din = config.input_dim();
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = SplitMix64::new(config.seed);
    let vec = |n: usize, s: f64, rng: &mut SplitMix64| (0..n).map(|_| rng.symmetric(s)).collect::<Vec<_>>();

    let patch_proj = vec(d * din, 1.0 / (din as f64).sqrt(), &mut rng);
    let (cls_token, probe) = match config.extraction_mode {
        ExtractionMode::Cls => (Some(vec(d, scale, &mut rng)), None),
        ExtractionMode::Pooling => (None, Some(vec(d, scale, &mut rng))),
    };
    let mut temporal = Vec::with_capacity(config.blocks);
    let mut spatial = Vec::with_capacity(config.blocks);
    for _ in 0..config.blocks {
        temporal.push(AttentionWeights::draw(d, &mut rng, scale));
        spatial.push(AttentionWeights::draw(d, &mut rng, scale));
    }
    let pooling = match config.extraction_mode {
        ExtractionMode::Pooling => Some(AttentionWeights::draw(d, &mut rng, scale)),
        ExtractionMode::Cls => None,
    };
    let head = (0..config.head_blocks)
        .map(|_| AttentionWeights::draw(d, &mut rng, scale))
        .collect();
    let classifier = vec(config.classes * d, scale, &mut rng);
    Ok(ToyModelWeights {
        config: config.clone(),
        patch_proj,
        cls_token,
        probe,
        temporal,
        spatial,
        pooling,
        head,
        classifier,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsManifest {
    format_version: String,
    precision: String,
    config: ToyModelConfig,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

impl ToyModelWeights {
    /// Named arrays with shapes, in file order.
    pub fn named_arrays(&self) -> Vec<(String, Vec<usize>, &Vec<f64>)> {
        let (d, din, c) = (self.config.width, self.config.input_dim(), self.config.classes);
        let mut out = vec![("patch_proj".to_string(), vec![d, din], &self.patch_proj)];
        if let Some(cls) = &self.cls_token {
            out.push(("cls_token".into(), vec![d], cls));
        }
        if let Some(probe) = &self.probe {
            out.push(("probe".into(), vec![d], probe));
        }
        for (b, (t, s)) in self.temporal.iter().zip(&self.spatial).enumerate() {
            for (suffix, m) in t.arrays() {
                out.push((format!("temporal_{b}_{suffix}"), vec![d, d], m));
            }
            for (suffix, m) in s.arrays() {
                out.push((format!("spatial_{b}_{suffix}"), vec![d, d], m));
            }
        }
        if let Some(p) = &self.pooling {
            for (suffix, m) in p.arrays() {
                out.push((format!("pooling_{suffix}"), vec![d, d], m));
            }
        }
        for (i, h) in self.head.iter().enumerate() {
            for (suffix, m) in h.arrays() {
                out.push((format!("head_{i}_{suffix}"), vec![d, d], m));
            }
        }
        out.push(("classifier".into(), vec![c, d], &self.classifier));
        out
    }

    fn named_arrays_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = vec![("patch_proj".to_string(), &mut self.patch_proj)];
        if let Some(cls) = &mut self.cls_token {
            out.push(("cls_token".into(), cls));
        }
        if let Some(probe) = &mut self.probe {
            out.push(("probe".into(), probe));
        }
        for (b, (t, s)) in self.temporal.iter_mut().zip(&mut self.spatial).enumerate() {
            for (suffix, m) in t.arrays_mut() {
                out.push((format!("temporal_{b}_{suffix}"), m));
            }
            for (suffix, m) in s.arrays_mut() {
                out.push((format!("spatial_{b}_{suffix}"), m));
            }
        }
        if let Some(p) = &mut self.pooling {
            for (suffix, m) in p.arrays_mut() {
                out.push((format!("pooling_{suffix}"), m));
            }
        }
        for (i, h) in self.head.iter_mut().enumerate() {
            for (suffix, m) in h.arrays_mut() {
                out.push((format!("head_{i}_{suffix}"), m));
            }
        }
        out.push(("classifier".into(), &mut self.classifier));
        out
    }

    /// SHA-256 over the little-endian bytes of every array in file order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (_, _, values) in self.named_arrays() {
            hasher.update(raw::f64_to_bytes(values));
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir)?;
        let mut arrays = Vec::new();
        for (name, shape, values) in self.named_arrays() {
            let file = format!("{name}.f64");
            raw::write_f64(&dir.join(&file), values)?;
            arrays.push(ArrayEntry { name, file, shape });
        }
        let manifest = WeightsManifest {
            format_version: WEIGHTS_FORMAT_VERSION.into(),
            precision: "float64".into(),
            config: self.config.clone(),
            arrays,
        };
        fs::write(
            dir.join(WEIGHTS_MANIFEST_FILE),
            serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(dir.join(WEIGHTS_MANIFEST_FILE))?;
        let manifest: WeightsManifest =
            serde_json::from_slice(&bytes).map_err(|e| ModelError::WeightFile(e.to_string()))?;
        if manifest.format_version != WEIGHTS_FORMAT_VERSION || manifest.precision != "float64" {
            return Err(ModelError::WeightFile(format!(
                "unsupported weight file version {:?} / precision {:?}",
                manifest.format_version, manifest.precision
            )));
        }
        // Shapes come from the config; initialize and overwrite every array.
        let mut weights = init_weights(&manifest.config)?;
        let expected: Vec<(String, Vec<usize>)> =
            weights.named_arrays().into_iter().map(|(n, s, _)| (n, s)).collect();
        if manifest.arrays.len() != expected.len() {
            return Err(ModelError::WeightFile(format!(
                "{} arrays, config requires {}",
                manifest.arrays.len(),
                expected.len()
            )));
        }
        for ((entry, (name, shape)), (_, slot)) in
            manifest.arrays.iter().zip(&expected).zip(weights.named_arrays_mut())
        {
            if entry.name != *name || entry.shape != *shape {
                return Err(ModelError::WeightFile(format!(
                    "array {} {:?}, expected {name} {shape:?}",
                    entry.name, entry.shape
                )));
            }
            if Path::new(&entry.file).file_name().is_none_or(|f| f != entry.file.as_str()) {
                return Err(ModelError::WeightFile(format!("bad file name {:?}", entry.file)));
            }
            let data = fs::read(dir.join(&entry.file))?;
            if data.len() != slot.len() * 8 {
                return Err(ModelError::WeightFile(format!(
                    "{} is {} bytes, expected {}",
                    entry.file,
                    data.len(),
                    slot.len() * 8
                )));
            }
            *slot = raw::f64_from_bytes(&data);
        }
        Ok(weights)
    }
}
