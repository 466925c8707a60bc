use super::{validate_trace, AttentionRecord, AttentionTrace, ModelGeometry, RecordKind, TraceError};
use crate::raw;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::Path;

pub const FORMAT_VERSION: &str = "1.0";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: String,
    clip_id: String,
    target_class: usize,
    logits: Vec<f64>,
    geometry: ModelGeometry,
    records: Vec<RecordEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordEntry {
    record_id: String,
    kind: String,
    layer_index: usize,
    attn_file: String,
    grad_file: String,
    shape: Vec<usize>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TraceError + '_ {
    move |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `trace` as a manifest plus one raw `.f32` file per tensor.
///
/// The trace is validated first; nothing is written for an invalid trace.
pub fn write_trace(trace: &AttentionTrace, destination: &Path) -> Result<(), TraceError> {
    let report = validate_trace(trace);
    if !report.is_valid() {
        return Err(TraceError::Invalid(report));
    }
    fs::create_dir_all(destination).map_err(io_err(destination))?;

    let mut records = Vec::with_capacity(trace.records.len());
    for record in &trace.records {
        let attn_file = format!("{}.attn.f32", record.record_id);
        let grad_file = format!("{}.grad.f32", record.record_id);
        for (file, data) in [(&attn_file, &record.attn), (&grad_file, &record.grad)] {
            let path = destination.join(file);
            raw::write_f32(&path, data).map_err(io_err(&path))?;
        }
        records.push(RecordEntry {
            record_id: record.record_id.clone(),
            kind: record.kind.as_str().to_owned(),
            layer_index: record.layer_index,
            attn_file,
            grad_file,
            shape: record.attn_shape.clone(),
        });
    }

    let manifest = Manifest {
        format_version: trace.format_version.clone(),
        clip_id: trace.clip_id.clone(),
        target_class: trace.target_class,
        logits: trace.logits.clone(),
        geometry: trace.geometry.clone(),
        records,
    };
    let path = destination.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))
}

/// Reads and fully validates a trace directory.
pub fn read_trace(source: &Path) -> Result<AttentionTrace, TraceError> {
    let manifest_path = source.join(MANIFEST_FILE);
    let bytes = match fs::read(&manifest_path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(TraceError::MissingManifest(manifest_path))
        }
        Err(e) => return Err(io_err(&manifest_path)(e)),
    };
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|source| TraceError::Manifest {
            path: manifest_path.clone(),
            source,
        })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(TraceError::UnsupportedVersion(manifest.format_version));
    }

    let mut records = Vec::with_capacity(manifest.records.len());
    for entry in manifest.records {
        let kind = RecordKind::parse(&entry.kind).ok_or_else(|| TraceError::UnknownKind {
            record_id: entry.record_id.clone(),
            kind: entry.kind.clone(),
        })?;
        let attn = read_tensor(source, &entry.record_id, &entry.attn_file, &entry.shape)?;
        let grad = read_tensor(source, &entry.record_id, &entry.grad_file, &entry.shape)?;
        records.push(AttentionRecord::new(
            entry.record_id,
            kind,
            entry.layer_index,
            entry.shape,
            attn,
            grad,
        ));
    }

    let trace = AttentionTrace {
        format_version: manifest.format_version,
        geometry: manifest.geometry,
        clip_id: manifest.clip_id,
        target_class: manifest.target_class,
        logits: manifest.logits,
        records,
    };
    let report = validate_trace(&trace);
    if report.is_valid() {
        Ok(trace)
    } else {
        Err(TraceError::Invalid(report))
    }
}

fn read_tensor(dir: &Path, record_id: &str, file: &str, shape: &[usize]) -> Result<Vec<f32>, TraceError> {
    let plain = Path::new(file)
        .file_name()
        .is_some_and(|name| name == file && file != "..");
    if !plain {
        return Err(TraceError::BadFileName {
            record_id: record_id.to_owned(),
            file: file.to_owned(),
        });
    }
    let path = dir.join(file);
    let expected = raw::element_count(shape)
        .and_then(|n| n.checked_mul(4))
        .map_or(u64::MAX, |n| n as u64);
    let actual = fs::metadata(&path).map_err(io_err(&path))?.len();
    if actual != expected {
        return Err(TraceError::SizeMismatch {
            record_id: record_id.to_owned(),
            file: file.to_owned(),
            expected,
            actual,
        });
    }
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if bytes.len() as u64 != expected {
        return Err(TraceError::SizeMismatch {
            record_id: record_id.to_owned(),
            file: file.to_owned(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(raw::f32_from_bytes(&bytes))
}
