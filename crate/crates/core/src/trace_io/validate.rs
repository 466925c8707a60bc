use super::{AttentionRecord, AttentionTrace, ExtractionMode, RecordKind};
use std::collections::HashSet;
use std::fmt;

/// Admits float32 softmax rounding.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Geometry,
    Logits,
    TargetClass,
    RecordId,
    DuplicateRecordId,
    Shape,
    GradShape,
    DataLength,
    NonFinite,
    OutOfRange,
    RowSum,
    PoolingCount,
    MissingSpatial,
    LayerOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub record_id: Option<String>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.record_id {
            Some(id) => write!(f, "record {id}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }

    fn push(&mut self, record_id: Option<&str>, kind: ViolationKind, message: String) {
        self.violations.push(Violation {
            record_id: record_id.map(str::to_owned),
            kind,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

/// Checks every trace invariant and reports all failures.
pub fn validate_trace(trace: &AttentionTrace) -> ValidationReport {
    let mut report = ValidationReport::default();
    let g = &trace.geometry;

    let counts = [
        ("frames_T", g.frames),
        ("patch_tokens_N", g.patch_tokens),
        ("heads_K", g.heads),
        ("grid_h", g.grid_h),
        ("grid_w", g.grid_w),
        ("pixel_H", g.pixel_h),
        ("pixel_W", g.pixel_w),
        ("num_classes", g.num_classes),
    ];
    for (name, value) in counts {
        if value == 0 {
            report.push(None, ViolationKind::Geometry, format!("{name} must be >= 1"));
        }
    }
    if g.grid_h.checked_mul(g.grid_w) != Some(g.patch_tokens) {
        report.push(
            None,
            ViolationKind::Geometry,
            format!(
                "grid {}x{} does not hold {} patch tokens",
                g.grid_h, g.grid_w, g.patch_tokens
            ),
        );
    }
    if g.pixel_h < g.grid_h || g.pixel_w < g.grid_w {
        report.push(
            None,
            ViolationKind::Geometry,
            format!(
                "pixel resolution {}x{} is below the grid {}x{}",
                g.pixel_h, g.pixel_w, g.grid_h, g.grid_w
            ),
        );
    }

    if trace.logits.len() != g.num_classes {
        report.push(
            None,
            ViolationKind::Logits,
            format!("{} logits for {} classes", trace.logits.len(), g.num_classes),
        );
    }
    if trace.logits.iter().any(|l| !l.is_finite()) {
        report.push(None, ViolationKind::Logits, "non-finite logit".into());
    }
    if trace.target_class >= g.num_classes {
        report.push(
            None,
            ViolationKind::TargetClass,
            format!(
                "target_class {} out of range for {} classes",
                trace.target_class, g.num_classes
            ),
        );
    }

    let mut seen = HashSet::new();
    let mut per_kind = [0usize; 4];
    for record in &trace.records {
        let id = record.record_id.as_str();
        if !is_safe_record_id(id) {
            report.push(
                Some(id),
                ViolationKind::RecordId,
                "record_id must be non-empty and use only [A-Za-z0-9_.-]".into(),
            );
        }
        if !seen.insert(id) {
            report.push(Some(id), ViolationKind::DuplicateRecordId, "duplicate record_id".into());
        }
        let slot = &mut per_kind[kind_slot(record.kind)];
        if record.layer_index != *slot {
            report.push(
                Some(id),
                ViolationKind::LayerOrder,
                format!(
                    "layer_index {} but this is {} record #{} in forward order",
                    record.layer_index, record.kind, slot
                ),
            );
        }
        *slot += 1;
        validate_record(record, g.expected_shape(record.kind), &mut report);
    }

    let spatial = per_kind[kind_slot(RecordKind::Spatial)];
    let pooling = per_kind[kind_slot(RecordKind::Pooling)];
    if spatial == 0 {
        report.push(None, ViolationKind::MissingSpatial, "no spatial records".into());
    }
    let expected_pooling = match g.extraction_mode {
        ExtractionMode::Pooling => 1,
        ExtractionMode::Cls => 0,
    };
    if pooling != expected_pooling {
        report.push(
            None,
            ViolationKind::PoolingCount,
            format!(
                "{pooling} pooling record(s), {} mode requires {expected_pooling}",
                g.extraction_mode
            ),
        );
    }

    report
}

fn kind_slot(kind: RecordKind) -> usize {
    match kind {
        RecordKind::Spatial => 0,
        RecordKind::Temporal => 1,
        RecordKind::Pooling => 2,
        RecordKind::HeadTemporal => 3,
    }
}

fn is_safe_record_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn validate_record(record: &AttentionRecord, expected: Vec<usize>, report: &mut ValidationReport) {
    let id = Some(record.record_id.as_str());
    let mut shape_ok = true;
    if record.attn_shape != expected {
        report.push(
            id,
            ViolationKind::Shape,
            format!(
                "{} shape {:?}, geometry requires {:?}",
                record.kind, record.attn_shape, expected
            ),
        );
        shape_ok = false;
    }
    if record.grad_shape != record.attn_shape {
        report.push(
            id,
            ViolationKind::GradShape,
            format!(
                "grad_shape {:?} differs from attn_shape {:?}",
                record.grad_shape, record.attn_shape
            ),
        );
    }

    let numel = crate::raw::element_count(&record.attn_shape);
    for (name, data) in [("attn", &record.attn), ("grad", &record.grad)] {
        if numel != Some(data.len()) {
            report.push(
                id,
                ViolationKind::DataLength,
                format!(
                    "{name} holds {} values, attn_shape {:?} requires {}",
                    data.len(),
                    record.attn_shape,
                    numel.map_or("overflow".into(), |n| n.to_string())
                ),
            );
            shape_ok = false;
        }
    }

    let bad_attn = record.attn.iter().filter(|v| !v.is_finite()).count();
    let bad_grad = record.grad.iter().filter(|v| !v.is_finite()).count();
    if bad_attn + bad_grad > 0 {
        report.push(
            id,
            ViolationKind::NonFinite,
            format!("{bad_attn} non-finite attn and {bad_grad} non-finite grad values"),
        );
    }
    let out_of_range = record
        .attn
        .iter()
        .filter(|v| v.is_finite() && !(0.0..=1.0).contains(*v))
        .count();
    if out_of_range > 0 {
        report.push(
            id,
            ViolationKind::OutOfRange,
            format!("{out_of_range} attention values outside [0, 1]"),
        );
    }

    if !shape_ok || bad_attn > 0 {
        return;
    }
    let row_len = *record.attn_shape.last().expect("validated shape is non-empty");
    let mut failing = 0usize;
    let mut first: Option<(usize, f64)> = None;
    for (row, chunk) in record.attn.chunks_exact(row_len).enumerate() {
        let sum: f64 = chunk.iter().map(|&v| f64::from(v)).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            failing += 1;
            first.get_or_insert((row, sum));
        }
    }
    if let Some((row, sum)) = first {
        report.push(
            id,
            ViolationKind::RowSum,
            format!("{failing} attention row(s) do not sum to 1 (first: row {row} sums to {sum})"),
        );
    }
}
