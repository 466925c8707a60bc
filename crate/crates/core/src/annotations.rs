//! Tiered cue annotations and their rasterization to pixel masks.
//!
//! Boxes use normalized coordinates (top-left origin, `x` rightward, `y`
//! downward), so one annotation serves any relevance resolution. A pixel
//! `(i, j)` of an `H × W` mask belongs to a box when its center
//! `((j + 0.5) / W, (i + 0.5) / H)` satisfies `x ≤ cx < x + w` and
//! `y ≤ cy < y + h`.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Slack admitted on `x + w ≤ 1` for decimal inputs such as `0.7 + 0.3`.
const BOUND_SLACK: f64 = 1e-9;

pub const DEFAULT_CLASSES: [&str; 13] = [
    "corner",
    "goal",
    "yellow card",
    "red card",
    "foul (no card)",
    "lead to corner",
    "free kick",
    "substitution",
    "injury",
    "foul leading to penalty",
    "throw-in",
    "penalty",
    "second yellow card",
];

pub const DEFAULT_FRAMES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Primary,
    Secondary,
    Common,
}

impl Tier {
    pub fn code(self) -> &'static str {
        match self {
            Tier::Primary => "P",
            Tier::Secondary => "S",
            Tier::Common => "C",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "P" => Some(Tier::Primary),
            "S" => Some(Tier::Secondary),
            "C" => Some(Tier::Common),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        match self {
            Tier::Primary => 1,
            Tier::Secondary => 2,
            Tier::Common => 4,
        }
    }
}

/// A set of cue tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TierSet(u8);

impl TierSet {
    pub const P: TierSet = TierSet(1);
    pub const PS: TierSet = TierSet(1 | 2);
    pub const PSC: TierSet = TierSet(1 | 2 | 4);

    pub fn of(tiers: &[Tier]) -> Self {
        TierSet(tiers.iter().fold(0, |acc, t| acc | t.bit()))
    }

    pub fn contains(self, tier: Tier) -> bool {
        self.0 & tier.bit() != 0
    }

    pub fn is_superset(self, other: TierSet) -> bool {
        self.0 & other.0 == other.0
    }

    /// Column label: `P`, `P+S`, `P+S+C`, ...
    pub fn label(self) -> String {
        [Tier::Primary, Tier::Secondary, Tier::Common]
            .into_iter()
            .filter(|&t| self.contains(t))
            .map(Tier::code)
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Parses a label (`P+S`) or the compact CLI form (`PS`).
    pub fn parse(s: &str) -> Option<Self> {
        let mut bits = 0u8;
        for ch in s.chars().filter(|&c| c != '+') {
            bits |= Tier::from_code(&ch.to_string())?.bit();
        }
        (bits != 0).then_some(TierSet(bits))
    }
}

impl fmt::Display for TierSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The three evaluation columns, in report order.
pub fn tier_sets() -> [TierSet; 3] {
    [TierSet::P, TierSet::PS, TierSet::PSC]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueBox {
    pub tier: Tier,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl CueBox {
    pub fn check(&self) -> Result<(), String> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite {
            return Err("non-finite coordinate".into());
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(format!("non-positive size w={} h={}", self.w, self.h));
        }
        if self.x < 0.0 || self.y < 0.0 {
            return Err(format!("negative origin x={} y={}", self.x, self.y));
        }
        if self.x + self.w > 1.0 + BOUND_SLACK {
            return Err(format!("x + w = {} exceeds 1", self.x + self.w));
        }
        if self.y + self.h > 1.0 + BOUND_SLACK {
            return Err(format!("y + h = {} exceeds 1", self.y + self.h));
        }
        Ok(())
    }

    pub fn contains_point(&self, cx: f64, cy: f64) -> bool {
        self.x <= cx && cx < self.x + self.w && self.y <= cy && cy < self.y + self.h
    }

    /// Half-open pixel ranges `(rows, cols)` whose centres fall inside the
    /// box on an `height × width` grid; `None` when no centre does.
    pub fn pixel_rect(&self, height: usize, width: usize) -> Option<((usize, usize), (usize, usize))> {
        let rows = covered_range(self.y, self.h, height);
        let cols = covered_range(self.x, self.w, width);
        (rows.0 < rows.1 && cols.0 < cols.1).then_some((rows, cols))
    }

    pub fn contains_box(&self, other: &CueBox) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipAnnotation {
    pub clip_id: String,
    pub event_class: String,
    /// Frames absent from the map carry no cues.
    pub frames: BTreeMap<usize, Vec<CueBox>>,
}

impl ClipAnnotation {
    pub fn boxes(&self, t: usize) -> &[CueBox] {
        self.frames.get(&t).map_or(&[], Vec::as_slice)
    }

    /// Frames with at least one box whose tier is in `tiers`.
    pub fn frames_with(&self, tiers: TierSet) -> BTreeSet<usize> {
        self.frames
            .iter()
            .filter(|(_, boxes)| boxes.iter().any(|b| tiers.contains(b.tier)))
            .map(|(&t, _)| t)
            .collect()
    }

    pub fn box_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Frames where a primary box is not inside any secondary box of the same
    /// frame. Data-quality hints only; loading does not reject these.
    pub fn containment_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (t, boxes) in &self.frames {
            let secondaries: Vec<_> = boxes.iter().filter(|b| b.tier == Tier::Secondary).collect();
            if secondaries.is_empty() {
                continue;
            }
            for (i, b) in boxes.iter().enumerate().filter(|(_, b)| b.tier == Tier::Primary) {
                if !secondaries.iter().any(|s| s.contains_box(b)) {
                    out.push(format!(
                        "{}: frame {t}: primary box #{i} is outside every secondary box",
                        self.clip_id
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{clip_id}: frame {t} box #{index}: {detail}")]
    BoxOutOfRange {
        clip_id: String,
        t: usize,
        index: usize,
        detail: String,
    },
    #[error("{clip_id}: frame {t} box #{index}: unknown tier {tier:?}")]
    UnknownTier {
        clip_id: String,
        t: usize,
        index: usize,
        tier: String,
    },
    #[error("{clip_id}: unknown event class {class:?}")]
    UnknownClass { clip_id: String, class: String },
    #[error("{clip_id}: frame index {t} out of range for T = {frames}")]
    FrameOutOfRange { clip_id: String, t: usize, frames: usize },
    #[error("{clip_id}: frame {t} listed twice")]
    DuplicateFrame { clip_id: String, t: usize },
    #[error("{clip_id}: no annotated frames")]
    NoAnnotatedFrames { clip_id: String },
    #[error("dataset manifest: duplicate clip_id {0:?}")]
    DuplicateClip(String),
    #[error("dataset manifest: {0}")]
    Manifest(String),
}

// Wire format.

#[derive(Serialize, Deserialize)]
struct AnnotationJson {
    clip_id: String,
    event_class: String,
    frames: Vec<FrameJson>,
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    t: usize,
    boxes: Vec<BoxJson>,
}

#[derive(Serialize, Deserialize)]
struct BoxJson {
    tier: String,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

pub fn load_annotations(path: &Path, vocabulary: &[String], frames: usize) -> Result<ClipAnnotation, AnnotationError> {
    let bytes = fs::read(path).map_err(|source| AnnotationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let json: AnnotationJson = serde_json::from_slice(&bytes).map_err(|source| AnnotationError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotation(json, vocabulary, frames)
}

fn parse_annotation(json: AnnotationJson, vocabulary: &[String], frames: usize) -> Result<ClipAnnotation, AnnotationError> {
    let clip_id = json.clip_id;
    if !vocabulary.iter().any(|c| *c == json.event_class) {
        return Err(AnnotationError::UnknownClass {
            clip_id,
            class: json.event_class,
        });
    }
    let mut map = BTreeMap::new();
    for frame in json.frames {
        let t = frame.t;
        if t >= frames {
            return Err(AnnotationError::FrameOutOfRange { clip_id, t, frames });
        }
        let mut boxes = Vec::with_capacity(frame.boxes.len());
        for (index, b) in frame.boxes.into_iter().enumerate() {
            let Some(tier) = Tier::from_code(&b.tier) else {
                return Err(AnnotationError::UnknownTier {
                    clip_id,
                    t,
                    index,
                    tier: b.tier,
                });
            };
            let cue = CueBox {
                tier,
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
            };
            if let Err(detail) = cue.check() {
                return Err(AnnotationError::BoxOutOfRange { clip_id, t, index, detail });
            }
            boxes.push(cue);
        }
        if map.insert(t, boxes).is_some() {
            return Err(AnnotationError::DuplicateFrame { clip_id, t });
        }
    }
    // Frames listed with an empty box list carry no cues.
    map.retain(|_, boxes: &mut Vec<CueBox>| !boxes.is_empty());
    if map.is_empty() {
        return Err(AnnotationError::NoAnnotatedFrames { clip_id });
    }
    Ok(ClipAnnotation {
        clip_id,
        event_class: json.event_class,
        frames: map,
    })
}

pub fn annotation_to_json(annotation: &ClipAnnotation) -> String {
    let json = AnnotationJson {
        clip_id: annotation.clip_id.clone(),
        event_class: annotation.event_class.clone(),
        frames: annotation
            .frames
            .iter()
            .map(|(&t, boxes)| FrameJson {
                t,
                boxes: boxes
                    .iter()
                    .map(|b| BoxJson {
                        tier: b.tier.code().into(),
                        x: b.x,
                        y: b.y,
                        w: b.w,
                        h: b.h,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&json).expect("annotation serializes")
}

/// Binary `H × W` mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.width + j]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

/// Half-open pixel range `[start, end)` whose centers fall in `[lo, lo + len)`.
pub(crate) fn covered_range(lo: f64, len: f64, pixels: usize) -> (usize, usize) {
    let n = pixels as f64;
    let center = |k: usize| (k as f64 + 0.5) / n;
    let inside = |k: usize| {
        let c = center(k);
        lo <= c && c < lo + len
    };
    // Analytic guess, then settle on the exact predicate at both ends.
    let mut start = ((lo * n - 0.5).ceil().max(0.0) as usize).min(pixels);
    while start > 0 && lo <= center(start - 1) {
        start -= 1;
    }
    while start < pixels && center(start) < lo {
        start += 1;
    }
    let mut end = (((lo + len) * n - 0.5).ceil().max(0.0) as usize).clamp(start, pixels);
    while end > start && !inside(end - 1) {
        end -= 1;
    }
    while end < pixels && inside(end) {
        end += 1;
    }
    (start, end)
}

/// Union of the boxes whose tier is in `tiers`, at `height × width`.
pub fn rasterize(boxes: &[CueBox], tiers: TierSet, height: usize, width: usize) -> Mask {
    let mut mask = Mask::empty(height, width);
    for b in boxes.iter().filter(|b| tiers.contains(b.tier)) {
        let (r0, r1) = covered_range(b.y, b.h, height);
        let (c0, c1) = covered_range(b.x, b.w, width);
        for i in r0..r1 {
            mask.data[i * width + c0..i * width + c1].fill(true);
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetDefaults {
    #[serde(rename = "T")]
    pub frames: usize,
    #[serde(rename = "pixel_H")]
    pub pixel_h: usize,
    #[serde(rename = "pixel_W")]
    pub pixel_w: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub annotation: PathBuf,
    pub trace: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub defaults: DatasetDefaults,
    pub clips: Vec<ClipEntry>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let bytes = fs::read(path).map_err(|source| AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest =
            serde_json::from_slice(&bytes).map_err(|source| AnnotationError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.check()?;
        Ok(manifest)
    }

    pub fn check(&self) -> Result<(), AnnotationError> {
        if self.classes.is_empty() {
            return Err(AnnotationError::Manifest("empty class vocabulary".into()));
        }
        let d = self.defaults;
        if d.frames == 0 || d.pixel_h == 0 || d.pixel_w == 0 {
            return Err(AnnotationError::Manifest("defaults must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for clip in &self.clips {
            if !seen.insert(clip.clip_id.as_str()) {
                return Err(AnnotationError::DuplicateClip(clip.clip_id.clone()));
            }
        }
        Ok(())
    }

    pub fn load_annotation(&self, clip: &ClipEntry) -> Result<ClipAnnotation, AnnotationError> {
        load_annotations(&self.resolve(&clip.annotation), &self.classes, self.defaults.frames)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cue(tier: Tier, x: f64, y: f64, w: f64, h: f64) -> CueBox {
        CueBox { tier, x, y, w, h }
    }

    fn brute_force(boxes: &[CueBox], tiers: TierSet, h: usize, w: usize) -> Mask {
        let mut m = Mask::empty(h, w);
        for i in 0..h {
            for j in 0..w {
                let (cx, cy) = ((j as f64 + 0.5) / w as f64, (i as f64 + 0.5) / h as f64);
                m.data[i * w + j] = boxes.iter().any(|b| tiers.contains(b.tier) && b.contains_point(cx, cy));
            }
        }
        m
    }

    fn vocab() -> Vec<String> {
        vec!["goal".into(), "corner".into()]
    }

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("a.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn quadrant_box() {
        let m = rasterize(&[cue(Tier::Primary, 0.0, 0.0, 0.5, 0.5)], TierSet::P, 4, 4);
        assert_eq!(m.count(), 4);
        assert!(m.get(0, 0) && m.get(1, 1) && !m.get(2, 2) && !m.get(0, 2));
    }

    #[test]
    fn tier_filter() {
        let boxes = [cue(Tier::Common, 0.1, 0.1, 0.5, 0.5)];
        assert_eq!(rasterize(&boxes, TierSet::P, 8, 8).count(), 0);
        assert!(rasterize(&boxes, tier_sets()[2], 8, 8).count() > 0);
    }

    #[test]
    fn overlapping_boxes_match_brute_force() {
        let boxes = [
            cue(Tier::Primary, 0.1, 0.2, 0.4, 0.3),
            cue(Tier::Secondary, 0.3, 0.1, 0.5, 0.6),
        ];
        for (h, w) in [(7, 9), (16, 16), (33, 20)] {
            let fast = rasterize(&boxes, TierSet::PS, h, w);
            assert_eq!(fast, brute_force(&boxes, TierSet::PS, h, w));
        }
    }

    #[test]
    fn tier_sets_are_nested_in_order() {
        let sets = tier_sets();
        assert_eq!(sets[0], TierSet::of(&[Tier::Primary]));
        assert!(sets[2].is_superset(sets[1]) && sets[1].is_superset(sets[0]));
        assert_eq!(sets.map(|s| s.label()), ["P", "P+S", "P+S+C"]);
        assert_eq!(TierSet::parse("PS"), Some(TierSet::PS));
        assert_eq!(TierSet::parse("P+S+C"), Some(TierSet::PSC));
        assert_eq!(TierSet::parse("PX"), None);
    }

    #[test]
    fn area_converges_with_resolution() {
        let b = cue(Tier::Primary, 0.13, 0.27, 0.41, 0.33);
        for n in [8usize, 64, 512] {
            let frac = rasterize(&[b], TierSet::P, n, n).count() as f64 / (n * n) as f64;
            assert!((frac - b.w * b.h).abs() < 2.0 / n as f64, "n={n} frac={frac}");
        }
    }

    #[test]
    fn rejects_box_past_edge() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"clip_id":"c","event_class":"goal","frames":[{"t":0,"boxes":[{"tier":"P","x":0.9,"y":0.0,"w":0.2,"h":0.5}]}]}"#,
        );
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::BoxOutOfRange { .. })));
    }

    #[test]
    fn rejects_empty_frames() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"clip_id":"c","event_class":"goal","frames":[]}"#);
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::NoAnnotatedFrames { .. })));
    }

    #[test]
    fn rejects_unknown_tier_class_and_frame() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"clip_id":"c","event_class":"goal","frames":[{"t":0,"boxes":[{"tier":"X","x":0,"y":0,"w":0.1,"h":0.1}]}]}"#,
        );
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::UnknownTier { .. })));
        let p = write(dir.path(), r#"{"clip_id":"c","event_class":"offside","frames":[]}"#);
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::UnknownClass { .. })));
        let p = write(
            dir.path(),
            r#"{"clip_id":"c","event_class":"goal","frames":[{"t":30,"boxes":[{"tier":"P","x":0,"y":0,"w":0.1,"h":0.1}]}]}"#,
        );
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::FrameOutOfRange { .. })));
        let p = write(dir.path(), "{not json");
        assert!(matches!(load_annotations(&p, &vocab(), 30), Err(AnnotationError::Json { .. })));
    }

    #[test]
    fn json_round_trip_preserves_box_order() {
        let mut frames = BTreeMap::new();
        frames.insert(
            3,
            vec![cue(Tier::Common, 0.5, 0.5, 0.25, 0.25), cue(Tier::Primary, 0.0, 0.0, 0.1, 0.1)],
        );
        let a = ClipAnnotation {
            clip_id: "c".into(),
            event_class: "corner".into(),
            frames,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &annotation_to_json(&a));
        let back = load_annotations(&p, &vocab(), 4).unwrap();
        assert_eq!(back, a);
        assert_eq!(load_annotations(&p, &vocab(), 4).unwrap(), back);
    }

    #[test]
    fn containment_warning_for_stray_primary() {
        let mut frames = BTreeMap::new();
        frames.insert(
            0,
            vec![cue(Tier::Secondary, 0.0, 0.0, 0.5, 0.5), cue(Tier::Primary, 0.6, 0.6, 0.1, 0.1)],
        );
        let a = ClipAnnotation {
            clip_id: "c".into(),
            event_class: "goal".into(),
            frames,
        };
        assert_eq!(a.containment_warnings().len(), 1);
    }

    #[test]
    fn duplicate_clip_ids_rejected() {
        let m = DatasetManifest {
            classes: vocab(),
            defaults: DatasetDefaults { frames: 4, pixel_h: 8, pixel_w: 8 },
            clips: vec![
                ClipEntry { clip_id: "a".into(), annotation: "a.json".into(), trace: "t".into(), frames_dir: None },
                ClipEntry { clip_id: "a".into(), annotation: "b.json".into(), trace: "t".into(), frames_dir: None },
            ],
            base_dir: PathBuf::new(),
        };
        assert!(matches!(m.check(), Err(AnnotationError::DuplicateClip(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_box() -> impl Strategy<Value = CueBox> {
            (0usize..3, 0.0f64..0.9, 0.0f64..0.9, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(t, x, y, fw, fh)| CueBox {
                tier: [Tier::Primary, Tier::Secondary, Tier::Common][t],
                x,
                y,
                w: (1.0 - x) * fw,
                h: (1.0 - y) * fh,
            })
        }

        proptest! {
            #[test]
            fn rasterize_matches_definition(boxes in prop::collection::vec(arb_box(), 0..5), h in 1usize..40, w in 1usize..40) {
                for tiers in tier_sets() {
                    prop_assert_eq!(rasterize(&boxes, tiers, h, w), brute_force(&boxes, tiers, h, w));
                }
            }

            #[test]
            fn masks_nest_across_tier_sets(boxes in prop::collection::vec(arb_box(), 0..5), n in 1usize..32) {
                let [p, ps, psc] = tier_sets().map(|s| rasterize(&boxes, s, n, n));
                prop_assert!(p.is_subset_of(&ps));
                prop_assert!(ps.is_subset_of(&psc));
            }
        }
    }
}
