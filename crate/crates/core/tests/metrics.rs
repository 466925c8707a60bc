mod support;

use groundlens::annotations::{rasterize, tier_sets, Mask};
use groundlens::metrics::{energy, pointing, predicted_frames, s_iou, t_iou};
use groundlens::rng::SplitMix64;
use groundlens::{ClipAnnotation, CueBox, Method, RelevanceVolume, Tier, TierSet};
use proptest::prelude::*;
use std::collections::BTreeMap;

const TOL: f64 = 1e-12;

/// Values on a coarse lattice so ties and exact thresholds actually occur.
fn random_frame(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    match rng.below(8) {
        0 => vec![0.0; len],
        1 => (0..len).map(|_| rng.below(4) as f64 / 4.0).collect(),
        _ => (0..len).map(|_| rng.next_f64()).collect(),
    }
}

fn random_mask(rng: &mut SplitMix64, h: usize, w: usize) -> Mask {
    let mut mask = Mask::empty(h, w);
    let density = rng.next_f64();
    for v in &mut mask.data {
        *v = rng.next_f64() < density;
    }
    let forced = rng.below((h * w) as u64) as usize;
    mask.data[forced] = true;
    mask
}

fn random_box(rng: &mut SplitMix64) -> CueBox {
    let tier = [Tier::Primary, Tier::Secondary, Tier::Common][rng.below(3) as usize];
    let w = 0.05 + 0.9 * rng.next_f64();
    let h = 0.05 + 0.9 * rng.next_f64();
    CueBox {
        tier,
        x: (1.0 - w) * rng.next_f64(),
        y: (1.0 - h) * rng.next_f64(),
        w,
        h,
    }
}

fn volume(frames: Vec<Vec<f64>>, h: usize, w: usize) -> RelevanceVolume {
    RelevanceVolume {
        clip_id: "c".into(),
        target_class: 0,
        method: Method::CheferT,
        frames: frames.len(),
        grid_h: h,
        grid_w: w,
        pixel_h: h,
        pixel_w: w,
        grids: Vec::new(),
        maps: frames.concat(),
        weights: Vec::new(),
    }
}

#[test]
fn frame_metrics_match_brute_force() {
    let mut rng = SplitMix64::new(99);
    for case in 0..300 {
        let (h, w) = (1 + rng.below(16) as usize, 1 + rng.below(16) as usize);
        let frame = random_frame(&mut rng, h * w);
        let mask = random_mask(&mut rng, h, w);
        let e = energy(&frame, &mask).unwrap();
        assert!((e - support::energy(&frame, &mask.data)).abs() <= TOL, "case {case} energy");
        assert_eq!(pointing(&frame, &mask).unwrap(), support::pointing(&frame, &mask.data), "case {case}");
        let s = s_iou(&frame, &mask).unwrap();
        assert!((s - support::s_iou(&frame, &mask.data)).abs() <= TOL, "case {case} s_iou");
    }
}

#[test]
fn temporal_iou_matches_brute_force() {
    let mut rng = SplitMix64::new(123);
    for case in 0..200 {
        let t = 1 + rng.below(6) as usize;
        let (h, w) = (1 + rng.below(16) as usize, 1 + rng.below(16) as usize);
        let frames: Vec<Vec<f64>> = (0..t).map(|_| random_frame(&mut rng, h * w)).collect();
        let mut boxes = BTreeMap::new();
        for f in 0..t {
            if rng.below(2) == 0 {
                let n = 1 + rng.below(3) as usize;
                boxes.insert(f, (0..n).map(|_| random_box(&mut rng)).collect::<Vec<_>>());
            }
        }
        let annotation = ClipAnnotation {
            clip_id: "c".into(),
            event_class: "x".into(),
            frames: boxes.clone(),
        };
        let vol = volume(frames.clone(), h, w);
        let pred = support::predicted(&frames);
        let lib_pred = predicted_frames(&vol);
        assert_eq!(lib_pred, (0..t).filter(|&f| pred[f]).collect(), "case {case} predicted");
        for tiers in tier_sets() {
            let truth: Vec<bool> = (0..t)
                .map(|f| boxes.get(&f).is_some_and(|bs| bs.iter().any(|b| tiers.contains(b.tier))))
                .collect();
            let got = t_iou(&vol, &annotation, tiers);
            assert!((got - support::t_iou(&truth, &pred)).abs() <= TOL, "case {case} {tiers:?}");
        }
    }
}

#[test]
fn masks_cover_exactly_the_pixel_centres_inside_boxes() {
    let mut rng = SplitMix64::new(5);
    for _ in 0..200 {
        let (h, w) = (1 + rng.below(16) as usize, 1 + rng.below(16) as usize);
        let boxes: Vec<CueBox> = (0..1 + rng.below(3)).map(|_| random_box(&mut rng)).collect();
        for tiers in tier_sets() {
            let mask = rasterize(&boxes, tiers, h, w);
            for i in 0..h {
                for j in 0..w {
                    let (cx, cy) = ((j as f64 + 0.5) / w as f64, (i as f64 + 0.5) / h as f64);
                    let want = boxes.iter().any(|b| {
                        tiers.contains(b.tier) && b.x <= cx && cx < b.x + b.w && b.y <= cy && cy < b.y + b.h
                    });
                    assert_eq!(mask.get(i, j), want);
                }
            }
        }
    }
}

#[test]
fn empty_mask_is_an_error() {
    let mask = Mask::empty(2, 2);
    assert!(energy(&[1.0; 4], &mask).is_err());
    assert!(pointing(&[1.0; 4], &mask).is_err());
    assert!(s_iou(&[1.0; 4], &mask).is_err());
}

fn frame_and_mask() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, usize, usize)> {
    (1usize..=16, 1usize..=16).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(0.0f64..1.0, h * w),
            prop::collection::vec(any::<bool>(), h * w),
            Just(h),
            Just(w),
        )
    })
}

fn to_mask(data: &[bool], h: usize, w: usize) -> Option<Mask> {
    let mask = Mask {
        height: h,
        width: w,
        data: data.to_vec(),
    };
    (mask.count() > 0).then_some(mask)
}

proptest! {
    #[test]
    fn metrics_lie_in_unit_interval((frame, data, h, w) in frame_and_mask()) {
        if let Some(mask) = to_mask(&data, h, w) {
            let e = energy(&frame, &mask).unwrap();
            let s = s_iou(&frame, &mask).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(pointing(&frame, &mask).unwrap() <= 1);
        }
    }

    #[test]
    fn energy_and_s_iou_ignore_positive_scale(
        (frame, data, h, w) in frame_and_mask(),
        exponent in -8i32..8,
    ) {
        // Power-of-two factors are exact, so the comparison can be exact.
        let c = 2f64.powi(exponent);
        if let Some(mask) = to_mask(&data, h, w) {
            let scaled: Vec<f64> = frame.iter().map(|v| v * c).collect();
            prop_assert_eq!(energy(&frame, &mask).unwrap(), energy(&scaled, &mask).unwrap());
            prop_assert_eq!(s_iou(&frame, &mask).unwrap(), s_iou(&scaled, &mask).unwrap());
        }
    }

    #[test]
    fn energy_and_s_iou_nearly_ignore_any_positive_scale(
        (frame, data, h, w) in frame_and_mask(),
        c in 1e-3f64..1e3,
    ) {
        if let Some(mask) = to_mask(&data, h, w) {
            let scaled: Vec<f64> = frame.iter().map(|v| v * c).collect();
            let de = energy(&frame, &mask).unwrap() - energy(&scaled, &mask).unwrap();
            prop_assert!(de.abs() <= 1e-12);
        }
    }

    #[test]
    fn pointing_ignores_strictly_monotone_transforms((frame, data, h, w) in frame_and_mask()) {
        if let Some(mask) = to_mask(&data, h, w) {
            let mapped: Vec<f64> = frame.iter().map(|v| 2.0 * v + 1.0).collect();
            let sq: Vec<f64> = frame.iter().map(|v| (v + 1.0).sqrt()).collect();
            let p = pointing(&frame, &mask).unwrap();
            if frame.iter().sum::<f64>() != 0.0 {
                prop_assert_eq!(p, pointing(&mapped, &mask).unwrap());
                prop_assert_eq!(p, pointing(&sq, &mask).unwrap());
            }
        }
    }

    #[test]
    fn energy_and_pointing_grow_with_the_tier_set(
        frame in prop::collection::vec(0.0f64..1.0, 12 * 12),
        seed in any::<u64>(),
    ) {
        let mut rng = SplitMix64::new(seed);
        let boxes: Vec<CueBox> = (0..3).map(|_| random_box(&mut rng)).collect();
        let mut previous: Option<(f64, u8)> = None;
        for tiers in tier_sets() {
            let mask = rasterize(&boxes, tiers, 12, 12);
            if mask.count() == 0 {
                continue;
            }
            let now = (energy(&frame, &mask).unwrap(), pointing(&frame, &mask).unwrap());
            if let Some((e, p)) = previous {
                prop_assert!(now.0 >= e && now.1 >= p);
            }
            previous = Some(now);
        }
    }

    #[test]
    fn predicted_frames_contain_the_brightest_frame(
        frames in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 9), 1..=6),
    ) {
        let vol = volume(frames.clone(), 3, 3);
        let pred = predicted_frames(&vol);
        let means: Vec<f64> = frames.iter().map(|f| f.iter().sum::<f64>() / 9.0).collect();
        let best = (0..means.len()).fold(0, |b, t| if means[t] > means[b] { t } else { b });
        if means[best] > 0.0 {
            prop_assert!(pred.contains(&best));
        } else {
            prop_assert!(pred.is_empty());
        }
    }

    #[test]
    fn tier_masks_are_nested(seed in any::<u64>(), h in 1usize..16, w in 1usize..16) {
        let mut rng = SplitMix64::new(seed);
        let boxes: Vec<CueBox> = (0..4).map(|_| random_box(&mut rng)).collect();
        let sets = tier_sets();
        let masks: Vec<Mask> = sets.iter().map(|&s| rasterize(&boxes, s, h, w)).collect();
        prop_assert!(masks[0].is_subset_of(&masks[1]));
        prop_assert!(masks[1].is_subset_of(&masks[2]));
        prop_assert!(TierSet::PSC.is_superset(TierSet::P));
    }
}
