mod common;

use common::*;
use omagent_core::timecode::Span;
use omagent_core::video::{detect_scenes, frame_distance, sample_frames, DetectionParams};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn params(threshold: f64, min_len: f64) -> DetectionParams {
    DetectionParams { diff_threshold: threshold, min_segment_seconds: min_len, ..DetectionParams::default() }
}

#[test]
fn matches_oracle_on_random_streams() {
    let mut rng = StdRng::seed_from_u64(7);
    for case in 0..200 {
        let frames = random_stream(&mut rng);
        let (th, min) = (rng.gen_range(0.02..0.9), rng.gen_range(0.1..12.0));
        let got = detect_scenes(&frames, &params(th, min)).unwrap();
        assert_eq!(got, scene_oracle(&frames, th, min), "case {case}");
        check_tiling(&got, &frames, 1e-9).unwrap();
        if got.len() > 1 {
            assert!(got.iter().all(|s| s.len() >= min), "case {case}: short span survived");
        }
    }
}

#[test]
fn higher_thresholds_never_add_segments() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let frames = random_stream(&mut rng);
        let min = rng.gen_range(0.5..6.0);
        let counts: Vec<usize> =
            (1..20).map(|i| detect_scenes(&frames, &params(i as f64 * 0.05, min)).unwrap().len()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }
}

#[test]
fn hard_cuts_are_found() {
    let frames: Vec<_> = (0..30)
        .map(|i| {
            frame(
                i as f64,
                if i < 10 {
                    vec![1.0, 0.0]
                } else if i < 20 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 1.0]
                },
            )
        })
        .collect();
    let spans = detect_scenes(&frames, &DetectionParams::default()).unwrap();
    assert_eq!(spans, vec![Span { lo: 0.0, hi: 10.0 }, Span { lo: 10.0, hi: 20.0 }, Span { lo: 20.0, hi: 29.0 }]);
}

#[test]
fn flicker_is_merged_away() {
    // a one-frame flash at t=5 makes two cuts one second apart
    let frames: Vec<_> =
        (0..12).map(|i| frame(i as f64, if i == 5 { vec![0.0, 9.0] } else { vec![9.0, 0.0] })).collect();
    let spans = detect_scenes(&frames, &params(0.5, 2.0)).unwrap();
    assert_eq!(spans, vec![Span { lo: 0.0, hi: 5.0 }, Span { lo: 5.0, hi: 11.0 }]);
}

#[test]
fn invalid_parameters_are_rejected() {
    let frames: Vec<_> = (0..5).map(|i| frame(i as f64, vec![1.0])).collect();
    for p in [params(0.0, 2.0), params(1.0, 2.0), params(0.3, 0.0), params(0.3, f64::NAN)] {
        assert!(detect_scenes(&frames, &p).is_err());
    }
    let mut unordered = frames.clone();
    unordered.swap(1, 2);
    assert!(detect_scenes(&unordered, &DetectionParams::default()).is_err());
}

#[test]
fn sampling_grid_skips_brief_events() {
    let frames: Vec<_> = (0..=300).map(|i| frame(i as f64, vec![1.0])).collect();
    let out = sample_frames(Span { lo: 120.0, hi: 160.0 }, &frames, 10).unwrap();
    let ts: Vec<f64> = out.frames.iter().map(|f| f.timestamp).collect();
    assert_eq!(ts, (0..10).map(|i| 122.0 + 4.0 * i as f64).collect::<Vec<_>>());
    assert!(!ts.contains(&152.0));
    assert!(!out.short);
}

#[test]
fn sampling_short_spans_returns_everything() {
    let frames: Vec<_> = (0..=10).map(|i| frame(i as f64, vec![1.0])).collect();
    let out = sample_frames(Span { lo: 4.0, hi: 10.0 }, &frames, 10).unwrap();
    // the final frame belongs to a span ending on it
    assert_eq!(out.frames.len(), 7);
    assert!(out.short);
    assert!(sample_frames(Span { lo: 4.0, hi: 4.0 }, &frames, 3).is_err());
    assert!(sample_frames(Span { lo: 0.0, hi: 4.0 }, &frames, 0).is_err());
}

proptest! {
    #[test]
    fn distance_is_a_bounded_symmetric_metric(
        a in prop::collection::vec(0.0f32..10.0, 4),
        b in prop::collection::vec(0.0f32..10.0, 4),
        c in prop::collection::vec(0.0f32..10.0, 4),
        scale in 0.1f32..100.0,
    ) {
        let d = frame_distance(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - frame_distance(&b, &a)).abs() < 1e-12);
        prop_assert!(frame_distance(&a, &c) <= d + frame_distance(&b, &c) + 1e-9);
        let scaled: Vec<f32> = a.iter().map(|x| x * scale).collect();
        prop_assert!(frame_distance(&a, &scaled) < 1e-5);
    }

    #[test]
    fn samples_are_distinct_ordered_and_inside(
        lo in 0.0f64..50.0, len in 0.5f64..80.0, k in 1usize..25, step in 0.2f64..3.0,
    ) {
        let frames: Vec<_> = (0..200).map(|i| frame(i as f64 * step, vec![1.0])).collect();
        let span = Span { lo, hi: lo + len };
        let out = sample_frames(span, &frames, k).unwrap();
        let inside = frames.iter().filter(|f| f.timestamp >= span.lo && f.timestamp < span.hi).count();
        prop_assert!(out.frames.len() == k.min(inside) || out.frames.len() == k.min(inside + 1));
        prop_assert!(out.frames.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        prop_assert!(out.frames.iter().all(|f| f.timestamp >= span.lo && f.timestamp <= span.hi));
    }
}
