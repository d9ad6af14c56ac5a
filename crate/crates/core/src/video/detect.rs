//! Scene detection over per-frame feature vectors.
//!
//! Change between consecutive frames is the total variation distance of
//! their unit-sum-normalized features (half the L1 distance), which lies in
//! `[0, 1]`. A boundary goes before every frame whose change exceeds the
//! threshold; short spans are then merged forward (the last one backward).

use super::{DetectionParams, Frame};
use crate::error::{Error, Result};
use crate::timecode::Span;

/// Scales a non-negative vector to unit sum. An all-zero vector stays zero.
pub fn normalize_unit_sum(v: &[f32]) -> Vec<f64> {
    let sum: f64 = v.iter().map(|&x| x as f64).sum();
    if sum <= 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&x| x as f64 / sum).collect()
}

pub fn frame_distance(a: &[f32], b: &[f32]) -> f64 {
    let (a, b) = (normalize_unit_sum(a), normalize_unit_sum(b));
    0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn check_frames(frames: &[Frame]) -> Result<()> {
    if frames.len() < 2 {
        return Err(Error::invalid("scene detection needs at least 2 frames"));
    }
    let dim = frames[0].feature.len();
    for (i, f) in frames.iter().enumerate() {
        if f.feature.len() != dim {
            return Err(Error::invalid("feature length must be constant"));
        }
        if f.feature.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature at frame {i}")));
        }
        if f.feature.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid(format!("negative feature at frame {i}")));
        }
        if i > 0 && !(f.timestamp > frames[i - 1].timestamp) {
            return Err(Error::invalid("frame timestamps must increase strictly"));
        }
    }
    Ok(())
}

/// Splits `[first_ts, last_ts]` into contiguous scene spans.
pub fn detect_scenes(frames: &[Frame], params: &DetectionParams) -> Result<Vec<Span>> {
    params.validate()?;
    check_frames(frames)?;

    let mut cuts = Vec::new();
    for pair in frames.windows(2) {
        if frame_distance(&pair[0].feature, &pair[1].feature) > params.diff_threshold {
            cuts.push(pair[1].timestamp);
        }
    }

    let first = frames[0].timestamp;
    let last = frames[frames.len() - 1].timestamp;
    let mut spans = Vec::with_capacity(cuts.len() + 1);
    let mut lo = first;
    for cut in cuts {
        spans.push(Span { lo, hi: cut });
        lo = cut;
    }
    spans.push(Span { lo, hi: last });

    merge_short(&mut spans, params.min_segment_seconds);
    Ok(spans)
}

fn merge_short(spans: &mut Vec<Span>, min_len: f64) {
    let mut i = 0;
    while i < spans.len() && spans.len() > 1 {
        if spans[i].len() >= min_len {
            i += 1;
            continue;
        }
        if i + 1 < spans.len() {
            // absorb into the successor and re-examine the merged span
            spans[i + 1].lo = spans[i].lo;
            spans.remove(i);
        } else {
            spans[i - 1].hi = spans[i].hi;
            spans.remove(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames_from(features: &[Vec<f32>]) -> Vec<Frame> {
        features
            .iter()
            .enumerate()
            .map(|(i, f)| Frame {
                timestamp: i as f64,
                feature: f.clone(),
                image_ref: None,
                annotated_ref: None,
                annotations: vec![],
                visual: None,
            })
            .collect()
    }

    #[test]
    fn identical_frames_give_one_segment() {
        let frames = frames_from(&vec![vec![1.0, 2.0, 3.0]; 100]);
        let spans = detect_scenes(&frames, &DetectionParams::default()).unwrap();
        assert_eq!(spans, vec![Span { lo: 0.0, hi: 99.0 }]);
    }

    #[test]
    fn distance_is_scale_free_and_bounded() {
        assert_eq!(frame_distance(&[1.0, 1.0], &[5.0, 5.0]), 0.0);
        assert!((frame_distance(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!((frame_distance(&[3.0, 1.0], &[1.0, 1.0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let p = DetectionParams::default();
        assert!(detect_scenes(&frames_from(&[vec![1.0]]), &p).is_err());
        assert!(detect_scenes(&frames_from(&[vec![1.0], vec![f32::NAN]]), &p).is_err());
        assert!(detect_scenes(&frames_from(&[vec![1.0], vec![1.0, 2.0]]), &p).is_err());
        assert!(detect_scenes(&frames_from(&[vec![1.0], vec![-1.0]]), &p).is_err());
    }

    #[test]
    fn last_short_span_merges_backward() {
        let mut spans = vec![Span { lo: 0.0, hi: 10.0 }, Span { lo: 10.0, hi: 11.0 }];
        merge_short(&mut spans, 2.0);
        assert_eq!(spans, vec![Span { lo: 0.0, hi: 11.0 }]);
    }

    #[test]
    fn chained_short_spans_merge_forward() {
        let mut spans = vec![Span { lo: 0.0, hi: 0.5 }, Span { lo: 0.5, hi: 1.0 }, Span { lo: 1.0, hi: 5.0 }];
        merge_short(&mut spans, 2.0);
        assert_eq!(spans, vec![Span { lo: 0.0, hi: 5.0 }]);
    }
}
