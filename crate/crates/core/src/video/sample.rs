use super::Frame;
use crate::error::{Error, Result};
use crate::timecode::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub frames: Vec<Frame>,
    /// Set when the span held fewer than `k` frames and all were returned.
    pub short: bool,
}

/// Picks `k` frames from `span` nearest to the interior uniform grid
/// `lo + (i + 0.5) * len / k`.
///
/// Spans are half-open, except that the final frame of `frames` belongs to
/// a span ending exactly at its timestamp. Each grid point takes its nearest
/// unused frame (earlier frame on ties), so no frame is returned twice.
pub fn sample_frames(span: Span, frames: &[Frame], k: usize) -> Result<SampleOutcome> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(span.hi > span.lo) {
        return Err(Error::invalid("span must be non-empty"));
    }
    let last_ts = frames.last().map(|f| f.timestamp);
    let candidates: Vec<&Frame> = frames
        .iter()
        .filter(|f| {
            (f.timestamp >= span.lo && f.timestamp < span.hi)
                || (Some(f.timestamp) == last_ts && f.timestamp == span.hi)
        })
        .collect();

    if candidates.len() <= k {
        return Ok(SampleOutcome { short: candidates.len() < k, frames: candidates.into_iter().cloned().collect() });
    }

    let step = span.len() / k as f64;
    let mut used = vec![false; candidates.len()];
    for i in 0..k {
        let target = span.lo + (i as f64 + 0.5) * step;
        let mut best: Option<(usize, f64)> = None;
        for (j, f) in candidates.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (f.timestamp - target).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("more candidates than grid points");
        used[j] = true;
    }
    Ok(SampleOutcome {
        frames: candidates.into_iter().zip(used).filter(|(_, u)| *u).map(|(f, _)| f.clone()).collect(),
        short: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fps1(n: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                timestamp: i as f64,
                feature: vec![1.0],
                image_ref: None,
                annotated_ref: None,
                annotations: vec![],
                visual: None,
            })
            .collect()
    }

    fn stamps(o: &SampleOutcome) -> Vec<f64> {
        o.frames.iter().map(|f| f.timestamp).collect()
    }

    #[test]
    fn exact_fit() {
        let frames = fps1(20);
        let out = sample_frames(Span { lo: 0.0, hi: 10.0 }, &frames, 10).unwrap();
        assert_eq!(stamps(&out), (0..10).map(|i| i as f64).collect::<Vec<_>>());
        assert!(!out.short);
    }

    #[test]
    fn uniform_grid_over_long_span() {
        let frames = fps1(101);
        let out = sample_frames(Span { lo: 0.0, hi: 100.0 }, &frames, 10).unwrap();
        // independent grid: midpoints of ten equal 10 s cells
        let grid: Vec<f64> = (0..10).map(|i| 10.0 * i as f64 + 5.0).collect();
        assert_eq!(stamps(&out), grid);
    }

    #[test]
    fn short_span_returns_everything_flagged() {
        let frames = fps1(3);
        let out = sample_frames(Span { lo: 0.0, hi: 2.0 }, &frames, 10).unwrap();
        assert_eq!(stamps(&out), vec![0.0, 1.0, 2.0]);
        assert!(out.short);
    }

    #[test]
    fn degenerate_arguments() {
        let frames = fps1(3);
        assert!(sample_frames(Span { lo: 1.0, hi: 1.0 }, &frames, 2).is_err());
        assert!(sample_frames(Span { lo: 0.0, hi: 2.0 }, &frames, 0).is_err());
    }
}
