use serde::{Deserialize, Serialize};

use super::render::AnnotationRenderer;
use super::{Annotation, Frame};
use crate::providers::{DetectorProvider, FrameRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationWarning {
    pub timestamp: f64,
    pub message: String,
}

/// Runs the detector over every frame and attaches valid detections as
/// annotations. Frames with image bytes also get a rendered copy when a
/// renderer is supplied. Detector failures leave the frame unannotated and
/// produce a warning; so do detections outside the unit square.
pub fn annotate_frames(
    video_id: &str,
    mut frames: Vec<Frame>,
    detector: Option<&dyn DetectorProvider>,
    renderer: Option<&dyn AnnotationRenderer>,
) -> (Vec<Frame>, Vec<AnnotationWarning>) {
    let mut warnings = Vec::new();
    let Some(detector) = detector else {
        return (frames, warnings);
    };
    for frame in &mut frames {
        let fref =
            FrameRef { video_id: video_id.to_string(), timestamp: frame.timestamp, image: frame.image_ref.clone() };
        let detections = match detector.detect(&fref) {
            Ok(d) => d,
            Err(e) => {
                warnings
                    .push(AnnotationWarning { timestamp: frame.timestamp, message: format!("detector failed: {e}") });
                continue;
            }
        };
        frame.annotations.clear();
        for d in detections {
            match Annotation::new(d.bbox, d.label, detector.name()) {
                Ok(a) => frame.annotations.push(a),
                Err(e) => warnings.push(AnnotationWarning {
                    timestamp: frame.timestamp,
                    message: format!("rejected detection: {e}"),
                }),
            }
        }
        if let (Some(renderer), Some(image)) = (renderer, frame.image_ref.as_deref()) {
            if !frame.annotations.is_empty() {
                match renderer.render(image, &frame.annotations) {
                    Ok(path) => frame.annotated_ref = Some(path),
                    Err(e) => warnings
                        .push(AnnotationWarning { timestamp: frame.timestamp, message: format!("render failed: {e}") }),
                }
            }
        }
    }
    (frames, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ProviderError;
    use crate::video::{BoundingBox, Detection};

    struct Fixed(Vec<Detection>);

    impl DetectorProvider for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn detect(&self, _: &FrameRef) -> Result<Vec<Detection>, ProviderError> {
            Ok(self.0.clone())
        }
    }

    struct Broken;

    impl DetectorProvider for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn detect(&self, _: &FrameRef) -> Result<Vec<Detection>, ProviderError> {
            Err(ProviderError::Unconfigured("detector".into()))
        }
    }

    fn frame(t: f64) -> Frame {
        Frame {
            timestamp: t,
            feature: vec![1.0],
            image_ref: None,
            annotated_ref: None,
            annotations: vec![],
            visual: None,
        }
    }

    fn det(x: f64, label: &str) -> Detection {
        Detection { bbox: BoundingBox { x, y: 0.1, w: 0.2, h: 0.2 }, label: label.into(), confidence: 0.9 }
    }

    #[test]
    fn labels_attach_and_bad_boxes_warn() {
        let detector = Fixed(vec![det(0.1, "Logan"), det(0.95, "Ghost")]);
        let (frames, warnings) = annotate_frames("v", vec![frame(0.0)], Some(&detector), None);
        assert_eq!(frames[0].annotations.len(), 1);
        assert_eq!(frames[0].annotations[0].label, "Logan");
        assert_eq!(frames[0].annotations[0].source, "fixed");
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("rejected"));
    }

    #[test]
    fn no_detector_passes_through() {
        let (frames, warnings) = annotate_frames("v", vec![frame(1.0)], None, None);
        assert_eq!(frames, vec![frame(1.0)]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn detector_failure_warns_and_continues() {
        let (frames, warnings) = annotate_frames("v", vec![frame(0.0), frame(1.0)], Some(&Broken), None);
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.annotations.is_empty()));
        assert_eq!(warnings.len(), 2);
    }
}
