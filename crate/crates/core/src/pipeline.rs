//! Transmitter and receiver orchestration over a [`BackendSet`].

use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::backend::{BackendError, BackendSet, GenerationRequest};
use crate::palette::{extract_palette, recolor_background, render_colored_segmented, PaletteError};
use crate::scoring::{score_candidates, select_output, CandidateFeatures, ScoredCandidate, ScoringConfig, ScoringError};
use crate::types::{validate_payload, Label, RasterImage, SemanticPayload, Violation};

/// Negative prompt handed to the generator unless overridden.
pub const DEFAULT_NEGATIVE_PROMPT: &str = "low quality, worst quality, out of focus, ugly, error, \
jpeg artifacts, lowers, blurry, broken, illustration, animation, painting, 2D, oil painting, \
sketch, watercolor, ink, flat color";

pub const DEFAULT_CANDIDATE_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Caption,
    Segment,
    Generate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Caption => "captioner",
            Stage::Segment => "segmenter",
            Stage::Generate => "generator",
        })
    }
}

fn candidate_suffix(c: &Option<usize>) -> String {
    c.map(|i| format!(" (candidate {i})")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} failed{}: {source}", candidate_suffix(.candidate))]
    Backend {
        stage: Stage,
        candidate: Option<usize>,
        #[source]
        source: BackendError,
    },
    #[error("segmenter dimension mismatch{}: expected {expected:?}, got {actual:?}", candidate_suffix(.candidate))]
    SegmenterDimensionMismatch {
        candidate: Option<usize>,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("candidate count mismatch: requested {expected}, got {actual}")]
    CandidateCountMismatch { expected: usize, actual: usize },
    #[error("candidate {index} dimension mismatch: expected {expected:?}, got {actual:?}")]
    CandidateDimensionMismatch {
        index: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid payload: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPayload(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Palette(#[from] PaletteError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransmitterConfig {
    pub apply_background_recoloring: bool,
    pub background_label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub candidate_count: usize,
    pub scoring: ScoringConfig,
    pub negative_prompt: String,
    pub generation_seed: u64,
    /// Worker threads for per-candidate work. `0` means one per available core.
    pub jobs: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            candidate_count: DEFAULT_CANDIDATE_COUNT,
            scoring: ScoringConfig::default(),
            negative_prompt: DEFAULT_NEGATIVE_PROMPT.to_owned(),
            generation_seed: 0,
            jobs: 0,
        }
    }
}

/// Extracts caption, segmentation and palette from `image`.
///
/// When recoloring is requested but the segmentation has no background
/// pixels, the palette is left alone and the flag stays unset.
pub fn transmit(
    image: &RasterImage,
    backends: &BackendSet,
    config: &TransmitterConfig,
) -> Result<SemanticPayload, PipelineError> {
    let caption = backends
        .captioner
        .caption(image)
        .map_err(|source| PipelineError::Backend {
            stage: Stage::Caption,
            candidate: None,
            source,
        })?;
    let segmentation = backends
        .segmenter
        .segment(image)
        .map_err(|source| PipelineError::Backend {
            stage: Stage::Segment,
            candidate: None,
            source,
        })?;
    if !image.same_dimensions(segmentation.width(), segmentation.height()) {
        return Err(PipelineError::SegmenterDimensionMismatch {
            candidate: None,
            expected: (image.width(), image.height()),
            actual: (segmentation.width(), segmentation.height()),
        });
    }
    let mut palette = extract_palette(image, &segmentation)?;
    let bg = config.background_label;
    let recolor = config.apply_background_recoloring && palette.contains(bg);
    if recolor {
        palette = recolor_background(&palette, bg)?;
    }
    let payload = SemanticPayload {
        caption,
        segmentation,
        palette,
        background_label: bg,
        background_recolored: recolor,
    };
    validate_payload(&payload).map_err(PipelineError::InvalidPayload)?;
    Ok(payload)
}

/// Receiver output: the winning image plus the full scored list.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub selected_index: usize,
    pub conditioning: RasterImage,
    pub candidates: Vec<ScoredCandidate>,
}

impl Reception {
    pub fn selected(&self) -> &ScoredCandidate {
        &self.candidates[self.selected_index]
    }

    pub fn selected_image(&self) -> &RasterImage {
        &self.selected().image
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))
}

/// Renders the conditioning image, generates candidates, extracts their
/// features and picks the highest combined score.
pub fn receive(
    payload: &SemanticPayload,
    backends: &BackendSet,
    config: &ReceiverConfig,
) -> Result<Reception, PipelineError> {
    validate_payload(payload).map_err(PipelineError::InvalidPayload)?;
    if config.candidate_count == 0 {
        return Err(PipelineError::InvalidConfig(
            "candidate count must be at least 1".into(),
        ));
    }
    config.scoring.validate()?;

    let conditioning = render_colored_segmented(&payload.segmentation, &payload.palette)?;
    let dims = (conditioning.width(), conditioning.height());
    let k = config.candidate_count;

    let images = backends
        .generator
        .generate(&GenerationRequest {
            conditioning: &conditioning,
            caption: &payload.caption,
            count: k,
            negative_prompt: &config.negative_prompt,
            seed: config.generation_seed,
        })
        .map_err(|source| PipelineError::Backend {
            stage: Stage::Generate,
            candidate: None,
            source,
        })?;
    if images.len() != k {
        return Err(PipelineError::CandidateCountMismatch {
            expected: k,
            actual: images.len(),
        });
    }
    if let Some((index, img)) = images
        .iter()
        .enumerate()
        .find(|(_, img)| !img.same_dimensions(dims.0, dims.1))
    {
        return Err(PipelineError::CandidateDimensionMismatch {
            index,
            expected: dims,
            actual: (img.width(), img.height()),
        });
    }

    let caption_gate = (!backends.captioner.concurrent()).then(|| Mutex::new(()));
    let segment_gate = (!backends.segmenter.concurrent()).then(|| Mutex::new(()));

    let extract = |(index, image): (usize, RasterImage)| -> Result<CandidateFeatures, PipelineError> {
        let caption = {
            let _guard = caption_gate.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
            backends.captioner.caption(&image)
        }
        .map_err(|source| PipelineError::Backend {
            stage: Stage::Caption,
            candidate: Some(index),
            source,
        })?;
        let segmentation = {
            let _guard = segment_gate.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
            backends.segmenter.segment(&image)
        }
        .map_err(|source| PipelineError::Backend {
            stage: Stage::Segment,
            candidate: Some(index),
            source,
        })?;
        if !segmentation.same_shape(&payload.segmentation) {
            return Err(PipelineError::SegmenterDimensionMismatch {
                candidate: Some(index),
                expected: dims,
                actual: (segmentation.width(), segmentation.height()),
            });
        }
        Ok(CandidateFeatures {
            image,
            caption,
            segmentation,
        })
    };

    let pool = thread_pool(config.jobs)?;
    let candidates = pool.install(|| -> Result<Vec<ScoredCandidate>, PipelineError> {
        let features = images
            .into_par_iter()
            .enumerate()
            .map(extract)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(score_candidates(
            payload,
            features,
            &config.scoring,
            &backends.similarity,
        )?)
    })?;

    let selected_index = select_output(&candidates)?;
    Ok(Reception {
        selected_index,
        conditioning,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendErrorKind, Captioner, Generator, Segmenter};
    use crate::classes::CLASS_COLORS;
    use crate::mock::{mock_backends, MockGenerator};
    use crate::types::{ColorPalette, Rgb, SegmentationArray};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn table_image(w: usize, h: usize) -> RasterImage {
        let labels: Vec<u8> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if x >= w / 4 && x < w / 2 && y >= h / 4 && y < 3 * h / 4 {
                    12
                } else if x >= 3 * w / 5 && y >= h / 2 {
                    15
                } else {
                    0
                }
            })
            .collect();
        let seg = SegmentationArray::from_raw(w, h, &labels).unwrap();
        let pal = ColorPalette::new(
            CLASS_COLORS.iter().enumerate().map(|(i, c)| (Label(i as u8), *c)),
        )
        .unwrap();
        render_colored_segmented(&seg, &pal).unwrap()
    }

    #[test]
    fn transmit_fixed_point() {
        let img = table_image(20, 16);
        let p = transmit(&img, &mock_backends(), &TransmitterConfig::default()).unwrap();
        assert_eq!(p.caption.as_str(), "a photography of dog and person");
        assert_eq!(render_colored_segmented(&p.segmentation, &p.palette).unwrap(), img);
        assert!(!p.background_recolored);
    }

    #[test]
    fn transmit_recolors_when_asked() {
        // grey-ish background that still snaps to label 0 in the mock segmenter
        let mut px = table_image(10, 10).into_pixels();
        for p in px.iter_mut() {
            if *p == Rgb::WHITE {
                *p = Rgb::new(230, 230, 230);
            }
        }
        let img = RasterImage::new(10, 10, px).unwrap();
        let cfg = TransmitterConfig {
            apply_background_recoloring: true,
            background_label: Label(0),
        };
        let p = transmit(&img, &mock_backends(), &cfg).unwrap();
        assert!(p.background_recolored);
        assert_eq!(p.palette.get(Label(0)), Some(Rgb::WHITE));

        // no background pixels: nothing to recolor
        let all_dog = RasterImage::filled(4, 4, CLASS_COLORS[12]).unwrap();
        let p = transmit(&all_dog, &mock_backends(), &cfg).unwrap();
        assert!(!p.background_recolored);
    }

    struct WrongSize;
    impl Segmenter for WrongSize {
        fn segment(&self, _: &RasterImage) -> Result<SegmentationArray, BackendError> {
            Ok(SegmentationArray::uniform(1, 1, Label(0)).unwrap())
        }
    }

    struct Failing;
    impl Captioner for Failing {
        fn caption(&self, _: &RasterImage) -> Result<crate::types::Caption, BackendError> {
            Err(BackendError::new(BackendErrorKind::Transport, "down"))
        }
    }

    #[test]
    fn transmit_errors() {
        let img = table_image(8, 8);
        let mut b = mock_backends();
        b.segmenter = Arc::new(WrongSize);
        let err = transmit(&img, &b, &TransmitterConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("segmenter dimension mismatch"), "{err}");

        let mut b = mock_backends();
        b.captioner = Arc::new(Failing);
        let err = transmit(&img, &b, &TransmitterConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Backend { stage: Stage::Caption, .. }));
        assert!(err.to_string().starts_with("captioner failed"));
    }

    #[test]
    fn loopback_wins() {
        let img = table_image(24, 24);
        let b = mock_backends();
        let p = transmit(&img, &b, &TransmitterConfig::default()).unwrap();
        let cfg = ReceiverConfig {
            candidate_count: 6,
            generation_seed: 3,
            jobs: 2,
            ..ReceiverConfig::default()
        };
        let r = receive(&p, &b, &cfg).unwrap();
        assert_eq!(r.candidates.len(), 6);
        assert_eq!(r.selected_index, 0);
        assert_eq!(r.selected().smr, 1.0);
        assert_eq!(r.selected_image(), &img);
        assert_eq!(r.conditioning, img);
    }

    struct ConstantGenerator;
    impl Generator for ConstantGenerator {
        fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError> {
            let junk = RasterImage::filled(
                req.conditioning.width(),
                req.conditioning.height(),
                CLASS_COLORS[3],
            )
            .unwrap();
            Ok(vec![junk; req.count])
        }
    }

    #[test]
    fn single_candidate_is_selected() {
        let img = table_image(8, 8);
        let mut b = mock_backends();
        b.generator = Arc::new(ConstantGenerator);
        let p = transmit(&img, &mock_backends(), &TransmitterConfig::default()).unwrap();
        let cfg = ReceiverConfig {
            candidate_count: 1,
            jobs: 1,
            ..ReceiverConfig::default()
        };
        let r = receive(&p, &b, &cfg).unwrap();
        assert_eq!(r.selected_index, 0);
        assert!(r.selected().smr < 1.0);
    }

    struct ShortGenerator;
    impl Generator for ShortGenerator {
        fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError> {
            let mut v = MockGenerator::generate_images(req);
            v.pop();
            Ok(v)
        }
    }

    #[test]
    fn receive_errors() {
        let img = table_image(8, 8);
        let p = transmit(&img, &mock_backends(), &TransmitterConfig::default()).unwrap();
        let mut b = mock_backends();
        b.generator = Arc::new(ShortGenerator);
        let cfg = ReceiverConfig {
            candidate_count: 4,
            jobs: 1,
            ..ReceiverConfig::default()
        };
        let err = receive(&p, &b, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("candidate count mismatch"), "{err}");

        let zero = ReceiverConfig {
            candidate_count: 0,
            ..cfg.clone()
        };
        assert!(matches!(
            receive(&p, &mock_backends(), &zero),
            Err(PipelineError::InvalidConfig(_))
        ));

        let mut b = mock_backends();
        b.segmenter = Arc::new(WrongSize);
        let err = receive(&p, &b, &cfg).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::SegmenterDimensionMismatch {
                candidate: Some(_),
                ..
            }
        ));
    }

    struct SingleFlight {
        active: AtomicUsize,
        max: AtomicUsize,
    }
    impl Captioner for SingleFlight {
        fn caption(&self, image: &RasterImage) -> Result<crate::types::Caption, BackendError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.max.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            let c = crate::mock::MockCaptioner::default().caption_for(image);
            self.active.fetch_sub(1, Ordering::SeqCst);
            Ok(c)
        }
        fn concurrent(&self) -> bool {
            false
        }
    }

    #[test]
    fn single_flight_backends_are_serialized() {
        let img = table_image(8, 8);
        let p = transmit(&img, &mock_backends(), &TransmitterConfig::default()).unwrap();
        let cap = Arc::new(SingleFlight {
            active: AtomicUsize::new(0),
            max: AtomicUsize::new(0),
        });
        let mut b = mock_backends();
        b.captioner = cap.clone();
        let cfg = ReceiverConfig {
            candidate_count: 12,
            jobs: 4,
            ..ReceiverConfig::default()
        };
        receive(&p, &b, &cfg).unwrap();
        assert_eq!(cap.max.load(Ordering::SeqCst), 1);
    }
}
