//! Deterministic backends for hermetic runs.
//!
//! All three work off the builtin class color table in [`crate::classes`]:
//! the segmenter snaps each pixel to its nearest table color, the captioner
//! names the classes the segmenter finds, and the generator returns the
//! conditioning image followed by progressively larger relabeled rectangles.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{
    BackendError, BackendSet, Captioner, GenerationRequest, Generator, Segmenter,
    SimilarityBackend,
};
use crate::classes::{class_name, nearest_class, CLASS_COLORS, CLASS_COUNT};
use crate::types::{Caption, Label, RasterImage, SegmentationArray};

pub const CAPTION_PREFIX: &str = "a photography of ";

#[derive(Debug, Clone, Copy, Default)]
pub struct MockSegmenter;

impl MockSegmenter {
    pub fn segment_image(image: &RasterImage) -> SegmentationArray {
        let labels = image.pixels().iter().map(|&p| nearest_class(p)).collect();
        SegmentationArray::new(image.width(), image.height(), labels)
            .expect("same dimensions as a valid image")
    }
}

impl Segmenter for MockSegmenter {
    fn segment(&self, image: &RasterImage) -> Result<SegmentationArray, BackendError> {
        Ok(Self::segment_image(image))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MockCaptioner {
    pub background: Label,
}

impl Default for MockCaptioner {
    fn default() -> Self {
        Self {
            background: Label::BACKGROUND,
        }
    }
}

impl MockCaptioner {
    pub fn caption_for(&self, image: &RasterImage) -> Caption {
        let seg = MockSegmenter::segment_image(image);
        let names: Vec<String> = seg
            .distinct_labels()
            .into_iter()
            .filter(|&l| l != self.background)
            .map(class_name)
            .collect();
        let subject = if names.is_empty() {
            class_name(self.background)
        } else {
            names.join(" and ")
        };
        Caption::new(format!("{CAPTION_PREFIX}{subject}")).expect("prefix is non-empty")
    }
}

impl Captioner for MockCaptioner {
    fn caption(&self, image: &RasterImage) -> Result<Caption, BackendError> {
        Ok(self.caption_for(image))
    }
}

/// Candidate 0 is the conditioning image; candidate `i` relabels a
/// `w_i × h_i` rectangle whose area grows strictly with `i` (until it covers
/// the image). Every pixel inside the rectangle moves to a different class.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockGenerator;

/// Rectangle sizes for candidates `1..count`. Areas are strictly increasing
/// while the image has room; the largest covers about half the image.
pub fn perturbation_sizes(width: usize, height: usize, count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count.saturating_sub(1));
    let (mut pw, mut ph) = (0usize, 0usize);
    for i in 1..count {
        let scale = (i as f64 / (2 * (count - 1)) as f64).sqrt();
        let tw = ((width as f64 * scale).ceil() as usize).clamp(1, width);
        let th = ((height as f64 * scale).ceil() as usize).clamp(1, height);
        let (mut w, mut h) = (tw.max(pw), th.max(ph));
        if w * h <= pw * ph {
            if w < width {
                w += 1;
            } else if h < height {
                h += 1;
            }
        }
        out.push((w, h));
        (pw, ph) = (w, h);
    }
    out
}

impl MockGenerator {
    pub fn generate_images(request: &GenerationRequest<'_>) -> Vec<RasterImage> {
        let cond = request.conditioning;
        let (width, height) = (cond.width(), cond.height());
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let x0 = rng.gen_range(0..width);
        let y0 = rng.gen_range(0..height);
        let base = MockSegmenter::segment_image(cond);

        let mut out = Vec::with_capacity(request.count);
        if request.count == 0 {
            return out;
        }
        out.push(cond.clone());
        for (w, h) in perturbation_sizes(width, height, request.count) {
            let shift = rng.gen_range(1..CLASS_COUNT) as u8;
            let mut pixels = cond.pixels().to_vec();
            for dy in 0..h {
                let y = (y0 + dy) % height;
                for dx in 0..w {
                    let x = (x0 + dx) % width;
                    let i = y * width + x;
                    let label = base.labels()[i].0;
                    let relabeled = (label + shift) % CLASS_COUNT as u8;
                    pixels[i] = CLASS_COLORS[relabeled as usize];
                }
            }
            out.push(RasterImage::new(width, height, pixels).expect("same dimensions"));
        }
        out
    }
}

impl Generator for MockGenerator {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError> {
        Ok(Self::generate_images(request))
    }
}

/// Mock captioner, segmenter and generator with the builtin similarity.
pub fn mock_backends() -> BackendSet {
    BackendSet {
        captioner: Arc::new(MockCaptioner::default()),
        segmenter: Arc::new(MockSegmenter),
        generator: Arc::new(MockGenerator),
        similarity: SimilarityBackend::Builtin,
    }
}
