//! Color palette extraction, colored-segmented rendering and background recoloring.

use thiserror::Error;

use crate::types::{ColorPalette, Label, RasterImage, Rgb, SegmentationArray};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PaletteError {
    #[error("dimension mismatch: image {image_width}x{image_height}, segmentation {seg_width}x{seg_height}")]
    DimensionMismatch {
        image_width: usize,
        image_height: usize,
        seg_width: usize,
        seg_height: usize,
    },
    #[error("uncovered label {0}")]
    UncoveredLabel(Label),
    #[error("background label absent: {0}")]
    BackgroundAbsent(Label),
}

/// Mean RGB per label, each channel rounded half-up.
pub fn extract_palette(
    image: &RasterImage,
    segmentation: &SegmentationArray,
) -> Result<ColorPalette, PaletteError> {
    if !image.same_dimensions(segmentation.width(), segmentation.height()) {
        return Err(PaletteError::DimensionMismatch {
            image_width: image.width(),
            image_height: image.height(),
            seg_width: segmentation.width(),
            seg_height: segmentation.height(),
        });
    }
    let mut sums = [[0u64; 3]; 256];
    let mut counts = [0u64; 256];
    for (px, label) in image.pixels().iter().zip(segmentation.labels()) {
        let i = label.0 as usize;
        counts[i] += 1;
        for (sum, &v) in sums[i].iter_mut().zip(&px.0) {
            *sum += v as u64;
        }
    }
    let entries = (0..256usize).filter(|&i| counts[i] > 0).map(|i| {
        let n = counts[i];
        let mean = |s: u64| ((2 * s + n) / (2 * n)) as u8;
        (
            Label(i as u8),
            Rgb([mean(sums[i][0]), mean(sums[i][1]), mean(sums[i][2])]),
        )
    });
    Ok(ColorPalette::new(entries).expect("labels enumerated once each"))
}

/// Paints every pixel with its label's palette color.
pub fn render_colored_segmented(
    segmentation: &SegmentationArray,
    palette: &ColorPalette,
) -> Result<RasterImage, PaletteError> {
    let table = palette.lookup_table();
    let pixels = segmentation
        .labels()
        .iter()
        .map(|l| table[l.0 as usize].ok_or(PaletteError::UncoveredLabel(*l)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(
        RasterImage::new(segmentation.width(), segmentation.height(), pixels)
            .expect("segmentation dimensions are valid"),
    )
}

/// Sets the background entry to white, leaving every other entry untouched.
pub fn recolor_background(
    palette: &ColorPalette,
    background_label: Label,
) -> Result<ColorPalette, PaletteError> {
    palette
        .with_color(background_label, Rgb::WHITE)
        .ok_or(PaletteError::BackgroundAbsent(background_label))
}

/// Smallest max-channel distance between the background color and any other
/// entry. `None` when the palette has no background entry or no other entries.
///
/// A small value flags the low-contrast case where a generator is likely to
/// lose the object outline.
pub fn background_contrast(palette: &ColorPalette, background_label: Label) -> Option<u8> {
    let bg = palette.get(background_label)?;
    palette
        .entries()
        .iter()
        .filter(|(l, _)| *l != background_label)
        .map(|(_, c)| bg.max_channel_distance(*c))
        .min()
}

/// Labels whose color lies within `min_distance` (max-channel) of the background.
pub fn low_contrast_labels(
    palette: &ColorPalette,
    background_label: Label,
    min_distance: u8,
) -> Vec<Label> {
    let Some(bg) = palette.get(background_label) else {
        return Vec::new();
    };
    palette
        .entries()
        .iter()
        .filter(|(l, c)| *l != background_label && bg.max_channel_distance(*c) < min_distance)
        .map(|(l, _)| *l)
        .collect()
}
