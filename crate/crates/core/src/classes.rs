//! The 21-class label set (background + 20 objects) and its reference colors.

use crate::types::{Label, Rgb};

pub const CLASS_COUNT: usize = 21;

/// Human-readable class names indexed by label value.
pub const CLASS_NAMES: [&str; CLASS_COUNT] = [
    "background",
    "airplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "table",
    "dog",
    "horse",
    "motorbike",
    "person",
    "potted plant",
    "sheep",
    "sofa",
    "train",
    "tv",
];

/// Reference color per label. Background is white; objects use the usual
/// bit-interleaved segmentation colormap.
pub const CLASS_COLORS: [Rgb; CLASS_COUNT] = [
    Rgb::new(255, 255, 255),
    Rgb::new(128, 0, 0),
    Rgb::new(0, 128, 0),
    Rgb::new(128, 128, 0),
    Rgb::new(0, 0, 128),
    Rgb::new(128, 0, 128),
    Rgb::new(0, 128, 128),
    Rgb::new(128, 128, 128),
    Rgb::new(64, 0, 0),
    Rgb::new(192, 0, 0),
    Rgb::new(64, 128, 0),
    Rgb::new(192, 128, 0),
    Rgb::new(64, 0, 128),
    Rgb::new(192, 0, 128),
    Rgb::new(64, 128, 128),
    Rgb::new(192, 128, 128),
    Rgb::new(0, 64, 0),
    Rgb::new(128, 64, 0),
    Rgb::new(0, 192, 0),
    Rgb::new(128, 192, 0),
    Rgb::new(0, 64, 128),
];

/// Name for a label; labels outside the class list render as `label<N>`.
pub fn class_name(label: Label) -> String {
    CLASS_NAMES
        .get(label.0 as usize)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("label{}", label.0))
}

pub fn class_color(label: Label) -> Option<Rgb> {
    CLASS_COLORS.get(label.0 as usize).copied()
}

/// Label of the closest reference color; ties go to the lowest label.
pub fn nearest_class(color: Rgb) -> Label {
    let mut best = (u32::MAX, 0u8);
    for (i, c) in CLASS_COLORS.iter().enumerate() {
        let d = color.distance_sq(*c);
        if d < best.0 {
            best = (d, i as u8);
        }
    }
    Label(best.1)
}
