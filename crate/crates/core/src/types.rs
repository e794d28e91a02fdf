//! Domain types shared by the transmitter, the receiver and the wire codec.
//!
//! Every constructor validates its invariants, so a value of any of these
//! types is well-formed once it exists. [`validate_payload`] checks the
//! cross-field invariants of a [`SemanticPayload`] that no single
//! constructor can see.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Errors raised when constructing a domain value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("length mismatch: expected {expected} elements for {width}x{height}, got {actual}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("caption is empty")]
    EmptyCaption,
    #[error("duplicate palette label {0}")]
    DuplicateLabel(Label),
}

/// 8-bit segmentation class identifier. `0` is background by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label(pub u8);

impl Label {
    pub const BACKGROUND: Label = Label(0);
}

impl From<u8> for Label {
    fn from(v: u8) -> Self {
        Label(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An 8-bit sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    pub fn r(self) -> u8 {
        self.0[0]
    }

    pub fn g(self) -> u8 {
        self.0[1]
    }

    pub fn b(self) -> u8 {
        self.0[2]
    }

    /// Squared euclidean distance in RGB space.
    pub fn distance_sq(self, other: Rgb) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| {
                let d = a as i32 - b as i32;
                (d * d) as u32
            })
            .sum()
    }

    /// Largest per-channel absolute difference.
    pub fn max_channel_distance(self, other: Rgb) -> u8 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), TypeError> {
    if width == 0 || height == 0 {
        return Err(TypeError::EmptyDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .ok_or(TypeError::LengthMismatch {
            width,
            height,
            expected: usize::MAX,
            actual: len,
        })?;
    if expected != len {
        return Err(TypeError::LengthMismatch {
            width,
            height,
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Row-major RGB8 raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, TypeError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// An image filled with a single color.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, TypeError> {
        let len = width.saturating_mul(height);
        Self::new(width, height, vec![color; len])
    }

    /// Builds an image from packed `RGBRGB...` bytes.
    pub fn from_rgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, TypeError> {
        if !bytes.len().is_multiple_of(3) {
            return Err(TypeError::LengthMismatch {
                width,
                height,
                expected: width.saturating_mul(height).saturating_mul(3),
                actual: bytes.len(),
            });
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| Rgb([c[0], c[1], c[2]]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Rgb> {
        if x < self.width && y < self.height {
            Some(self.pixels[y * self.width + x])
        } else {
            None
        }
    }

    /// Packed `RGBRGB...` bytes, row-major.
    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.0).collect()
    }

    pub fn same_dimensions(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// Row-major grid of per-pixel class labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentationArray {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl SegmentationArray {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self, TypeError> {
        check_dims(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_raw(width: usize, height: usize, labels: &[u8]) -> Result<Self, TypeError> {
        Self::new(width, height, labels.iter().copied().map(Label).collect())
    }

    pub fn uniform(width: usize, height: usize, label: Label) -> Result<Self, TypeError> {
        Self::new(width, height, vec![label; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<Label> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Label> {
        if x < self.width && y < self.height {
            Some(self.labels[y * self.width + x])
        } else {
            None
        }
    }

    pub fn same_shape(&self, other: &SegmentationArray) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Distinct labels present in the array, ascending.
    pub fn distinct_labels(&self) -> Vec<Label> {
        let mut seen = [false; 256];
        for l in &self.labels {
            seen[l.0 as usize] = true;
        }
        (0..=255u8)
            .filter(|&v| seen[v as usize])
            .map(Label)
            .collect()
    }
}

/// Free-text image description. Non-empty after trimming whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Caption(String);

impl Caption {
    pub fn new(text: impl Into<String>) -> Result<Self, TypeError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TypeError::EmptyCaption);
        }
        Ok(Caption(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Number of characters, i.e. the octet count under Latin-1.
    pub fn char_count(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_latin1(&self) -> bool {
        self.0.chars().all(|c| (c as u32) <= 0xFF)
    }
}

impl fmt::Display for Caption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Label to mean-color mapping. Entries are kept in ascending label order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ColorPalette {
    entries: Vec<(Label, Rgb)>,
}

impl ColorPalette {
    /// Builds a palette from entries in any order; duplicate labels are rejected.
    pub fn new(entries: impl IntoIterator<Item = (Label, Rgb)>) -> Result<Self, TypeError> {
        let mut map = BTreeMap::new();
        for (label, color) in entries {
            if map.insert(label, color).is_some() {
                return Err(TypeError::DuplicateLabel(label));
            }
        }
        Ok(Self {
            entries: map.into_iter().collect(),
        })
    }

    pub fn entries(&self) -> &[(Label, Rgb)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: Label) -> Option<Rgb> {
        self.entries
            .binary_search_by_key(&label, |(l, _)| *l)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn contains(&self, label: Label) -> bool {
        self.get(label).is_some()
    }

    /// Returns a copy with `label`'s color replaced. `None` if the label is absent.
    pub fn with_color(&self, label: Label, color: Rgb) -> Option<Self> {
        let idx = self
            .entries
            .binary_search_by_key(&label, |(l, _)| *l)
            .ok()?;
        let mut entries = self.entries.clone();
        entries[idx].1 = color;
        Some(Self { entries })
    }

    /// Dense 256-entry lookup table.
    pub(crate) fn lookup_table(&self) -> [Option<Rgb>; 256] {
        let mut table = [None; 256];
        for &(l, c) in &self.entries {
            table[l.0 as usize] = Some(c);
        }
        table
    }
}

/// The transmitted unit: everything the receiver gets instead of the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticPayload {
    pub caption: Caption,
    pub segmentation: SegmentationArray,
    pub palette: ColorPalette,
    pub background_label: Label,
    pub background_recolored: bool,
}

/// A single failed payload invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Segmentation length differs from width·height.
    LengthMismatch { expected: usize, actual: usize },
    /// A label appears in the segmentation (first at `pixel`) but not in the palette.
    UncoveredLabel { label: Label, pixel: usize },
    /// Recoloring flag is set but the palette has no background entry.
    MissingBackgroundEntry { label: Label },
    /// Recoloring flag is set but the background entry is not white.
    BackgroundNotWhite { label: Label, color: Rgb },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Violation::UncoveredLabel { label, pixel } => {
                write!(f, "uncovered label {label} (first at pixel {pixel})")
            }
            Violation::MissingBackgroundEntry { label } => {
                write!(f, "background recolored but label {label} has no palette entry")
            }
            Violation::BackgroundNotWhite { label, color } => write!(
                f,
                "background recolored but label {label} is ({}, {}, {})",
                color.r(),
                color.g(),
                color.b()
            ),
        }
    }
}

/// Checks every [`SemanticPayload`] invariant. Returns all violations found.
pub fn validate_payload(payload: &SemanticPayload) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let seg = &payload.segmentation;

    let expected = seg.width.saturating_mul(seg.height);
    if seg.labels.len() != expected {
        violations.push(Violation::LengthMismatch {
            expected,
            actual: seg.labels.len(),
        });
    }

    let table = payload.palette.lookup_table();
    let mut reported = [false; 256];
    for (pixel, label) in seg.labels.iter().enumerate() {
        let idx = label.0 as usize;
        if table[idx].is_none() && !reported[idx] {
            reported[idx] = true;
            violations.push(Violation::UncoveredLabel {
                label: *label,
                pixel,
            });
        }
    }

    if payload.background_recolored {
        let bg = payload.background_label;
        match payload.palette.get(bg) {
            None => violations.push(Violation::MissingBackgroundEntry { label: bg }),
            Some(c) if c != Rgb::WHITE => {
                violations.push(Violation::BackgroundNotWhite { label: bg, color: c })
            }
            Some(_) => {}
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
