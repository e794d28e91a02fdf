//! The SMC1 wire format and payload size accounting.
//!
//! Layout (all multi-octet integers little-endian):
//!
//! ```text
//! magic        4   "SMC1"
//! version      1   0x01
//! flags        1   bit 0 = background recolored, other bits must be zero
//! background   1   background label
//! width        2
//! height       2
//! caption_len  2   followed by caption_len Latin-1 octets
//! palette_len  1   followed by palette_len × (label, R, G, B), ascending label
//! rle_len      4   followed by rle_len octets of runs
//! ```
//!
//! A run is `label (1) + length (2)`, length in `1..=65535`. Runs walk the
//! row-major array and cross row boundaries freely. Adjacent runs only share
//! a label when the 65535 cap forces a split.

use serde::Serialize;
use thiserror::Error;

use crate::types::{
    validate_payload, Caption, ColorPalette, Label, Rgb, SegmentationArray, SemanticPayload,
    TypeError, Violation,
};

pub const MAGIC: [u8; 4] = *b"SMC1";
pub const VERSION: u8 = 0x01;
pub const FLAG_BACKGROUND_RECOLORED: u8 = 0x01;
/// Octets of fixed framing around the caption, palette and RLE blocks.
pub const HEADER_LEN: usize = 4 + 1 + 1 + 1 + 2 + 2 + 2 + 1 + 4;
pub const RUN_LEN: usize = 3;
pub const MAX_RUN: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("trailing partial run: {0} octets is not a multiple of 3")]
    PartialRun(usize),
    #[error("zero-length run at octet {0}")]
    ZeroLengthRun(usize),
    #[error("length-sum mismatch: runs cover {actual} pixels, expected {expected}")]
    LengthSumMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated payload: {0}")]
    Truncated(&'static str),
    #[error("{0} trailing octets after payload")]
    TrailingBytes(usize),
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedFlags(u8),
    #[error("caption longer than 65535 octets ({0})")]
    CaptionTooLong(usize),
    #[error("caption character {0:?} is not Latin-1 encodable")]
    CaptionNotLatin1(char),
    #[error("invalid caption: {0}")]
    InvalidCaption(TypeError),
    #[error("palette overflow: {0} entries, at most 255 allowed")]
    PaletteOverflow(usize),
    #[error("palette entries out of order at label {0}")]
    PaletteOrder(Label),
    #[error("dimension {0} exceeds 65535")]
    DimensionTooLarge(usize),
    #[error("zero dimension {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("RLE block of {0} octets exceeds the 32-bit length field")]
    RleBlockTooLarge(usize),
    #[error("invalid payload: {}", join_violations(.0))]
    InvalidPayload(Vec<Violation>),
    #[error(transparent)]
    Rle(#[from] RleError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Run-length encodes a segmentation array.
pub fn rle_encode(segmentation: &SegmentationArray) -> Vec<u8> {
    let labels = segmentation.labels();
    let mut out = Vec::new();
    let mut iter = labels.iter();
    let Some(&first) = iter.next() else {
        return out;
    };
    let (mut current, mut run) = (first, 1usize);
    for &label in iter {
        if label == current && run < MAX_RUN {
            run += 1;
        } else {
            push_run(&mut out, current, run);
            current = label;
            run = 1;
        }
    }
    push_run(&mut out, current, run);
    out
}

fn push_run(out: &mut Vec<u8>, label: Label, run: usize) {
    out.push(label.0);
    out.extend_from_slice(&(run as u16).to_le_bytes());
}

/// Expands runs back into a label sequence of exactly `expected_pixels` entries.
pub fn rle_decode(octets: &[u8], expected_pixels: usize) -> Result<Vec<Label>, RleError> {
    if !octets.len().is_multiple_of(RUN_LEN) {
        return Err(RleError::PartialRun(octets.len()));
    }
    let mut out = Vec::with_capacity(expected_pixels);
    let mut total = 0usize;
    for (i, run) in octets.chunks_exact(RUN_LEN).enumerate() {
        let len = u16::from_le_bytes([run[1], run[2]]) as usize;
        if len == 0 {
            return Err(RleError::ZeroLengthRun(i * RUN_LEN));
        }
        total += len;
        if total > expected_pixels {
            // keep summing so the error reports the full declared coverage
            let rest: usize = octets[(i + 1) * RUN_LEN..]
                .chunks_exact(RUN_LEN)
                .map(|r| u16::from_le_bytes([r[1], r[2]]) as usize)
                .sum();
            return Err(RleError::LengthSumMismatch {
                expected: expected_pixels,
                actual: total + rest,
            });
        }
        out.extend(std::iter::repeat_n(Label(run[0]), len));
    }
    if total != expected_pixels {
        return Err(RleError::LengthSumMismatch {
            expected: expected_pixels,
            actual: total,
        });
    }
    Ok(out)
}

/// Canonical SMC1 octets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedPayload(Vec<u8>);

impl EncodedPayload {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for EncodedPayload {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

fn latin1_bytes(caption: &Caption) -> Result<Vec<u8>, CodecError> {
    caption
        .as_str()
        .chars()
        .map(|c| u8::try_from(c as u32).map_err(|_| CodecError::CaptionNotLatin1(c)))
        .collect()
}

fn dim_u16(v: usize) -> Result<u16, CodecError> {
    u16::try_from(v).map_err(|_| CodecError::DimensionTooLarge(v))
}

pub fn encode_payload(payload: &SemanticPayload) -> Result<EncodedPayload, CodecError> {
    validate_payload(payload).map_err(CodecError::InvalidPayload)?;

    let caption = latin1_bytes(&payload.caption)?;
    let caption_len =
        u16::try_from(caption.len()).map_err(|_| CodecError::CaptionTooLong(caption.len()))?;
    let palette = payload.palette.entries();
    let palette_len =
        u8::try_from(palette.len()).map_err(|_| CodecError::PaletteOverflow(palette.len()))?;
    let seg = &payload.segmentation;
    let width = dim_u16(seg.width())?;
    let height = dim_u16(seg.height())?;
    let rle = rle_encode(seg);
    let rle_len = u32::try_from(rle.len()).map_err(|_| CodecError::RleBlockTooLarge(rle.len()))?;

    let mut out =
        Vec::with_capacity(HEADER_LEN + caption.len() + palette.len() * 4 + rle.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(if payload.background_recolored {
        FLAG_BACKGROUND_RECOLORED
    } else {
        0
    });
    out.push(payload.background_label.0);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&caption_len.to_le_bytes());
    out.extend_from_slice(&caption);
    out.push(palette_len);
    for &(label, color) in palette {
        out.push(label.0);
        out.extend_from_slice(&color.0);
    }
    out.extend_from_slice(&rle_len.to_le_bytes());
    out.extend_from_slice(&rle);
    Ok(EncodedPayload(out))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CodecError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CodecError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CodecError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses SMC1 octets. Accepts only the canonical form, so re-encoding the
/// result reproduces the input exactly.
pub fn decode_payload(bytes: &[u8]) -> Result<SemanticPayload, CodecError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic").map_err(|_| CodecError::BadMagic)?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let flags = r.u8("flags")?;
    if flags & !FLAG_BACKGROUND_RECOLORED != 0 {
        return Err(CodecError::ReservedFlags(flags));
    }
    let background_label = Label(r.u8("background label")?);
    let width = r.u16("width")? as usize;
    let height = r.u16("height")? as usize;
    if width == 0 || height == 0 {
        return Err(CodecError::ZeroDimension { width, height });
    }

    let caption_len = r.u16("caption length")? as usize;
    let caption_bytes = r.take(caption_len, "caption")?;
    let caption_text: String = caption_bytes.iter().map(|&b| b as char).collect();
    let caption = Caption::new(caption_text).map_err(CodecError::InvalidCaption)?;

    let palette_len = r.u8("palette length")? as usize;
    let mut entries = Vec::with_capacity(palette_len);
    let mut prev: Option<Label> = None;
    for _ in 0..palette_len {
        let e = r.take(4, "palette entry")?;
        let label = Label(e[0]);
        if prev.is_some_and(|p| p >= label) {
            return Err(CodecError::PaletteOrder(label));
        }
        prev = Some(label);
        entries.push((label, Rgb([e[1], e[2], e[3]])));
    }
    let palette = ColorPalette::new(entries).map_err(|e| match e {
        TypeError::DuplicateLabel(l) => CodecError::PaletteOrder(l),
        other => CodecError::InvalidCaption(other),
    })?;

    let rle_len = r.u32("RLE length")? as usize;
    let rle = r.take(rle_len, "RLE block")?;
    if r.pos != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - r.pos));
    }
    let labels = rle_decode(rle, width * height)?;
    let segmentation = SegmentationArray::new(width, height, labels)
        .expect("rle_decode returned exactly width*height labels");

    let payload = SemanticPayload {
        caption,
        segmentation,
        palette,
        background_label,
        background_recolored: flags & FLAG_BACKGROUND_RECOLORED != 0,
    };
    validate_payload(&payload).map_err(CodecError::InvalidPayload)?;
    Ok(payload)
}

/// Per-component payload sizes in octets. Framing octets are not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub uncompressed_image_bytes: usize,
    pub caption_bytes: usize,
    pub palette_bytes: usize,
    pub segmentation_rle_bytes: usize,
    pub total_payload_bytes: usize,
}

pub fn size_report(payload: &SemanticPayload) -> SizeReport {
    let seg = &payload.segmentation;
    let caption_bytes = payload.caption.char_count();
    let palette_bytes = payload.palette.len() * 4;
    let segmentation_rle_bytes = rle_run_count(seg) * RUN_LEN;
    SizeReport {
        uncompressed_image_bytes: seg.width() * seg.height() * 3,
        caption_bytes,
        palette_bytes,
        segmentation_rle_bytes,
        total_payload_bytes: caption_bytes + palette_bytes + segmentation_rle_bytes,
    }
}

/// Number of runs [`rle_encode`] would emit, without materializing them.
pub fn rle_run_count(segmentation: &SegmentationArray) -> usize {
    let labels = segmentation.labels();
    let mut runs = 0;
    let mut i = 0;
    while i < labels.len() {
        let label = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == label && j - i < MAX_RUN {
            j += 1;
        }
        runs += 1;
        i = j;
    }
    runs
}
