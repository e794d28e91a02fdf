//! Raster I/O for binary PPM (P6, maxval 255) and PNG.
//!
//! PPM is written byte-for-byte as `P6\n<w> <h>\n255\n` followed by the
//! packed pixels. PNG input of any color type is expanded to RGB8; alpha
//! is composited over opaque white. 16-bit PNG is rejected.

use std::fs;
use std::io::{self, Cursor, Write};
use std::path::Path;

use thiserror::Error;

use crate::types::{RasterImage, Rgb, TypeError};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("unrecognized image format")]
    UnknownFormat,
    #[error("png: {0}")]
    Png(String),
    #[error(transparent)]
    Invalid(#[from] TypeError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    /// Infers the format from a file extension (`.ppm`, `.pnm`, `.png`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ppm" | "pnm" => Some(ImageFormat::Ppm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }

    /// Detects the format from leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(b"P6") {
            Some(ImageFormat::Ppm)
        } else {
            None
        }
    }
}

/// Decodes an image from memory. Without a hint the format is sniffed.
pub fn load_image(bytes: &[u8], hint: Option<ImageFormat>) -> Result<RasterImage, ImageError> {
    let format = match hint {
        Some(f) => f,
        None => ImageFormat::sniff(bytes).ok_or(ImageError::UnknownFormat)?,
    };
    match format {
        ImageFormat::Ppm => decode_ppm(bytes),
        ImageFormat::Png => decode_png(bytes),
    }
}

/// Reads and decodes an image file. Content sniffing wins over the extension.
pub fn load_image_path(path: impl AsRef<Path>) -> Result<RasterImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let hint = ImageFormat::sniff(&bytes).or_else(|| ImageFormat::from_path(path));
    load_image(&bytes, hint)
}

/// Encodes `image` into `sink`.
pub fn save_image<W: Write>(
    image: &RasterImage,
    mut sink: W,
    format: ImageFormat,
) -> Result<(), ImageError> {
    match format {
        ImageFormat::Ppm => {
            sink.write_all(&encode_ppm(image))?;
        }
        ImageFormat::Png => {
            sink.write_all(&encode_png(image)?)?;
        }
    }
    sink.flush()?;
    Ok(())
}

/// Writes `image` to `path`, choosing the format from the extension (PPM if unknown).
pub fn save_image_path(image: &RasterImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path).unwrap_or(ImageFormat::Ppm);
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(image),
        ImageFormat::Png => encode_png(image)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_ppm(image: &RasterImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.pixel_count() * 3);
    out.extend_from_slice(header.as_bytes());
    for p in image.pixels() {
        out.extend_from_slice(&p.0);
    }
    out
}

pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>, ImageError> {
    let width = u32::try_from(image.width())
        .map_err(|_| ImageError::Png("width exceeds u32".into()))?;
    let height = u32::try_from(image.height())
        .map_err(|_| ImageError::Png("height exceeds u32".into()))?;
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| ImageError::Png(e.to_string()))?;
        writer
            .write_image_data(&image.to_rgb_bytes())
            .map_err(|e| ImageError::Png(e.to_string()))?;
        writer.finish().map_err(|e| ImageError::Png(e.to_string()))?;
    }
    Ok(out)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    if !bytes.starts_with(b"P6") {
        return Err(ImageError::MalformedHeader("missing P6 magic".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedBitDepth(format!("maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImageError::MalformedHeader("dimensions overflow".into()))?;
    let body = &bytes[cur.pos..];
    if body.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            actual: body.len(),
        });
    }
    Ok(RasterImage::from_rgb_bytes(
        width,
        height,
        &body[..expected],
    )?)
}

fn over_white(c: u8, a: u8) -> u8 {
    let (c, a) = (c as u32, a as u32);
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}

fn decode_png(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedBitDepth(format!("{depth:?}")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];

    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &data[y * info.line_size..(y + 1) * info.line_size];
        match color {
            png::ColorType::Rgb => {
                pixels.extend(row.chunks_exact(3).take(w).map(|c| Rgb([c[0], c[1], c[2]])))
            }
            png::ColorType::Rgba => pixels.extend(row.chunks_exact(4).take(w).map(|c| {
                Rgb([
                    over_white(c[0], c[3]),
                    over_white(c[1], c[3]),
                    over_white(c[2], c[3]),
                ])
            })),
            png::ColorType::Grayscale => pixels.extend(row.iter().take(w).map(|&v| Rgb([v, v, v]))),
            png::ColorType::GrayscaleAlpha => pixels.extend(row.chunks_exact(2).take(w).map(|c| {
                let v = over_white(c[0], c[1]);
                Rgb([v, v, v])
            })),
            png::ColorType::Indexed => {
                return Err(ImageError::Png("indexed color was not expanded".into()))
            }
        }
    }
    Ok(RasterImage::new(w, h, pixels)?)
}

fn png_error(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(io) if io.kind() == io::ErrorKind::UnexpectedEof => {
            ImageError::Png("truncated pixel data".into())
        }
        other => ImageError::Png(other.to_string()),
    }
}
