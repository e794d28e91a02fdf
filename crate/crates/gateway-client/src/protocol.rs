//! Protocol v1 message bodies.
//!
//! Requests serialize with fields in declaration order, so identical inputs
//! give identical bytes. Responses are parsed into loosely typed JSON first
//! and then checked field by field, so a malformed reply never yields a
//! partially filled value.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Serialize;
use serde_json::{Map, Value};

pub const CAPTION_PATH: &str = "/v1/caption";
pub const SEGMENT_PATH: &str = "/v1/segment";
pub const GENERATE_PATH: &str = "/v1/generate";
pub const SIMILARITY_PATH: &str = "/v1/similarity";

#[derive(Debug, Serialize)]
pub struct ImageRequest<'a> {
    pub image_png_b64: &'a str,
}

#[derive(Debug, Serialize)]
pub struct GenerateRequest<'a> {
    pub image_png_b64: &'a str,
    pub caption: &'a str,
    pub k: usize,
    pub negative_prompt: &'a str,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SimilarityRequest<'a> {
    pub reference: &'a str,
    pub candidate: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionResponse {
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResponse {
    pub width: usize,
    pub height: usize,
    pub rle: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateResponse {
    pub images_png: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityResponse {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Parsed `{"error": {"code", "message"}}` body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub fn encode_b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

fn object(bytes: &[u8]) -> Result<Map<String, Value>, String> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("response is not a JSON object".into()),
        Err(e) => Err(format!("response is not JSON: {e}")),
    }
}

fn field<'a>(m: &'a Map<String, Value>, name: &str) -> Result<&'a Value, String> {
    m.get(name).ok_or_else(|| format!("missing field `{name}`"))
}

fn string_field<'a>(m: &'a Map<String, Value>, name: &str) -> Result<&'a str, String> {
    field(m, name)?
        .as_str()
        .ok_or_else(|| format!("field `{name}` is not a string"))
}

fn number_field(m: &Map<String, Value>, name: &str) -> Result<f64, String> {
    field(m, name)?
        .as_f64()
        .ok_or_else(|| format!("field `{name}` is not a number"))
}

fn dimension_field(m: &Map<String, Value>, name: &str) -> Result<usize, String> {
    field(m, name)?
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| format!("field `{name}` is not a non-negative integer"))
}

fn decode_b64(s: &str, what: &str) -> Result<Vec<u8>, String> {
    B64.decode(s).map_err(|e| format!("invalid base64 in `{what}`: {e}"))
}

pub fn parse_caption(bytes: &[u8]) -> Result<CaptionResponse, String> {
    let m = object(bytes)?;
    Ok(CaptionResponse {
        caption: string_field(&m, "caption")?.to_owned(),
    })
}

pub fn parse_segment(bytes: &[u8]) -> Result<SegmentResponse, String> {
    let m = object(bytes)?;
    Ok(SegmentResponse {
        width: dimension_field(&m, "width")?,
        height: dimension_field(&m, "height")?,
        rle: decode_b64(string_field(&m, "rle_b64")?, "rle_b64")?,
    })
}

pub fn parse_generate(bytes: &[u8]) -> Result<GenerateResponse, String> {
    let m = object(bytes)?;
    let list = field(&m, "images_png_b64")?
        .as_array()
        .ok_or("field `images_png_b64` is not an array")?;
    let images_png = list
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = v
                .as_str()
                .ok_or_else(|| format!("images_png_b64[{i}] is not a string"))?;
            decode_b64(s, &format!("images_png_b64[{i}]"))
        })
        .collect::<Result<_, _>>()?;
    Ok(GenerateResponse { images_png })
}

pub fn parse_similarity(bytes: &[u8]) -> Result<SimilarityResponse, String> {
    let m = object(bytes)?;
    Ok(SimilarityResponse {
        precision: number_field(&m, "precision")?,
        recall: number_field(&m, "recall")?,
        f1: number_field(&m, "f1")?,
    })
}

/// `None` if the body is not a protocol error object.
pub fn parse_error(bytes: &[u8]) -> Option<ErrorBody> {
    let m = object(bytes).ok()?;
    let e = m.get("error")?.as_object()?;
    Some(ErrorBody {
        code: e.get("code")?.as_str()?.to_owned(),
        message: e.get("message")?.as_str()?.to_owned(),
    })
}
