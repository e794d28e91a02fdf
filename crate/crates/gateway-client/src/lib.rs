//! Client for the model gateway, protocol v1.
//!
//! [`GatewayClient`] implements the captioner, segmenter, generator and text
//! similarity backends of `semcomm-core` over HTTP/1.1 with JSON bodies.
//! Images travel as base64 PNG; segmentations travel in the SMC1 run format.

pub mod protocol;

use std::io::Read;
use std::sync::Arc;
use std::time::Duration;

use semcomm_core::image_io::encode_png;
use semcomm_core::{
    load_image, rle_decode, BackendError, BackendErrorKind, BackendSet, Caption, Captioner,
    GenerationRequest, Generator, ImageFormat, RasterImage, SegmentationArray, Segmenter,
    SimilarityBackend, TextSimilarity,
};
use serde::Serialize;
use thiserror::Error;

use protocol::*;

pub const URL_ENV: &str = "SEMCOMM_GATEWAY_URL";
pub const TOKEN_ENV: &str = "SEMCOMM_GATEWAY_TOKEN";
pub const TIMEOUT_ENV: &str = "SEMCOMM_GATEWAY_TIMEOUT";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_RETRIES: u32 = 2;
pub const REQUEST_ID_HEADER: &str = "X-Request-Id";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("gateway URL is empty")]
    EmptyUrl,
    #[error("gateway URL must start with http:// (got {0:?})")]
    UnsupportedScheme(String),
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("no gateway URL: pass one explicitly or set {URL_ENV}")]
    MissingUrl,
    #[error("{TIMEOUT_ENV} is not a positive number of seconds: {0:?}")]
    BadTimeout(String),
}

/// Where and how to reach a gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayEndpoint {
    base_url: String,
    timeout: Duration,
    retries: u32,
    token: Option<String>,
}

impl GatewayEndpoint {
    pub fn new(base_url: impl Into<String>) -> Result<Self, EndpointError> {
        let base_url = base_url.into().trim_end_matches('/').to_owned();
        if base_url.is_empty() {
            return Err(EndpointError::EmptyUrl);
        }
        if !base_url.starts_with("http://") {
            return Err(EndpointError::UnsupportedScheme(base_url));
        }
        Ok(Self {
            base_url,
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
            token: None,
        })
    }

    /// Builds from `url` if given, else from the environment. Token and
    /// timeout always come from the environment when set.
    pub fn from_env(url: Option<&str>) -> Result<Self, EndpointError> {
        let env_url = std::env::var(URL_ENV).ok();
        let url = url
            .map(str::to_owned)
            .or(env_url)
            .filter(|u| !u.is_empty())
            .ok_or(EndpointError::MissingUrl)?;
        let mut ep = Self::new(url)?;
        if let Ok(t) = std::env::var(TOKEN_ENV) {
            if !t.is_empty() {
                ep.token = Some(t);
            }
        }
        if let Ok(raw) = std::env::var(TIMEOUT_ENV) {
            let secs: f64 = raw
                .trim()
                .parse()
                .map_err(|_| EndpointError::BadTimeout(raw.clone()))?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(EndpointError::BadTimeout(raw));
            }
            ep.timeout = Duration::from_secs_f64(secs);
        }
        Ok(ep)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, EndpointError> {
        if timeout.is_zero() {
            return Err(EndpointError::ZeroTimeout);
        }
        self.timeout = timeout;
        Ok(self)
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }
}

/// Calls are independent and may overlap; the only shared state is the
/// agent's connection pool.
#[derive(Debug, Clone)]
pub struct GatewayClient {
    endpoint: GatewayEndpoint,
    agent: ureq::Agent,
    backoff: Duration,
}

fn err(kind: BackendErrorKind, message: impl Into<String>) -> BackendError {
    BackendError::new(kind, message)
}

fn schema(message: impl Into<String>) -> BackendError {
    err(BackendErrorKind::Schema, message)
}

fn contract(message: impl Into<String>) -> BackendError {
    err(BackendErrorKind::Contract, message)
}

fn png_b64(image: &RasterImage) -> Result<String, BackendError> {
    let png = encode_png(image).map_err(|e| err(BackendErrorKind::InvalidRequest, e.to_string()))?;
    Ok(encode_b64(&png))
}

impl GatewayClient {
    pub const DEFAULT_MAX_CONNECTIONS: usize = 8;

    pub fn new(endpoint: GatewayEndpoint) -> Self {
        Self::with_max_connections(endpoint, Self::DEFAULT_MAX_CONNECTIONS)
    }

    pub fn with_max_connections(endpoint: GatewayEndpoint, max_connections: usize) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(endpoint.timeout)
            .max_idle_connections(max_connections.max(1))
            .max_idle_connections_per_host(max_connections.max(1))
            .build();
        Self {
            endpoint,
            agent,
            backoff: Duration::from_millis(200),
        }
    }

    /// Base delay between attempts; attempt `n` waits `n × backoff`.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> &GatewayEndpoint {
        &self.endpoint
    }

    /// POSTs `body` and returns the 2xx response bytes. Transport failures
    /// and 503 are retried `retries` times under one request ID.
    fn post<T: Serialize>(&self, path: &str, body: &T) -> Result<Vec<u8>, BackendError> {
        let body = serde_json::to_vec(body).map_err(|e| err(BackendErrorKind::InvalidRequest, e.to_string()))?;
        let url = format!("{}{}", self.endpoint.base_url, path);
        let request_id = uuid::Uuid::new_v4().to_string();
        let mut last = String::new();
        for attempt in 0..=self.endpoint.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * attempt);
            }
            let mut req = self
                .agent
                .post(&url)
                .set("Content-Type", "application/json")
                .set(REQUEST_ID_HEADER, &request_id);
            if let Some(t) = &self.endpoint.token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            match req.send_bytes(&body) {
                Ok(resp) => return read_body(resp),
                Err(ureq::Error::Status(503, resp)) => {
                    last = format!("503 from {path}: {}", describe_error(resp));
                }
                Err(ureq::Error::Status(code, resp)) => {
                    return Err(err(
                        BackendErrorKind::Status(code),
                        format!("{path}: {}", describe_error(resp)),
                    ));
                }
                Err(ureq::Error::Transport(t)) => last = format!("{path}: {t}"),
            }
        }
        Err(err(
            BackendErrorKind::Transport,
            format!(
                "gave up after {} attempts; last: {last}",
                self.endpoint.retries + 1
            ),
        ))
    }

    pub fn remote_caption(&self, image: &RasterImage) -> Result<Caption, BackendError> {
        let b64 = png_b64(image)?;
        let bytes = self.post(CAPTION_PATH, &ImageRequest { image_png_b64: &b64 })?;
        let resp = parse_caption(&bytes).map_err(schema)?;
        Caption::new(resp.caption).map_err(|_| contract("empty caption"))
    }

    pub fn remote_segment(&self, image: &RasterImage) -> Result<SegmentationArray, BackendError> {
        let b64 = png_b64(image)?;
        let bytes = self.post(SEGMENT_PATH, &ImageRequest { image_png_b64: &b64 })?;
        let resp = parse_segment(&bytes).map_err(schema)?;
        if (resp.width, resp.height) != (image.width(), image.height()) {
            return Err(contract(format!(
                "segmentation dimension mismatch: got {}x{}, image is {}x{}",
                resp.width,
                resp.height,
                image.width(),
                image.height()
            )));
        }
        let labels = rle_decode(&resp.rle, resp.width * resp.height)
            .map_err(|e| schema(format!("rle_b64: {e}")))?;
        SegmentationArray::new(resp.width, resp.height, labels).map_err(|e| schema(e.to_string()))
    }

    pub fn remote_generate(&self, request: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError> {
        if request.count == 0 {
            return Err(err(BackendErrorKind::InvalidRequest, "K must be at least 1"));
        }
        let cond = request.conditioning;
        let b64 = png_b64(cond)?;
        let bytes = self.post(
            GENERATE_PATH,
            &GenerateRequest {
                image_png_b64: &b64,
                caption: request.caption.as_str(),
                k: request.count,
                negative_prompt: request.negative_prompt,
                seed: request.seed,
            },
        )?;
        let resp = parse_generate(&bytes).map_err(schema)?;
        if resp.images_png.len() != request.count {
            return Err(contract(format!(
                "candidate count mismatch: requested {}, got {}",
                request.count,
                resp.images_png.len()
            )));
        }
        resp.images_png
            .iter()
            .enumerate()
            .map(|(i, png)| {
                let img = load_image(png, Some(ImageFormat::Png))
                    .map_err(|e| schema(format!("images_png_b64[{i}]: {e}")))?;
                if !img.same_dimensions(cond.width(), cond.height()) {
                    return Err(contract(format!(
                        "candidate dimension mismatch: image {i} is {}x{}, expected {}x{}",
                        img.width(),
                        img.height(),
                        cond.width(),
                        cond.height()
                    )));
                }
                Ok(img)
            })
            .collect()
    }

    /// Full precision/recall/F1 triple as reported by the gateway.
    pub fn remote_similarity_scores(
        &self,
        reference: &str,
        candidate: &str,
    ) -> Result<SimilarityResponse, BackendError> {
        let bytes = self.post(SIMILARITY_PATH, &SimilarityRequest { reference, candidate })?;
        parse_similarity(&bytes).map_err(schema)
    }

    /// F1 clamped to [0, 1].
    pub fn remote_similarity(&self, reference: &str, candidate: &str) -> Result<f64, BackendError> {
        let f1 = self.remote_similarity_scores(reference, candidate)?.f1;
        if f1.is_nan() {
            return Err(schema("f1 is NaN"));
        }
        Ok(f1.clamp(0.0, 1.0))
    }
}

fn read_body(resp: ureq::Response) -> Result<Vec<u8>, BackendError> {
    let mut out = Vec::new();
    resp.into_reader()
        .read_to_end(&mut out)
        .map_err(|e| err(BackendErrorKind::Transport, format!("reading response: {e}")))?;
    Ok(out)
}

fn describe_error(resp: ureq::Response) -> String {
    let status = resp.status();
    let text = resp.status_text().to_owned();
    match read_body(resp).ok().as_deref().and_then(parse_error) {
        Some(e) => format!("{}: {}", e.code, e.message),
        None => format!("{status} {text}"),
    }
}

impl Captioner for GatewayClient {
    fn caption(&self, image: &RasterImage) -> Result<Caption, BackendError> {
        self.remote_caption(image)
    }
}

impl Segmenter for GatewayClient {
    fn segment(&self, image: &RasterImage) -> Result<SegmentationArray, BackendError> {
        self.remote_segment(image)
    }
}

impl Generator for GatewayClient {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError> {
        self.remote_generate(request)
    }
}

impl TextSimilarity for GatewayClient {
    fn similarity(&self, reference: &str, candidate: &str) -> Result<f64, BackendError> {
        self.remote_similarity(reference, candidate)
    }
}

/// All four roles served by one gateway.
pub fn gateway_backends(client: GatewayClient, fallback_to_builtin: bool) -> BackendSet {
    let c = Arc::new(client);
    BackendSet {
        captioner: c.clone(),
        segmenter: c.clone(),
        generator: c.clone(),
        similarity: SimilarityBackend::External {
            scorer: c,
            fallback_to_builtin,
        },
    }
}
