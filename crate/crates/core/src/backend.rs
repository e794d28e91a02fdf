//! Model backend contracts. Real models live behind a gateway; the
//! [`crate::mock`] module provides deterministic stand-ins.

use std::sync::Arc;

use thiserror::Error;

use crate::types::{Caption, RasterImage, SegmentationArray};

/// A backend call failed. `message` is free text from the backend.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind}: {message}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendErrorKind {
    /// Could not reach the backend (after any retries).
    Transport,
    /// The backend answered with an error status.
    Status(u16),
    /// The response did not match the expected schema.
    Schema,
    /// The response was well-formed but violates the call contract.
    Contract,
    /// Invalid request rejected before it was sent.
    InvalidRequest,
}

impl std::fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendErrorKind::Transport => f.write_str("transport error"),
            BackendErrorKind::Status(s) => write!(f, "status {s}"),
            BackendErrorKind::Schema => f.write_str("schema violation"),
            BackendErrorKind::Contract => f.write_str("contract violation"),
            BackendErrorKind::InvalidRequest => f.write_str("invalid request"),
        }
    }
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

pub trait Captioner: Send + Sync {
    fn caption(&self, image: &RasterImage) -> Result<Caption, BackendError>;

    /// `false` if the backend cannot take overlapping calls; the pipeline
    /// then serializes them.
    fn concurrent(&self) -> bool {
        true
    }
}

pub trait Segmenter: Send + Sync {
    /// Must return an array with the image's dimensions.
    fn segment(&self, image: &RasterImage) -> Result<SegmentationArray, BackendError>;

    fn concurrent(&self) -> bool {
        true
    }
}

/// Inputs for one generation batch.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub conditioning: &'a RasterImage,
    pub caption: &'a Caption,
    pub count: usize,
    pub negative_prompt: &'a str,
    pub seed: u64,
}

pub trait Generator: Send + Sync {
    /// Must return exactly `request.count` images sized like the conditioning image.
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Vec<RasterImage>, BackendError>;
}

pub trait TextSimilarity: Send + Sync {
    /// Similarity of two (already preprocessed) caption texts.
    fn similarity(&self, reference: &str, candidate: &str) -> Result<f64, BackendError>;
}

/// How caption similarity is computed.
#[derive(Clone, Default)]
pub enum SimilarityBackend {
    /// Token-level F1, always available.
    #[default]
    Builtin,
    /// A remote scorer; on failure optionally falls back to the builtin.
    External {
        scorer: Arc<dyn TextSimilarity>,
        fallback_to_builtin: bool,
    },
}

impl std::fmt::Debug for SimilarityBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimilarityBackend::Builtin => f.write_str("Builtin"),
            SimilarityBackend::External {
                fallback_to_builtin,
                ..
            } => f
                .debug_struct("External")
                .field("fallback_to_builtin", fallback_to_builtin)
                .finish_non_exhaustive(),
        }
    }
}

/// The four model roles used by the transmitter and the receiver.
#[derive(Clone)]
pub struct BackendSet {
    pub captioner: Arc<dyn Captioner>,
    pub segmenter: Arc<dyn Segmenter>,
    pub generator: Arc<dyn Generator>,
    pub similarity: SimilarityBackend,
}
