//! Image transmission by semantic features.
//!
//! The transmitter reduces an image to a caption, a per-pixel segmentation
//! array and a per-label mean color palette, and serializes them in the
//! compact SMC1 format. The receiver renders the colored-segmented image,
//! asks a generator for candidate images, re-extracts features from each
//! candidate, and keeps the one whose features best match what it received.

pub mod backend;
pub mod classes;
pub mod codec;
pub mod image_io;
pub mod mock;
pub mod palette;
pub mod pipeline;
pub mod scoring;
pub mod types;

pub use backend::{
    BackendError, BackendErrorKind, BackendSet, Captioner, GenerationRequest, Generator,
    Segmenter, SimilarityBackend, TextSimilarity,
};
pub use codec::{
    decode_payload, encode_payload, rle_decode, rle_encode, size_report, CodecError,
    EncodedPayload, RleError, SizeReport,
};
pub use image_io::{load_image, load_image_path, save_image, save_image_path, ImageError, ImageFormat};
pub use palette::{extract_palette, recolor_background, render_colored_segmented, PaletteError};
pub use pipeline::{receive, transmit, PipelineError, Reception, ReceiverConfig, TransmitterConfig};
pub use scoring::{
    kronecker, score_candidates, select_output, smr, smr_foreground, text_similarity, tokenize,
    CandidateFeatures, ScoredCandidate, ScoringConfig, ScoringError,
};
pub use types::{
    validate_payload, Caption, ColorPalette, Label, RasterImage, Rgb, SegmentationArray,
    SemanticPayload, TypeError, Violation,
};
