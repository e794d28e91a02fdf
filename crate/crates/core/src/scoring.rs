//! Candidate scoring: segmentation matching rate (SMR), its foreground-only
//! variant, caption similarity, and argmax selection.
//!
//! SMR is the fraction of pixel positions whose labels agree:
//! `SMR = (1/N) · Σ δ(p_i, q_i)` where δ is the Kronecker delta. The count
//! is accumulated as an integer and divided once.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::backend::{BackendError, SimilarityBackend};
use crate::types::{Caption, Label, RasterImage, SegmentationArray, SemanticPayload};

/// The default stop-word list shipped with the crate.
pub const DEFAULT_STOP_WORDS: &str = include_str!("../data/stopwords-v1.txt");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("dimension mismatch: reference {ref_width}x{ref_height}, candidate {cand_width}x{cand_height}")]
    DimensionMismatch {
        ref_width: usize,
        ref_height: usize,
        cand_width: usize,
        cand_height: usize,
    },
    #[error("reference has no foreground pixels; foreground SMR is undefined")]
    AllBackground,
    #[error("smr_weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error("similarity backend returned a non-finite score")]
    NonFiniteScore,
    #[error("no candidates to select from")]
    Empty,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("candidate {index}: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<ScoringError>,
    },
}

/// Parses a stop-word file: one token per line, `#` starts a comment line.
pub fn parse_stop_words(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    /// Weight of SMR in the combined score; text similarity gets `1 - smr_weight`.
    pub smr_weight: f64,
    pub remove_stop_words: bool,
    pub foreground_only_smr: bool,
    pub stop_words: BTreeSet<String>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            smr_weight: 0.5,
            remove_stop_words: true,
            foreground_only_smr: false,
            stop_words: parse_stop_words(DEFAULT_STOP_WORDS),
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if (0.0..=1.0).contains(&self.smr_weight) {
            Ok(())
        } else {
            Err(ScoringError::InvalidWeight(self.smr_weight))
        }
    }

    pub fn combine(&self, smr: f64, text_similarity: f64) -> f64 {
        self.smr_weight * smr + (1.0 - self.smr_weight) * text_similarity
    }
}

#[inline]
pub fn kronecker(x: Label, y: Label) -> u8 {
    u8::from(x == y)
}

fn check_shape(reference: &SegmentationArray, candidate: &SegmentationArray) -> Result<(), ScoringError> {
    if reference.same_shape(candidate) {
        Ok(())
    } else {
        Err(ScoringError::DimensionMismatch {
            ref_width: reference.width(),
            ref_height: reference.height(),
            cand_width: candidate.width(),
            cand_height: candidate.height(),
        })
    }
}

/// Segmentation matching rate over all pixels.
pub fn smr(reference: &SegmentationArray, candidate: &SegmentationArray) -> Result<f64, ScoringError> {
    check_shape(reference, candidate)?;
    let matches: u64 = reference
        .labels()
        .iter()
        .zip(candidate.labels())
        .map(|(&p, &q)| kronecker(p, q) as u64)
        .sum();
    Ok(matches as f64 / reference.len() as f64)
}

/// Matching rate restricted to pixels the reference does not label as background.
pub fn smr_foreground(
    reference: &SegmentationArray,
    candidate: &SegmentationArray,
    background: Label,
) -> Result<f64, ScoringError> {
    check_shape(reference, candidate)?;
    let (mut matches, mut total) = (0u64, 0u64);
    for (&p, &q) in reference.labels().iter().zip(candidate.labels()) {
        if p != background {
            total += 1;
            matches += kronecker(p, q) as u64;
        }
    }
    if total == 0 {
        return Err(ScoringError::AllBackground);
    }
    Ok(matches as f64 / total as f64)
}

/// Lowercases, splits on non-alphanumeric runs and optionally drops stop words.
pub fn tokenize(text: &str, config: &ScoringConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !(config.remove_stop_words && config.stop_words.contains(t)))
        .collect()
}

/// Token-level F1 between two token lists, counting repeated tokens as a multiset.
pub fn token_f1(reference: &[String], candidate: &[String]) -> f64 {
    if reference.is_empty() || candidate.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for t in candidate {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / candidate.len() as f64;
    let recall = common as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Caption similarity in `[0, 1]`.
pub fn text_similarity(
    reference: &Caption,
    candidate: &Caption,
    config: &ScoringConfig,
    backend: &SimilarityBackend,
) -> Result<f64, ScoringError> {
    let ref_tokens = tokenize(reference.as_str(), config);
    let cand_tokens = tokenize(candidate.as_str(), config);
    match backend {
        SimilarityBackend::Builtin => Ok(token_f1(&ref_tokens, &cand_tokens)),
        SimilarityBackend::External {
            scorer,
            fallback_to_builtin,
        } => {
            // external scorers see the stop-word-filtered text
            let (r, c) = if config.remove_stop_words {
                if ref_tokens.is_empty() || cand_tokens.is_empty() {
                    return Ok(0.0);
                }
                (ref_tokens.join(" "), cand_tokens.join(" "))
            } else {
                (reference.as_str().to_owned(), candidate.as_str().to_owned())
            };
            match scorer.similarity(&r, &c) {
                Ok(s) if s.is_finite() => Ok(s.clamp(0.0, 1.0)),
                Ok(_) => Err(ScoringError::NonFiniteScore),
                Err(_) if *fallback_to_builtin => Ok(token_f1(&ref_tokens, &cand_tokens)),
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Features the receiver extracted from one generated image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateFeatures {
    pub image: RasterImage,
    pub caption: Caption,
    pub segmentation: SegmentationArray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub candidate_index: usize,
    pub image: RasterImage,
    pub candidate_segmentation: SegmentationArray,
    pub candidate_caption: Caption,
    pub smr: f64,
    pub text_similarity: f64,
    pub combined: f64,
}

fn score_one(
    payload: &SemanticPayload,
    features: &CandidateFeatures,
    config: &ScoringConfig,
    backend: &SimilarityBackend,
) -> Result<(f64, f64), ScoringError> {
    let s = if config.foreground_only_smr {
        smr_foreground(
            &payload.segmentation,
            &features.segmentation,
            payload.background_label,
        )?
    } else {
        smr(&payload.segmentation, &features.segmentation)?
    };
    let t = text_similarity(&payload.caption, &features.caption, config, backend)?;
    Ok((s, t))
}

/// Scores every candidate against the payload's features, preserving input order.
///
/// Candidates are scored in parallel on the current rayon pool.
pub fn score_candidates(
    payload: &SemanticPayload,
    candidates: Vec<CandidateFeatures>,
    config: &ScoringConfig,
    backend: &SimilarityBackend,
) -> Result<Vec<ScoredCandidate>, ScoringError> {
    config.validate()?;
    candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, features)| {
            let (smr, text_similarity) = score_one(payload, &features, config, backend)
                .map_err(|e| ScoringError::Candidate {
                    index,
                    source: Box::new(e),
                })?;
            Ok(ScoredCandidate {
                candidate_index: index,
                combined: config.combine(smr, text_similarity),
                image: features.image,
                candidate_segmentation: features.segmentation,
                candidate_caption: features.caption,
                smr,
                text_similarity,
            })
        })
        .collect()
}

/// Index of the highest score; ties go to the lowest index.
pub fn argmax_lowest_index<I>(scores: I) -> Option<usize>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut best: Option<(usize, f64)> = None;
    for (idx, score) in scores {
        best = match best {
            None => Some((idx, score)),
            Some((bi, bs)) if score > bs || (score == bs && idx < bi) => Some((idx, score)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i)
}

/// The `candidate_index` of the best-scoring candidate.
pub fn select_output(scored: &[ScoredCandidate]) -> Result<usize, ScoringError> {
    argmax_lowest_index(scored.iter().map(|c| (c.candidate_index, c.combined)))
        .ok_or(ScoringError::Empty)
}
