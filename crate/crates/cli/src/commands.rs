use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use semcomm_core::mock::mock_backends;
use semcomm_core::pipeline::DEFAULT_NEGATIVE_PROMPT;
use semcomm_core::scoring::ScoringError;
use semcomm_core::*;
use semcomm_gateway_client::{gateway_backends, GatewayClient, GatewayEndpoint};
use serde::Serialize;

use crate::{BackendArgs, BackendKind, ScoringArgs};

fn backends(args: &BackendArgs) -> Result<BackendSet> {
    match args.backend {
        BackendKind::Mock => Ok(mock_backends()),
        BackendKind::Gateway => {
            let ep = GatewayEndpoint::from_env(args.gateway_url.as_deref())
                .context("cannot configure gateway")?;
            Ok(gateway_backends(GatewayClient::new(ep), false))
        }
    }
}

fn read_image(path: &Path) -> Result<RasterImage> {
    load_image_path(path).with_context(|| format!("cannot read image {}", path.display()))
}

fn read_payload(path: &Path) -> Result<SemanticPayload> {
    let bytes = fs::read(path).with_context(|| format!("cannot read payload {}", path.display()))?;
    decode_payload(&bytes).with_context(|| format!("cannot decode payload {}", path.display()))
}

fn write_image(image: &RasterImage, path: &Path) -> Result<()> {
    save_image_path(image, path).with_context(|| format!("cannot write image {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn extract(image: &Path, output: &Path, recolor_bg: bool, backend: &BackendArgs) -> Result<()> {
    let img = read_image(image)?;
    let config = TransmitterConfig {
        apply_background_recoloring: recolor_bg,
        ..TransmitterConfig::default()
    };
    let payload = transmit(&img, &backends(backend)?, &config)?;
    let encoded = encode_payload(&payload)?;
    fs::write(output, encoded.as_bytes())
        .with_context(|| format!("cannot write payload {}", output.display()))?;
    print_json(&size_report(&payload))
}

pub fn render(payload: &Path, output: &Path) -> Result<()> {
    let p = read_payload(payload)?;
    let img = render_colored_segmented(&p.segmentation, &p.palette)?;
    write_image(&img, output)
}

pub struct ReceiveOptions<'a> {
    pub payload: &'a Path,
    pub output: &'a Path,
    pub k: usize,
    pub seed: u64,
    pub smr_weight: f64,
    pub scoring: &'a ScoringArgs,
    pub negative_prompt: Option<&'a str>,
    pub audit_json: Option<&'a Path>,
    pub jobs: usize,
    pub backend: &'a BackendArgs,
}

#[derive(Serialize)]
struct AuditLine<'a> {
    index: usize,
    smr: f64,
    text_similarity: f64,
    combined: f64,
    caption: &'a str,
}

#[derive(Serialize)]
struct ReceiveSummary {
    selected_index: usize,
    candidate_count: usize,
    smr: f64,
    text_similarity: f64,
    combined: f64,
}

pub fn receive(opts: ReceiveOptions<'_>) -> Result<()> {
    let payload = read_payload(opts.payload)?;
    let config = ReceiverConfig {
        candidate_count: opts.k,
        scoring: ScoringConfig {
            smr_weight: opts.smr_weight,
            remove_stop_words: !opts.scoring.no_stop_word_removal,
            foreground_only_smr: opts.scoring.foreground_smr,
            ..ScoringConfig::default()
        },
        negative_prompt: opts
            .negative_prompt
            .unwrap_or(DEFAULT_NEGATIVE_PROMPT)
            .to_owned(),
        generation_seed: opts.seed,
        jobs: opts.jobs,
    };
    let reception = semcomm_core::receive(&payload, &backends(opts.backend)?, &config)?;
    write_image(reception.selected_image(), opts.output)?;

    if let Some(path) = opts.audit_json {
        let file = fs::File::create(path)
            .with_context(|| format!("cannot write audit file {}", path.display()))?;
        let mut w = BufWriter::new(file);
        for c in &reception.candidates {
            serde_json::to_writer(
                &mut w,
                &AuditLine {
                    index: c.candidate_index,
                    smr: c.smr,
                    text_similarity: c.text_similarity,
                    combined: c.combined,
                    caption: c.candidate_caption.as_str(),
                },
            )?;
            writeln!(w)?;
        }
        w.flush()?;
    }

    let best = reception.selected();
    print_json(&ReceiveSummary {
        selected_index: reception.selected_index,
        candidate_count: reception.candidates.len(),
        smr: best.smr,
        text_similarity: best.text_similarity,
        combined: best.combined,
    })
}

#[derive(Serialize)]
struct Scores {
    smr: f64,
    /// `None` when the reference has no foreground pixels.
    smr_foreground: Option<f64>,
    text_similarity: f64,
}

pub fn score(payload: &Path, candidate: &Path, no_stop_word_removal: bool, backend: &BackendArgs) -> Result<()> {
    let p = read_payload(payload)?;
    let img = read_image(candidate)?;
    let b = backends(backend)?;
    if !img.same_dimensions(p.segmentation.width(), p.segmentation.height()) {
        bail!(
            "dimension mismatch: candidate is {}x{}, payload is {}x{}",
            img.width(),
            img.height(),
            p.segmentation.width(),
            p.segmentation.height()
        );
    }
    let seg = b.segmenter.segment(&img).context("segmenter failed")?;
    let cap = b.captioner.caption(&img).context("captioner failed")?;
    let config = ScoringConfig {
        remove_stop_words: !no_stop_word_removal,
        ..ScoringConfig::default()
    };
    let smr_foreground = match smr_foreground(&p.segmentation, &seg, p.background_label) {
        Ok(v) => Some(v),
        Err(ScoringError::AllBackground) => None,
        Err(e) => return Err(e.into()),
    };
    print_json(&Scores {
        smr: smr(&p.segmentation, &seg)?,
        smr_foreground,
        text_similarity: text_similarity(&p.caption, &cap, &config, &SimilarityBackend::Builtin)?,
    })
}

#[derive(Serialize)]
struct SizeRow {
    image: String,
    width: String,
    height: String,
    uncompressed_bytes: String,
    caption_bytes: String,
    palette_bytes: String,
    segmentation_rle_bytes: String,
    total_payload_bytes: String,
}

fn files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

pub fn bench_sizes(dir: &Path, recolor_bg: bool, backend: &BackendArgs) -> Result<()> {
    let b = backends(backend)?;
    let config = TransmitterConfig {
        apply_background_recoloring: recolor_bg,
        ..TransmitterConfig::default()
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for path in files_in(dir)? {
        let img = match load_image_path(&path) {
            Ok(img) => img,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                continue;
            }
        };
        let payload = transmit(&img, &b, &config)
            .with_context(|| format!("cannot extract {}", path.display()))?;
        let r = size_report(&payload);
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        rows.push(SizeRow {
            image: name,
            width: img.width().to_string(),
            height: img.height().to_string(),
            uncompressed_bytes: r.uncompressed_image_bytes.to_string(),
            caption_bytes: r.caption_bytes.to_string(),
            palette_bytes: r.palette_bytes.to_string(),
            segmentation_rle_bytes: r.segmentation_rle_bytes.to_string(),
            total_payload_bytes: r.total_payload_bytes.to_string(),
        });
        reports.push(r);
    }
    if reports.is_empty() {
        bail!("no readable images in {}", dir.display());
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&SizeReport) -> usize| {
        format!("{:.2}", reports.iter().map(|r| f(r) as f64).sum::<f64>() / n)
    };
    rows.push(SizeRow {
        image: "mean".into(),
        width: String::new(),
        height: String::new(),
        uncompressed_bytes: mean(|r| r.uncompressed_image_bytes),
        caption_bytes: mean(|r| r.caption_bytes),
        palette_bytes: mean(|r| r.palette_bytes),
        segmentation_rle_bytes: mean(|r| r.segmentation_rle_bytes),
        total_payload_bytes: mean(|r| r.total_payload_bytes),
    });
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
