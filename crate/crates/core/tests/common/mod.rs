//! Fixtures and independent reference implementations shared by the
//! integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use rand::Rng;
use semcomm_core::classes::CLASS_COLORS;
use semcomm_core::{
    Caption, ColorPalette, Label, RasterImage, Rgb, SegmentationArray, SemanticPayload,
};

pub fn table_palette() -> ColorPalette {
    ColorPalette::new(
        CLASS_COLORS
            .iter()
            .enumerate()
            .map(|(i, c)| (Label(i as u8), *c)),
    )
    .unwrap()
}

/// Paints labels with the builtin table without going through the renderer.
pub fn paint_with_table(seg: &SegmentationArray) -> RasterImage {
    let px = seg
        .labels()
        .iter()
        .map(|l| CLASS_COLORS[l.0 as usize])
        .collect();
    RasterImage::new(seg.width(), seg.height(), px).unwrap()
}

fn in_ellipse(x: usize, y: usize, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let dx = (x as f64 + 0.5 - cx) / rx;
    let dy = (y as f64 + 0.5 - cy) / ry;
    dx * dx + dy * dy <= 1.0
}

/// Background with an airplane ellipse and a person box. Labels {0, 1, 15}.
pub fn scene_segmentation(w: usize, h: usize) -> SegmentationArray {
    let (wf, hf) = (w as f64, h as f64);
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let l = if in_ellipse(x, y, wf * 0.35, hf * 0.4, wf * 0.25, hf * 0.18) {
                1
            } else if x >= w * 2 / 3 && x < w * 5 / 6 && y >= h / 2 && y < h * 9 / 10 {
                15
            } else {
                0
            };
            labels.push(l);
        }
    }
    SegmentationArray::from_raw(w, h, &labels).unwrap()
}

pub fn scene_image(w: usize, h: usize) -> RasterImage {
    paint_with_table(&scene_segmentation(w, h))
}

/// Fixture scene with an off-white background so recoloring has a visible effect.
pub fn fixture_scene() -> RasterImage {
    let seg = scene_segmentation(64, 48);
    let px = seg
        .labels()
        .iter()
        .map(|l| {
            if l.0 == 0 {
                Rgb::new(226, 232, 238)
            } else {
                CLASS_COLORS[l.0 as usize]
            }
        })
        .collect();
    RasterImage::new(64, 48, px).unwrap()
}

/// 512×512, two blobs (person, dog) with a cat inside the dog: four labels.
pub fn two_blob_segmentation() -> SegmentationArray {
    let mut labels = vec![0u8; 512 * 512];
    for y in 0..512 {
        for x in 0..512 {
            let l = if in_ellipse(x, y, 150.0, 180.0, 60.0, 110.0) {
                15
            } else if in_ellipse(x, y, 360.0, 330.0, 90.0, 70.0) {
                if in_ellipse(x, y, 360.0, 320.0, 25.0, 25.0) {
                    8
                } else {
                    12
                }
            } else {
                0
            };
            labels[y * 512 + x] = l;
        }
    }
    SegmentationArray::from_raw(512, 512, &labels).unwrap()
}

/// Per-pixel loop over the flattened arrays, counting equal labels.
pub fn naive_smr(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut hits = 0u64;
    let mut i = 0;
    while i < a.len() {
        if a[i] == b[i] {
            hits += 1;
        }
        i += 1;
    }
    hits as f64 / a.len() as f64
}

/// Counts RLE runs with explicit row/column scanning, splitting at `cap`.
pub fn scanline_run_count(labels: &[u8], width: usize, height: usize, cap: usize) -> usize {
    let mut runs = 0;
    let mut current: Option<u8> = None;
    let mut length = 0;
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x];
            if current == Some(l) && length < cap {
                length += 1;
            } else {
                runs += 1;
                current = Some(l);
                length = 1;
            }
        }
    }
    runs
}

/// Mean per label and channel, rounded half-up via f64 and `floor(x + 0.5)`.
pub fn brute_force_palette(pixels: &[[u8; 3]], labels: &[u8]) -> Vec<(u8, [u8; 3])> {
    let mut out = Vec::new();
    for label in 0..=255u8 {
        let members: Vec<&[u8; 3]> = pixels
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut color = [0u8; 3];
        for (c, slot) in color.iter_mut().enumerate() {
            let sum: f64 = members.iter().map(|p| p[c] as f64).sum();
            *slot = (sum / members.len() as f64 + 0.5).floor() as u8;
        }
        out.push((label, color));
    }
    out
}

pub fn random_caption<R: Rng>(rng: &mut R) -> Caption {
    let len = rng.gen_range(1..60);
    loop {
        let text: String = (0..len)
            .map(|_| char::from_u32(rng.gen_range(0x20..=0xFF)).unwrap())
            .collect();
        if let Ok(c) = Caption::new(text) {
            return c;
        }
    }
}

/// A random payload that satisfies every invariant.
pub fn random_payload<R: Rng>(rng: &mut R) -> SemanticPayload {
    let w = rng.gen_range(1..48);
    let h = rng.gen_range(1..48);
    let label_pool: Vec<u8> = (0..rng.gen_range(1..6)).map(|_| rng.gen()).collect();
    let mut labels = Vec::with_capacity(w * h);
    let mut current = label_pool[0];
    for _ in 0..w * h {
        if rng.gen_bool(0.15) {
            current = label_pool[rng.gen_range(0..label_pool.len())];
        }
        labels.push(current);
    }
    let seg = SegmentationArray::from_raw(w, h, &labels).unwrap();
    let background_label = Label(if rng.gen_bool(0.7) { 0 } else { rng.gen() });
    let mut entries: Vec<(Label, Rgb)> = seg
        .distinct_labels()
        .into_iter()
        .map(|l| (l, Rgb(rng.gen())))
        .collect();
    // occasional palette entries for labels not in the array
    for _ in 0..rng.gen_range(0..3) {
        let l = Label(rng.gen());
        if !entries.iter().any(|e| e.0 == l) {
            entries.push((l, Rgb(rng.gen())));
        }
    }
    let recolored = rng.gen_bool(0.5);
    if recolored {
        match entries.iter_mut().find(|e| e.0 == background_label) {
            Some(e) => e.1 = Rgb::WHITE,
            None => entries.push((background_label, Rgb::WHITE)),
        }
    }
    SemanticPayload {
        caption: random_caption(rng),
        segmentation: seg,
        palette: ColorPalette::new(entries).unwrap(),
        background_label,
        background_recolored: recolored,
    }
}
