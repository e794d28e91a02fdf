use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semcomm_core::image_io::ImageFormat;
use semcomm_core::*;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn semcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcomm"))
        .args(args)
        .env_remove(semcomm_gateway_client::URL_ENV)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    o
}

#[test]
fn extract_matches_golden_payload() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("scene.smc1");
    let o = ok(semcomm(&["extract", s(&fixture("scene.ppm")), s(&out)]));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture("scene.smc1")).unwrap());
    let report = json(&o);
    assert_eq!(report["uncompressed_image_bytes"], 64 * 48 * 3);
    let caption_bytes = report["caption_bytes"].as_u64().unwrap();
    assert_eq!(caption_bytes, "a photography of airplane and person".len() as u64);
    assert_eq!(report["palette_bytes"], 12);
}

#[test]
fn extract_recolor_flag() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.smc1");
    ok(semcomm(&["extract", "--recolor-bg", s(&fixture("scene.ppm")), s(&out)]));
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(bytes, std::fs::read(fixture("scene_recolored.smc1")).unwrap());
    let p = decode_payload(&bytes).unwrap();
    assert!(p.background_recolored);
    assert_eq!(p.palette.get(Label(0)), Some(Rgb::WHITE));
}

#[test]
fn extract_unreadable_image() {
    let dir = TempDir::new().unwrap();
    let o = semcomm(&["extract", "/nonexistent/x.ppm", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read image"), "{}", stderr(&o));
}

#[test]
fn render_golden_and_format_by_extension() {
    let dir = TempDir::new().unwrap();
    let ppm = dir.path().join("r.ppm");
    ok(semcomm(&["render", s(&fixture("scene_recolored.smc1")), s(&ppm)]));
    assert_eq!(std::fs::read(&ppm).unwrap(), std::fs::read(fixture("scene_render.ppm")).unwrap());

    let png = dir.path().join("r.png");
    ok(semcomm(&["render", s(&fixture("scene_recolored.smc1")), s(&png)]));
    let bytes = std::fs::read(&png).unwrap();
    assert_eq!(ImageFormat::sniff(&bytes), Some(ImageFormat::Png));
    assert_eq!(load_image_path(&png).unwrap(), load_image_path(&ppm).unwrap());
}

#[test]
fn render_corrupted_payload() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.smc1");
    let mut bytes = std::fs::read(fixture("scene.smc1")).unwrap();
    bytes[0] = b'X';
    std::fs::write(&bad, bytes).unwrap();
    let o = semcomm(&["render", s(&bad), s(&dir.path().join("o.ppm"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad magic"), "{}", stderr(&o));
}

#[test]
fn receive_selects_loopback_and_writes_audit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sel.ppm");
    let audit = dir.path().join("audit.jsonl");
    let payload = fixture("scene_recolored.smc1");
    let o = ok(semcomm(&[
        "receive", s(&payload), s(&out), "--k", "3", "--seed", "7", "--audit-json", s(&audit),
    ]));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture("scene_render.ppm")).unwrap());
    let summary = json(&o);
    assert_eq!(summary["selected_index"], 0);
    assert_eq!(summary["smr"], 1.0);

    let text = std::fs::read_to_string(&audit).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["index"], i);
        let (smr, t, c) = (
            l["smr"].as_f64().unwrap(),
            l["text_similarity"].as_f64().unwrap(),
            l["combined"].as_f64().unwrap(),
        );
        assert!((c - (0.5 * smr + 0.5 * t)).abs() < 1e-12);
        assert!(l["caption"].as_str().unwrap().starts_with("a photography of"));
    }
}

#[test]
fn receive_weight_and_determinism() {
    let dir = TempDir::new().unwrap();
    let payload = fixture("scene.smc1");
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(format!("{name}.png"));
        let audit = dir.path().join(format!("{name}.jsonl"));
        let o = ok(semcomm(&[
            "receive", s(&payload), s(&out), "--k", "6", "--seed", "3", "--smr-weight", "1",
            "--no-stop-word-removal", "--foreground-smr", "--jobs", jobs, "--audit-json", s(&audit),
        ]));
        (stdout(&o), std::fs::read(out).unwrap(), std::fs::read(audit).unwrap())
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "4"));
    for line in String::from_utf8(a.2).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["combined"], v["smr"]);
    }
}

#[test]
fn usage_errors_exit_2() {
    let p = fixture("scene.smc1");
    for args in [
        vec!["receive", s(&p), "/tmp/x.ppm", "--k", "0"],
        vec!["receive", s(&p), "/tmp/x.ppm", "--smr-weight", "1.5"],
        vec!["extract"],
        vec!["frobnicate"],
        vec!["extract", "a", "b", "--backend", "cloud"],
    ] {
        let o = semcomm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn score_rendered_payload() {
    let dir = TempDir::new().unwrap();
    let img = dir.path().join("c.png");
    ok(semcomm(&["render", s(&fixture("scene_recolored.smc1")), s(&img)]));
    let a = ok(semcomm(&["score", s(&fixture("scene_recolored.smc1")), s(&img)]));
    let b = ok(semcomm(&["score", s(&fixture("scene_recolored.smc1")), s(&img)]));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["smr"], 1.0);
    assert_eq!(v["smr_foreground"], 1.0);
    assert_eq!(v["text_similarity"], 1.0);
}

#[test]
fn score_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    let img = dir.path().join("small.ppm");
    save_image_path(&RasterImage::filled(5, 5, Rgb::WHITE).unwrap(), &img).unwrap();
    let o = semcomm(&["score", s(&fixture("scene.smc1")), s(&img)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
}

#[test]
fn bench_sizes_table() {
    let dir = TempDir::new().unwrap();
    let seg = {
        let mut labels = vec![0u8; 512 * 512];
        for y in 100..300 {
            for x in 150..350 {
                labels[y * 512 + x] = 12;
            }
        }
        SegmentationArray::from_raw(512, 512, &labels).unwrap()
    };
    let palette = ColorPalette::new([(Label(0), Rgb::WHITE), (Label(12), Rgb::new(64, 0, 128))]).unwrap();
    let img = render_colored_segmented(&seg, &palette).unwrap();
    save_image_path(&img, dir.path().join("a.png")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not an image").unwrap();

    let o = ok(semcomm(&["bench-sizes", s(dir.path())]));
    assert!(stderr(&o).contains("skipping"), "{}", stderr(&o));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers[3], "uncompressed_bytes");
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "a.png");
    assert_eq!(&rows[0][3], "786432");
    // leading background, 200 object rows, 199 gaps, trailing background split at 65535
    assert_eq!(&rows[0][6], &(3 * (1 + 200 + 199 + 2)).to_string());
    assert_eq!(&rows[1][0], "mean");
    assert_eq!(&rows[1][3], "786432.00");
}

#[test]
fn bench_sizes_without_images() {
    let dir = TempDir::new().unwrap();
    let o = semcomm(&["bench-sizes", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("x.bin"), [0u8; 4]).unwrap();
    let o = semcomm(&["bench-sizes", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no readable images"));
    let o = semcomm(&["bench-sizes", "/nonexistent-dir"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gateway_backend_requires_url() {
    let dir = TempDir::new().unwrap();
    let o = semcomm(&[
        "extract", "--backend", "gateway", s(&fixture("scene.ppm")), s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no gateway URL"), "{}", stderr(&o));
}
