use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use l3c::codec::{self, CodecModel, ContainerFile};
use l3c::nn::{load_weights, ModelMode};
use l3c::Image;
use serde_json::Value;
use tempfile::TempDir;

fn l3c(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l3c"))
        .args(args)
        .output()
        .expect("spawn l3c")
}

fn ok(args: &[&str]) -> String {
    let out = l3c(args);
    assert!(
        out.status.success(),
        "l3c {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn test_image(width: usize, height: usize, seed: usize) -> Image {
    let mut data = Vec::with_capacity(3 * width * height);
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let v = (x * 7 + y * 3 + c * 50 + seed * 13) % 256;
                data.push(((v + (x * y) % 5) % 256) as u8);
            }
        }
    }
    Image::new(width, height, data).unwrap()
}

fn init_weights(dir: &Path, name: &str, mode: &str, seed: u64) -> PathBuf {
    let path = dir.join(name);
    ok(&[
        "init-weights",
        "-o",
        p(&path),
        "--mode",
        mode,
        "--filters",
        "8",
        "--components",
        "3",
        "--resblocks",
        "1",
        "--latent-channels",
        "4",
        "--seed",
        &seed.to_string(),
    ]);
    path
}

#[test]
fn encode_decode_round_trip_with_json_reports() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "learned", 1);
    let image = test_image(37, 22, 0);
    let input = dir.path().join("in.png");
    image.write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    let output = dir.path().join("out.ppm");

    let enc: Value = serde_json::from_str(&ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&weights),
        "--report",
        "json",
    ]))
    .unwrap();
    let bytes = std::fs::read(&container).unwrap();
    assert_eq!(enc["bytes"].as_u64().unwrap() as usize, bytes.len());
    assert!((enc["bpsp"].as_f64().unwrap() - codec::bpsp(bytes.len(), 22, 37)).abs() < 1e-12);
    assert_eq!(enc["scales"].as_array().unwrap().len(), 4);

    let dec: Value = serde_json::from_str(&ok(&[
        "decode",
        p(&container),
        "-o",
        p(&output),
        "--weights",
        p(&weights),
        "--report",
        "json",
    ]))
    .unwrap();
    assert_eq!(dec["stages"], 4);
    assert_eq!(dec["predictor_passes"], 3);
    assert_eq!(Image::read(&output).unwrap(), image);

    // the library produces the identical container
    let w = load_weights(&std::fs::read(&weights).unwrap()).unwrap();
    let model = CodecModel::new(&w, ModelMode::Learned).unwrap();
    assert_eq!(
        codec::encode_image(&image, &model).unwrap().to_bytes(),
        bytes
    );
}

#[test]
fn inspect_reports_streams() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "learned", 2);
    let input = dir.path().join("in.ppm");
    test_image(16, 16, 1).write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&weights),
    ]);

    let info: Value =
        serde_json::from_str(&ok(&["inspect", p(&container), "--report", "json"])).unwrap();
    let streams = info["streams"].as_array().unwrap();
    let scales: Vec<u64> = streams
        .iter()
        .map(|s| s["scale"].as_u64().unwrap())
        .collect();
    assert_eq!(scales, [3, 2, 1, 0]);
    assert_eq!(streams[0]["channels"], 4);
    assert_eq!(streams[3]["channels"], 3);
    assert_eq!(streams[3]["height"], 16);
    assert_eq!(info["header"]["mode"], "learned");
    let total = info["total_bytes"].as_u64().unwrap() as usize;
    assert_eq!(total, std::fs::read(&container).unwrap().len());

    let text = ok(&["inspect", p(&container)]);
    assert!(text.contains("scale 0: C=3"), "{text}");
}

#[test]
fn corrupt_magic_is_rejected() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "rgb", 3);
    let input = dir.path().join("in.ppm");
    test_image(8, 8, 2).write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&weights),
    ]);
    let mut bytes = std::fs::read(&container).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&container, &bytes).unwrap();

    let out = l3c(&[
        "decode",
        p(&container),
        "-o",
        p(&dir.path().join("o.ppm")),
        "--weights",
        p(&weights),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("magic"), "{err}");
}

#[test]
fn decoding_with_other_weights_fails() {
    let dir = TempDir::new().unwrap();
    let good = init_weights(dir.path(), "a.bin", "learned", 4);
    let bad = init_weights(dir.path(), "b.bin", "learned", 5);
    let input = dir.path().join("in.ppm");
    test_image(24, 16, 3).write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&good),
    ]);

    let out = l3c(&[
        "decode",
        p(&container),
        "-o",
        p(&dir.path().join("o.ppm")),
        "--weights",
        p(&bad),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("checksum") || err.contains("corrupt"), "{err}");
}

#[test]
fn mode_mismatch_is_reported() {
    let dir = TempDir::new().unwrap();
    let learned = init_weights(dir.path(), "a.bin", "learned", 6);
    let rgb = init_weights(dir.path(), "b.bin", "rgb", 6);
    let input = dir.path().join("in.ppm");
    test_image(8, 8, 4).write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&learned),
    ]);
    let out = l3c(&[
        "decode",
        p(&container),
        "-o",
        p(&dir.path().join("o.ppm")),
        "--weights",
        p(&rgb),
    ]);
    assert!(!out.status.success());
}

#[test]
fn rgb_shared_round_trip() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "rgb-shared", 7);
    let image = test_image(19, 11, 5);
    let input = dir.path().join("in.ppm");
    image.write(&input).unwrap();
    let container = dir.path().join("x.l3c");
    let output = dir.path().join("o.png");
    ok(&[
        "encode",
        p(&input),
        "-o",
        p(&container),
        "--weights",
        p(&weights),
    ]);
    let file = ContainerFile::from_bytes(&std::fs::read(&container).unwrap()).unwrap();
    assert_eq!(file.header.mode, ModelMode::RgbShared);
    assert!(file.streams.iter().all(|s| s.channels == 3));
    ok(&[
        "decode",
        p(&container),
        "-o",
        p(&output),
        "--weights",
        p(&weights),
    ]);
    assert_eq!(Image::read(&output).unwrap(), image);
}

#[test]
fn sample_with_all_scales_equals_decode() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "learned", 8);
    let image = test_image(16, 8, 6);
    let input = dir.path().join("in.ppm");
    image.write(&input).unwrap();
    let out = dir.path().join("s.ppm");
    let report: Value = serde_json::from_str(&ok(&[
        "sample",
        p(&input),
        "-o",
        p(&out),
        "--weights",
        p(&weights),
        "--scales",
        "0,1,2,3",
        "--report",
        "json",
    ]))
    .unwrap();
    assert_eq!(report["sampled_scales"].as_array().unwrap().len(), 0);
    assert_eq!(report["stored_fraction"].as_f64().unwrap(), 1.0);
    assert_eq!(Image::read(&out).unwrap(), image);
}

#[test]
fn sample_from_top_scales_is_seeded() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "learned", 9);
    let input = dir.path().join("in.ppm");
    test_image(16, 16, 7).write(&input).unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let report: Value = serde_json::from_str(&ok(&[
            "sample",
            p(&input),
            "-o",
            p(&out),
            "--weights",
            p(&weights),
            "--scales",
            "2,3",
            "--seed",
            seed,
            "--report",
            "json",
        ]))
        .unwrap();
        (Image::read(&out).unwrap(), report)
    };
    let (a, report) = run("a.ppm", "1");
    let (b, _) = run("b.ppm", "1");
    let (c, _) = run("c.ppm", "2");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!((a.width, a.height), (16, 16));
    let sampled: Vec<u64> = report["sampled_scales"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(sampled, [1, 0]);
    let f = report["stored_fraction"].as_f64().unwrap();
    assert!(f > 0.0 && f < 1.0);

    let bad = l3c(&[
        "sample",
        p(&input),
        "-o",
        p(&dir.path().join("x.ppm")),
        "--weights",
        p(&weights),
        "--scales",
        "1,3",
    ]);
    assert!(!bad.status.success());
}

#[test]
fn bench_reports_rows_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let weights = init_weights(dir.path(), "w.bin", "learned", 10);
    let images = dir.path().join("images");
    let other = dir.path().join("other");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::create_dir_all(&other).unwrap();
    test_image(20, 12, 1).write(&images.join("b.ppm")).unwrap();
    test_image(12, 12, 2).write(&images.join("a.png")).unwrap();
    std::fs::write(images.join("notes.txt"), "skip me").unwrap();
    std::fs::write(other.join("a.bin"), vec![0u8; 54]).unwrap();

    let compare = format!("raw={}", p(&other));
    let r: Value = serde_json::from_str(&ok(&[
        "bench",
        p(&images),
        "--weights",
        p(&weights),
        "--crop",
        "12x8",
        "--compare",
        &compare,
        "--report",
        "json",
    ]))
    .unwrap();
    let rows = r["images"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["a.png", "b.ppm"]);
    assert!(rows.iter().all(|r| r["width"] == 12 && r["height"] == 8));
    assert!(
        (rows[0]["compare"]["raw"].as_f64().unwrap() - 8.0 * 54.0 / (3.0 * 96.0)).abs() < 1e-12
    );
    assert!(rows[1]["compare"].get("raw").is_none());

    let bits: u64 = rows.iter().map(|r| r["bits"].as_u64().unwrap()).sum();
    let agg = &r["aggregate"];
    assert_eq!(agg["bits"].as_u64().unwrap(), bits);
    assert!((agg["bpsp"].as_f64().unwrap() - bits as f64 / (2.0 * 3.0 * 96.0)).abs() < 1e-12);
    for row in rows {
        let scale_bits: u64 = row["scale_bits"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["bits"].as_u64().unwrap())
            .sum();
        assert_eq!(
            scale_bits + row["header_bits"].as_u64().unwrap(),
            row["bits"].as_u64().unwrap()
        );
    }

    let text = ok(&[
        "bench",
        p(&images),
        "--weights",
        p(&weights),
        "--compare",
        &compare,
    ]);
    assert!(text.contains("total (2 images)"), "{text}");
}
