use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use l3c::codec::{self, CodecModel, CodecOptions};
use l3c::Image;

#[derive(Serialize)]
pub struct ScaleBits {
    pub scale: usize,
    pub bits: usize,
}

#[derive(Serialize)]
pub struct ImageRow {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub bytes: usize,
    pub bits: usize,
    pub bpsp: f64,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
    /// Payload bits per scale; together with the header they make up `bits`.
    pub scale_bits: Vec<ScaleBits>,
    pub header_bits: usize,
    /// bpsp of other codecs' files with the same stem.
    pub compare: BTreeMap<String, f64>,
}

#[derive(Serialize)]
pub struct Aggregate {
    pub images: usize,
    pub sub_pixels: usize,
    pub bits: usize,
    /// Total bits over total sub-pixels.
    pub bpsp: f64,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
    /// Same ratio for each comparison codec, over the images it covers.
    pub compare: BTreeMap<String, f64>,
}

#[derive(Serialize)]
pub struct BenchReport {
    pub mode: String,
    pub weights: String,
    pub crop: Option<(usize, usize)>,
    pub images: Vec<ImageRow>,
    pub aggregate: Aggregate,
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "ppm")
    )
}

fn find_by_stem(dir: &Path, stem: &str) -> Result<Option<PathBuf>> {
    let mut hits = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.file_stem().and_then(|s| s.to_str()) == Some(stem) {
            hits.push(path);
        }
    }
    hits.sort();
    Ok(hits.into_iter().next())
}

pub fn run(
    dir: &Path,
    model: &CodecModel,
    weights: &Path,
    crop: Option<(usize, usize)>,
    compare: &[(String, PathBuf)],
) -> Result<BenchReport> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && is_image(p));
    files.sort();
    if files.is_empty() {
        bail!("no .png or .ppm images in {}", dir.display());
    }

    let mut rows = Vec::new();
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut image = Image::read(path).with_context(|| format!("reading {name}"))?;
        if let Some((w, h)) = crop {
            image = image.center_crop(w, h)?;
        }
        let start = Instant::now();
        let out = codec::encode_image_with(&image, model, &CodecOptions::default())
            .with_context(|| format!("encoding {name}"))?;
        let encode_seconds = start.elapsed().as_secs_f64();
        let bytes = out.container.to_bytes();
        let start = Instant::now();
        let parsed = codec::ContainerFile::from_bytes(&bytes)?;
        let decoded = codec::decode_image(&parsed, model)
            .with_context(|| format!("round trip of {name} failed to decode"))?;
        let decode_seconds = start.elapsed().as_secs_f64();
        if decoded != image {
            bail!("round trip of {name} is not lossless");
        }
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut cmp = BTreeMap::new();
        for (codec_name, cdir) in compare {
            if let Some(p) = find_by_stem(cdir, &stem)? {
                let len = std::fs::metadata(&p)?.len() as usize;
                cmp.insert(
                    codec_name.clone(),
                    codec::bpsp(len, image.height, image.width),
                );
            }
        }
        let streams = &out.container.streams;
        rows.push(ImageRow {
            name,
            width: image.width,
            height: image.height,
            bytes: bytes.len(),
            bits: 8 * bytes.len(),
            bpsp: codec::bpsp(bytes.len(), image.height, image.width),
            encode_seconds,
            decode_seconds,
            scale_bits: streams
                .iter()
                .map(|s| ScaleBits {
                    scale: s.scale,
                    bits: 8 * s.payload.len(),
                })
                .collect(),
            header_bits: 8 * (codec::HEADER_BYTES + streams.len() * codec::STREAM_HEADER_BYTES),
            compare: cmp,
        });
    }

    let sub_pixels: usize = rows.iter().map(|r| 3 * r.width * r.height).sum();
    let bits: usize = rows.iter().map(|r| r.bits).sum();
    let mut compare_agg = BTreeMap::new();
    for (codec_name, _) in compare {
        let (b, n) = rows
            .iter()
            .filter_map(|r| {
                r.compare.get(codec_name).map(|bpsp| {
                    (
                        bpsp * (3 * r.width * r.height) as f64,
                        3 * r.width * r.height,
                    )
                })
            })
            .fold((0.0, 0usize), |acc, (b, n)| (acc.0 + b, acc.1 + n));
        if n > 0 {
            compare_agg.insert(codec_name.clone(), b / n as f64);
        }
    }
    Ok(BenchReport {
        mode: model.mode().to_string(),
        weights: weights.display().to_string(),
        crop,
        aggregate: Aggregate {
            images: rows.len(),
            sub_pixels,
            bits,
            bpsp: bits as f64 / sub_pixels as f64,
            encode_seconds: rows.iter().map(|r| r.encode_seconds).sum(),
            decode_seconds: rows.iter().map(|r| r.decode_seconds).sum(),
            compare: compare_agg,
        },
        images: rows,
    })
}

impl BenchReport {
    pub fn text(&self) -> String {
        let names: Vec<&String> = self.aggregate.compare.keys().collect();
        let mut s = format!(
            "{:<28} {:>11} {:>8} {:>10} {:>10}",
            "image", "size", "bpsp", "encode[s]", "decode[s]"
        );
        for n in &names {
            let _ = write!(s, " {n:>10}");
        }
        s.push('\n');
        for r in &self.images {
            let _ = write!(
                s,
                "{:<28} {:>11} {:>8.4} {:>10.3} {:>10.3}",
                r.name,
                format!("{}x{}", r.width, r.height),
                r.bpsp,
                r.encode_seconds,
                r.decode_seconds
            );
            for n in &names {
                match r.compare.get(*n) {
                    Some(v) => {
                        let _ = write!(s, " {v:>10.4}");
                    }
                    None => {
                        let _ = write!(s, " {:>10}", "-");
                    }
                }
            }
            s.push('\n');
        }
        let a = &self.aggregate;
        let _ = write!(
            s,
            "{:<28} {:>11} {:>8.4} {:>10.3} {:>10.3}",
            format!("total ({} images)", a.images),
            "",
            a.bpsp,
            a.encode_seconds,
            a.decode_seconds
        );
        for n in &names {
            let _ = write!(s, " {:>10.4}", a.compare[*n]);
        }
        s.push('\n');
        s
    }
}
