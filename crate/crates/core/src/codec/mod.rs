//! Hierarchical encode / decode pipeline.
//!
//! Encoding runs every extractor once, codes the top scale under a uniform
//! prior and then, for `s = S..1`, runs predictor `D^(s)` on `z^(s)` and
//! codes scale `s - 1` under the predicted mixtures. Decoding mirrors this,
//! feeding each decoded scale into the next predictor pass. RGB channels are
//! coded one full plane at a time so the means of later channels can be
//! shifted by the decoded earlier ones. Each scale is one range-coded
//! stream in which the channels follow each other without separators.

pub mod container;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use container::{
    ContainerFile, ContainerHeader, StreamInfo, SubStream, HEADER_BYTES, STREAM_HEADER_BYTES,
};

use crate::coder::{quantize_pmf, IntegerCdf, RangeDecoder, RangeEncoder};
use crate::dlm::{
    self, LogisticBinSpec, MixtureParamsLatent, MixtureParamsRgb, REPORT_FLOOR, RGB_CENTER,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{ModelMode, ModelWeights, Network, NetworkSpec, Tensor};
use crate::pyramid::rgb_pyramid;
use crate::quantizer::LevelGrid;

/// Positions whose CDFs are built together before being fed to the coder.
const CHUNK: usize = 4096;

/// Network plus the quantization grid, ready to encode and decode.
pub struct CodecModel {
    network: Network,
    grid: LevelGrid,
}

/// Symbols of one scale, planar `[c][y][x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleSymbols {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub symbols: Vec<u16>,
}

impl ScaleSymbols {
    fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            symbols: vec![0; channels * height * width],
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    fn from_image(img: &Image) -> Self {
        let plane = img.width * img.height;
        let mut symbols = vec![0u16; 3 * plane];
        for (i, px) in img.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                symbols[c * plane + i] = u16::from(px[c]);
            }
        }
        Self {
            channels: 3,
            height: img.height,
            width: img.width,
            symbols,
        }
    }

    fn to_image(&self) -> Result<Image> {
        let plane = self.plane();
        let to_u8 = |c: usize| -> Vec<u8> {
            self.symbols[c * plane..(c + 1) * plane]
                .iter()
                .map(|&v| v as u8)
                .collect()
        };
        Image::from_planes(self.width, self.height, [&to_u8(0), &to_u8(1), &to_u8(2)])
    }
}

/// Coding distribution of one scale.
enum ScaleDist {
    Uniform(usize),
    Rgb(MixtureParamsRgb),
    Latent(MixtureParamsLatent, LogisticBinSpec),
}

impl ScaleDist {
    fn alphabet(&self) -> usize {
        match self {
            ScaleDist::Uniform(n) => *n,
            ScaleDist::Rgb(_) => 256,
            ScaleDist::Latent(_, spec) => spec.num_bins,
        }
    }

    /// PMF of `channel` at `pos`; RGB channels read earlier channels from
    /// `symbols`.
    fn pmf(&self, channel: usize, pos: usize, symbols: &[u16], plane: usize, out: &mut [f64]) {
        match self {
            ScaleDist::Uniform(n) => out.fill(1.0 / *n as f64),
            ScaleDist::Rgb(p) => {
                let x1 = if channel >= 1 {
                    f64::from(symbols[pos]) - RGB_CENTER
                } else {
                    0.0
                };
                let x2 = if channel >= 2 {
                    f64::from(symbols[plane + pos]) - RGB_CENTER
                } else {
                    0.0
                };
                p.pmf_at(channel, pos, x1, x2, out);
            }
            ScaleDist::Latent(p, spec) => p.pmf_at(channel, pos, spec, out),
        }
    }
}

/// Hash of every CDF used for one channel of one scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CdfHash {
    pub scale: usize,
    pub channel: usize,
    pub hash: u32,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CodecOptions {
    /// Record a hash of every CDF grid, to compare encoder and decoder.
    pub trace_cdfs: bool,
}

/// Per-scale accounting gathered while encoding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleReport {
    pub scale: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub alphabet: usize,
    pub payload_bytes: usize,
    /// Ideal code length under the model's floating-point PMFs.
    pub nll_bits: f64,
    pub uniform: bool,
}

pub struct EncodeOutput {
    pub container: ContainerFile,
    /// Ordered like the sub-streams, from scale `S` down to 0.
    pub scales: Vec<ScaleReport>,
    pub trace: Vec<CdfHash>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DecodeStats {
    /// Scales reconstructed; the top one needs no network.
    pub stages: usize,
    pub predictor_passes: usize,
    pub sampled_scales: Vec<usize>,
    pub trace: Vec<CdfHash>,
}

pub struct SampleOutput {
    pub image: Image,
    pub stats: DecodeStats,
    pub stored_payload_bits: usize,
}

trait SymbolCoder {
    fn code(&mut self, cdf: &IntegerCdf, symbol: &mut u16) -> Result<()>;
}

impl SymbolCoder for RangeEncoder {
    fn code(&mut self, cdf: &IntegerCdf, symbol: &mut u16) -> Result<()> {
        self.encode(cdf, *symbol as usize)
    }
}

impl SymbolCoder for RangeDecoder<'_> {
    fn code(&mut self, cdf: &IntegerCdf, symbol: &mut u16) -> Result<()> {
        *symbol = self.decode(cdf)? as u16;
        Ok(())
    }
}

fn hash_cdf(h: &mut crc32fast::Hasher, cdf: &IntegerCdf) {
    for v in cdf.cumulative() {
        h.update(&v.to_le_bytes());
    }
}

/// Runs every position of `channel` through `coder`, returning the ideal
/// code length of the symbols currently in `syms` (meaningful when encoding).
fn code_channel(
    dist: &ScaleDist,
    channel: usize,
    syms: &mut ScaleSymbols,
    coder: &mut dyn SymbolCoder,
    mut trace: Option<&mut crc32fast::Hasher>,
) -> Result<f64> {
    let plane = syms.plane();
    let base = channel * plane;
    let alphabet = dist.alphabet();
    if let ScaleDist::Uniform(n) = dist {
        let cdf = IntegerCdf::uniform(*n)?;
        for pos in 0..plane {
            coder.code(&cdf, &mut syms.symbols[base + pos])?;
            if let Some(h) = trace.as_deref_mut() {
                hash_cdf(h, &cdf);
            }
        }
        return Ok(plane as f64 * (*n as f64).log2());
    }
    let mut nll = 0.0;
    let mut start = 0;
    while start < plane {
        let end = (start + CHUNK).min(plane);
        let snapshot = &syms.symbols;
        let cdfs = (start..end)
            .into_par_iter()
            .map_init(
                || vec![0.0; alphabet],
                |buf, pos| {
                    dist.pmf(channel, pos, snapshot, plane, buf);
                    let p = buf[(snapshot[base + pos] as usize).min(alphabet - 1)];
                    quantize_pmf(buf).map(|cdf| (cdf, p))
                },
            )
            .collect::<Result<Vec<_>>>()?;
        for (i, (cdf, p)) in cdfs.iter().enumerate() {
            coder.code(cdf, &mut syms.symbols[base + start + i])?;
            nll -= p.max(REPORT_FLOOR).log2();
            if let Some(h) = trace.as_deref_mut() {
                hash_cdf(h, cdf);
            }
        }
        start = end;
    }
    Ok(nll)
}

impl CodecModel {
    /// Builds the network for `mode`; fails with a named error when the
    /// weights do not match the mode (including the predictor count of the
    /// RGB baselines).
    pub fn new(weights: &ModelWeights, mode: ModelMode) -> Result<Self> {
        let network = Network::new(weights, mode)?;
        let grid = weights.spec.level_grid()?;
        Ok(Self { network, grid })
    }

    pub fn mode(&self) -> ModelMode {
        self.network.mode()
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.network.spec()
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn grid(&self) -> &LevelGrid {
        &self.grid
    }

    pub fn scales(&self) -> usize {
        self.spec().scales
    }

    /// Symbols per sub-pixel or latent entry at scale `s`.
    pub fn alphabet(&self, s: usize) -> usize {
        if s > 0 && self.mode() == ModelMode::Learned {
            self.grid.len()
        } else {
            256
        }
    }

    pub fn scale_channels(&self, s: usize) -> usize {
        if s == 0 {
            3
        } else {
            self.mode().scale_channels(self.spec())
        }
    }

    /// Size after replicate padding to a multiple of `2^S`.
    pub fn padded_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if height == 0 || width == 0 {
            return Err(Error::ImageFormat("empty image".into()));
        }
        let unit = 1usize << self.scales();
        let (h, w) = (height.div_ceil(unit) * unit, width.div_ceil(unit) * unit);
        if h > u16::MAX as usize || w > u16::MAX as usize {
            return Err(Error::ImageTooLarge { height, width });
        }
        Ok((h, w))
    }

    /// `z^(s)` for `s = 0..=S` of an already padded image.
    pub fn representations(&self, padded: &Image) -> Result<Vec<ScaleSymbols>> {
        let s_max = self.scales();
        let mut out = vec![ScaleSymbols::from_image(padded)];
        match self.mode() {
            ModelMode::Learned => {
                let plane = padded.width * padded.height;
                let mut data = vec![0f32; 3 * plane];
                for (i, px) in padded.data.chunks_exact(3).enumerate() {
                    for c in 0..3 {
                        data[c * plane + i] = f32::from(px[c]) / 127.5 - 1.0;
                    }
                }
                let mut input = Tensor::new(3, padded.height, padded.width, data)?;
                for s in 1..=s_max {
                    let (features, z) = self.network.run_extractor(s, &input)?;
                    let symbols = z
                        .data
                        .iter()
                        .map(|&v| self.grid.quantize_hard(f64::from(v)).map(|(j, _)| j as u16))
                        .collect::<Result<Vec<_>>>()?;
                    out.push(ScaleSymbols {
                        channels: z.channels,
                        height: z.height,
                        width: z.width,
                        symbols,
                    });
                    input = features;
                }
            }
            _ => {
                for level in rgb_pyramid(padded, s_max)?.iter().skip(1) {
                    out.push(ScaleSymbols::from_image(level));
                }
            }
        }
        Ok(out)
    }

    /// Predictor input for `z^(s)`, `s >= 1`.
    fn scale_tensor(&self, z: &ScaleSymbols) -> Result<Tensor> {
        let data = match self.mode() {
            ModelMode::Learned => z
                .symbols
                .iter()
                .map(|&j| self.grid.level(j as usize) as f32)
                .collect(),
            _ => z
                .symbols
                .iter()
                .map(|&v| f32::from(v) / 127.5 - 1.0)
                .collect(),
        };
        Tensor::new(z.channels, z.height, z.width, data)
    }

    /// Runs `D^(s)` on `z^(s)` and returns `f^(s)` with the distribution of
    /// scale `s - 1`.
    fn predict(
        &self,
        s: usize,
        z: &ScaleSymbols,
        f_next: Option<&Tensor>,
    ) -> Result<(Tensor, ScaleDist)> {
        let (f, raw) = self
            .network
            .run_predictor(s, &self.scale_tensor(z)?, f_next)?;
        let k = self.spec().components;
        let dist = if s == 1 {
            ScaleDist::Rgb(MixtureParamsRgb::from_head(
                &raw.data, k, raw.height, raw.width,
            )?)
        } else if self.mode() == ModelMode::Learned {
            let p = MixtureParamsLatent::from_head(
                &raw.data,
                self.spec().latent_channels,
                k,
                raw.height,
                raw.width,
            )?;
            ScaleDist::Latent(p, LogisticBinSpec::latent(&self.grid))
        } else {
            let p = MixtureParamsLatent::from_head(&raw.data, 3, k, raw.height, raw.width)?;
            ScaleDist::Latent(p, LogisticBinSpec::rgb())
        };
        Ok((f, dist))
    }

    fn expected_triplet(&self, s: usize, padded: (usize, usize)) -> (u16, u16, u16) {
        (
            self.scale_channels(s) as u16,
            (padded.0 >> s) as u16,
            (padded.1 >> s) as u16,
        )
    }
}

fn encode_scale(
    dist: &ScaleDist,
    scale: usize,
    syms: &mut ScaleSymbols,
    trace: &mut Option<Vec<CdfHash>>,
) -> Result<(Vec<u8>, f64)> {
    let mut enc = RangeEncoder::new();
    let mut nll = 0.0;
    for c in 0..syms.channels {
        let mut hasher = trace.as_ref().map(|_| crc32fast::Hasher::new());
        nll += code_channel(dist, c, syms, &mut enc, hasher.as_mut())?;
        if let (Some(t), Some(h)) = (trace.as_mut(), hasher) {
            t.push(CdfHash {
                scale,
                channel: c,
                hash: h.finalize(),
            });
        }
    }
    Ok((enc.finish()?.bytes, nll))
}

fn decode_scale(
    dist: &ScaleDist,
    stream: &SubStream,
    trace: &mut Option<Vec<CdfHash>>,
) -> Result<ScaleSymbols> {
    let mut syms = ScaleSymbols::zeros(
        stream.channels as usize,
        stream.height as usize,
        stream.width as usize,
    );
    let mut dec = RangeDecoder::new(&stream.payload)?;
    for c in 0..syms.channels {
        let mut hasher = trace.as_ref().map(|_| crc32fast::Hasher::new());
        code_channel(dist, c, &mut syms, &mut dec, hasher.as_mut())?;
        if let (Some(t), Some(h)) = (trace.as_mut(), hasher) {
            t.push(CdfHash {
                scale: stream.scale,
                channel: c,
                hash: h.finalize(),
            });
        }
    }
    if dec.consumed() != stream.payload.len() {
        return Err(Error::CorruptPayload);
    }
    Ok(syms)
}

/// Compresses `image`; see [`encode_image_with`] for accounting details.
pub fn encode_image(image: &Image, model: &CodecModel) -> Result<ContainerFile> {
    Ok(encode_image_with(image, model, &CodecOptions::default())?.container)
}

pub fn encode_image_with(
    image: &Image,
    model: &CodecModel,
    opts: &CodecOptions,
) -> Result<EncodeOutput> {
    let s_max = model.scales();
    let padded_dims = model.padded_dims(image.height, image.width)?;
    let padded = image.pad_replicate(padded_dims.1, padded_dims.0);
    let mut reps = model.representations(&padded)?;
    let mut trace = opts.trace_cdfs.then(Vec::new);
    let mut streams = Vec::with_capacity(s_max + 1);
    let mut reports = Vec::with_capacity(s_max + 1);

    let mut push = |scale: usize,
                    syms: &ScaleSymbols,
                    payload: Vec<u8>,
                    nll: f64,
                    uniform: bool,
                    alphabet: usize| {
        reports.push(ScaleReport {
            scale,
            channels: syms.channels,
            height: syms.height,
            width: syms.width,
            alphabet,
            payload_bytes: payload.len(),
            nll_bits: nll,
            uniform,
        });
        streams.push(SubStream {
            scale,
            channels: syms.channels as u16,
            height: syms.height as u16,
            width: syms.width as u16,
            payload,
        });
    };

    let top = ScaleDist::Uniform(model.alphabet(s_max));
    let (payload, nll) = encode_scale(&top, s_max, &mut reps[s_max], &mut trace)?;
    push(s_max, &reps[s_max], payload, nll, true, top.alphabet());

    let mut f: Option<Tensor> = None;
    for s in (1..=s_max).rev() {
        let (features, dist) = model.predict(s, &reps[s], f.as_ref())?;
        let (payload, nll) = encode_scale(&dist, s - 1, &mut reps[s - 1], &mut trace)?;
        push(s - 1, &reps[s - 1], payload, nll, false, dist.alphabet());
        f = Some(features);
    }

    let container = ContainerFile {
        header: ContainerHeader {
            mode: model.mode(),
            scales: s_max,
            first_stored: 0,
            height: image.height,
            width: image.width,
            padded_height: padded_dims.0,
            padded_width: padded_dims.1,
            checksum: image.checksum(),
        },
        streams,
    };
    Ok(EncodeOutput {
        container,
        scales: reports,
        trace: trace.unwrap_or_default(),
    })
}

fn check_compatible(file: &ContainerFile, model: &CodecModel) -> Result<()> {
    let h = &file.header;
    if h.mode != model.mode() {
        return Err(Error::ModeMismatch {
            expected: model.mode().to_string(),
            found: h.mode.to_string(),
        });
    }
    if h.scales != model.scales() {
        return Err(Error::Malformed {
            what: "container",
            detail: format!(
                "written with {} scales, model has {}",
                h.scales,
                model.scales()
            ),
        });
    }
    let padded = model.padded_dims(h.height, h.width)?;
    for stream in &file.streams {
        let expected = model.expected_triplet(stream.scale, padded);
        if stream.triplet() != expected {
            return Err(Error::DimensionMismatch {
                scale: stream.scale,
                expected,
                found: stream.triplet(),
            });
        }
    }
    Ok(())
}

/// Decodes stored scales and samples the missing ones (only possible with
/// an RNG), returning the padded scale-0 symbols.
fn reconstruct(
    file: &ContainerFile,
    model: &CodecModel,
    mut rng: Option<&mut ChaCha8Rng>,
    opts: &CodecOptions,
) -> Result<(ScaleSymbols, DecodeStats)> {
    check_compatible(file, model)?;
    let s_max = model.scales();
    let mut trace = opts.trace_cdfs.then(Vec::new);
    let mut stats = DecodeStats::default();
    let top = file.stream(s_max).ok_or(Error::MissingScale(s_max))?;
    let mut z = decode_scale(&ScaleDist::Uniform(model.alphabet(s_max)), top, &mut trace)?;
    stats.stages += 1;
    let mut f: Option<Tensor> = None;
    for s in (1..=s_max).rev() {
        let (features, dist) = model.predict(s, &z, f.as_ref())?;
        stats.predictor_passes += 1;
        z = match (file.stream(s - 1), rng.as_deref_mut()) {
            (Some(stream), _) => decode_scale(&dist, stream, &mut trace)?,
            (None, Some(r)) => {
                stats.sampled_scales.push(s - 1);
                sample_scale(&dist, &features, r)?
            }
            (None, None) => return Err(Error::MissingScale(s - 1)),
        };
        stats.stages += 1;
        f = Some(features);
    }
    stats.trace = trace.unwrap_or_default();
    Ok((z, stats))
}

fn sample_scale(dist: &ScaleDist, features: &Tensor, rng: &mut ChaCha8Rng) -> Result<ScaleSymbols> {
    let (h, w) = (features.height, features.width);
    let (channels, values) = match dist {
        ScaleDist::Rgb(p) => (3, dlm::sample_rgb(p, rng)),
        ScaleDist::Latent(p, spec) => (p.channels, dlm::sample_latent(p, spec, rng)),
        ScaleDist::Uniform(n) => {
            let n = *n;
            (1, (0..h * w).map(|_| rng.gen_range(0..n)).collect())
        }
    };
    Ok(ScaleSymbols {
        channels,
        height: h,
        width: w,
        symbols: values.into_iter().map(|v| v as u16).collect(),
    })
}

fn finish_image(z0: &ScaleSymbols, header: &ContainerHeader) -> Result<Image> {
    z0.to_image()?.crop(0, 0, header.width, header.height)
}

pub fn decode_image(file: &ContainerFile, model: &CodecModel) -> Result<Image> {
    Ok(decode_image_with(file, model, &CodecOptions::default())?.0)
}

/// Decodes a complete container and verifies the stored checksum.
pub fn decode_image_with(
    file: &ContainerFile,
    model: &CodecModel,
    opts: &CodecOptions,
) -> Result<(Image, DecodeStats)> {
    if file.header.first_stored > 0 {
        return Err(Error::MissingScale(file.header.first_stored - 1));
    }
    let (z0, stats) = reconstruct(file, model, None, opts)?;
    let image = finish_image(&z0, &file.header)?;
    let decoded = image.checksum();
    if decoded != file.header.checksum {
        return Err(Error::ChecksumMismatch {
            stored: file.header.checksum,
            decoded,
        });
    }
    Ok((image, stats))
}

/// Decodes the stored scales and draws the missing lower ones from the
/// predicted distributions. With every scale stored this equals decoding.
pub fn sample_image(file: &ContainerFile, model: &CodecModel, seed: u64) -> Result<SampleOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (z0, stats) = reconstruct(file, model, Some(&mut rng), &CodecOptions::default())?;
    let image = finish_image(&z0, &file.header)?;
    if stats.sampled_scales.is_empty() && image.checksum() != file.header.checksum {
        return Err(Error::ChecksumMismatch {
            stored: file.header.checksum,
            decoded: image.checksum(),
        });
    }
    Ok(SampleOutput {
        image,
        stats,
        stored_payload_bits: 8 * file.payload_bytes(),
    })
}

/// Share of the payload bits of `full` that lie in scales `first..=S`.
pub fn stored_fraction(full: &ContainerFile, first: usize) -> f64 {
    let total = full.payload_bytes();
    if total == 0 {
        return 0.0;
    }
    let kept: usize = full
        .streams
        .iter()
        .filter(|s| s.scale >= first)
        .map(|s| s.payload.len())
        .sum();
    kept as f64 / total as f64
}

/// Bits per sub-pixel of a file of `bytes` bytes for an image of the given
/// original size.
pub fn bpsp(bytes: usize, height: usize, width: usize) -> f64 {
    8.0 * bytes as f64 / (3 * height * width) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mode: ModelMode, scales: usize, seed: u64) -> CodecModel {
        let spec = NetworkSpec {
            scales,
            filters: 4,
            latent_channels: 2,
            components: 2,
            resblocks: 1,
            ..NetworkSpec::default()
        };
        CodecModel::new(&ModelWeights::random(spec, mode, seed).unwrap(), mode).unwrap()
    }

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, (0..3 * w * h).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn roundtrip_small_sizes_all_modes() {
        for mode in ModelMode::ALL {
            let model = tiny(mode, 2, 5);
            for (w, h) in [(1, 1), (13, 17), (4, 4)] {
                let img = noise(w, h, (w * h) as u64);
                let c = encode_image(&img, &model).unwrap();
                let parsed = ContainerFile::from_bytes(&c.to_bytes()).unwrap();
                assert_eq!(
                    decode_image(&parsed, &model).unwrap(),
                    img,
                    "{mode} {w}x{h}"
                );
            }
        }
    }

    #[test]
    fn traces_match() {
        let model = tiny(ModelMode::Learned, 2, 1);
        let img = noise(9, 6, 3);
        let opts = CodecOptions { trace_cdfs: true };
        let enc = encode_image_with(&img, &model, &opts).unwrap();
        let (_, stats) = decode_image_with(&enc.container, &model, &opts).unwrap();
        assert_eq!(enc.trace, stats.trace);
        assert_eq!(enc.trace.len(), 2 + 2 + 3);
        assert_eq!((stats.stages, stats.predictor_passes), (3, 2));
    }

    #[test]
    fn mode_and_weights_mismatch() {
        let img = noise(8, 8, 1);
        let c = encode_image(&img, &tiny(ModelMode::Rgb, 2, 1)).unwrap();
        assert!(matches!(
            decode_image(&c, &tiny(ModelMode::RgbShared, 2, 1)),
            Err(Error::ModeMismatch { .. })
        ));
        match decode_image(&c, &tiny(ModelMode::Rgb, 2, 2)) {
            Err(_) => {}
            Ok(out) => assert_ne!(out, img),
        }
    }

    #[test]
    fn sampling_with_everything_stored_is_decoding() {
        let model = tiny(ModelMode::Learned, 2, 4);
        let img = noise(8, 12, 2);
        let c = encode_image(&img, &model).unwrap();
        let s = sample_image(&c, &model, 1).unwrap();
        assert_eq!(s.image, img);
        assert!(s.stats.sampled_scales.is_empty());
        let part = c.retain_from(1).unwrap();
        let a = sample_image(&part, &model, 7).unwrap();
        let b = sample_image(&part, &model, 7).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!((a.image.width, a.image.height), (8, 12));
        assert_eq!(a.stats.sampled_scales, vec![0]);
        assert!(matches!(
            decode_image(&part, &model),
            Err(Error::MissingScale(0))
        ));
        let frac = stored_fraction(&c, 1);
        assert!(frac > 0.0 && frac < 1.0);
    }

    #[test]
    fn bpsp_values() {
        assert_eq!(bpsp(3 * 10 * 20, 10, 20), 8.0);
        assert_eq!(bpsp(28, 1, 1), 8.0 * 28.0 / 3.0);
    }
}
