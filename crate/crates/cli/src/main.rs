mod bench;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use l3c::codec::{self, CodecModel, CodecOptions, ContainerFile};
use l3c::nn::{load_weights, save_weights, ModelMode, ModelWeights, NetworkSpec};
use l3c::Image;

use report::{DecodeReport, EncodeReport, InspectReport, SampleReport};

#[derive(Parser)]
#[command(name = "l3c", version, about = "Learned lossless image codec")]
struct Cli {
    /// Worker threads for CDF construction and convolutions.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Learned,
    Rgb,
    RgbShared,
}

impl From<ModeArg> for ModelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Learned => ModelMode::Learned,
            ModeArg::Rgb => ModelMode::Rgb,
            ModeArg::RgbShared => ModelMode::RgbShared,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Weight file.
    #[arg(long)]
    weights: PathBuf,
    /// Model mode; inferred from the weight file when omitted.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a PNG or binary PPM image.
    Encode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Decompress a container to PNG (`.png`) or PPM (anything else).
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Store some scales and sample the rest from the model.
    Sample {
        /// An image (encoded first) or a container.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Stored scales, a comma list ending at S (for example `1,2,3`).
        #[arg(long, value_delimiter = ',')]
        scales: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Print the header and sub-stream table of a container.
    Inspect {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Round-trip every image of a directory and report bpsp and timings.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Center-crop every image to WxH first.
        #[arg(long)]
        crop: Option<String>,
        /// Files of another codec, matched by file stem: NAME=DIR.
        #[arg(long)]
        compare: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Write randomly initialized weights.
    InitWeights {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "learned")]
        mode: ModeArg,
        #[arg(long, default_value_t = 3)]
        scales: usize,
        #[arg(long, default_value_t = 64)]
        filters: usize,
        #[arg(long, default_value_t = 5)]
        latent_channels: usize,
        #[arg(long, default_value_t = 10)]
        components: usize,
        #[arg(long, default_value_t = 8)]
        resblocks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub(crate) fn load_model(args: &ModelArgs) -> Result<CodecModel> {
    let bytes = std::fs::read(&args.weights)
        .with_context(|| format!("reading {}", args.weights.display()))?;
    let weights =
        load_weights(&bytes).with_context(|| format!("loading {}", args.weights.display()))?;
    let mode = match args.mode {
        Some(m) => m.into(),
        None => weights
            .infer_mode()
            .context("cannot infer the model mode from the weights")?,
    };
    CodecModel::new(&weights, mode).with_context(|| format!("weights do not fit mode {mode}"))
}

fn read_image(path: &Path) -> Result<Image> {
    Image::read(path).with_context(|| format!("reading image {}", path.display()))
}

fn read_container(path: &Path) -> Result<ContainerFile> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    ContainerFile::from_bytes(&bytes)
        .with_context(|| format!("parsing container {}", path.display()))
}

fn emit<T: serde::Serialize>(
    format: ReportFormat,
    value: &T,
    text: impl FnOnce(&T) -> String,
) -> Result<()> {
    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(value)?),
        ReportFormat::Text => print!("{}", text(value)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Encode {
            input,
            output,
            model,
            report,
        } => {
            let model = load_model(&model)?;
            let image = read_image(&input)?;
            let start = Instant::now();
            let out = codec::encode_image_with(&image, &model, &CodecOptions::default())?;
            let bytes = out.container.to_bytes();
            let seconds = start.elapsed().as_secs_f64();
            std::fs::write(&output, &bytes)
                .with_context(|| format!("writing {}", output.display()))?;
            let r = EncodeReport::new(&input, &output, &image, &out, seconds);
            emit(report, &r, EncodeReport::text)
        }
        Command::Decode {
            input,
            output,
            model,
            report,
        } => {
            let file = read_container(&input)?;
            let mut model_args = model;
            if model_args.mode.is_none() {
                model_args.mode = Some(match file.header.mode {
                    ModelMode::Learned => ModeArg::Learned,
                    ModelMode::Rgb => ModeArg::Rgb,
                    ModelMode::RgbShared => ModeArg::RgbShared,
                });
            }
            let model = load_model(&model_args)?;
            let start = Instant::now();
            let (image, stats) = codec::decode_image_with(&file, &model, &CodecOptions::default())
                .with_context(|| format!("decoding {}", input.display()))?;
            let seconds = start.elapsed().as_secs_f64();
            image
                .write(&output)
                .with_context(|| format!("writing {}", output.display()))?;
            let r = DecodeReport {
                input: input.display().to_string(),
                output: output.display().to_string(),
                width: image.width,
                height: image.height,
                decode_seconds: seconds,
                stages: stats.stages,
                predictor_passes: stats.predictor_passes,
            };
            emit(report, &r, DecodeReport::text)
        }
        Command::Sample {
            input,
            output,
            model,
            scales,
            seed,
            report,
        } => {
            let model = load_model(&model)?;
            let bytes =
                std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let full = if bytes.starts_with(codec::container::CONTAINER_MAGIC) {
                ContainerFile::from_bytes(&bytes)?
            } else {
                codec::encode_image(&Image::decode(&bytes)?, &model)?
            };
            let first = stored_range(&scales, model.scales())?;
            let partial = full.retain_from(first)?;
            let start = Instant::now();
            let out = codec::sample_image(&partial, &model, seed)?;
            let seconds = start.elapsed().as_secs_f64();
            out.image
                .write(&output)
                .with_context(|| format!("writing {}", output.display()))?;
            let complete = full.header.first_stored == 0;
            let r = SampleReport {
                output: output.display().to_string(),
                stored_scales: (first..=model.scales()).collect(),
                sampled_scales: out.stats.sampled_scales.clone(),
                seed,
                stored_payload_bits: out.stored_payload_bits,
                total_payload_bits: complete.then(|| 8 * full.payload_bytes()),
                stored_fraction: complete.then(|| codec::stored_fraction(&full, first)),
                seconds,
            };
            emit(report, &r, SampleReport::text)
        }
        Command::Inspect { input, report } => {
            let file = read_container(&input)?;
            emit(
                report,
                &InspectReport::new(&input, &file),
                InspectReport::text,
            )
        }
        Command::Bench {
            dir,
            model,
            crop,
            compare,
            report,
        } => {
            let model_ref = load_model(&model)?;
            let crop = crop.as_deref().map(parse_size).transpose()?;
            let compare = compare
                .iter()
                .map(|c| parse_compare(c))
                .collect::<Result<Vec<_>>>()?;
            let r = bench::run(&dir, &model_ref, &model.weights, crop, &compare)?;
            emit(report, &r, bench::BenchReport::text)
        }
        Command::InitWeights {
            output,
            mode,
            scales,
            filters,
            latent_channels,
            components,
            resblocks,
            seed,
        } => {
            let spec = NetworkSpec {
                scales,
                filters,
                latent_channels,
                components,
                resblocks,
                ..NetworkSpec::default()
            };
            let weights = ModelWeights::random(spec, mode.into(), seed)?;
            std::fs::write(&output, save_weights(&weights))
                .with_context(|| format!("writing {}", output.display()))?;
            println!(
                "wrote {} ({} tensors, mode {})",
                output.display(),
                weights.tensors.len(),
                ModelMode::from(mode)
            );
            Ok(())
        }
    }
}

/// Lowest stored scale of a contiguous list that ends at `top`.
fn stored_range(scales: &[usize], top: usize) -> Result<usize> {
    if scales.is_empty() {
        return Ok(0);
    }
    let mut sorted = scales.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let first = sorted[0];
    if *sorted.last().unwrap() != top || sorted != (first..=top).collect::<Vec<_>>() {
        bail!("stored scales must be a contiguous range ending at {top}, got {scales:?}");
    }
    Ok(first)
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("expected WxH, got `{s}`"))?;
    Ok((
        w.parse().context("crop width")?,
        h.parse().context("crop height")?,
    ))
}

fn parse_compare(s: &str) -> Result<(String, PathBuf)> {
    let (name, dir) = s
        .split_once('=')
        .with_context(|| format!("expected NAME=DIR, got `{s}`"))?;
    Ok((name.to_string(), PathBuf::from(dir)))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
