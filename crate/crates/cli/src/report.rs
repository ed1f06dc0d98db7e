use std::fmt::Write;
use std::path::Path;

use serde::Serialize;

use l3c::codec::{
    self, ContainerFile, ContainerHeader, EncodeOutput, ScaleReport, StreamInfo, HEADER_BYTES,
};
use l3c::Image;

#[derive(Serialize)]
pub struct EncodeReport {
    pub input: String,
    pub output: String,
    pub width: usize,
    pub height: usize,
    pub bytes: usize,
    pub bpsp: f64,
    pub encode_seconds: f64,
    pub scales: Vec<ScaleReport>,
}

impl EncodeReport {
    pub fn new(
        input: &Path,
        output: &Path,
        image: &Image,
        out: &EncodeOutput,
        seconds: f64,
    ) -> Self {
        let bytes = out.container.total_bytes();
        Self {
            input: input.display().to_string(),
            output: output.display().to_string(),
            width: image.width,
            height: image.height,
            bytes,
            bpsp: codec::bpsp(bytes, image.height, image.width),
            encode_seconds: seconds,
            scales: out.scales.clone(),
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "{} -> {}: {}x{}, {} bytes, {:.4} bpsp\nencode {:.3} s\n",
            self.input,
            self.output,
            self.width,
            self.height,
            self.bytes,
            self.bpsp,
            self.encode_seconds
        );
        for r in &self.scales {
            let _ = writeln!(
                s,
                "  scale {}: {}x{}x{} over {} symbols, {} bytes ({:.1} bits model estimate)",
                r.scale, r.channels, r.height, r.width, r.alphabet, r.payload_bytes, r.nll_bits
            );
        }
        s
    }
}

#[derive(Serialize)]
pub struct DecodeReport {
    pub input: String,
    pub output: String,
    pub width: usize,
    pub height: usize,
    pub decode_seconds: f64,
    pub stages: usize,
    pub predictor_passes: usize,
}

impl DecodeReport {
    pub fn text(&self) -> String {
        format!(
            "{} -> {}: {}x{}\ndecode {:.3} s ({} stages, {} predictor passes)\n",
            self.input,
            self.output,
            self.width,
            self.height,
            self.decode_seconds,
            self.stages,
            self.predictor_passes
        )
    }
}

#[derive(Serialize)]
pub struct SampleReport {
    pub output: String,
    pub stored_scales: Vec<usize>,
    pub sampled_scales: Vec<usize>,
    pub seed: u64,
    pub stored_payload_bits: usize,
    pub total_payload_bits: Option<usize>,
    pub stored_fraction: Option<f64>,
    pub seconds: f64,
}

impl SampleReport {
    pub fn text(&self) -> String {
        let mut s = format!(
            "{}: stored scales {:?}, sampled {:?} (seed {})\nstored {} payload bits",
            self.output,
            self.stored_scales,
            self.sampled_scales,
            self.seed,
            self.stored_payload_bits
        );
        if let (Some(total), Some(f)) = (self.total_payload_bits, self.stored_fraction) {
            let _ = write!(s, " of {total} ({:.2}%)", 100.0 * f);
        }
        let _ = writeln!(s, "\nsample {:.3} s", self.seconds);
        s
    }
}

#[derive(Serialize)]
pub struct InspectReport {
    pub input: String,
    pub header: ContainerHeader,
    pub header_bytes: usize,
    pub total_bytes: usize,
    pub bpsp: f64,
    pub streams: Vec<StreamInfo>,
}

impl InspectReport {
    pub fn new(input: &Path, file: &ContainerFile) -> Self {
        let total = file.total_bytes();
        Self {
            input: input.display().to_string(),
            header: file.header.clone(),
            header_bytes: HEADER_BYTES,
            total_bytes: total,
            bpsp: codec::bpsp(total, file.header.height, file.header.width),
            streams: file.stream_info(),
        }
    }

    pub fn text(&self) -> String {
        let h = &self.header;
        let mut s = format!(
            "{}: mode {}, S={}, lowest stored scale {}\nimage {}x{} (padded {}x{}), crc32 {:08x}\n{} bytes, {:.4} bpsp\n",
            self.input,
            h.mode,
            h.scales,
            h.first_stored,
            h.width,
            h.height,
            h.padded_width,
            h.padded_height,
            h.checksum,
            self.total_bytes,
            self.bpsp
        );
        for st in &self.streams {
            let _ = writeln!(
                s,
                "  scale {}: C={} H'={} W'={} payload {} bytes ({:.3} bits/symbol)",
                st.scale, st.channels, st.height, st.width, st.payload_bytes, st.bits_per_symbol
            );
        }
        s
    }
}
