//! Byte layout of compressed files.
//!
//! ```text
//! offset size
//!  0     4    magic b"L3CC"
//!  4     1    version (1)
//!  5     1    mode tag (0 learned, 1 rgb, 2 rgb-shared)
//!  6     1    S, number of auxiliary scales
//!  7     1    lowest stored scale (0 for a complete file)
//!  8     4    original height      u32
//! 12     4    original width       u32
//! 16     4    padded height        u32
//! 20     4    padded width         u32
//! 24     4    CRC-32 of the original RGB bytes
//! 28          sub-streams for s = S down to the lowest stored scale:
//!             u16 C, u16 H', u16 W', u32 payload length, payload
//! ```
//!
//! All integers are little-endian. A payload is a single range-coded stream
//! holding the channels of its scale in order; channel boundaries follow
//! from the triplet.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::ModelMode;

pub const CONTAINER_MAGIC: &[u8; 4] = b"L3CC";
pub const CONTAINER_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 28;
pub const STREAM_HEADER_BYTES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContainerHeader {
    pub mode: ModelMode,
    pub scales: usize,
    pub first_stored: usize,
    pub height: usize,
    pub width: usize,
    pub padded_height: usize,
    pub padded_width: usize,
    pub checksum: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubStream {
    pub scale: usize,
    pub channels: u16,
    pub height: u16,
    pub width: u16,
    pub payload: Vec<u8>,
}

impl SubStream {
    pub fn triplet(&self) -> (u16, u16, u16) {
        (self.channels, self.height, self.width)
    }

    pub fn symbols(&self) -> usize {
        self.channels as usize * self.height as usize * self.width as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainerFile {
    pub header: ContainerHeader,
    /// Ordered from scale `S` down to `header.first_stored`.
    pub streams: Vec<SubStream>,
}

/// Shape and size of one sub-stream, as reported by `inspect`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamInfo {
    pub scale: usize,
    pub channels: u16,
    pub height: u16,
    pub width: u16,
    pub payload_bytes: usize,
    pub bits_per_symbol: f64,
}

fn malformed(detail: impl Into<String>) -> Error {
    Error::Malformed {
        what: "container",
        detail: detail.into(),
    }
}

impl ContainerFile {
    pub fn stream(&self, scale: usize) -> Option<&SubStream> {
        self.streams.iter().find(|s| s.scale == scale)
    }

    pub fn payload_bytes(&self) -> usize {
        self.streams.iter().map(|s| s.payload.len()).sum()
    }

    pub fn total_bytes(&self) -> usize {
        HEADER_BYTES + self.streams.len() * STREAM_HEADER_BYTES + self.payload_bytes()
    }

    /// Keeps only scales `first..=S`, as used for sampling the rest.
    pub fn retain_from(&self, first: usize) -> Result<ContainerFile> {
        if first > self.header.scales {
            return Err(Error::MissingScale(self.header.scales));
        }
        if first < self.header.first_stored {
            return Err(Error::MissingScale(first));
        }
        let mut header = self.header.clone();
        header.first_stored = first;
        Ok(ContainerFile {
            header,
            streams: self
                .streams
                .iter()
                .filter(|s| s.scale >= first)
                .cloned()
                .collect(),
        })
    }

    pub fn stream_info(&self) -> Vec<StreamInfo> {
        self.streams
            .iter()
            .map(|s| StreamInfo {
                scale: s.scale,
                channels: s.channels,
                height: s.height,
                width: s.width,
                payload_bytes: s.payload.len(),
                bits_per_symbol: if s.symbols() == 0 {
                    0.0
                } else {
                    8.0 * s.payload.len() as f64 / s.symbols() as f64
                },
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.total_bytes());
        out.extend_from_slice(CONTAINER_MAGIC);
        out.push(CONTAINER_VERSION);
        out.push(h.mode.tag());
        out.push(h.scales as u8);
        out.push(h.first_stored as u8);
        for v in [h.height, h.width, h.padded_height, h.padded_width] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&h.checksum.to_le_bytes());
        for s in &self.streams {
            for v in [s.channels, s.height, s.width] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(s.payload.len() as u32).to_le_bytes());
            out.extend_from_slice(&s.payload);
        }
        out
    }

    /// Parses and checks the structure; spatial dims of every triplet must
    /// follow from the padded size. Channel counts are checked by the
    /// decoder, which knows the model.
    pub fn from_bytes(bytes: &[u8]) -> Result<ContainerFile> {
        if bytes.len() < HEADER_BYTES {
            if bytes.len() >= 4 && &bytes[..4] != CONTAINER_MAGIC {
                return Err(Error::BadMagic("container"));
            }
            return Err(malformed(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[..4] != CONTAINER_MAGIC {
            return Err(Error::BadMagic("container"));
        }
        if bytes[4] != CONTAINER_VERSION {
            return Err(Error::Version {
                what: "container",
                found: u32::from(bytes[4]),
            });
        }
        let mode = ModelMode::from_tag(bytes[5])
            .ok_or_else(|| malformed(format!("unknown mode tag {}", bytes[5])))?;
        let scales = bytes[6] as usize;
        let first_stored = bytes[7] as usize;
        if scales == 0 || first_stored > scales {
            return Err(malformed(format!("scale range {first_stored}..={scales}")));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let header = ContainerHeader {
            mode,
            scales,
            first_stored,
            height: u32_at(8) as usize,
            width: u32_at(12) as usize,
            padded_height: u32_at(16) as usize,
            padded_width: u32_at(20) as usize,
            checksum: u32_at(24),
        };
        let unit = 1usize << scales;
        let expect_pad = |v: usize| v.div_ceil(unit) * unit;
        if header.height == 0
            || header.width == 0
            || header.padded_height != expect_pad(header.height)
            || header.padded_width != expect_pad(header.width)
        {
            return Err(malformed(format!(
                "dimensions {}x{} padded to {}x{}",
                header.height, header.width, header.padded_height, header.padded_width
            )));
        }
        let mut pos = HEADER_BYTES;
        let mut streams = Vec::new();
        for scale in (first_stored..=scales).rev() {
            let head = bytes
                .get(pos..pos + STREAM_HEADER_BYTES)
                .ok_or_else(|| malformed(format!("truncated before sub-stream {scale}")))?;
            let u16_at = |o: usize| u16::from_le_bytes(head[o..o + 2].try_into().unwrap());
            let (channels, height, width) = (u16_at(0), u16_at(2), u16_at(4));
            let len = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
            let want = (header.padded_height >> scale, header.padded_width >> scale);
            if (height as usize, width as usize) != want || channels == 0 {
                return Err(Error::DimensionMismatch {
                    scale,
                    expected: (channels.max(1), want.0 as u16, want.1 as u16),
                    found: (channels, height, width),
                });
            }
            pos += STREAM_HEADER_BYTES;
            let payload = bytes
                .get(pos..pos + len)
                .ok_or_else(|| malformed(format!("payload of scale {scale} truncated")))?
                .to_vec();
            pos += len;
            streams.push(SubStream {
                scale,
                channels,
                height,
                width,
                payload,
            });
        }
        if pos != bytes.len() {
            return Err(malformed(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(ContainerFile { header, streams })
    }
}
