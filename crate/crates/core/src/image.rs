//! 8-bit RGB images with binary PPM and PNG readers and writers.

use std::io::{Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved 8-bit RGB, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::ImageFormat(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.repeat(width * height),
        }
    }

    pub fn sub_pixels(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Plane `c` as row-major bytes.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn from_planes(width: usize, height: usize, planes: [&[u8]; 3]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::ImageFormat("plane size mismatch".into()));
        }
        let mut data = Vec::with_capacity(3 * n);
        for ((r, g), b) in planes[0].iter().zip(planes[1]).zip(planes[2]) {
            data.extend([*r, *g, *b]);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Replicates the last column and row until the size reaches the given
    /// dimensions.
    pub fn pad_replicate(&self, width: usize, height: usize) -> Image {
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            let sy = y.min(self.height - 1);
            for x in 0..width {
                let sx = x.min(self.width - 1);
                let i = (sy * self.width + sx) * 3;
                data.extend_from_slice(&self.data[i..i + 3]);
            }
        }
        Image {
            width,
            height,
            data,
        }
    }

    /// The `width x height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::ImageFormat(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(3 * width * height);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + 3 * width]);
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn center_crop(&self, width: usize, height: usize) -> Result<Image> {
        let w = width.min(self.width);
        let h = height.min(self.height);
        self.crop((self.width - w) / 2, (self.height - h) / 2, w, h)
    }

    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&self.data)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Image> {
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::ImageFormat("truncated PPM header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or(""));
        }
        if fields[0] != "P6" {
            return Err(Error::ImageFormat("not a binary PPM (P6)".into()));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::ImageFormat(format!("bad PPM header field `{s}`")))
        };
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(Error::ImageFormat(format!(
                "PPM maxval {maxval} unsupported"
            )));
        }
        pos += 1;
        let need = 3 * width * height;
        let body = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::ImageFormat("truncated PPM data".into()))?;
        Image::new(width, height, body.to_vec())
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.data)?;
        }
        Ok(out)
    }

    /// Decodes any PNG; grayscale is replicated, alpha dropped and 16-bit
    /// samples reduced to 8 bits.
    pub fn from_png(bytes: &[u8]) -> Result<Image> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info()?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::ImageFormat("PNG too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf)?;
        let (w, h) = (info.width as usize, info.height as usize);
        let samples = info.color_type.samples();
        let mut data = Vec::with_capacity(3 * w * h);
        for row in buf[..info.buffer_size()].chunks_exact(info.line_size) {
            for px in row[..w * samples].chunks_exact(samples) {
                match samples {
                    1 | 2 => data.extend([px[0]; 3]),
                    _ => data.extend_from_slice(&px[..3]),
                }
            }
        }
        Image::new(w, h, data)
    }

    /// Sniffs the format from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<Image> {
        if bytes.starts_with(b"\x89PNG") {
            Image::from_png(bytes)
        } else if bytes.starts_with(b"P6") {
            Image::from_ppm(bytes)
        } else {
            Err(Error::ImageFormat("expected PNG or binary PPM (P6)".into()))
        }
    }

    pub fn read(path: &Path) -> Result<Image> {
        Image::decode(&std::fs::read(path)?)
    }

    /// Writes PNG for a `.png` extension and PPM otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        let bytes = if is_png {
            self.to_png()?
        } else {
            self.to_ppm()
        };
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Image {
        Image::new(3, 2, (0..18).map(|i| (i * 13) as u8).collect()).unwrap()
    }

    #[test]
    fn ppm_roundtrip() {
        let img = sample();
        assert_eq!(Image::from_ppm(&img.to_ppm()).unwrap(), img);
        let commented = b"P6 # c\n3 2\n# x\n255\n"
            .iter()
            .chain(&img.data)
            .copied()
            .collect::<Vec<_>>();
        assert_eq!(Image::decode(&commented).unwrap(), img);
        assert!(Image::from_ppm(b"P6\n3 2\n255\n\x00").is_err());
        assert!(Image::from_ppm(b"P3\n1 1\n255\n1 2 3").is_err());
    }

    #[test]
    fn png_roundtrip() {
        let img = sample();
        assert_eq!(Image::decode(&img.to_png().unwrap()).unwrap(), img);
    }

    #[test]
    fn png_gray_and_alpha() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::GrayscaleAlpha);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[10, 255, 20, 0]).unwrap();
        }
        let img = Image::from_png(&out).unwrap();
        assert_eq!(img.data, vec![10, 10, 10, 20, 20, 20]);
    }

    #[test]
    fn pad_and_crop() {
        let img = sample();
        let p = img.pad_replicate(4, 4);
        assert_eq!(p.get(3, 3, 0), img.get(2, 1, 0));
        assert_eq!(p.get(1, 3, 2), img.get(1, 1, 2));
        assert_eq!(p.crop(0, 0, 3, 2).unwrap(), img);
        assert_eq!(
            Image::from_planes(3, 2, [&img.channel(0), &img.channel(1), &img.channel(2)]).unwrap(),
            img
        );
        assert_eq!(img.center_crop(1, 1).unwrap().data, img.data[3..6].to_vec());
    }
}
