//! Bicubic image pyramid used as the fixed "extractor" of the RGB baselines.

use crate::error::{Error, Result};
use crate::image::Image;

/// Catmull-Rom cubic (`a = -0.5`).
pub fn cubic_kernel(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        (((t - 5.0) * t + 8.0) * t - 4.0) * A
    } else {
        0.0
    }
}

/// Normalized tap positions and weights for every output sample of a 1-D
/// downscale by `factor`. The kernel is stretched by the factor so the
/// resampler low-passes before decimating; taps falling outside the input
/// are clamped to the nearest edge sample.
pub fn resample_taps(input: usize, factor: usize) -> Vec<Vec<(usize, f64)>> {
    let out = input.div_ceil(factor);
    let scale = factor as f64;
    let support = 2.0 * scale;
    (0..out)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = (center - support).floor() as i64;
            let hi = (center + support).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            let mut total = 0.0;
            for j in lo..=hi {
                let w = cubic_kernel((j as f64 + 0.5 - center) / scale);
                if w == 0.0 {
                    continue;
                }
                let idx = j.clamp(0, input as i64 - 1) as usize;
                total += w;
                match taps.iter_mut().find(|(k, _)| *k == idx) {
                    Some(t) => t.1 += w,
                    None => taps.push((idx, w)),
                }
            }
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Downscales by a power-of-two `factor`; output dims are the input dims
/// divided by the factor, rounded up. Values are rounded to the nearest
/// integer and clamped to `0..=255`.
pub fn bicubic_down(image: &Image, factor: usize) -> Result<Image> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::Shape(format!(
            "downscale factor {factor} is not a power of two"
        )));
    }
    if factor == 1 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width, image.height);
    let xt = resample_taps(w, factor);
    let yt = resample_taps(h, factor);
    let ow = xt.len();
    let mut rows = vec![0.0f64; 3 * ow * h];
    for y in 0..h {
        for (ox, taps) in xt.iter().enumerate() {
            for c in 0..3 {
                rows[(y * ow + ox) * 3 + c] = taps
                    .iter()
                    .map(|&(x, wt)| wt * f64::from(image.get(x, y, c)))
                    .sum();
            }
        }
    }
    let mut data = Vec::with_capacity(3 * ow * yt.len());
    for taps in &yt {
        for ox in 0..ow {
            for c in 0..3 {
                let v: f64 = taps
                    .iter()
                    .map(|&(y, wt)| wt * rows[(y * ow + ox) * 3 + c])
                    .sum();
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(ow, yt.len(), data)
}

/// Levels `0..=scales` with level `s = B_{2^s}(x)`, each computed from `x`.
pub fn rgb_pyramid(image: &Image, scales: usize) -> Result<Vec<Image>> {
    (0..=scales).map(|s| bicubic_down(image, 1 << s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
        assert!((cubic_kernel(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic_kernel(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn constant_is_preserved() {
        let img = Image::filled(13, 7, [9, 200, 77]);
        for s in 0..4 {
            let d = bicubic_down(&img, 1 << s).unwrap();
            assert_eq!(
                (d.width, d.height),
                (13usize.div_ceil(1 << s), 7usize.div_ceil(1 << s))
            );
            assert!(d.data.chunks(3).all(|p| p == [9, 200, 77]));
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let img = Image::new(5, 3, (0..45).map(|i| (i * 37 % 256) as u8).collect()).unwrap();
        assert_eq!(bicubic_down(&img, 1).unwrap(), img);
        assert!(bicubic_down(&img, 3).is_err());
    }

    /// Direct 2-D evaluation of the stretched kernel, no separability.
    fn reference(img: &Image, factor: usize) -> Image {
        let f = factor as f64;
        let (ow, oh) = (img.width.div_ceil(factor), img.height.div_ceil(factor));
        let mut data = Vec::new();
        for oy in 0..oh {
            for ox in 0..ow {
                let (cx, cy) = ((ox as f64 + 0.5) * f, (oy as f64 + 0.5) * f);
                let mut acc = [0.0f64; 3];
                let mut total = 0.0;
                for j in -20i64..40 {
                    for i in -20i64..40 {
                        let wt = cubic_kernel((i as f64 + 0.5 - cx) / f)
                            * cubic_kernel((j as f64 + 0.5 - cy) / f);
                        if wt == 0.0 {
                            continue;
                        }
                        let x = i.clamp(0, img.width as i64 - 1) as usize;
                        let y = j.clamp(0, img.height as i64 - 1) as usize;
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += wt * f64::from(img.get(x, y, c));
                        }
                        total += wt;
                    }
                }
                data.extend(acc.map(|a| (a / total).round().clamp(0.0, 255.0) as u8));
            }
        }
        Image::new(ow, oh, data).unwrap()
    }

    #[test]
    fn ramp_matches_direct_reference() {
        let data = (0..8)
            .flat_map(|y| (0..8).flat_map(move |x| [8 * x + 4 * y, 255 - 16 * x, 30 * y]))
            .map(|v| v as u8)
            .collect();
        let img = Image::new(8, 8, data).unwrap();
        let d = bicubic_down(&img, 2).unwrap();
        assert_eq!(d, reference(&img, 2));
    }

    #[test]
    fn linear_ramp_interior_is_exact() {
        let data = (0..32)
            .flat_map(|y| (0..32).flat_map(move |x| [4 * x + 2 * y, 0, 0]))
            .map(|v| v as u8)
            .collect();
        let img = Image::new(32, 32, data).unwrap();
        let d = bicubic_down(&img, 2).unwrap();
        for y in 2..14 {
            for x in 2..14 {
                assert_eq!(d.get(x, y, 0) as usize, 4 * (2 * x) + 2 + 2 * (2 * y) + 1);
            }
        }
    }

    #[test]
    fn non_ramp_matches_direct_reference() {
        let img = Image::new(11, 9, (0..297).map(|i| ((i * 7919) % 251) as u8).collect()).unwrap();
        for f in [2, 4, 8] {
            assert_eq!(bicubic_down(&img, f).unwrap(), reference(&img, f));
        }
    }
}
