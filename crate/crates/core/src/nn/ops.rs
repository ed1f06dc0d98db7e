//! Convolution and rearrangement primitives.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Convolution weights in `[out, in, kh, kw]` order plus one bias per output
/// channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if weight.len() != out_channels * in_channels * kernel * kernel
            || bias.len() != out_channels
        {
            return Err(Error::Shape(format!(
                "conv [{out_channels}, {in_channels}, {kernel}, {kernel}] got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            weight,
            bias,
        })
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weight[((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx]
    }
}

/// Output extent of a strided, dilated, zero-padded convolution.
pub fn conv_output_len(
    input: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
) -> usize {
    let span = dilation * (kernel - 1) + 1;
    if input + 2 * padding < span {
        0
    } else {
        (input + 2 * padding - span) / stride + 1
    }
}

/// Cross-correlation with zero padding.
///
/// Every output element is accumulated as `bias + sum_i sum_ky sum_kx`, in
/// that order, independent of threading.
pub fn conv2d(
    input: &Tensor,
    conv: &Conv2d,
    stride: usize,
    dilation: usize,
    padding: usize,
) -> Result<Tensor> {
    if input.channels != conv.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            conv.in_channels, input.channels
        )));
    }
    if stride == 0 || dilation == 0 {
        return Err(Error::Shape("stride and dilation must be positive".into()));
    }
    let (h, w) = (input.height, input.width);
    let oh = conv_output_len(h, conv.kernel, stride, dilation, padding);
    let ow = conv_output_len(w, conv.kernel, stride, dilation, padding);
    let k = conv.kernel;
    let plane = oh * ow;
    let mut data = vec![0.0f32; conv.out_channels * plane];

    let run = |(o, out): (usize, &mut [f32])| {
        out.fill(conv.bias[o]);
        for i in 0..conv.in_channels {
            let src = input.plane(i);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = conv.w(o, i, ky, kx);
                    if wv == 0.0 {
                        // a zero tap only ever adds a signed zero
                        continue;
                    }
                    // ix = ox*stride + kx*dilation - padding must lie in [0, w)
                    let off_x = (kx * dilation) as isize - padding as isize;
                    let ox_lo = if off_x >= 0 {
                        0
                    } else {
                        ((-off_x) as usize).div_ceil(stride)
                    };
                    let ox_hi = if (w as isize) <= off_x {
                        0
                    } else {
                        (((w as isize - off_x - 1) as usize) / stride + 1).min(ow)
                    };
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride + ky * dilation) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut out[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let start = (ox_lo as isize + off_x) as usize;
                            for (d, s) in dst[ox_lo..ox_hi]
                                .iter_mut()
                                .zip(&row[start..start + ox_hi - ox_lo])
                            {
                                *d += wv * s;
                            }
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate().take(ox_hi).skip(ox_lo) {
                                *d += wv * row[(ox as isize * stride as isize + off_x) as usize];
                            }
                        }
                    }
                }
            }
        }
    };
    if plane * conv.in_channels * k * k >= 1 << 14 {
        data.par_chunks_mut(plane.max(1)).enumerate().for_each(run);
    } else {
        data.chunks_mut(plane.max(1)).enumerate().for_each(run);
    }
    Tensor::new(conv.out_channels, oh, ow, data)
}

/// Stride-1 convolution that preserves spatial size (odd kernels).
pub fn conv2d_same(input: &Tensor, conv: &Conv2d, dilation: usize) -> Result<Tensor> {
    conv2d(input, conv, 1, dilation, dilation * (conv.kernel - 1) / 2)
}

/// `[C*r*r, H, W] -> [C, r*H, r*W]` with
/// `out[c, r*y + dy, r*x + dx] = in[c*r*r + dy*r + dx, y, x]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let rr = r * r;
    if r == 0 || !input.channels.is_multiple_of(rr) {
        return Err(Error::Shape(format!(
            "pixel shuffle by {r} needs channels divisible by {rr}, got {}",
            input.channels
        )));
    }
    let c_out = input.channels / rr;
    let (h, w) = (input.height, input.width);
    let (oh, ow) = (h * r, w * r);
    let mut data = vec![0.0f32; c_out * oh * ow];
    for c in 0..c_out {
        for dy in 0..r {
            for dx in 0..r {
                let src = input.plane(c * rr + dy * r + dx);
                for y in 0..h {
                    let dst_row = (c * oh + r * y + dy) * ow;
                    for x in 0..w {
                        data[dst_row + r * x + dx] = src[y * w + x];
                    }
                }
            }
        }
    }
    Tensor::new(c_out, oh, ow, data)
}

/// `input + conv2(relu(conv1(input)))`, both convolutions 3x3 same-size.
pub fn residual_block(input: &Tensor, conv1: &Conv2d, conv2: &Conv2d) -> Result<Tensor> {
    let mut t = conv2d_same(input, conv1, 1)?;
    t.relu_inplace();
    let mut out = conv2d_same(&t, conv2, 1)?;
    out.add_inplace(input)?;
    Ok(out)
}

/// Dilation rates of the parallel atrous branches.
pub const ATROUS_RATES: [usize; 3] = [1, 2, 4];

/// Three same-size 3x3 convolutions at dilation 1, 2 and 4 applied to the
/// same input, concatenated along channels.
pub fn atrous_parallel(input: &Tensor, branches: &[Conv2d; 3]) -> Result<Tensor> {
    let outs = branches
        .iter()
        .zip(ATROUS_RATES)
        .map(|(conv, rate)| conv2d_same(input, conv, rate))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat_channels(&outs)
}
