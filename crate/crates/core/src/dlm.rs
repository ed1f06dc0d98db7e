//! Discretized logistic mixture models.
//!
//! A mixture of `K` logistics is integrated over bins of width `b` centered
//! on the alphabet values. The lowest bin absorbs the left tail and the
//! highest bin the right tail, so every PMF sums to one.
//!
//! RGB sub-pixels use `b = 1` over the centered domain `x - 127.5`, latents
//! use the quantizer's level spacing over `[-1, 1]`. For RGB the means of the
//! second and third channel are shifted by the already known channels
//! (`update_means_rgb`); latent scales have no such dependency.

use rand::Rng;

use crate::error::{Error, Result};
use crate::quantizer::LevelGrid;

/// Lower bound applied to every predicted scale parameter.
pub const SIGMA_MIN: f64 = 1e-3;

/// Probability floor used when reporting code lengths, mirroring the one
/// count per symbol granted by [`crate::coder::quantize_pmf`].
pub const REPORT_FLOOR: f64 = 1.0 / 65536.0;

/// Offset between 8-bit sub-pixel values and the centered RGB domain.
pub const RGB_CENTER: f64 = 127.5;

// Beyond this |t| the logistic is 0 or 1 to well below f64 resolution of the
// quantities we care about.
const SATURATION: f64 = 40.0;

const RESYNC: usize = 16;

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= SATURATION {
        1.0
    } else if t <= -SATURATION {
        0.0
    } else {
        1.0 / (1.0 + libm::exp(-t))
    }
}

/// Geometry of a discretization grid: `num_bins` values starting at
/// `domain_min`, spaced `bin_width` apart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticBinSpec {
    pub bin_width: f64,
    pub domain_min: f64,
    pub num_bins: usize,
}

impl LogisticBinSpec {
    pub fn new(bin_width: f64, domain_min: f64, domain_max: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !(domain_max >= domain_min) {
            return Err(Error::Shape(format!(
                "bad bin spec: width {bin_width}, domain [{domain_min}, {domain_max}]"
            )));
        }
        let num_bins = ((domain_max - domain_min) / bin_width).round() as usize + 1;
        Ok(Self {
            bin_width,
            domain_min,
            num_bins,
        })
    }

    /// 8-bit sub-pixels in the centered domain.
    pub fn rgb() -> Self {
        Self {
            bin_width: 1.0,
            domain_min: -RGB_CENTER,
            num_bins: 256,
        }
    }

    pub fn latent(levels: &LevelGrid) -> Self {
        Self {
            bin_width: levels.spacing(),
            domain_min: levels.level(0),
            num_bins: levels.len(),
        }
    }

    pub fn value(&self, index: usize) -> f64 {
        self.domain_min + index as f64 * self.bin_width
    }

    pub fn domain_max(&self) -> f64 {
        self.value(self.num_bins - 1)
    }
}

/// Mass of bin `target` under a single logistic.
pub fn logistic_bin_prob(target: usize, mu: f64, sigma: f64, spec: &LogisticBinSpec) -> f64 {
    let z = spec.value(target);
    let half = spec.bin_width / 2.0;
    let upper = if target + 1 >= spec.num_bins {
        1.0
    } else {
        sigmoid((z + half - mu) / sigma)
    };
    let lower = if target == 0 {
        0.0
    } else {
        sigmoid((z - half - mu) / sigma)
    };
    upper - lower
}

/// Writes the mixture PMF over `spec` into `out` (length `num_bins`).
///
/// The mixture CDF is accumulated at the `num_bins - 1` interior bin edges
/// and differenced; the tails land in the outermost bins.
pub fn mixture_pmf_into(
    components: impl IntoIterator<Item = (f64, f64, f64)>,
    spec: &LogisticBinSpec,
    out: &mut [f64],
) {
    let n = spec.num_bins;
    debug_assert_eq!(out.len(), n);
    out.fill(0.0);
    let edges = n - 1;
    let half = spec.bin_width / 2.0;
    let mut total = 0.0;
    for (pi, mu, sigma) in components {
        total += pi;
        let inv = 1.0 / sigma;
        // exp(-t) along the edges is geometric in the edge index; it is
        // refreshed with an exact exp every RESYNC steps to bound drift.
        let ratio = libm::exp(-spec.bin_width * inv);
        let mut e = 0.0;
        let mut since_exact = RESYNC;
        for (j, acc) in out[..edges].iter_mut().enumerate() {
            let t = (spec.value(j) + half - mu) * inv;
            if t >= SATURATION {
                *acc += pi;
            } else if t > -SATURATION {
                if since_exact >= RESYNC {
                    e = libm::exp(-t);
                    since_exact = 0;
                } else {
                    e *= ratio;
                    since_exact += 1;
                }
                *acc += pi / (1.0 + e);
            }
        }
    }
    if n == 1 {
        out[0] = total;
        return;
    }
    out[n - 1] = (total - out[n - 2]).max(0.0);
    for j in (1..edges).rev() {
        out[j] = (out[j] - out[j - 1]).max(0.0);
    }
}

/// Sub-pixel values of the already coded channels, in the centered domain.
#[derive(Clone, Copy, Debug, Default)]
pub struct KnownChannels<'a> {
    pub x1: Option<&'a [f64]>,
    pub x2: Option<&'a [f64]>,
}

/// Mixture parameters for the RGB scale. Arrays are laid out `[c][k][y][x]`
/// (three channels) and `[k][y][x]` for the coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParamsRgb {
    pub k: usize,
    pub height: usize,
    pub width: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lambda_alpha: Vec<f64>,
    pub lambda_beta: Vec<f64>,
    pub lambda_gamma: Vec<f64>,
}

/// Mixture parameters for a latent (or baseline pyramid) scale, laid out
/// `[c][k][y][x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParamsLatent {
    pub channels: usize,
    pub k: usize,
    pub height: usize,
    pub width: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

fn check_simplex(pi: &[f64], groups: usize, k: usize, plane: usize) -> Result<()> {
    for g in 0..groups {
        for p in 0..plane {
            let s: f64 = (0..k).map(|kk| pi[(g * k + kk) * plane + p]).sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::Shape(format!(
                    "mixture weights sum to {s} at channel {g}, position {p}"
                )));
            }
        }
    }
    Ok(())
}

/// Softmax over the `k` logits found at `base + kk * stride`.
fn softmax_strided(raw: &[f32], base: usize, stride: usize, k: usize, out: &mut [f64]) {
    let max = (0..k)
        .map(|kk| f64::from(raw[base + kk * stride]))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (kk, o) in out.iter_mut().enumerate().take(k) {
        let e = libm::exp(f64::from(raw[base + kk * stride]) - max);
        *o = e;
        sum += e;
    }
    for o in out.iter_mut().take(k) {
        *o /= sum;
    }
}

fn sigma_link(raw: f32) -> f64 {
    libm::exp(f64::from(raw)).max(SIGMA_MIN)
}

/// Converts `channels * k` softmax groups, means and log-scales stored as
/// consecutive `[channels*k][h][w]` blocks into parameter arrays.
fn link_common(
    raw: &[f32],
    channels: usize,
    k: usize,
    plane: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let block = channels * k * plane;
    let mut pi = vec![0.0; block];
    let mut buf = vec![0.0; k];
    for c in 0..channels {
        for p in 0..plane {
            softmax_strided(raw, c * k * plane + p, plane, k, &mut buf);
            for kk in 0..k {
                pi[(c * k + kk) * plane + p] = buf[kk];
            }
        }
    }
    let mu = raw[block..2 * block]
        .iter()
        .map(|&v| f64::from(v))
        .collect();
    let sigma = raw[2 * block..3 * block]
        .iter()
        .map(|&v| sigma_link(v))
        .collect();
    (pi, mu, sigma)
}

impl MixtureParamsRgb {
    /// Number of head channels for `k` components: `3*3*k + 3*k`.
    pub fn head_channels(k: usize) -> usize {
        3 * 3 * k + 3 * k
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        height: usize,
        width: usize,
        pi: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        lambda_alpha: Vec<f64>,
        lambda_beta: Vec<f64>,
        lambda_gamma: Vec<f64>,
    ) -> Result<Self> {
        let plane = height * width;
        let full = 3 * k * plane;
        for (name, len, want) in [
            ("pi", pi.len(), full),
            ("mu", mu.len(), full),
            ("sigma", sigma.len(), full),
            ("lambda_alpha", lambda_alpha.len(), k * plane),
            ("lambda_beta", lambda_beta.len(), k * plane),
            ("lambda_gamma", lambda_gamma.len(), k * plane),
        ] {
            if len != want {
                return Err(Error::Shape(format!(
                    "{name}: {len} values, expected {want}"
                )));
            }
        }
        if sigma.iter().any(|&s| !(s >= SIGMA_MIN)) {
            return Err(Error::Shape("sigma below minimum".into()));
        }
        check_simplex(&pi, 3, k, plane)?;
        Ok(Self {
            k,
            height,
            width,
            pi,
            mu,
            sigma,
            lambda_alpha,
            lambda_beta,
            lambda_gamma,
        })
    }

    /// Maps a raw head output of `12k` channels over `height x width`.
    ///
    /// Channel layout: `[0, 3k)` mixture logits (index `c*k + k'`),
    /// `[3k, 6k)` means, `[6k, 9k)` log-scales, then `k` channels each of
    /// the alpha, beta and gamma coefficients (passed through `tanh`).
    pub fn from_head(raw: &[f32], k: usize, height: usize, width: usize) -> Result<Self> {
        let plane = height * width;
        if raw.len() != Self::head_channels(k) * plane {
            return Err(Error::Shape(format!(
                "rgb head has {} values, expected {}",
                raw.len(),
                Self::head_channels(k) * plane
            )));
        }
        let (pi, mu, sigma) = link_common(raw, 3, k, plane);
        let coeff = |i: usize| -> Vec<f64> {
            let start = (9 + i) * k * plane;
            raw[start..start + k * plane]
                .iter()
                .map(|&v| libm::tanh(f64::from(v)))
                .collect()
        };
        Ok(Self {
            k,
            height,
            width,
            pi,
            mu,
            sigma,
            lambda_alpha: coeff(0),
            lambda_beta: coeff(1),
            lambda_gamma: coeff(2),
        })
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    fn idx(&self, c: usize, k: usize, pos: usize) -> usize {
        (c * self.k + k) * self.plane() + pos
    }

    /// Mean of component `k` for `channel` at `pos`, shifted by the known
    /// sub-pixel values (centered domain).
    #[inline]
    pub fn updated_mean(&self, channel: usize, k: usize, pos: usize, x1: f64, x2: f64) -> f64 {
        let mu = self.mu[self.idx(channel, k, pos)];
        let kp = k * self.plane() + pos;
        match channel {
            0 => mu,
            1 => mu + self.lambda_alpha[kp] * x1,
            _ => mu + self.lambda_beta[kp] * x1 + self.lambda_gamma[kp] * x2,
        }
    }

    /// PMF over the 256 sub-pixel values of `channel` at `pos`.
    pub fn pmf_at(&self, channel: usize, pos: usize, x1: f64, x2: f64, out: &mut [f64]) {
        let spec = LogisticBinSpec::rgb();
        mixture_pmf_into(
            (0..self.k).map(|k| {
                let i = self.idx(channel, k, pos);
                (
                    self.pi[i],
                    self.updated_mean(channel, k, pos, x1, x2),
                    self.sigma[i],
                )
            }),
            &spec,
            out,
        );
    }

    /// The first nine-`k` channel groups viewed as a three-channel latent
    /// parameter set (no coefficients).
    pub fn without_coefficients(&self) -> MixtureParamsLatent {
        MixtureParamsLatent {
            channels: 3,
            k: self.k,
            height: self.height,
            width: self.width,
            pi: self.pi.clone(),
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        }
    }
}

/// Means after conditioning on the known channels, laid out `[c][k][y][x]`.
/// `x1` and `x2` are full planes in the centered domain.
pub fn update_means_rgb(params: &MixtureParamsRgb, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    let plane = params.plane();
    if x1.len() != plane || x2.len() != plane {
        return Err(Error::Shape(format!(
            "known channels have {} / {} values, expected {plane}",
            x1.len(),
            x2.len()
        )));
    }
    let mut out = vec![0.0; params.mu.len()];
    for c in 0..3 {
        for k in 0..params.k {
            for pos in 0..plane {
                out[params.idx(c, k, pos)] = params.updated_mean(c, k, pos, x1[pos], x2[pos]);
            }
        }
    }
    Ok(out)
}

/// Position-major PMFs (`[y][x][256]`) for RGB `channel` (0, 1 or 2).
pub fn pmf_rgb(
    params: &MixtureParamsRgb,
    channel: usize,
    known: &KnownChannels,
) -> Result<Vec<f64>> {
    let plane = params.plane();
    let need = |x: Option<&[f64]>| -> Result<Vec<f64>> {
        match x {
            Some(v) if v.len() == plane => Ok(v.to_vec()),
            Some(v) => Err(Error::Shape(format!(
                "known channel has {} values, expected {plane}",
                v.len()
            ))),
            None => Err(Error::ChannelUnavailable { channel }),
        }
    };
    let (x1, x2) = match channel {
        0 => (vec![0.0; plane], vec![0.0; plane]),
        1 => (need(known.x1)?, vec![0.0; plane]),
        2 => (need(known.x1)?, need(known.x2)?),
        _ => return Err(Error::ChannelUnavailable { channel }),
    };
    let mut out = vec![0.0; plane * 256];
    for (pos, chunk) in out.chunks_exact_mut(256).enumerate() {
        params.pmf_at(channel, pos, x1[pos], x2[pos], chunk);
    }
    Ok(out)
}

impl MixtureParamsLatent {
    /// Number of head channels for `channels` latent channels: `3*C*k`.
    pub fn head_channels(channels: usize, k: usize) -> usize {
        3 * channels * k
    }

    pub fn new(
        channels: usize,
        k: usize,
        height: usize,
        width: usize,
        pi: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        let full = channels * k * height * width;
        if pi.len() != full || mu.len() != full || sigma.len() != full {
            return Err(Error::Shape(format!(
                "latent parameters must have {full} values"
            )));
        }
        if sigma.iter().any(|&s| !(s >= SIGMA_MIN)) {
            return Err(Error::Shape("sigma below minimum".into()));
        }
        check_simplex(&pi, channels, k, height * width)?;
        Ok(Self {
            channels,
            k,
            height,
            width,
            pi,
            mu,
            sigma,
        })
    }

    /// Maps a raw head output of `3*channels*k` channels: logits, means and
    /// log-scales, each a block of `channels*k` maps indexed `c*k + k'`.
    /// Extra trailing channels (an RGB head reused at a coarser scale) are
    /// ignored.
    pub fn from_head(
        raw: &[f32],
        channels: usize,
        k: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let plane = height * width;
        let need = Self::head_channels(channels, k) * plane;
        if raw.len() < need || !raw.len().is_multiple_of(plane) {
            return Err(Error::Shape(format!(
                "latent head has {} values, expected at least {need}",
                raw.len()
            )));
        }
        let (pi, mu, sigma) = link_common(raw, channels, k, plane);
        Ok(Self {
            channels,
            k,
            height,
            width,
            pi,
            mu,
            sigma,
        })
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn pmf_at(&self, channel: usize, pos: usize, spec: &LogisticBinSpec, out: &mut [f64]) {
        let plane = self.plane();
        mixture_pmf_into(
            (0..self.k).map(|k| {
                let i = (channel * self.k + k) * plane + pos;
                (self.pi[i], self.mu[i], self.sigma[i])
            }),
            spec,
            out,
        );
    }
}

/// PMFs laid out `[c][y][x][num_bins]`.
pub fn pmf_latent(params: &MixtureParamsLatent, spec: &LogisticBinSpec) -> Vec<f64> {
    let n = spec.num_bins;
    let plane = params.plane();
    let mut out = vec![0.0; params.channels * plane * n];
    for (i, chunk) in out.chunks_exact_mut(n).enumerate() {
        params.pmf_at(i / plane, i % plane, spec, chunk);
    }
    out
}

/// Total code length in bits of `symbols` under the matching PMFs, each
/// probability floored at [`REPORT_FLOOR`].
pub fn nll_bits(pmfs: &[f64], alphabet: usize, symbols: &[usize]) -> Result<f64> {
    if pmfs.len() != alphabet * symbols.len() {
        return Err(Error::Shape(format!(
            "{} PMF entries for {} symbols over {alphabet}",
            pmfs.len(),
            symbols.len()
        )));
    }
    let mut bits = 0.0;
    for (pmf, &s) in pmfs.chunks_exact(alphabet).zip(symbols) {
        if s >= alphabet {
            return Err(Error::SymbolOutOfRange {
                symbol: s,
                alphabet,
            });
        }
        bits -= pmf[s].max(REPORT_FLOOR).log2();
    }
    Ok(bits)
}

/// Inverse-CDF draw from an (unnormalized) PMF.
pub fn sample_index<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let total: f64 = pmf.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the round-off gap at the top; take the last non-empty bin
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(pmf.len() - 1)
}

/// Draws every entry of a latent grid, returning bin indices `[c][y][x]`.
pub fn sample_latent<R: Rng + ?Sized>(
    params: &MixtureParamsLatent,
    spec: &LogisticBinSpec,
    rng: &mut R,
) -> Vec<usize> {
    let plane = params.plane();
    let mut buf = vec![0.0; spec.num_bins];
    (0..params.channels * plane)
        .map(|i| {
            params.pmf_at(i / plane, i % plane, spec, &mut buf);
            sample_index(&buf, rng)
        })
        .collect()
}

/// Draws an RGB grid `[c][y][x]` of 8-bit values channel by channel, shifting
/// the means of later channels by the values drawn for earlier ones.
pub fn sample_rgb<R: Rng + ?Sized>(params: &MixtureParamsRgb, rng: &mut R) -> Vec<usize> {
    let plane = params.plane();
    let mut out = vec![0usize; 3 * plane];
    let mut buf = [0.0; 256];
    for c in 0..3 {
        for pos in 0..plane {
            let x1 = out[pos] as f64 - RGB_CENTER;
            let x2 = out[plane + pos] as f64 - RGB_CENTER;
            params.pmf_at(c, pos, x1, x2, &mut buf);
            out[c * plane + pos] = sample_index(&buf, rng);
        }
    }
    out
}
