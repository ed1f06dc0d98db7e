use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dlm::{MixtureParamsLatent, MixtureParamsRgb};
use crate::error::{Error, Result};
use crate::quantizer::{LevelGrid, DEFAULT_LEVELS, DEFAULT_SIGMA_Q};

/// Architecture hyperparameters shared by the extractors and predictors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Number of auxiliary scales.
    pub scales: usize,
    /// Filters in every hidden convolution.
    pub filters: usize,
    /// Channels of each latent representation.
    pub latent_channels: usize,
    /// Logistic mixture components.
    pub components: usize,
    /// Residual blocks per extractor / predictor trunk.
    pub resblocks: usize,
    pub levels: usize,
    pub sigma_q: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            scales: 3,
            filters: 64,
            latent_channels: 5,
            components: 10,
            resblocks: 8,
            levels: DEFAULT_LEVELS,
            sigma_q: DEFAULT_SIGMA_Q,
        }
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("scales", self.scales),
            ("filters", self.filters),
            ("latent_channels", self.latent_channels),
            ("components", self.components),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if self.scales > 15 {
            return Err(Error::InvalidSpec("at most 15 scales are supported".into()));
        }
        if self.levels < 2 || self.levels > 1 << 15 {
            return Err(Error::InvalidSpec(format!(
                "unsupported level count {}",
                self.levels
            )));
        }
        if !(self.sigma_q > 0.0) {
            return Err(Error::InvalidSpec("sigma_q must be positive".into()));
        }
        Ok(())
    }

    pub fn level_grid(&self) -> Result<LevelGrid> {
        LevelGrid::new(self.levels, -1.0, 1.0, self.sigma_q)
    }

    /// Head channels for the RGB scale.
    pub fn rgb_head_channels(&self) -> usize {
        MixtureParamsRgb::head_channels(self.components)
    }

    /// Head channels for a latent scale.
    pub fn latent_head_channels(&self) -> usize {
        MixtureParamsLatent::head_channels(self.latent_channels, self.components)
    }
}

/// Which auxiliary representation drives the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    /// Learned extractors with quantized latents.
    Learned,
    /// Bicubic RGB pyramid, one predictor per scale.
    Rgb,
    /// Bicubic RGB pyramid, a single predictor reused at every scale.
    RgbShared,
}

impl ModelMode {
    pub const ALL: [ModelMode; 3] = [ModelMode::Learned, ModelMode::Rgb, ModelMode::RgbShared];

    pub fn tag(self) -> u8 {
        match self {
            ModelMode::Learned => 0,
            ModelMode::Rgb => 1,
            ModelMode::RgbShared => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelMode::Learned => "learned",
            ModelMode::Rgb => "rgb",
            ModelMode::RgbShared => "rgb-shared",
        }
    }

    /// Number of distinct predictor weight sets.
    pub fn predictor_sets(self, spec: &NetworkSpec) -> usize {
        match self {
            ModelMode::RgbShared => 1,
            _ => spec.scales,
        }
    }

    pub fn has_extractors(self) -> bool {
        self == ModelMode::Learned
    }

    /// Channels of the representation fed into each predictor.
    pub fn predictor_input_channels(self, spec: &NetworkSpec) -> usize {
        match self {
            ModelMode::Learned => spec.latent_channels,
            _ => 3,
        }
    }

    /// Channels of `z^(s)` for `s >= 1`.
    pub fn scale_channels(self, spec: &NetworkSpec) -> usize {
        self.predictor_input_channels(spec)
    }

    /// Head width of predictor set `index` (1-based, as in `dec{index}`).
    pub fn head_channels(self, spec: &NetworkSpec, index: usize) -> usize {
        match (self, index) {
            (_, 1) => spec.rgb_head_channels(),
            (ModelMode::Learned, _) => spec.latent_head_channels(),
            _ => MixtureParamsLatent::head_channels(3, spec.components),
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown mode `{s}`")))
    }
}

fn conv_entries(out: &mut Vec<(String, Vec<usize>)>, name: String, o: usize, i: usize, k: usize) {
    out.push((format!("{name}.weight"), vec![o, i, k, k]));
    out.push((format!("{name}.bias"), vec![o]));
}

/// Every tensor a model of `mode` needs, with its exact shape.
///
/// Extractor `enc{s}`: `head` (3x3, stride 2), `res{i}.conv{1,2}`, `proj`
/// (1x1 to the latent channels). Predictor `dec{s}`: `expand` (1x1),
/// `res{i}.conv{1,2}`, `atrous{1,2,4}`, `reduce` (1x1 to 4 filters for the
/// 2x pixel shuffle), `head` (1x1 to the mixture parameters).
pub fn required_tensors(spec: &NetworkSpec, mode: ModelMode) -> Vec<(String, Vec<usize>)> {
    let f = spec.filters;
    let mut out = Vec::new();
    if mode.has_extractors() {
        for s in 1..=spec.scales {
            let input = if s == 1 { 3 } else { f };
            conv_entries(&mut out, format!("enc{s}.head"), f, input, 3);
            for r in 0..spec.resblocks {
                conv_entries(&mut out, format!("enc{s}.res{r}.conv1"), f, f, 3);
                conv_entries(&mut out, format!("enc{s}.res{r}.conv2"), f, f, 3);
            }
            conv_entries(&mut out, format!("enc{s}.proj"), spec.latent_channels, f, 1);
        }
    }
    for s in 1..=mode.predictor_sets(spec) {
        let zc = mode.predictor_input_channels(spec);
        conv_entries(&mut out, format!("dec{s}.expand"), f, zc, 1);
        for r in 0..spec.resblocks {
            conv_entries(&mut out, format!("dec{s}.res{r}.conv1"), f, f, 3);
            conv_entries(&mut out, format!("dec{s}.res{r}.conv2"), f, f, 3);
        }
        for rate in crate::nn::ops::ATROUS_RATES {
            conv_entries(&mut out, format!("dec{s}.atrous{rate}"), f, f, 3);
        }
        conv_entries(&mut out, format!("dec{s}.reduce"), 4 * f, 3 * f, 1);
        conv_entries(
            &mut out,
            format!("dec{s}.head"),
            mode.head_channels(spec, s),
            f,
            1,
        );
    }
    out
}
