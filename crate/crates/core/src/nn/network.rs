use std::sync::atomic::{AtomicUsize, Ordering};

use super::ops::{
    atrous_parallel, conv2d, conv2d_same, pixel_shuffle, residual_block, Conv2d, ATROUS_RATES,
};
use super::spec::{ModelMode, NetworkSpec};
use super::tensor::Tensor;
use super::weights::ModelWeights;
use crate::error::{Error, Result};

struct Extractor {
    head: Conv2d,
    res: Vec<(Conv2d, Conv2d)>,
    proj: Conv2d,
}

struct Predictor {
    expand: Conv2d,
    res: Vec<(Conv2d, Conv2d)>,
    atrous: [Conv2d; 3],
    reduce: Conv2d,
    head: Conv2d,
}

/// Immutable extractor and predictor stacks built from validated weights.
///
/// Forward passes are counted so callers can check how many network stages
/// a decode actually ran.
pub struct Network {
    spec: NetworkSpec,
    mode: ModelMode,
    extractors: Vec<Extractor>,
    predictors: Vec<Predictor>,
    extractor_passes: AtomicUsize,
    predictor_passes: AtomicUsize,
}

fn conv(weights: &ModelWeights, name: &str) -> Result<Conv2d> {
    let w = weights
        .tensors
        .get(&format!("{name}.weight"))
        .ok_or_else(|| Error::MissingTensor(format!("{name}.weight")))?;
    let b = weights
        .tensors
        .get(&format!("{name}.bias"))
        .ok_or_else(|| Error::MissingTensor(format!("{name}.bias")))?;
    Conv2d::new(
        w.dims[0],
        w.dims[1],
        w.dims[2],
        w.data.clone(),
        b.data.clone(),
    )
}

fn resblocks(weights: &ModelWeights, prefix: &str) -> Result<Vec<(Conv2d, Conv2d)>> {
    (0..weights.spec.resblocks)
        .map(|r| {
            Ok((
                conv(weights, &format!("{prefix}.res{r}.conv1"))?,
                conv(weights, &format!("{prefix}.res{r}.conv2"))?,
            ))
        })
        .collect()
}

impl Network {
    pub fn new(weights: &ModelWeights, mode: ModelMode) -> Result<Self> {
        weights.validate(mode)?;
        let spec = weights.spec;
        let mut extractors = Vec::new();
        if mode.has_extractors() {
            for s in 1..=spec.scales {
                let p = format!("enc{s}");
                extractors.push(Extractor {
                    head: conv(weights, &format!("{p}.head"))?,
                    res: resblocks(weights, &p)?,
                    proj: conv(weights, &format!("{p}.proj"))?,
                });
            }
        }
        let mut predictors = Vec::new();
        for s in 1..=mode.predictor_sets(&spec) {
            let p = format!("dec{s}");
            let [a, b, c] = ATROUS_RATES.map(|r| conv(weights, &format!("{p}.atrous{r}")));
            predictors.push(Predictor {
                expand: conv(weights, &format!("{p}.expand"))?,
                res: resblocks(weights, &p)?,
                atrous: [a?, b?, c?],
                reduce: conv(weights, &format!("{p}.reduce"))?,
                head: conv(weights, &format!("{p}.head"))?,
            });
        }
        Ok(Self {
            spec,
            mode,
            extractors,
            predictors,
            extractor_passes: AtomicUsize::new(0),
            predictor_passes: AtomicUsize::new(0),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn extractor_passes(&self) -> usize {
        self.extractor_passes.load(Ordering::Relaxed)
    }

    pub fn predictor_passes(&self) -> usize {
        self.predictor_passes.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.extractor_passes.store(0, Ordering::Relaxed);
        self.predictor_passes.store(0, Ordering::Relaxed);
    }

    fn check_scale(&self, s: usize) -> Result<()> {
        if s == 0 || s > self.spec.scales {
            return Err(Error::Shape(format!(
                "scale {s} outside 1..={}",
                self.spec.scales
            )));
        }
        Ok(())
    }

    /// `E^(s)`: returns the trunk features (input to `E^(s+1)`) and the
    /// unquantized latent `z'` at half the input resolution.
    pub fn run_extractor(&self, s: usize, input: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_scale(s)?;
        let e = self
            .extractors
            .get(s - 1)
            .ok_or_else(|| Error::Shape(format!("mode {} has no extractors", self.mode)))?;
        if !input.height.is_multiple_of(2)
            || !input.width.is_multiple_of(2)
            || input.height == 0
            || input.width == 0
        {
            return Err(Error::Shape(format!(
                "extractor input must have even, non-zero dims, got {}x{}",
                input.height, input.width
            )));
        }
        if input.channels != e.head.in_channels {
            return Err(Error::Shape(format!(
                "extractor {s} expects {} channels, got {}",
                e.head.in_channels, input.channels
            )));
        }
        self.extractor_passes.fetch_add(1, Ordering::Relaxed);
        let mut t = conv2d(input, &e.head, 2, 1, 1)?;
        for (c1, c2) in &e.res {
            t = residual_block(&t, c1, c2)?;
        }
        let z = conv2d_same(&t, &e.proj, 1)?;
        Ok((t, z))
    }

    /// `D^(s)`: maps `z^(s)` and `f^(s+1)` (zero when absent) to `f^(s)` at
    /// twice the resolution and the raw mixture parameters for scale `s-1`.
    pub fn run_predictor(
        &self,
        s: usize,
        z: &Tensor,
        f_next: Option<&Tensor>,
    ) -> Result<(Tensor, Tensor)> {
        self.check_scale(s)?;
        let d = match self.mode {
            ModelMode::RgbShared => &self.predictors[0],
            _ => &self.predictors[s - 1],
        };
        if z.channels != d.expand.in_channels {
            return Err(Error::Shape(format!(
                "predictor {s} expects {} input channels, got {}",
                d.expand.in_channels, z.channels
            )));
        }
        self.predictor_passes.fetch_add(1, Ordering::Relaxed);
        let mut t = conv2d_same(z, &d.expand, 1)?;
        if let Some(f) = f_next {
            t.add_inplace(f)?;
        }
        for (c1, c2) in &d.res {
            t = residual_block(&t, c1, c2)?;
        }
        let t = atrous_parallel(&t, &d.atrous)?;
        let t = conv2d_same(&t, &d.reduce, 1)?;
        let f = pixel_shuffle(&t, 2)?;
        let params = conv2d_same(&f, &d.head, 1)?;
        Ok((f, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> NetworkSpec {
        NetworkSpec {
            scales: 3,
            filters: 4,
            latent_channels: 5,
            components: 2,
            resblocks: 1,
            ..NetworkSpec::default()
        }
    }

    fn ramp(c: usize, h: usize, w: usize) -> Tensor {
        Tensor::new(
            c,
            h,
            w,
            (0..c * h * w)
                .map(|i| (i % 17) as f32 / 8.0 - 1.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn extractor_dimension_law() {
        let net = Network::new(
            &ModelWeights::random(spec(), ModelMode::Learned, 3).unwrap(),
            ModelMode::Learned,
        )
        .unwrap();
        let (f1, z1) = net.run_extractor(1, &ramp(3, 16, 16)).unwrap();
        assert_eq!(z1.shape(), [5, 8, 8]);
        assert_eq!(f1.shape(), [4, 8, 8]);
        let (f2, z2) = net.run_extractor(2, &f1).unwrap();
        assert_eq!(z2.shape(), [5, 4, 4]);
        let (_, z3) = net.run_extractor(3, &f2).unwrap();
        assert_eq!(z3.shape(), [5, 2, 2]);
        assert_eq!(net.extractor_passes(), 3);
        assert!(net.run_extractor(1, &ramp(3, 15, 16)).is_err());
        assert!(net.run_extractor(2, &ramp(3, 8, 8)).is_err());
    }

    #[test]
    fn zero_weights_give_constant_latent() {
        let mut w = ModelWeights::random(spec(), ModelMode::Learned, 3).unwrap();
        for (name, t) in w.tensors.iter_mut() {
            let bias = name == "enc1.proj.bias";
            for (i, v) in t.data.iter_mut().enumerate() {
                *v = if bias { i as f32 * 0.5 } else { 0.0 };
            }
        }
        let net = Network::new(&w, ModelMode::Learned).unwrap();
        let (_, z) = net.run_extractor(1, &ramp(3, 6, 4)).unwrap();
        for c in 0..5 {
            assert!(z.plane(c).iter().all(|&v| v == c as f32 * 0.5));
        }
    }

    #[test]
    fn zero_skip_equals_no_skip() {
        for mode in ModelMode::ALL {
            let net = Network::new(&ModelWeights::random(spec(), mode, 9).unwrap(), mode).unwrap();
            let zc = mode.predictor_input_channels(&spec());
            let z = ramp(zc, 3, 5);
            let zero = Tensor::zeros(4, 3, 5);
            let a = net.run_predictor(3, &z, None).unwrap();
            let b = net.run_predictor(3, &z, Some(&zero)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.0.shape(), [4, 6, 10]);
            assert_eq!(net.predictor_passes(), 2);
            assert!(net
                .run_predictor(3, &z, Some(&Tensor::zeros(4, 2, 5)))
                .is_err());
        }
    }

    #[test]
    fn head_channel_counts() {
        let s = spec();
        let cases = [
            (ModelMode::Learned, 1, 24),
            (ModelMode::Learned, 2, 30),
            (ModelMode::Rgb, 2, 18),
            (ModelMode::RgbShared, 3, 24),
        ];
        for (mode, scale, channels) in cases {
            let net = Network::new(&ModelWeights::random(s, mode, 1).unwrap(), mode).unwrap();
            let z = ramp(mode.predictor_input_channels(&s), 2, 2);
            let (_, p) = net.run_predictor(scale, &z, None).unwrap();
            assert_eq!(p.shape(), [channels, 4, 4], "{mode} scale {scale}");
        }
    }

    #[test]
    fn skip_features_change_output() {
        let net = Network::new(
            &ModelWeights::random(spec(), ModelMode::Rgb, 2).unwrap(),
            ModelMode::Rgb,
        )
        .unwrap();
        let z = ramp(3, 2, 2);
        let a = net.run_predictor(2, &z, None).unwrap();
        let b = net.run_predictor(2, &z, Some(&ramp(4, 2, 2))).unwrap();
        assert_ne!(a.1, b.1);
    }
}
