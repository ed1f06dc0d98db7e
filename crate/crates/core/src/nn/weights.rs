//! Named-tensor weight container and its flat little-endian file format.
//!
//! ```text
//! magic        b"L3CW"
//! version      u32            (1)
//! spec         u32 scales, u32 filters, u32 latent_channels,
//!              u32 components, u32 resblocks, u32 levels, f64 sigma_q
//! count        u32
//! count times: u32 name_len, name (utf-8), u8 dtype (0 = f32),
//!              u8 rank, rank x u32 dims, prod(dims) x f32
//! ```
//!
//! All integers and floats are little-endian. Tensors are written in
//! lexicographic name order.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{required_tensors, ModelMode, NetworkSpec};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"L3CW";
pub const WEIGHTS_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub spec: NetworkSpec,
    pub tensors: BTreeMap<String, WeightTensor>,
}

fn predictor_sets_present<'a>(
    names: impl Iterator<Item = &'a String>,
    prefix: &str,
) -> BTreeSet<String> {
    names
        .filter_map(|n| n.split('.').next())
        .filter(|head| head.starts_with(prefix) && head[prefix.len()..].parse::<usize>().is_ok())
        .map(str::to_owned)
        .collect()
}

impl ModelWeights {
    /// Checks that exactly the tensors `mode` needs are present with the
    /// expected shapes.
    pub fn validate(&self, mode: ModelMode) -> Result<()> {
        self.spec.validate()?;
        let sets = predictor_sets_present(self.tensors.keys(), "dec");
        let expected = mode.predictor_sets(&self.spec);
        if sets.len() != expected {
            return Err(Error::PredictorCount {
                kind: mode.name(),
                expected,
                found: sets.len(),
            });
        }
        let required = required_tensors(&self.spec, mode);
        for (name, dims) in &required {
            let t = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if &t.dims != dims {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    expected: dims.clone(),
                    found: t.dims.clone(),
                });
            }
        }
        let known: BTreeSet<&String> = required.iter().map(|(n, _)| n).collect();
        if let Some(extra) = self.tensors.keys().find(|n| !known.contains(n)) {
            return Err(Error::UnexpectedTensor(extra.clone()));
        }
        Ok(())
    }

    /// The first mode the weights validate for, in the order learned, rgb,
    /// rgb-shared. With a single scale rgb and rgb-shared share one layout
    /// and rgb is reported.
    pub fn infer_mode(&self) -> Result<ModelMode> {
        let mut first_err = None;
        for mode in ModelMode::ALL {
            match self.validate(mode) {
                Ok(()) => return Ok(mode),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.expect("at least one mode was tried"))
    }

    /// Randomly initialized weights for `mode`, scaled so activations stay
    /// O(1) through the trunks. Log-scale head biases start at a moderate
    /// spread so the resulting distributions are usable out of the box.
    pub fn random(spec: NetworkSpec, mode: ModelMode, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, dims) in required_tensors(&spec, mode) {
            let len: usize = dims.iter().product();
            let data = if name.ends_with(".weight") {
                let fan_in = (dims[1] * dims[2] * dims[3]) as f32;
                let mut bound = (3.0 / fan_in).sqrt();
                if name.contains(".conv2.") {
                    bound *= 0.1;
                }
                (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
            } else if name.starts_with("dec") && name.ends_with(".head.bias") {
                head_bias(&spec, mode, &name, len)
            } else {
                vec![0.0; len]
            };
            tensors.insert(name, WeightTensor { dims, data });
        }
        Ok(Self { spec, tensors })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        let s = &self.spec;
        for v in [
            s.scales,
            s.filters,
            s.latent_channels,
            s.components,
            s.resblocks,
            s.levels,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&s.sigma_q.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(Error::BadMagic("weights file"));
        }
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Version {
                what: "weights file",
                found: version,
            });
        }
        let spec = NetworkSpec {
            scales: r.u32()? as usize,
            filters: r.u32()? as usize,
            latent_channels: r.u32()? as usize,
            components: r.u32()? as usize,
            resblocks: r.u32()? as usize,
            levels: r.u32()? as usize,
            sigma_q: f64::from_le_bytes(r.take(8)?.try_into().unwrap()),
        };
        spec.validate()?;
        let count = r.u32()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|e| malformed(format!("tensor name: {e}")))?
                .to_owned();
            let dtype = r.take(1)?[0];
            if dtype != DTYPE_F32 {
                return Err(malformed(format!(
                    "tensor `{name}` has unknown dtype {dtype}"
                )));
            }
            let rank = r.take(1)?[0] as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= (bytes.len() - r.pos) / 4)
                .ok_or_else(|| malformed(format!("tensor `{name}` larger than the file")))?;
            let data = r
                .take(len * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if tensors
                .insert(name.clone(), WeightTensor { dims, data })
                .is_some()
            {
                return Err(malformed(format!("duplicate tensor `{name}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { spec, tensors })
    }
}

/// Parses a weights file; mode-specific checks happen in [`ModelWeights::validate`].
pub fn load_weights(bytes: &[u8]) -> Result<ModelWeights> {
    ModelWeights::from_bytes(bytes)
}

pub fn save_weights(weights: &ModelWeights) -> Vec<u8> {
    weights.to_bytes()
}

fn head_bias(spec: &NetworkSpec, mode: ModelMode, name: &str, len: usize) -> Vec<f32> {
    let mut bias = vec![0.0; len];
    let k = spec.components;
    let is_rgb_head = name.starts_with("dec1.");
    let (channels, log_sigma) = if is_rgb_head {
        (3, 16f32.ln())
    } else if mode == ModelMode::Learned {
        (spec.latent_channels, 0.25f32.ln())
    } else {
        (3, 16f32.ln())
    };
    for v in &mut bias[2 * channels * k..3 * channels * k] {
        *v = log_sigma;
    }
    bias
}

fn malformed(detail: String) -> Error {
    Error::Malformed {
        what: "weights file",
        detail,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkSpec {
        NetworkSpec {
            scales: 2,
            filters: 4,
            latent_channels: 2,
            components: 2,
            resblocks: 1,
            ..NetworkSpec::default()
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        for mode in ModelMode::ALL {
            let w = ModelWeights::random(small(), mode, 7).unwrap();
            w.validate(mode).unwrap();
            let back = load_weights(&save_weights(&w)).unwrap();
            assert_eq!(back, w);
            assert_eq!(save_weights(&back), save_weights(&w));
        }
    }

    #[test]
    fn missing_tensor_is_named() {
        let mut w = ModelWeights::random(small(), ModelMode::Learned, 1).unwrap();
        w.tensors.remove("dec2.atrous4.bias");
        let w = load_weights(&save_weights(&w)).unwrap();
        match w.validate(ModelMode::Learned) {
            Err(Error::MissingTensor(name)) => assert_eq!(name, "dec2.atrous4.bias"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_shape_is_named() {
        let mut w = ModelWeights::random(small(), ModelMode::Learned, 1).unwrap();
        w.tensors.get_mut("enc1.proj.bias").unwrap().dims = vec![3];
        w.tensors.get_mut("enc1.proj.bias").unwrap().data = vec![0.0; 3];
        match w.validate(ModelMode::Learned) {
            Err(Error::TensorShape {
                name,
                expected,
                found,
            }) => {
                assert_eq!(name, "enc1.proj.bias");
                assert_eq!(expected, vec![2]);
                assert_eq!(found, vec![3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predictor_count_per_mode() {
        let rgb = ModelWeights::random(small(), ModelMode::Rgb, 1).unwrap();
        assert!(matches!(
            rgb.validate(ModelMode::RgbShared),
            Err(Error::PredictorCount {
                expected: 1,
                found: 2,
                ..
            })
        ));
        let shared = ModelWeights::random(small(), ModelMode::RgbShared, 1).unwrap();
        assert!(matches!(
            shared.validate(ModelMode::Rgb),
            Err(Error::PredictorCount {
                expected: 2,
                found: 1,
                ..
            })
        ));
        let learned = ModelWeights::random(small(), ModelMode::Learned, 1).unwrap();
        assert!(matches!(
            learned.validate(ModelMode::Rgb),
            Err(Error::TensorShape { .. })
        ));
    }

    #[test]
    fn mode_is_inferred() {
        for mode in ModelMode::ALL {
            let w = ModelWeights::random(small(), mode, 3).unwrap();
            assert_eq!(w.infer_mode().unwrap(), mode);
        }
        let mut w = ModelWeights::random(small(), ModelMode::Rgb, 3).unwrap();
        w.tensors.remove("dec2.head.bias");
        assert!(w.infer_mode().is_err());
    }

    #[test]
    fn rejects_corrupt_files() {
        let bytes = save_weights(&ModelWeights::random(small(), ModelMode::RgbShared, 1).unwrap());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load_weights(&bad), Err(Error::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            load_weights(&bad),
            Err(Error::Version { found: 9, .. })
        ));
        assert!(load_weights(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(load_weights(&bad).is_err());
    }
}
