#![allow(dead_code)]

use l3c::codec::CodecModel;
use l3c::nn::{ModelMode, ModelWeights, NetworkSpec};
use l3c::Image;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A small network so that full-size images code in seconds.
pub fn tiny_spec() -> NetworkSpec {
    NetworkSpec {
        scales: 3,
        filters: 8,
        latent_channels: 5,
        components: 3,
        resblocks: 1,
        ..NetworkSpec::default()
    }
}

pub fn model(mode: ModelMode, seed: u64) -> CodecModel {
    model_with(tiny_spec(), mode, seed)
}

pub fn model_with(spec: NetworkSpec, mode: ModelMode, seed: u64) -> CodecModel {
    let weights = ModelWeights::random(spec, mode, seed).unwrap();
    CodecModel::new(&weights, mode).unwrap()
}

/// Noise, gradients, flat areas and few-color images, picked at random.
pub fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Image {
    let kind = rng.gen_range(0..4);
    let base: [f64; 3] = [
        rng.gen_range(0.0..255.0),
        rng.gen_range(0.0..255.0),
        rng.gen_range(0.0..255.0),
    ];
    let (gx, gy) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let palette: Vec<[u8; 3]> = (0..4).map(|_| rng.gen()).collect();
    let mut data = Vec::with_capacity(3 * width * height);
    for y in 0..height {
        for x in 0..width {
            let px = match kind {
                0 => rng.gen(),
                1 => {
                    let mut p = [0u8; 3];
                    for (c, v) in p.iter_mut().enumerate() {
                        let t = base[c] + gx * x as f64 + gy * y as f64 + rng.gen_range(-4.0..4.0);
                        *v = t.rem_euclid(256.0) as u8;
                    }
                    p
                }
                2 => [base[0] as u8, base[1] as u8, base[2] as u8],
                _ => palette[((x / 3) ^ (y / 5)) % palette.len()],
            };
            data.extend_from_slice(&px);
        }
    }
    Image::new(width, height, data).unwrap()
}
