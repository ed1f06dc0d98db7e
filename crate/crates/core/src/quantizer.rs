//! Scalar quantization onto a fixed, evenly spaced level grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: usize = 25;
pub const DEFAULT_SIGMA_Q: f64 = 2.0;

/// Evenly spaced quantization levels over `[min, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid {
    levels: Vec<f64>,
    sigma_q: f64,
}

impl Default for LevelGrid {
    fn default() -> Self {
        Self::new(DEFAULT_LEVELS, -1.0, 1.0, DEFAULT_SIGMA_Q).expect("default grid is valid")
    }
}

impl LevelGrid {
    pub fn new(count: usize, min: f64, max: f64, sigma_q: f64) -> Result<Self> {
        if count < 2 || !(max > min) || !(sigma_q > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "level grid needs >= 2 levels over a non-empty range with sigma_q > 0 \
                 (got {count} levels over [{min}, {max}], sigma_q {sigma_q})"
            )));
        }
        let step = (max - min) / (count - 1) as f64;
        let levels = (0..count).map(|j| min + j as f64 * step).collect();
        Ok(Self { levels, sigma_q })
    }

    pub fn with_sigma_q(&self, sigma_q: f64) -> Self {
        Self {
            levels: self.levels.clone(),
            sigma_q,
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    pub fn spacing(&self) -> f64 {
        self.levels[1] - self.levels[0]
    }

    pub fn sigma_q(&self) -> f64 {
        self.sigma_q
    }

    /// Nearest level to `value` as `(index, level)`; exact midpoints go to the
    /// lower index, values outside the grid saturate.
    pub fn quantize_hard(&self, value: f64) -> Result<(usize, f64)> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        let last = self.levels.len() - 1;
        if value <= self.levels[0] {
            return Ok((0, self.levels[0]));
        }
        if value >= self.levels[last] {
            return Ok((last, self.levels[last]));
        }
        let guess = ((value - self.levels[0]) / self.spacing())
            .round()
            .clamp(0.0, last as f64) as usize;
        let lo = guess.saturating_sub(1);
        let hi = (guess + 1).min(last);
        let mut best = lo;
        for j in lo + 1..=hi {
            if (value - self.levels[j]).abs() < (value - self.levels[best]).abs() {
                best = j;
            }
        }
        Ok((best, self.levels[best]))
    }

    /// Softmax-weighted average of the levels with weights
    /// `exp(-sigma_q * |value - level|)`.
    pub fn quantize_soft(&self, value: f64) -> f64 {
        let dist: Vec<f64> = self
            .levels
            .iter()
            .map(|l| -self.sigma_q * (value - l).abs())
            .collect();
        let max = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (d, l) in dist.iter().zip(&self.levels) {
            let w = (d - max).exp();
            num += w * l;
            den += w;
        }
        num / den
    }
}
