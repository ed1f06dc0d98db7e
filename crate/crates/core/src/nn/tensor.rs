use crate::error::{Error, Result};

/// Dense `[channels, height, width]` activation map, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "tensor [{channels}, {height}, {width}] needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn relu_inplace(&mut self) {
        for v in &mut self.data {
            *v = v.max(0.0);
        }
    }

    pub fn add_inplace(&mut self, other: &Tensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Stacks tensors of equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut channels = 0;
        for p in parts {
            if (p.height, p.width) != (h, w) {
                return Err(Error::Shape(format!(
                    "concat of {}x{} with {}x{}",
                    h, w, p.height, p.width
                )));
            }
            channels += p.channels;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            channels,
            height: h,
            width: w,
            data,
        })
    }
}
