#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod coder;
pub mod dlm;
pub mod error;
pub mod image;
pub mod nn;
pub mod pyramid;
pub mod quantizer;

pub use error::{Error, Result};
pub use image::Image;
