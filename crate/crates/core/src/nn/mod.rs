//! Forward-only convolutional inference for the extractors and predictors.

pub mod network;
pub mod ops;
pub mod spec;
pub mod tensor;
pub mod weights;

pub use network::Network;
pub use spec::{required_tensors, ModelMode, NetworkSpec};
pub use tensor::Tensor;
pub use weights::{load_weights, save_weights, ModelWeights, WeightTensor};
