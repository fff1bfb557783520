//! The hybrid network: layer primitives, the ConvNeXt-style block, the
//! assembled model with analytic gradients, and model serialization.

pub mod block;
pub mod io;
pub mod layers;
pub mod model;
pub mod scalar;
pub mod tensor;

pub use block::{convnext_block_forward, ConvNeXtBlock};
pub use io::{load_model, save_model};
pub use layers::{
    conv1d_forward, dense_forward, dropout, flatten, gelu, layernorm, relu, softmax, Conv1dLayer,
    DenseLayer, DepthwiseConv1d, LayerNorm,
};
pub use model::{
    backward, forward_inference, forward_training, hyperparam_estimate, init_model, param_count,
    predict_proba, GradientSet, Model, ModelConfig, ParamSet, SampleCache,
};
pub use scalar::Scalar;
pub use tensor::Mat;
