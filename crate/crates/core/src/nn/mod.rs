//! Minimal differentiable-network kernel: dense and convolutional layers,
//! relu/tanh, mean squared error, Adam, global-norm clipping and soft
//! target updates.

mod checkpoint;
mod kernels;
mod loss;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC};
pub use loss::{mse, weighted_mse};
pub use network::{mlp_specs, Gradients, LayerSpec, Network};
pub use optim::{clip_global_norm, soft_update, AdamConfig, AdamState};
pub use tensor::Tensor;

/// Three 3×3 stride-2 conv layers (16/32/32 channels) with relu between
/// them, over a `[channels, size, size]` observation.
pub fn conv_encoder_specs(channels: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            in_channels: channels,
            out_channels: 16,
            kernel: 3,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Conv {
            in_channels: 16,
            out_channels: 32,
            kernel: 3,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Conv {
            in_channels: 32,
            out_channels: 32,
            kernel: 3,
            stride: 2,
        },
        LayerSpec::Relu,
    ]
}

/// Feature width produced by [`conv_encoder_specs`] on a `size × size` grid.
pub fn conv_encoder_output(size: usize) -> usize {
    let mut s = size;
    for _ in 0..3 {
        s = (s - 3) / 2 + 1;
    }
    32 * s * s
}
