//! Small dense-tensor kernel: HWC convolutions, pooling, leaky-ReLU,
//! dense layers and an Adam optimizer, each with a hand-written backward
//! pass. Layers are generic over the scalar so gradient checks can run in
//! double precision while training runs in single precision.

mod adam;
mod layers;
mod tensor;

pub use adam::{AdamConfig, OptimizerState};
pub use layers::{
    concat, concat_backward, conv2d, conv2d_backward, dense, dense_backward, global_maxpool,
    global_maxpool_backward, leaky_relu, leaky_relu_backward, maxpool2d, maxpool2d_backward,
    maxpool_out_dim, mse_loss, ConvLayer, DenseLayer, PoolIndices, LEAKY_SLOPE,
};
pub use tensor::{Scalar, Tensor};
