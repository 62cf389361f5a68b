//! Minimal differentiable stack: tensors, a fixed layer set with hand-written
//! backward passes, softmax cross-entropy, SGD and the learning-rate schedule.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;

pub use layers::{Conv2d, Gap, Layer, Linear, MaxPool2d, Relu};
pub use loss::{log_softmax_row, softmax, softmax_cross_entropy, softmax_row, LossGrad};
pub use network::{ForwardOutput, Network};
pub use optim::{LrSchedule, Sgd};
pub use tensor::{Scalar, Tensor};
