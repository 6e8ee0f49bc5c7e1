//! Minimal dense-tensor math with reverse-mode gradients for the layers the
//! tagger needs, plus the averaged-SGD optimizer and a finite-difference
//! gradient checker.

pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use gradcheck::grad_check;
pub use optim::{asgd_step, OptState};
pub use param::{grad_buffers, Param, ParamSet};
pub use scalar::Scalar;
pub use tensor::Tensor;
