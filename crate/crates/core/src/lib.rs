// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alphatron;
pub mod alphatron_u;
pub mod concepts;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod kernels;
pub mod kmtron;
pub mod link;
pub mod polyapprox;

pub use alphatron::{alphatron_train, Dataset, KernelModel, TrainReport};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, Sample};
pub use link::LinkFunction;
