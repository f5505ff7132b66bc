//! Arbitrary-scale single-image super-resolution with a dual interactive
//! implicit decoder.
//!
//! A convolutional encoder turns the low-resolution image into a per-pixel
//! feature map. The map is unfolded over 3x3 neighbourhoods and sampled with
//! nearest interpolation at every output pixel. An implicit decoder then
//! predicts RGB from those content features and from positional features
//! (offset to the nearest input pixel plus the inverse scale). The decoder
//! pairs a ReLU modulation network with a sine synthesis network whose
//! activations it gates.
//!
//! Everything numeric is generic over [`Scalar`]; [`f32`] is used for
//! training and inference and [`f64`] for gradient checking.

pub mod coords;
pub mod data;
pub mod decoder;
pub mod encoder;
mod error;
pub mod image;
pub mod metrics;
pub mod model;
pub mod numcore;
pub mod params;
pub mod resample;
pub mod rng;
mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use numcore::{Eager, Graph, Tape, Tensor, Var};
pub use scalar::Scalar;

pub use crate::image::ImageRGB;
pub use model::{Model, ModelConfig};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
