//! Portrait sketch synthesis and pen-plotter compilation.
//!
//! The crate is split along the pipeline:
//!
//! * [`tensor`], [`layers`], [`moments`], [`net`], [`adam`]: a small
//!   deterministic tensor kernel with hand-written backward passes.
//! * [`stylenet`]: encoder, AdaIN transfer, decoder, the training losses and
//!   the training loop.
//! * [`maskops`]: face-parsing label maps and the raster post-processing
//!   that depends on them.
//! * [`pathplan`]: skeletonization, stroke tracing, fill loops and stroke
//!   ordering.
//! * [`plotemit`]: workspace mapping, G-code and SVG emission, and a
//!   rasterizing simulator.

pub mod adam;
pub mod error;
pub mod exec;
pub mod layers;
pub mod moments;
pub mod net;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tensor::{Dims, Scalar, Tensor4};
pub mod fixtures;
pub mod maskops;
pub mod pathplan;
pub mod plotemit;
pub mod raster;
pub mod stylenet;
