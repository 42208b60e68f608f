//! Hierarchical cross-modal GAN anomaly detection.
//!
//! Frame/optical-flow couples are translated in both directions by
//! conditional GANs; distances between discriminator score maps of observed
//! and predicted couples are clustered with a self-organizing map, and
//! high-distance clusters seed further GAN levels. At test time each couple
//! is routed down the levels until one claims it as normal.

pub mod autodiff;
pub mod detector;
pub mod error;
pub mod eval;
pub mod fnv;
pub mod gan;
pub mod hierarchy;
pub mod rng;
pub mod scene;
pub mod som;
pub mod store;

pub use error::{Error, Result};
