//! Self-supervised video JEPA tuning over UI activity clips, intent decoding
//! with a small fused text decoder, a synthetic UI-video generator and the
//! evaluation metric suite.

pub mod checkpoint;
pub mod datagen;
pub mod decoder;
pub mod error;
pub mod jepa;
pub mod masking;
pub mod metrics;
pub mod nn;
pub mod numerics;
pub mod video;

pub use error::{Error, Result};
