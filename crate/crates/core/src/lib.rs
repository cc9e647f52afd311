//! Person-job fit ranking: bilateral interaction encoders, a category-aware
//! mixture-of-experts head, pairwise BPR training, ranking metrics, JD
//! augmentation, and a synthetic data generator.

pub mod augment;
pub mod checkpoint;
pub mod domain;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod moe;
pub mod numerics;
pub mod ranking;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use model::{Ablation, ModelConfig, PjfModel};
