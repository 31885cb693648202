//! Long-term motion segmentation of optical-flow volumes.
//!
//! A volume of `T` consecutive flow fields is split into `K` segments, each
//! explained by a quadratic motion model whose parameters evolve over time
//! along a B-spline. Segmentation probabilities and motion models are found by
//! alternating an exact weighted-L1 model fit with gradient steps on
//! per-site segmentation logits, under a flow-reconstruction loss plus an
//! occlusion-aware temporal-consistency term.

pub mod cli;
pub mod evaluation;
pub mod flow_io;
pub mod motion_model;
pub mod labels;
pub mod png_io;
pub mod segmenter;
pub mod synthgen;
