//! Variational motion segmentation of a flow volume.
//!
//! The segmentation `g(k, t, i)` is the softmax of free per-site logits. The
//! loss combines the ξ-normalized L1 flow reconstruction error of each
//! segment's space-time model with an L1 temporal-consistency penalty that
//! skips the sites flagged as occlusions. Optimization alternates an exact
//! weighted-L1 refit of the motion models with backtracking gradient steps on
//! the logits.

mod init;
mod loss;
mod occlusion;
mod optimize;
mod soft;

pub use init::{initial_logits, kmeans_assign};
pub use loss::{
    alternate_total_loss, consistency_loss, frame_normalizers, reconstruction_loss, residual_matrix, residual_matrix_with,
    total_loss, LossBreakdown, Objective, XI_EPSILON,
};
pub use occlusion::{flow_differences, occlusion_threshold, OcclusionMask};
pub use optimize::{fit_models, segment, update_segmentation, SegmentWarning, SegmentationResult};
pub use soft::{background_label, hard_labels, SegmentationLogits, SoftSegmentation};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::flow_io::FlowVolume;
use crate::motion_model::ModelError;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Seeded small Gaussian noise on the logits.
    Random,
    /// k-means on the flow vectors of all sites, softened into logits.
    #[default]
    KMeans,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossVariant {
    /// `L_r + γ·L_c`.
    Main,
    /// `L_r − γ1·Σ g_t·g_{t−1} + γ2·Σ g·log g`, before the L1 bound.
    Alternate { gamma1: f64, gamma2: f64 },
    /// `L_r` alone.
    NoConsistency,
}

impl LossVariant {
    pub const ALTERNATE_DEFAULT: LossVariant = LossVariant::Alternate { gamma1: 0.5, gamma2: 0.01 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelFamily {
    #[default]
    Spline,
    /// Quadratic-in-time coefficients (ablation).
    PolyTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Number of segments `K`.
    pub segments: usize,
    /// Temporal frequency factor of the spline control points.
    pub nu: usize,
    pub degree: usize,
    /// Weight of the consistency term.
    pub gamma: f64,
    /// Fraction of temporal flow differences treated as occlusions.
    pub eta: f64,
    pub outer_iters: usize,
    /// Logit updates per outer iteration.
    pub g_steps: usize,
    /// Initial step, as the largest logit change of one update.
    pub g_step: f64,
    pub seed: u64,
    pub init: InitStrategy,
    pub loss_variant: LossVariant,
    pub model_family: ModelFamily,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            segments: 2,
            nu: 3,
            degree: 3,
            gamma: 1.0,
            eta: 0.01,
            outer_iters: 40,
            g_steps: 10,
            g_step: 1.0,
            seed: 0,
            init: InitStrategy::KMeans,
            loss_variant: LossVariant::Main,
            model_family: ModelFamily::Spline,
        }
    }
}

impl SegmenterConfig {
    pub fn with_segments(segments: usize) -> Self {
        Self { segments, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        let fail = |m: String| Err(SegmentError::Config(m));
        if !(2..=255).contains(&self.segments) {
            return fail(format!("K={} must be in 2..=255", self.segments));
        }
        if self.nu == 0 {
            return fail("nu must be at least 1".into());
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return fail(format!("gamma={} must be >= 0", self.gamma));
        }
        if !(self.eta.is_finite() && (0.0..0.5).contains(&self.eta)) {
            return fail(format!("eta={} must be in [0, 0.5)", self.eta));
        }
        if !(self.g_step.is_finite() && self.g_step > 0.0) {
            return fail(format!("g_step={} must be > 0", self.g_step));
        }
        if let LossVariant::Alternate { gamma1, gamma2 } = self.loss_variant {
            if !(gamma1.is_finite() && gamma2.is_finite() && gamma1 >= 0.0 && gamma2 >= 0.0) {
                return fail("alternate loss weights must be finite and >= 0".into());
            }
        }
        Ok(())
    }

    /// Consistency weight actually applied by the main/no-consistency variants.
    pub fn effective_gamma(&self) -> f64 {
        match self.loss_variant {
            LossVariant::NoConsistency => 0.0,
            _ => self.gamma,
        }
    }
}

pub(crate) fn check_volume(volume: &FlowVolume) -> Result<(), SegmentError> {
    if volume.len() < 2 {
        return Err(SegmentError::Shape(format!("need T >= 2 frames, got {}", volume.len())));
    }
    Ok(())
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::Random => "random",
            InitStrategy::KMeans => "kmeans",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "kmeans" => Ok(Self::KMeans),
            _ => Err(format!("unknown init `{s}` (random|kmeans)")),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Spline => "spline",
            ModelFamily::PolyTime => "polytime",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spline" => Ok(Self::Spline),
            "polytime" => Ok(Self::PolyTime),
            _ => Err(format!("unknown model family `{s}` (spline|polytime)")),
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossVariant::Main => f.write_str("main"),
            LossVariant::NoConsistency => f.write_str("no_consistency"),
            LossVariant::Alternate { gamma1, gamma2 } => write!(f, "alternate:{gamma1}:{gamma2}"),
        }
    }
}

/// `main`, `no_consistency`, `alternate` (γ1=0.5, γ2=0.01) or `alternate:γ1:γ2`.
impl FromStr for LossVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => return Ok(Self::Main),
            "no_consistency" | "no-consistency" => return Ok(Self::NoConsistency),
            "alternate" => return Ok(Self::ALTERNATE_DEFAULT),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if let ["alternate", a, b] = parts[..] {
            let a = a.parse().map_err(|_| format!("bad gamma1 in `{s}`"))?;
            let b = b.parse().map_err(|_| format!("bad gamma2 in `{s}`"))?;
            return Ok(Self::Alternate { gamma1: a, gamma2: b });
        }
        Err(format!("unknown loss variant `{s}` (main|alternate[:g1:g2]|no_consistency)"))
    }
}
