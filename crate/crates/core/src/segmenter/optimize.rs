use std::fmt;

use super::init::initial_logits;
use super::loss::{frame_normalizers, residual_matrix, residual_matrix_with, segment_reconstruction, LossBreakdown, Objective, XI_EPSILON};
use super::occlusion::{occlusion_threshold, OcclusionMask};
use super::soft::{hard_labels, SegmentationLogits, SoftSegmentation};
use super::{check_volume, ModelFamily, SegmentError, SegmenterConfig};
use crate::flow_io::FlowVolume;
use crate::labels::LabelMap;
use crate::motion_model::{
    build_basis, fit_polytime_model, fit_spline_model, ModelError, MotionModel, PolyTimeBasis, PolyTimeMotionModel,
    SplineBasis, SplineMotionModel,
};

/// Halvings allowed per backtracking step.
const MAX_HALVINGS: usize = 20;

/// Temporal degree of the polynomial-in-time ablation.
const POLYTIME_DEGREE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentWarning {
    /// The segment carried too little weight to fit; its model was frozen.
    EmptySegment { segment: usize, iteration: usize },
}

impl fmt::Display for SegmentWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentWarning::EmptySegment { segment, iteration } => {
                write!(f, "segment {segment} empty at iteration {iteration}; model frozen")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub soft: SoftSegmentation,
    pub logits: SegmentationLogits,
    pub models: Vec<MotionModel>,
    /// Loss after each outer iteration.
    pub trace: Vec<LossBreakdown>,
    pub occlusion: OcclusionMask,
    /// Flow-difference threshold behind `occlusion`.
    pub lambda: f64,
    pub warnings: Vec<SegmentWarning>,
}

impl SegmentationResult {
    pub fn hard_labels(&self, width: usize, height: usize) -> Vec<LabelMap> {
        hard_labels(&self.soft, width, height)
    }
}

enum Basis {
    Spline(SplineBasis),
    PolyTime(PolyTimeBasis),
}

impl Basis {
    fn new(frames: usize, config: &SegmenterConfig) -> Self {
        match config.model_family {
            ModelFamily::Spline => Basis::Spline(build_basis(frames, config.nu, config.degree)),
            ModelFamily::PolyTime => Basis::PolyTime(PolyTimeBasis::new(frames, POLYTIME_DEGREE)),
        }
    }

    fn zero(&self) -> MotionModel {
        match self {
            Basis::Spline(b) => SplineMotionModel::zero(b.clone()).into(),
            Basis::PolyTime(b) => PolyTimeMotionModel::zero(b.clone()).into(),
        }
    }

    fn fit(&self, volume: &FlowVolume, weights: &[f64], init: Option<&MotionModel>) -> Result<MotionModel, ModelError> {
        match (self, init) {
            (Basis::Spline(b), Some(MotionModel::Spline(m))) => Ok(fit_spline_model(volume, weights, b, Some(m))?.model.into()),
            (Basis::Spline(b), _) => Ok(fit_spline_model(volume, weights, b, None)?.model.into()),
            (Basis::PolyTime(b), Some(MotionModel::PolyTime(m))) => Ok(fit_polytime_model(volume, weights, b, Some(m))?.0.into()),
            (Basis::PolyTime(b), _) => Ok(fit_polytime_model(volume, weights, b, None)?.0.into()),
        }
    }
}

/// Fitting weights `g(k,t,i) / (ξ_t + ε_ξ)` of segment `k`.
fn segment_weights(g: &SoftSegmentation, k: usize, xi: &[f64]) -> Vec<f64> {
    let sites = g.sites();
    g.segment(k).iter().enumerate().map(|(j, &v)| v / (xi[j / sites] + XI_EPSILON)).collect()
}

/// Independent per-segment fits for a fixed segmentation, with normalizers
/// `xi`. Segments without support get a zero model and are listed in the
/// second return value.
pub fn fit_models(
    volume: &FlowVolume,
    g: &SoftSegmentation,
    config: &SegmenterConfig,
    xi: &[f64],
) -> Result<(Vec<MotionModel>, Vec<usize>), SegmentError> {
    config.validate()?;
    check_volume(volume)?;
    let basis = Basis::new(volume.len(), config);
    let mut models = Vec::with_capacity(g.segments());
    let mut empty = Vec::new();
    for k in 0..g.segments() {
        match basis.fit(volume, &segment_weights(g, k, xi), None) {
            Ok(m) => models.push(m),
            Err(ModelError::DegenerateSupport(_)) => {
                empty.push(k);
                models.push(basis.zero());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((models, empty))
}

/// One backtracking gradient step on the logits for fixed models.
pub fn update_segmentation(
    volume: &FlowVolume,
    logits: &SegmentationLogits,
    models: &[MotionModel],
    mask: &OcclusionMask,
    config: &SegmenterConfig,
) -> Result<SegmentationLogits, SegmentError> {
    if models.len() != logits.segments() || logits.frames() != volume.len() || logits.sites() != volume.sites() {
        return Err(SegmentError::Shape("logits, models and volume disagree".into()));
    }
    let objective = Objective::new(residual_matrix(volume, models), logits.segments(), mask, config)?;
    let mut next = logits.clone();
    objective.descend(&mut next, config.g_step, MAX_HALVINGS);
    Ok(next)
}

/// Alternates exact weighted-L1 model fits with logit descent steps.
pub fn segment(volume: &FlowVolume, config: &SegmenterConfig) -> Result<SegmentationResult, SegmentError> {
    config.validate()?;
    check_volume(volume)?;
    let (k_count, frames, sites) = (config.segments, volume.len(), volume.sites());
    let n = frames * sites;
    let (lambda, mask) = occlusion_threshold(volume, config.eta);
    let xi = frame_normalizers(volume);
    let basis = Basis::new(frames, config);

    let mut logits = initial_logits(volume, config);
    let mut models: Vec<Option<MotionModel>> = vec![None; k_count];
    let mut residuals = vec![0.0; k_count * n];
    let mut trace = Vec::with_capacity(config.outer_iters);
    let mut warnings = Vec::new();

    for iteration in 0..config.outer_iters {
        let g = logits.softmax();
        for k in 0..k_count {
            let fitted = match basis.fit(volume, &segment_weights(&g, k, &xi), models[k].as_ref()) {
                Ok(m) => Some(m),
                Err(ModelError::DegenerateSupport(_)) => {
                    warnings.push(SegmentWarning::EmptySegment { segment: k, iteration });
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let slot = &mut residuals[k * n..(k + 1) * n];
            match (fitted, &models[k]) {
                (Some(new), Some(_)) => {
                    let r = residual_matrix_with(volume, std::slice::from_ref(&new), &xi);
                    // Keep the old model unless the new one is at least as good
                    // under the exact sum used by the loss.
                    if segment_reconstruction(g.segment(k), &r) <= segment_reconstruction(g.segment(k), slot) {
                        slot.copy_from_slice(&r);
                        models[k] = Some(new);
                    }
                }
                (Some(new), None) => {
                    slot.copy_from_slice(&residual_matrix_with(volume, std::slice::from_ref(&new), &xi));
                    models[k] = Some(new);
                }
                (None, Some(_)) => {}
                (None, None) => {
                    let zero = basis.zero();
                    slot.copy_from_slice(&residual_matrix_with(volume, std::slice::from_ref(&zero), &xi));
                    models[k] = Some(zero);
                }
            }
        }

        let objective = Objective::new(residuals, k_count, &mask, config)?;
        for _ in 0..config.g_steps {
            if !objective.descend(&mut logits, config.g_step, MAX_HALVINGS) {
                break;
            }
        }
        trace.push(objective.evaluate(&logits.softmax()));
        residuals = objective.into_residuals();
    }

    let models: Vec<MotionModel> = match models.iter().all(Option::is_some) {
        true => models.into_iter().flatten().collect(),
        // No outer iteration ran: report plain fits of the initial segmentation.
        false => fit_models(volume, &logits.softmax(), config, &xi)?.0,
    };
    Ok(SegmentationResult { soft: logits.softmax(), logits, models, trace, occlusion: mask, lambda, warnings })
}
