use super::occlusion::{occlusion_threshold, OcclusionMask};
use super::soft::{SegmentationLogits, SoftSegmentation};
use super::{LossVariant, SegmentError, SegmenterConfig};
use crate::flow_io::{axis_coords, FlowVolume};
use crate::motion_model::{dot6, monomials, MotionModel};

/// Added to every per-frame normalizer so all-zero frames stay finite.
pub const XI_EPSILON: f64 = 1e-8;

/// Loss values after one outer iteration.
///
/// For the main variants `total = l_r + γ·l_c`. For the alternate variant
/// `l_c` holds the whole prior term `−γ1·Σ g·g′ + γ2·Σ g·log g` and
/// `total = l_r + l_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_r: f64,
    pub l_c: f64,
    pub total: f64,
}

/// `ξ_t = Σ_i ‖f(i,t)‖₁` for every frame.
pub fn frame_normalizers(volume: &FlowVolume) -> Vec<f64> {
    volume.frames().iter().map(|f| f.l1_mass()).collect()
}

/// `‖f(i,t) − f̃_k(i,t)‖₁ / (ξ_t + ε_ξ)` indexed `(k, t, i)`, with `ξ` from the volume.
pub fn residual_matrix(volume: &FlowVolume, models: &[MotionModel]) -> Vec<f64> {
    residual_matrix_with(volume, models, &frame_normalizers(volume))
}

/// As [`residual_matrix`] with caller-supplied per-frame normalizers.
pub fn residual_matrix_with(volume: &FlowVolume, models: &[MotionModel], xi: &[f64]) -> Vec<f64> {
    assert_eq!(xi.len(), volume.len(), "one normalizer per frame");
    let (frames, sites, w) = (volume.len(), volume.sites(), volume.width());
    let xs = axis_coords(w);
    let ys = axis_coords(volume.height());
    let mono: Vec<[f64; 6]> = (0..sites).map(|i| monomials(xs[i % w], ys[i / w])).collect();
    let mut out = Vec::with_capacity(models.len() * frames * sites);
    for model in models {
        for t in 0..frames {
            let params = model.params_at_frame(t);
            let (pu, pv) = (params.u_coeffs(), params.v_coeffs());
            let frame = volume.frame(t);
            let scale = 1.0 / (xi[t] + XI_EPSILON);
            for (i, m) in mono.iter().enumerate() {
                let du = frame.u()[i] as f64 - dot6(&pu, m);
                let dv = frame.v()[i] as f64 - dot6(&pv, m);
                out.push((du.abs() + dv.abs()) * scale);
            }
        }
    }
    out
}

/// `Σ_{t,i} g · r` for one segment. Every reconstruction sum goes through here
/// so that per-segment comparisons are exact.
pub(crate) fn segment_reconstruction(g: &[f64], r: &[f64]) -> f64 {
    g.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn check_shapes(volume: &FlowVolume, g: &SoftSegmentation, models: &[MotionModel]) -> Result<(), SegmentError> {
    if g.frames() != volume.len() || g.sites() != volume.sites() {
        return Err(SegmentError::Shape(format!(
            "segmentation covers {}x{} (frames x sites), volume is {}x{}",
            g.frames(),
            g.sites(),
            volume.len(),
            volume.sites()
        )));
    }
    if models.len() != g.segments() {
        return Err(SegmentError::Shape(format!("{} models for {} segments", models.len(), g.segments())));
    }
    Ok(())
}

fn check_mask(g: &SoftSegmentation, mask: &OcclusionMask) -> Result<(), SegmentError> {
    if mask.frames() != g.frames() || mask.sites() != g.sites() {
        return Err(SegmentError::Shape("occlusion mask does not match segmentation".into()));
    }
    Ok(())
}

fn reconstruction_from(g: &SoftSegmentation, residuals: &[f64]) -> f64 {
    let n = g.frames() * g.sites();
    (0..g.segments()).map(|k| segment_reconstruction(g.segment(k), &residuals[k * n..(k + 1) * n])).sum()
}

/// `L_r = Σ_{t,i,k} g(k,t,i)·‖f(i,t) − f̃_k(i,t)‖₁ / (ξ_t + ε_ξ)`.
pub fn reconstruction_loss(volume: &FlowVolume, g: &SoftSegmentation, models: &[MotionModel]) -> Result<f64, SegmentError> {
    check_shapes(volume, g, models)?;
    Ok(reconstruction_from(g, &residual_matrix(volume, models)))
}

/// `L_c = (1 / 2K|Ω|) Σ_{k, t≥2, i not excluded} |g(k,t,i) − g(k,t−1,i)|`.
pub fn consistency_loss(g: &SoftSegmentation, mask: &OcclusionMask) -> Result<f64, SegmentError> {
    check_mask(g, mask)?;
    let (kk, frames, sites) = (g.segments(), g.frames(), g.sites());
    let mut sum = 0.0;
    for k in 0..kk {
        let gk = g.segment(k);
        for t in 1..frames {
            for i in 0..sites {
                if !mask.is_excluded(t, i) {
                    sum += (gk[t * sites + i] - gk[(t - 1) * sites + i]).abs();
                }
            }
        }
    }
    Ok(sum / (2.0 * kk as f64 * sites as f64))
}

/// `Σ_{k, t≥2, i} g(k,t,i)·g(k,t−1,i)` and `Σ g·log g` (with `0·log 0 = 0`).
fn alternate_terms(g: &SoftSegmentation) -> (f64, f64) {
    let (frames, sites) = (g.frames(), g.sites());
    let mut dot = 0.0;
    let mut ent = 0.0;
    for k in 0..g.segments() {
        let gk = g.segment(k);
        for t in 1..frames {
            for i in 0..sites {
                dot += gk[t * sites + i] * gk[(t - 1) * sites + i];
            }
        }
        for &v in gk {
            if v > 0.0 {
                ent += v * v.ln();
            }
        }
    }
    (dot, ent)
}

/// Loss of the configured variant, with the occlusion mask derived from `config.eta`.
pub fn total_loss(
    volume: &FlowVolume,
    g: &SoftSegmentation,
    models: &[MotionModel],
    config: &SegmenterConfig,
) -> Result<LossBreakdown, SegmentError> {
    check_shapes(volume, g, models)?;
    let (_, mask) = occlusion_threshold(volume, config.eta);
    let objective = Objective::new(residual_matrix(volume, models), g.segments(), &mask, config)?;
    Ok(objective.evaluate(g))
}

/// `L_r − γ1·Σ_{t≥2} g(t)·g(t−1) + γ2·Σ g·log g`.
pub fn alternate_total_loss(
    volume: &FlowVolume,
    g: &SoftSegmentation,
    models: &[MotionModel],
    gamma1: f64,
    gamma2: f64,
) -> Result<f64, SegmentError> {
    let l_r = reconstruction_loss(volume, g, models)?;
    let (dot, ent) = alternate_terms(g);
    Ok(l_r - gamma1 * dot + gamma2 * ent)
}

/// The loss as a function of the segmentation for fixed models.
#[derive(Debug, Clone)]
pub struct Objective<'m> {
    residuals: Vec<f64>,
    segments: usize,
    frames: usize,
    sites: usize,
    mask: &'m OcclusionMask,
    variant: LossVariant,
    gamma: f64,
}

impl<'m> Objective<'m> {
    /// `residuals` indexed `(k, t, i)` as produced by [`residual_matrix`].
    pub fn new(
        residuals: Vec<f64>,
        segments: usize,
        mask: &'m OcclusionMask,
        config: &SegmenterConfig,
    ) -> Result<Self, SegmentError> {
        let (frames, sites) = (mask.frames(), mask.sites());
        if residuals.len() != segments * frames * sites {
            return Err(SegmentError::Shape("residual matrix does not match the mask".into()));
        }
        Ok(Self { residuals, segments, frames, sites, mask, variant: config.loss_variant, gamma: config.effective_gamma() })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn into_residuals(self) -> Vec<f64> {
        self.residuals
    }

    /// Residuals of segment `k`, indexed `t · |Ω| + i`.
    pub fn segment_residuals(&self, k: usize) -> &[f64] {
        let n = self.frames * self.sites;
        &self.residuals[k * n..(k + 1) * n]
    }

    pub fn replace_segment_residuals(&mut self, k: usize, r: &[f64]) {
        let n = self.frames * self.sites;
        self.residuals[k * n..(k + 1) * n].copy_from_slice(r);
    }

    pub fn evaluate(&self, g: &SoftSegmentation) -> LossBreakdown {
        let l_r = reconstruction_from(g, &self.residuals);
        match self.variant {
            LossVariant::Alternate { gamma1, gamma2 } => {
                let (dot, ent) = alternate_terms(g);
                let prior = -gamma1 * dot + gamma2 * ent;
                LossBreakdown { l_r, l_c: prior, total: l_r + prior }
            }
            LossVariant::Main | LossVariant::NoConsistency => {
                let l_c = consistency_loss(g, self.mask).expect("objective shapes are checked on construction");
                LossBreakdown { l_r, l_c, total: l_r + self.gamma * l_c }
            }
        }
    }

    pub fn value(&self, logits: &SegmentationLogits) -> f64 {
        self.evaluate(&logits.softmax()).total
    }

    /// Derivative of the total with respect to `g`, indexed `(k, t, i)`.
    /// L1 kinks use `sign(0) = 0`.
    pub fn soft_gradient(&self, g: &SoftSegmentation) -> Vec<f64> {
        let (frames, sites) = (self.frames, self.sites);
        let mut grad = self.residuals.clone();
        let n = frames * sites;
        match self.variant {
            LossVariant::Alternate { gamma1, gamma2 } => {
                for k in 0..self.segments {
                    let gk = g.segment(k);
                    let dk = &mut grad[k * n..(k + 1) * n];
                    for t in 0..frames {
                        for i in 0..sites {
                            let j = t * sites + i;
                            let mut nb = 0.0;
                            if t > 0 {
                                nb += gk[j - sites];
                            }
                            if t + 1 < frames {
                                nb += gk[j + sites];
                            }
                            let lg = gk[j].max(f64::MIN_POSITIVE).ln();
                            dk[j] += -gamma1 * nb + gamma2 * (lg + 1.0);
                        }
                    }
                }
            }
            LossVariant::Main | LossVariant::NoConsistency => {
                if self.gamma == 0.0 {
                    return grad;
                }
                let c = self.gamma / (2.0 * self.segments as f64 * sites as f64);
                for k in 0..self.segments {
                    let gk = g.segment(k);
                    let dk = &mut grad[k * n..(k + 1) * n];
                    for t in 1..frames {
                        for i in 0..sites {
                            if self.mask.is_excluded(t, i) {
                                continue;
                            }
                            let j = t * sites + i;
                            let s = sign(gk[j] - gk[j - sites]) * c;
                            dk[j] += s;
                            dk[j - sites] -= s;
                        }
                    }
                }
            }
        }
        grad
    }

    /// Gradient of the total with respect to the logits, through the softmax.
    pub fn logit_gradient(&self, logits: &SegmentationLogits) -> Vec<f64> {
        let g = logits.softmax();
        let dg = self.soft_gradient(&g);
        let n = self.frames * self.sites;
        let mut out = vec![0.0; dg.len()];
        for j in 0..n {
            let mean: f64 = (0..self.segments).map(|k| g.values()[k * n + j] * dg[k * n + j]).sum();
            for k in 0..self.segments {
                out[k * n + j] = g.values()[k * n + j] * (dg[k * n + j] - mean);
            }
        }
        out
    }

    /// One backtracking descent step along the ∞-norm normalized negative
    /// gradient. The step starts at `initial_step` (the largest logit change)
    /// and is halved at most `max_halvings` times; the first trial whose loss
    /// does not exceed the current one is taken. Returns whether the logits
    /// changed.
    pub fn descend(&self, logits: &mut SegmentationLogits, initial_step: f64, max_halvings: usize) -> bool {
        let grad = self.logit_gradient(logits);
        let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        let current = self.value(logits);
        let mut step = initial_step;
        let mut trial = logits.clone();
        for _ in 0..=max_halvings {
            let scale = step / norm;
            for ((x, &x0), &d) in trial.values.iter_mut().zip(&logits.values).zip(&grad) {
                *x = x0 - scale * d;
            }
            if self.value(&trial) <= current {
                *logits = trial;
                return true;
            }
            step *= 0.5;
        }
        false
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
