use super::basis::{PolyTimeBasis, SplineBasis, TemporalBasis};
use super::{ModelError, QuadraticParams};

/// Weighted sum of control parameter sets, i.e. the quadratic model in force
/// at one instant.
pub(crate) fn blend(controls: &[QuadraticParams], weights: &[f64]) -> QuadraticParams {
    let mut p = [0.0; 12];
    for (c, &w) in controls.iter().zip(weights) {
        if w != 0.0 {
            for (a, b) in p.iter_mut().zip(c.0) {
                *a += w * b;
            }
        }
    }
    QuadraticParams(p)
}

/// Quadratic spatial model whose coefficients follow a clamped B-spline in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineMotionModel {
    basis: SplineBasis,
    controls: Vec<QuadraticParams>,
}

impl SplineMotionModel {
    pub fn new(basis: SplineBasis, controls: Vec<QuadraticParams>) -> Result<Self, ModelError> {
        if controls.len() != basis.len() {
            return Err(ModelError::ControlCount { expected: basis.len(), controls: controls.len() });
        }
        Ok(Self { basis, controls })
    }

    pub fn zero(basis: SplineBasis) -> Self {
        let controls = vec![QuadraticParams::ZERO; basis.len()];
        Self { basis, controls }
    }

    /// Every control set equal to `params`: a time-constant model.
    pub fn constant(basis: SplineBasis, params: QuadraticParams) -> Self {
        let controls = vec![params; basis.len()];
        Self { basis, controls }
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn controls(&self) -> &[QuadraticParams] {
        &self.controls
    }

    /// Parameters at 0-based frame `t`.
    pub fn params_at_frame(&self, t: usize) -> QuadraticParams {
        blend(&self.controls, self.basis.frame_weights(t))
    }

    /// Parameters at normalized time `t′ ∈ [-1, 1]`.
    pub fn params_at(&self, t: f64) -> QuadraticParams {
        blend(&self.controls, &self.basis.weights_at(t))
    }

    /// Control-wise sum; both models must share a basis.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.basis, other.basis, "models must share a basis");
        let controls = self.controls.iter().zip(&other.controls).map(|(a, b)| a.add(b)).collect();
        Self { basis: self.basis.clone(), controls }
    }
}

/// Flow of a spline model at normalized `(x′, y′)` and 1-based frame `t`.
pub fn eval_spline_flow(model: &SplineMotionModel, x: f64, y: f64, t: usize) -> (f64, f64) {
    assert!(t >= 1 && t <= model.basis.frame_count(), "frame {t} outside 1..={}", model.basis.frame_count());
    model.params_at_frame(t - 1).eval(x, y)
}

/// Quadratic spatial model whose coefficients are polynomials in normalized
/// time; `coefficients[j]` multiplies `t′^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTimeMotionModel {
    basis: PolyTimeBasis,
    coefficients: Vec<QuadraticParams>,
}

impl PolyTimeMotionModel {
    pub fn new(basis: PolyTimeBasis, coefficients: Vec<QuadraticParams>) -> Result<Self, ModelError> {
        if coefficients.len() != basis.control_count() {
            return Err(ModelError::ControlCount {
                expected: basis.control_count(),
                controls: coefficients.len(),
            });
        }
        Ok(Self { basis, coefficients })
    }

    pub fn zero(basis: PolyTimeBasis) -> Self {
        let coefficients = vec![QuadraticParams::ZERO; basis.control_count()];
        Self { basis, coefficients }
    }

    pub fn basis(&self) -> &PolyTimeBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[QuadraticParams] {
        &self.coefficients
    }

    pub fn params_at(&self, t: f64) -> QuadraticParams {
        blend(&self.coefficients, &PolyTimeBasis::powers(t, self.basis.degree()))
    }

    pub fn params_at_frame(&self, t: usize) -> QuadraticParams {
        blend(&self.coefficients, self.basis.frame_weights(t))
    }
}

/// Flow of a polynomial-in-time model at normalized `(x′, y′, t′)`.
pub fn eval_polytime_flow(model: &PolyTimeMotionModel, x: f64, y: f64, t: f64) -> (f64, f64) {
    model.params_at(t).eval(x, y)
}

/// Motion model of one segment, in either temporal family.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    Spline(SplineMotionModel),
    PolyTime(PolyTimeMotionModel),
}

impl MotionModel {
    pub fn params_at_frame(&self, t: usize) -> QuadraticParams {
        match self {
            MotionModel::Spline(m) => m.params_at_frame(t),
            MotionModel::PolyTime(m) => m.params_at_frame(t),
        }
    }

    pub fn controls(&self) -> &[QuadraticParams] {
        match self {
            MotionModel::Spline(m) => m.controls(),
            MotionModel::PolyTime(m) => m.coefficients(),
        }
    }

    pub fn as_spline(&self) -> Option<&SplineMotionModel> {
        match self {
            MotionModel::Spline(m) => Some(m),
            MotionModel::PolyTime(_) => None,
        }
    }
}

impl From<SplineMotionModel> for MotionModel {
    fn from(m: SplineMotionModel) -> Self {
        MotionModel::Spline(m)
    }
}

impl From<PolyTimeMotionModel> for MotionModel {
    fn from(m: PolyTimeMotionModel) -> Self {
        MotionModel::PolyTime(m)
    }
}
