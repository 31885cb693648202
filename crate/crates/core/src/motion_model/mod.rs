//! Space-time parametric motion models.
//!
//! A segment's flow is a full quadratic polynomial in the normalized image
//! coordinates whose twelve coefficients evolve over time, either through a
//! clamped B-spline (`SplineMotionModel`) or through low-degree polynomials in
//! normalized time (`PolyTimeMotionModel`). Both are linear in their control
//! parameters, so fitting them under a weighted L1 loss is convex.

mod basis;
mod fit;
mod model;
mod serialize;

pub use basis::{
    build_basis, control_point_count, cox_de_boor_weights, PolyTimeBasis, SplineBasis, TemporalBasis,
};
pub use fit::{fit_polytime_model, fit_space_time, fit_spline_model, FitOptions, FitOutcome, SplineFit};
pub use model::{eval_polytime_flow, eval_spline_flow, MotionModel, PolyTimeMotionModel, SplineMotionModel};
pub use serialize::{parse_model, ModelParseError};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("total fitting weight {0:e} is too small to support a model")]
    DegenerateSupport(f64),
    #[error("weights have {found} entries, volume needs {expected}")]
    WeightShape { expected: usize, found: usize },
    #[error("basis covers {basis} frames, volume has {volume}")]
    FrameMismatch { basis: usize, volume: usize },
    #[error("{controls} control sets supplied for a basis of {expected}")]
    ControlCount { expected: usize, controls: usize },
    #[error("negative or non-finite weight at index {0}")]
    BadWeight(usize),
}

/// Coefficients of the 12-parameter quadratic flow model, `theta[0]` being θ1.
///
/// u = θ1 + θ2·x + θ3·y + θ7·x² + θ8·xy + θ9·y²
/// v = θ4 + θ5·x + θ6·y + θ10·x² + θ11·xy + θ12·y²
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadraticParams(pub [f64; 12]);

/// Positions of the u-component coefficients, in monomial order `[1, x, y, x², xy, y²]`.
pub const U_SLOTS: [usize; 6] = [0, 1, 2, 6, 7, 8];
/// Positions of the v-component coefficients, in monomial order.
pub const V_SLOTS: [usize; 6] = [3, 4, 5, 9, 10, 11];

impl QuadraticParams {
    pub const ZERO: Self = Self([0.0; 12]);

    pub fn translation(u: f64, v: f64) -> Self {
        let mut p = [0.0; 12];
        p[0] = u;
        p[3] = v;
        Self(p)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn u_coeffs(&self) -> [f64; 6] {
        U_SLOTS.map(|s| self.0[s])
    }

    pub fn v_coeffs(&self) -> [f64; 6] {
        V_SLOTS.map(|s| self.0[s])
    }

    pub fn from_components(u: [f64; 6], v: [f64; 6]) -> Self {
        let mut p = [0.0; 12];
        for j in 0..6 {
            p[U_SLOTS[j]] = u[j];
            p[V_SLOTS[j]] = v[j];
        }
        Self(p)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.0;
        for (a, b) in p.iter_mut().zip(other.0) {
            *a += b;
        }
        Self(p)
    }

    /// Flow vector at normalized coordinates `(x, y)`.
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let m = monomials(x, y);
        (dot6(&self.u_coeffs(), &m), dot6(&self.v_coeffs(), &m))
    }
}

/// `[1, x, y, x², xy, y²]`
#[inline]
pub fn monomials(x: f64, y: f64) -> [f64; 6] {
    [1.0, x, y, x * x, x * y, y * y]
}

#[inline]
pub(crate) fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}

pub fn eval_quadratic(params: &QuadraticParams, x: f64, y: f64) -> (f64, f64) {
    params.eval(x, y)
}
