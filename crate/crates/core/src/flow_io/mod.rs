//! Optical-flow fields and volumes: the `.flo` interchange format, grid
//! resampling, coordinate normalization and HSV rendering.

mod flo;
mod hsv;
mod resample;

pub use flo::{read_flo, read_flo_from, write_flo, write_flo_to, FLO_MAGIC};
pub use hsv::{flow_to_hsv, hsv_to_rgb, volume_to_hsv, HsvNormalization, RgbImage};
pub use resample::{resample, resample_volume};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("bad .flo magic tag {0} (expected 202021.25)")]
    BadMagic(f32),
    #[error("truncated .flo payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite flow value at pixel {index}")]
    NonFinite { index: usize },
    #[error("invalid .flo dimensions {width}x{height}")]
    BadDimensions { width: i64, height: i64 },
    #[error("flow field buffers do not match {width}x{height}")]
    ShapeMismatch { width: usize, height: usize },
    #[error("flow volume needs at least two frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index} is {width}x{height}, volume is {expected_width}x{expected_height}")]
    FrameSizeMismatch {
        index: usize,
        width: usize,
        height: usize,
        expected_width: usize,
        expected_height: usize,
    },
    #[error("coordinate out of range: {0}")]
    OutOfRange(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Dense 2D displacement field on a `width`×`height` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self, FlowError> {
        let n = width * height;
        if width == 0 || height == 0 || u.len() != n || v.len() != n {
            return Err(FlowError::ShapeMismatch { width, height });
        }
        if let Some(index) = u.iter().chain(v.iter()).position(|x| !x.is_finite()) {
            return Err(FlowError::NonFinite { index: index % n });
        }
        Ok(Self { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self { width, height, u: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        Self { width, height, u: vec![u; n], v: vec![v; n] }
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Self {
        let n = width * height;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self { width, height, u, v }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Mutable access to both components. Callers must keep values finite.
    pub fn components_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.u, &mut self.v)
    }

    /// Sum of per-pixel L1 norms, the per-frame normalizer of the reconstruction loss.
    pub fn l1_mass(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| (a as f64).abs() + (b as f64).abs())
            .sum()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&a, &b)| (a as f64).hypot(b as f64))
            .fold(0.0, f64::max)
    }
}

/// `T ≥ 2` consecutive flow fields sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVolume {
    frames: Vec<FlowField>,
}

impl FlowVolume {
    pub fn new(frames: Vec<FlowField>) -> Result<Self, FlowError> {
        if frames.len() < 2 {
            return Err(FlowError::TooFewFrames(frames.len()));
        }
        let (w, h) = (frames[0].width, frames[0].height);
        for (index, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(FlowError::FrameSizeMismatch {
                    index,
                    width: f.width,
                    height: f.height,
                    expected_width: w,
                    expected_height: h,
                });
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[FlowField] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &FlowField {
        &self.frames[t]
    }

    pub fn frames_mut(&mut self) -> &mut [FlowField] {
        &mut self.frames
    }

    pub fn into_frames(self) -> Vec<FlowField> {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of sites per frame, `|Ω|`.
    pub fn sites(&self) -> usize {
        self.width() * self.height()
    }

    /// Frames `start..end` as a new volume.
    pub fn window(&self, start: usize, end: usize) -> Result<Self, FlowError> {
        Self::new(self.frames[start..end].to_vec())
    }

    pub fn max_magnitude(&self) -> f64 {
        self.frames.iter().map(FlowField::max_magnitude).fold(0.0, f64::max)
    }
}

/// A point of the space-time grid mapped to `[-1, 1]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedCoords {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Affine map of `0..=n-1` onto `[-1, 1]`; a single sample maps to 0.
pub fn normalize_axis(index: f64, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * index / (n - 1) as f64 - 1.0
    }
}

/// Normalized positions of every sample along an axis of length `n`.
pub fn axis_coords(n: usize) -> Vec<f64> {
    (0..n).map(|i| normalize_axis(i as f64, n)).collect()
}

/// Maps pixel `(x, y)` and 1-based frame index `t` to normalized coordinates.
pub fn normalize_coords(
    x: f64,
    y: f64,
    t: f64,
    width: usize,
    height: usize,
    frames: usize,
) -> Result<NormalizedCoords, FlowError> {
    let check = |name: &str, value: f64, lo: f64, hi: f64| {
        if value.is_finite() && value >= lo && value <= hi {
            Ok(())
        } else {
            Err(FlowError::OutOfRange(format!("{name}={value} not in [{lo}, {hi}]")))
        }
    };
    if width == 0 || height == 0 || frames == 0 {
        return Err(FlowError::OutOfRange("empty grid".into()));
    }
    check("x", x, 0.0, (width - 1) as f64)?;
    check("y", y, 0.0, (height - 1) as f64)?;
    check("t", t, 1.0, frames as f64)?;
    Ok(NormalizedCoords {
        x: normalize_axis(x, width),
        y: normalize_axis(y, height),
        t: normalize_axis(t - 1.0, frames),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_endpoints() {
        let c = normalize_coords(0.0, 0.0, 1.0, 7, 5, 9).unwrap();
        assert_eq!((c.x, c.y, c.t), (-1.0, -1.0, -1.0));
        let c = normalize_coords(6.0, 4.0, 9.0, 7, 5, 9).unwrap();
        assert_eq!((c.x, c.y, c.t), (1.0, 1.0, 1.0));
    }

    #[test]
    fn normalize_center_and_interior() {
        let c = normalize_coords(3.0, 2.0, 5.0, 7, 5, 9).unwrap();
        assert_eq!((c.x, c.y, c.t), (0.0, 0.0, 0.0));
        let c = normalize_coords(3.0, 0.0, 1.0, 5, 3, 2).unwrap();
        assert_eq!(c.x, 0.5);
    }

    #[test]
    fn normalize_degenerate_axis_maps_to_zero() {
        let c = normalize_coords(0.0, 0.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!((c.x, c.y, c.t), (0.0, 0.0, 0.0));
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        assert!(normalize_coords(5.0, 0.0, 1.0, 5, 5, 5).is_err());
        assert!(normalize_coords(0.0, -0.5, 1.0, 5, 5, 5).is_err());
        assert!(normalize_coords(0.0, 0.0, 0.0, 5, 5, 5).is_err());
        assert!(normalize_coords(f64::NAN, 0.0, 1.0, 5, 5, 5).is_err());
    }

    #[test]
    fn field_rejects_non_finite() {
        let err = FlowField::new(2, 1, vec![0.0, f32::NAN], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, FlowError::NonFinite { index: 1 }));
    }

    #[test]
    fn volume_invariants() {
        assert!(matches!(
            FlowVolume::new(vec![FlowField::zeros(2, 2)]),
            Err(FlowError::TooFewFrames(1))
        ));
        assert!(matches!(
            FlowVolume::new(vec![FlowField::zeros(2, 2), FlowField::zeros(3, 2)]),
            Err(FlowError::FrameSizeMismatch { index: 1, .. })
        ));
        let vol = FlowVolume::new(vec![FlowField::zeros(4, 3); 5]).unwrap();
        assert_eq!((vol.len(), vol.sites()), (5, 12));
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_monotone_affine(n in 2usize..200, a in 0usize..200, b in 0usize..200) {
            let (a, b) = (a % n, b % n);
            let fa = normalize_axis(a as f64, n);
            let fb = normalize_axis(b as f64, n);
            proptest::prop_assert!((-1.0..=1.0).contains(&fa));
            if a < b { proptest::prop_assert!(fa < fb); }
            // Midpoint of two samples maps to the midpoint of their images.
            let mid = normalize_axis((a + b) as f64 / 2.0, n);
            proptest::prop_assert!((mid - (fa + fb) / 2.0).abs() < 1e-12);
        }
    }
}
