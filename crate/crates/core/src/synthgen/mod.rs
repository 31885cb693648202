//! Synthetic flow volumes with known segmentation and motion, plus the
//! augmentations used to stress the segmenter.

mod augment;
mod scene;

pub use augment::{add_global_flow, corrupt_flows, corrupted_frame_indices, inject_temporal_discontinuity};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::flow_io::{normalize_axis, FlowField, FlowVolume};
use crate::labels::{LabelMap, LabelMaskSequence};
use crate::motion_model::{build_basis, MotionModel, QuadraticParams, SplineBasis, SplineMotionModel, TemporalBasis};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("regions overlap at pixel ({x}, {y}) of frame {t}")]
    Overlap { x: usize, y: usize, t: usize },
    #[error("no region covers pixel ({x}, {y}) of frame {t}")]
    Uncovered { x: usize, y: usize, t: usize },
}

/// Region support in pixel coordinates at the first frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Every pixel no other region claims.
    Rest,
    /// `x0 ≤ x < x1`, `y0 ≤ y < y1`.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Cell of a seeded Voronoi tessellation shared by all Voronoi regions.
    Voronoi,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionSource {
    /// Time-constant quadratic model.
    Quadratic(QuadraticParams),
    /// Spline model drawn at generation time from the scene seed.
    RandomSpline { magnitude: f64, nu: usize, degree: usize },
    Model(MotionModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub shape: Shape,
    /// Shape translation in pixels per frame.
    pub drift: (f64, f64),
    pub motion: MotionSource,
}

impl RegionSpec {
    pub fn new(shape: Shape, motion: MotionSource) -> Self {
        Self { shape, drift: (0.0, 0.0), motion }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Standard deviation of the Gaussian noise added to each flow component.
    pub noise: f64,
    pub seed: u64,
    pub regions: Vec<RegionSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedVolume {
    pub volume: FlowVolume,
    /// Region index of every pixel.
    pub gt: LabelMaskSequence,
    pub true_models: Vec<MotionModel>,
}

fn model_frames(m: &MotionModel) -> usize {
    match m {
        MotionModel::Spline(s) => s.basis().frame_count(),
        MotionModel::PolyTime(p) => p.basis().frame_count(),
    }
}

impl SceneSpec {
    /// Two regions split at `x = split`: the left one moves by `left`, the
    /// right one by `right`.
    pub fn vertical_split(width: usize, height: usize, frames: usize, split: f64, left: (f64, f64), right: (f64, f64)) -> Self {
        SceneSpec {
            width,
            height,
            frames,
            noise: 0.0,
            seed: 0,
            regions: vec![
                RegionSpec::new(Shape::Rest, MotionSource::Quadratic(QuadraticParams::translation(right.0, right.1))),
                RegionSpec::new(
                    Shape::Rect { x0: 0.0, y0: 0.0, x1: split, y1: height as f64 },
                    MotionSource::Quadratic(QuadraticParams::translation(left.0, left.1)),
                ),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be positive".into());
        }
        if self.frames < 2 {
            return bad(format!("frames={} must be at least 2", self.frames));
        }
        if self.regions.is_empty() || self.regions.len() > 256 {
            return bad(format!("{} regions, need 1..=256", self.regions.len()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise={} must be >= 0", self.noise));
        }
        if self.regions.iter().filter(|r| r.shape == Shape::Rest).count() > 1 {
            return bad("at most one rest region".into());
        }
        for (k, r) in self.regions.iter().enumerate() {
            if !(r.drift.0.is_finite() && r.drift.1.is_finite()) {
                return bad(format!("region {k}: drift must be finite"));
            }
            match &r.motion {
                MotionSource::Model(m) if model_frames(m) != self.frames => {
                    return bad(format!("region {k}: model covers {} frames, scene has {}", model_frames(m), self.frames));
                }
                MotionSource::RandomSpline { magnitude, nu, .. } if !(magnitude.is_finite() && *magnitude >= 0.0) || *nu == 0 => {
                    return bad(format!("region {k}: random spline needs magnitude >= 0 and nu >= 1"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Spline model whose `12·L` coefficients are uniform in `[−magnitude, magnitude]`.
pub fn random_spline_model(basis: &SplineBasis, seed: u64, magnitude: f64) -> SplineMotionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let controls = (0..basis.len())
        .map(|_| {
            let mut p = [0.0; 12];
            if magnitude > 0.0 {
                p.iter_mut().for_each(|c| *c = rng.random_range(-magnitude..=magnitude));
            }
            QuadraticParams(p)
        })
        .collect();
    SplineMotionModel::new(basis.clone(), controls).expect("one control per basis function")
}

fn contains(shape: &Shape, x: f64, y: f64) -> bool {
    match *shape {
        Shape::Rect { x0, y0, x1, y1 } => x0 <= x && x < x1 && y0 <= y && y < y1,
        Shape::Ellipse { cx, cy, rx, ry } => ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0,
        Shape::Rest | Shape::Voronoi => false,
    }
}

/// Region of every pixel at every frame.
fn layout(spec: &SceneSpec, voronoi_sites: &[(usize, f64, f64)]) -> Result<Vec<LabelMap>, SynthError> {
    let rest = spec.regions.iter().position(|r| r.shape == Shape::Rest);
    let mut maps = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut data = Vec::with_capacity(spec.width * spec.height);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let mut owner = None;
                for (k, r) in spec.regions.iter().enumerate() {
                    let (px, py) = (x as f64 - r.drift.0 * t as f64, y as f64 - r.drift.1 * t as f64);
                    if contains(&r.shape, px, py) {
                        if owner.is_some() {
                            return Err(SynthError::Overlap { x, y, t });
                        }
                        owner = Some(k);
                    }
                }
                let nearest = voronoi_sites
                    .iter()
                    .map(|&(k, sx, sy)| {
                        let r = &spec.regions[k];
                        let (cx, cy) = (sx + r.drift.0 * t as f64, sy + r.drift.1 * t as f64);
                        (k, (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2))
                    })
                    .fold(None, |best: Option<(usize, f64)>, (k, d)| match best {
                        Some((_, bd)) if bd <= d => best,
                        _ => Some((k, d)),
                    });
                if let Some((k, _)) = nearest {
                    if owner.is_some() {
                        return Err(SynthError::Overlap { x, y, t });
                    }
                    owner = Some(k);
                }
                let owner = owner.or(rest).ok_or(SynthError::Uncovered { x, y, t })?;
                data.push(owner as u8);
            }
        }
        maps.push(LabelMap::new(spec.width, spec.height, data));
    }
    Ok(maps)
}

/// Renders the scene: per-region model flow plus seeded Gaussian noise.
pub fn generate(spec: &SceneSpec) -> Result<GeneratedVolume, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let voronoi_sites: Vec<(usize, f64, f64)> = spec
        .regions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.shape == Shape::Voronoi)
        .map(|(k, _)| (k, rng.random_range(0.0..spec.width as f64), rng.random_range(0.0..spec.height as f64)))
        .collect();
    let labels = layout(spec, &voronoi_sites)?;

    let models: Vec<MotionModel> = spec
        .regions
        .iter()
        .map(|r| match &r.motion {
            MotionSource::Quadratic(p) => SplineMotionModel::constant(build_basis(spec.frames, 3, 3), *p).into(),
            MotionSource::RandomSpline { magnitude, nu, degree } => {
                random_spline_model(&build_basis(spec.frames, *nu, *degree), rng.random(), *magnitude).into()
            }
            MotionSource::Model(m) => m.clone(),
        })
        .collect();

    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("finite noise"));
    let xs: Vec<f64> = (0..spec.width).map(|x| normalize_axis(x as f64, spec.width)).collect();
    let ys: Vec<f64> = (0..spec.height).map(|y| normalize_axis(y as f64, spec.height)).collect();
    let mut frames = Vec::with_capacity(spec.frames);
    for (t, map) in labels.iter().enumerate() {
        let params: Vec<QuadraticParams> = models.iter().map(|m| m.params_at_frame(t)).collect();
        let field = FlowField::from_fn(spec.width, spec.height, |x, y| {
            let (mut u, mut v) = params[map.get(x, y) as usize].eval(xs[x], ys[y]);
            if let Some(n) = &noise {
                u += n.sample(&mut rng);
                v += n.sample(&mut rng);
            }
            (u as f32, v as f32)
        });
        frames.push(field);
    }
    let volume = FlowVolume::new(frames).expect("frames share one size");
    Ok(GeneratedVolume { volume, gt: LabelMaskSequence::from_maps(labels), true_models: models })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scene_is_zero() {
        let spec = SceneSpec {
            width: 5,
            height: 4,
            frames: 3,
            noise: 0.0,
            seed: 1,
            regions: vec![RegionSpec::new(Shape::Rest, MotionSource::Quadratic(QuadraticParams::ZERO))],
        };
        let g = generate(&spec).unwrap();
        assert!(g.volume.frames().iter().all(|f| f.u().iter().chain(f.v()).all(|&c| c == 0.0)));
        assert_eq!(g.gt.labels().into_iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn vertical_split_flows() {
        let spec = SceneSpec::vertical_split(8, 4, 3, 3.0, (5.0, 0.0), (-5.0, 0.0));
        let g = generate(&spec).unwrap();
        for (f, m) in g.volume.frames().iter().zip(g.gt.frames().iter().flatten()) {
            for y in 0..4 {
                for x in 0..8 {
                    let left = x < 3;
                    assert_eq!(m.get(x, y), u8::from(left));
                    assert_eq!(f.get(x, y), if left { (5.0, 0.0) } else { (-5.0, 0.0) });
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut spec = SceneSpec::vertical_split(10, 6, 4, 5.0, (1.0, 2.0), (0.0, -1.0));
        spec.noise = 0.5;
        spec.seed = 9;
        spec.regions.push(RegionSpec::new(
            Shape::Ellipse { cx: 7.0, cy: 3.0, rx: 1.5, ry: 1.5 },
            MotionSource::RandomSpline { magnitude: 1.0, nu: 2, degree: 3 },
        ));
        spec.regions[2].drift = (0.5, 0.0);
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        spec.seed = 10;
        assert_ne!(a.volume, generate(&spec).unwrap().volume);
    }

    #[test]
    fn layout_errors() {
        let mut spec = SceneSpec::vertical_split(6, 6, 2, 3.0, (1.0, 0.0), (0.0, 0.0));
        spec.regions[0].shape = Shape::Rect { x0: 0.0, y0: 0.0, x1: 3.0, y1: 6.0 };
        assert!(matches!(generate(&spec), Err(SynthError::Overlap { .. })));
        spec.regions[0].shape = Shape::Rect { x0: 4.0, y0: 0.0, x1: 6.0, y1: 6.0 };
        assert_eq!(generate(&spec).unwrap_err(), SynthError::Uncovered { x: 3, y: 0, t: 0 });
        // A drifting region leaves a gap behind.
        spec.regions[0].shape = Shape::Rect { x0: 3.0, y0: 0.0, x1: 6.0, y1: 6.0 };
        spec.regions[0].drift = (1.0, 0.0);
        assert!(matches!(generate(&spec), Err(SynthError::Uncovered { t: 1, .. })));
    }

    #[test]
    fn voronoi_partitions() {
        let motion = || MotionSource::Quadratic(QuadraticParams::translation(1.0, 0.0));
        let spec = SceneSpec {
            width: 12,
            height: 9,
            frames: 2,
            noise: 0.0,
            seed: 4,
            regions: (0..3).map(|_| RegionSpec::new(Shape::Voronoi, motion())).collect(),
        };
        let g = generate(&spec).unwrap();
        assert!(g.gt.labels().iter().all(|&l| l < 3));
    }

    #[test]
    fn random_spline_bounds() {
        let basis = build_basis(30, 3, 3);
        assert_eq!(random_spline_model(&basis, 3, 0.0), SplineMotionModel::zero(basis.clone()));
        assert_eq!(random_spline_model(&basis, 3, 2.0), random_spline_model(&basis, 3, 2.0));
        for seed in 0..1000 {
            let m = random_spline_model(&basis, seed, 2.0);
            assert!(m.controls().iter().all(|c| c.0.iter().all(|v| v.abs() <= 2.0)));
        }
    }

    #[test]
    fn spec_text_round_trips() {
        let basis = build_basis(5, 2, 2);
        let mut spec = SceneSpec::vertical_split(16, 8, 5, 7.5, (0.25, -1.0), (3.0, 0.1));
        spec.noise = 0.125;
        spec.seed = 77;
        spec.regions[1].drift = (0.5, 0.0);
        spec.regions[0].shape = Shape::Rest;
        spec.regions.push(RegionSpec::new(
            Shape::Ellipse { cx: 12.0, cy: 4.0, rx: 2.0, ry: 1.5 },
            MotionSource::Model(random_spline_model(&basis, 5, 1.3).into()),
        ));
        spec.regions.push(RegionSpec::new(
            Shape::Rect { x0: 13.0, y0: 0.0, x1: 16.0, y1: 1.0 },
            MotionSource::RandomSpline { magnitude: 2.0, nu: 3, degree: 3 },
        ));
        let text = spec.to_string();
        let back: SceneSpec = text.parse().unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn spec_parse_errors() {
        assert!(matches!("width".parse::<SceneSpec>(), Err(SynthError::Parse { line: 1, .. })));
        assert!(matches!("width=4\nheight=4".parse::<SceneSpec>(), Err(SynthError::Invalid(_))));
        let base = "width=4\nheight=4\nframes=3\n";
        assert!(format!("{base}region.0.shape=blob\nregion.0.motion=translation 1 0").parse::<SceneSpec>().is_err());
        assert!(format!("{base}region.1.shape=rest\nregion.1.motion=translation 1 0").parse::<SceneSpec>().is_err());
        assert!(format!("{base}region.0.shape=rest\nregion.0.motion=translation 1").parse::<SceneSpec>().is_err());
        let ok = format!("# comment\n{base}\nregion.0.shape=rest\nregion.0.motion=translation 1 0\n");
        assert_eq!(ok.parse::<SceneSpec>().unwrap().regions.len(), 1);
    }
}
