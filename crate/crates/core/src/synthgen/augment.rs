use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SynthError;
use crate::flow_io::{normalize_axis, FlowField, FlowVolume};
use crate::motion_model::{SplineMotionModel, TemporalBasis};

/// Adds one spline-driven global flow to every site of every frame.
pub fn add_global_flow(volume: &FlowVolume, model: &SplineMotionModel) -> Result<FlowVolume, SynthError> {
    if model.basis().frame_count() != volume.len() {
        return Err(SynthError::Invalid(format!(
            "global model covers {} frames, volume has {}",
            model.basis().frame_count(),
            volume.len()
        )));
    }
    let (w, h) = (volume.width(), volume.height());
    let xs: Vec<f64> = (0..w).map(|x| normalize_axis(x as f64, w)).collect();
    let ys: Vec<f64> = (0..h).map(|y| normalize_axis(y as f64, h)).collect();
    let frames = volume
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let p = model.params_at_frame(t);
            FlowField::from_fn(w, h, |x, y| {
                let (u, v) = f.get(x, y);
                let (a, b) = p.eval(xs[x], ys[y]);
                ((u as f64 + a) as f32, (v as f64 + b) as f32)
            })
        })
        .collect();
    Ok(FlowVolume::new(frames).expect("same shape as the input"))
}

/// The frames [`corrupt_flows`] perturbs for this seed, ascending.
pub fn corrupted_frame_indices(frames: usize, count: usize, seed: u64) -> Result<Vec<usize>, SynthError> {
    if count >= frames {
        return Err(SynthError::Invalid(format!("cannot corrupt {count} of {frames} frames")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, frames, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Adds Gaussian noise of deviation `sigma` to both components of `count`
/// distinct seeded frames.
pub fn corrupt_flows(volume: &FlowVolume, count: usize, sigma: f64, seed: u64) -> Result<FlowVolume, SynthError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SynthError::Invalid(format!("noise sigma {sigma} must be >= 0")));
    }
    let chosen = corrupted_frame_indices(volume.len(), count, seed)?;
    // Noise stream independent of the frame choice.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let mut out = volume.clone();
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        for &t in &chosen {
            let (u, v) = out.frames_mut()[t].components_mut();
            for c in u.iter_mut().chain(v.iter_mut()) {
                *c = (*c as f64 + noise.sample(&mut rng)) as f32;
            }
        }
    }
    Ok(out)
}

/// Adds `(jump, 0)`, a vector of L1 norm `|jump|`, at `sites` of frame `t` (0-based).
pub fn inject_temporal_discontinuity(volume: &FlowVolume, sites: &[usize], t: usize, jump: f64) -> Result<FlowVolume, SynthError> {
    if t >= volume.len() {
        return Err(SynthError::Invalid(format!("frame {t} out of range for {} frames", volume.len())));
    }
    if let Some(&i) = sites.iter().find(|&&i| i >= volume.sites()) {
        return Err(SynthError::Invalid(format!("site {i} out of range for {} sites", volume.sites())));
    }
    let mut out = volume.clone();
    let (u, _) = out.frames_mut()[t].components_mut();
    for &i in sites {
        u[i] = (u[i] as f64 + jump) as f32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion_model::{build_basis, QuadraticParams};
    use crate::segmenter::occlusion_threshold;

    fn ramp(t: usize) -> FlowVolume {
        FlowVolume::new((0..t).map(|k| FlowField::from_fn(10, 10, |x, y| (x as f32 * 0.1, k as f32 - y as f32 * 0.2))).collect())
            .unwrap()
    }

    #[test]
    fn global_flow_identity_and_translation() {
        let vol = ramp(4);
        let basis = build_basis(4, 3, 3);
        assert_eq!(add_global_flow(&vol, &SplineMotionModel::zero(basis.clone())).unwrap(), vol);
        let shifted = add_global_flow(&vol, &SplineMotionModel::constant(basis, QuadraticParams::translation(2.0, -1.0))).unwrap();
        for (a, b) in vol.frames().iter().zip(shifted.frames()) {
            for (p, q) in a.u().iter().zip(b.u()) {
                assert!((q - p - 2.0).abs() < 1e-5);
            }
            for (p, q) in a.v().iter().zip(b.v()) {
                assert!((q - p + 1.0).abs() < 1e-5);
            }
        }
        assert!(add_global_flow(&vol, &SplineMotionModel::zero(build_basis(5, 3, 3))).is_err());
    }

    #[test]
    fn corruption_touches_chosen_frames() {
        let vol = ramp(9);
        assert_eq!(corrupt_flows(&vol, 0, 5.0, 1).unwrap(), vol);
        let c = corrupt_flows(&vol, 1, 5.0, 1).unwrap();
        let differing: Vec<usize> = (0..9).filter(|&t| c.frame(t) != vol.frame(t)).collect();
        assert_eq!(differing, corrupted_frame_indices(9, 1, 1).unwrap());
        assert_eq!(corrupted_frame_indices(9, 3, 2).unwrap(), corrupted_frame_indices(9, 3, 2).unwrap());
        assert_eq!(corrupted_frame_indices(9, 3, 2).unwrap().len(), 3);
        assert!(corrupt_flows(&vol, 9, 5.0, 1).is_err());
    }

    #[test]
    fn discontinuity_examples() {
        let vol = ramp(3);
        assert_eq!(inject_temporal_discontinuity(&vol, &[], 1, 10.0).unwrap(), vol);
        assert_eq!(inject_temporal_discontinuity(&vol, &[3, 4], 1, 0.0).unwrap(), vol);
        assert!(inject_temporal_discontinuity(&vol, &[100], 1, 1.0).is_err());
        assert!(inject_temporal_discontinuity(&vol, &[1], 3, 1.0).is_err());
        // 1% of the 200 pairs of a 10×10, T=3 volume jump at the last frame.
        let hit = inject_temporal_discontinuity(&vol, &[17, 71], 2, 50.0).unwrap();
        let (_, mask) = occlusion_threshold(&hit, 0.01);
        let flagged: Vec<(usize, usize)> =
            (1..3).flat_map(|t| (0..100).map(move |i| (t, i))).filter(|&(t, i)| mask.is_excluded(t, i)).collect();
        assert_eq!(flagged, vec![(2, 17), (2, 71)]);
    }
}
