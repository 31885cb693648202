use crate::flow_io::FlowVolume;

/// Sites skipped by the consistency term, one flag per site and frame pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionMask {
    frames: usize,
    sites: usize,
    /// Indexed `(t − 1) · |Ω| + i` for the pair `(t − 1, t)`, `t ≥ 1` 0-based.
    excluded: Vec<bool>,
}

impl OcclusionMask {
    /// Mask that excludes nothing.
    pub fn none(frames: usize, sites: usize) -> Self {
        assert!(frames >= 1);
        Self { frames, sites, excluded: vec![false; (frames - 1) * sites] }
    }

    pub fn from_flags(frames: usize, sites: usize, excluded: Vec<bool>) -> Self {
        assert!(frames >= 1);
        assert_eq!(excluded.len(), (frames - 1) * sites, "mask has wrong length");
        Self { frames, sites, excluded }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn flags(&self) -> &[bool] {
        &self.excluded
    }

    /// Whether site `i` is skipped between frames `t − 1` and `t` (0-based, `t ≥ 1`).
    #[inline]
    pub fn is_excluded(&self, t: usize, i: usize) -> bool {
        self.excluded[(t - 1) * self.sites + i]
    }

    pub fn set(&mut self, t: usize, i: usize, excluded: bool) {
        self.excluded[(t - 1) * self.sites + i] = excluded;
    }

    pub fn count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.excluded.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.excluded.len() as f64
        }
    }
}

/// `‖f(i,t) − f(i,t−1)‖₁` for every pair, indexed like [`OcclusionMask`].
pub fn flow_differences(volume: &FlowVolume) -> Vec<f64> {
    let n = volume.sites();
    let mut out = Vec::with_capacity((volume.len() - 1) * n);
    for pair in volume.frames().windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..n {
            let du = (b.u()[i] as f64 - a.u()[i] as f64).abs();
            let dv = (b.v()[i] as f64 - a.v()[i] as f64).abs();
            out.push(du + dv);
        }
    }
    out
}

/// Nearest-rank `(1 − η)` quantile `λ` of the temporal flow differences and
/// the mask of pairs strictly above it.
///
/// With `n` pairs sorted ascending, `λ` is the element at rank
/// `n − 1 − floor(η·n)`, so at most `floor(η·n)` pairs are excluded.
pub fn occlusion_threshold(volume: &FlowVolume, eta: f64) -> (f64, OcclusionMask) {
    assert!(volume.len() >= 2, "need at least two frames");
    assert!((0.0..1.0).contains(&eta), "eta must be in [0, 1)");
    let diffs = flow_differences(volume);
    let n = diffs.len();
    let mut sorted = diffs.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ((eta * n as f64) + 1e-9).floor() as usize;
    let lambda = sorted[n - 1 - k.min(n - 1)];
    let excluded = diffs.iter().map(|&d| d > lambda).collect();
    (lambda, OcclusionMask::from_flags(volume.len(), volume.sites(), excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_io::FlowField;
    use proptest::prelude::*;

    fn volume(frames: Vec<FlowField>) -> FlowVolume {
        FlowVolume::new(frames).unwrap()
    }

    #[test]
    fn constant_volume_has_empty_mask() {
        let f = FlowField::constant(5, 4, 2.0, -1.0);
        let (lambda, mask) = occlusion_threshold(&volume(vec![f.clone(), f.clone(), f]), 0.01);
        assert_eq!(lambda, 0.0);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn exactly_the_jumps_are_flagged() {
        // 25×20 sites, T = 5: 2000 pairs, 20 of them jump by 100.
        let (w, h, t) = (25, 20, 5);
        let mut frames = vec![FlowField::zeros(w, h); t];
        let jumps: Vec<(usize, usize)> = (0..20).map(|j| (1 + j % 4, (j * 37) % (w * h))).collect();
        for &(tt, i) in &jumps {
            frames[tt].components_mut().0[i] = 100.0;
            // Keep only the entering difference: later frames carry the value on.
            for later in frames.iter_mut().skip(tt + 1) {
                later.components_mut().0[i] = 100.0;
            }
        }
        let vol = volume(frames);
        let (lambda, mask) = occlusion_threshold(&vol, 0.01);
        assert_eq!(lambda, 0.0);
        let expected: std::collections::BTreeSet<_> = jumps.iter().copied().collect();
        let mut flagged = std::collections::BTreeSet::new();
        for tt in 1..t {
            for i in 0..w * h {
                if mask.is_excluded(tt, i) {
                    flagged.insert((tt, i));
                }
            }
        }
        assert_eq!(flagged, expected);
    }

    #[test]
    fn eta_zero_keeps_everything() {
        let a = FlowField::from_fn(3, 3, |x, y| (x as f32, y as f32 * 2.0));
        let b = FlowField::zeros(3, 3);
        let vol = volume(vec![a, b]);
        let (lambda, mask) = occlusion_threshold(&vol, 0.0);
        assert_eq!(lambda, flow_differences(&vol).into_iter().fold(0.0, f64::max));
        assert_eq!(mask.count(), 0);
    }

    proptest! {
        #[test]
        fn excluded_fraction_bounded(
            vals in proptest::collection::vec(0u8..4, 3 * 16),
            eta in 0.0f64..0.5,
        ) {
            // Few distinct values, so ties are common.
            let frames: Vec<FlowField> = vals
                .chunks(16)
                .map(|c| FlowField::new(4, 4, c.iter().map(|&v| v as f32).collect(), vec![0.0; 16]).unwrap())
                .collect();
            let vol = volume(frames);
            let (lambda, mask) = occlusion_threshold(&vol, eta);
            let pairs = 2.0 * 16.0;
            prop_assert!(mask.fraction() <= eta + 1.0 / pairs);
            for (d, &e) in flow_differences(&vol).iter().zip(mask.flags()) {
                prop_assert_eq!(e, *d > lambda);
            }
        }
    }
}
