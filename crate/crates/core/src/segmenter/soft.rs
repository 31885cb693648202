use crate::labels::LabelMap;

/// Unconstrained scores indexed `(k, t, i)`; a softmax over `k` gives the segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationLogits {
    pub(crate) segments: usize,
    pub(crate) frames: usize,
    pub(crate) sites: usize,
    pub(crate) values: Vec<f64>,
}

/// Per-site, per-frame probabilities over `K` segments, indexed `(k, t, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSegmentation {
    pub(crate) segments: usize,
    pub(crate) frames: usize,
    pub(crate) sites: usize,
    pub(crate) values: Vec<f64>,
}

macro_rules! volume_accessors {
    ($t:ty) => {
        impl $t {
            pub fn segments(&self) -> usize {
                self.segments
            }

            pub fn frames(&self) -> usize {
                self.frames
            }

            pub fn sites(&self) -> usize {
                self.sites
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            #[inline]
            pub fn index(&self, k: usize, t: usize, i: usize) -> usize {
                (k * self.frames + t) * self.sites + i
            }

            #[inline]
            pub fn get(&self, k: usize, t: usize, i: usize) -> f64 {
                self.values[self.index(k, t, i)]
            }

            /// Values of segment `k` at every `(t, i)`, indexed `t · |Ω| + i`.
            pub fn segment(&self, k: usize) -> &[f64] {
                let n = self.frames * self.sites;
                &self.values[k * n..(k + 1) * n]
            }
        }
    };
}

volume_accessors!(SegmentationLogits);
volume_accessors!(SoftSegmentation);

impl SegmentationLogits {
    pub fn new(segments: usize, frames: usize, sites: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), segments * frames * sites, "logit buffer has wrong length");
        assert!(values.iter().all(|v| v.is_finite()), "logits must be finite");
        Self { segments, frames, sites, values }
    }

    pub fn zeros(segments: usize, frames: usize, sites: usize) -> Self {
        Self { segments, frames, sites, values: vec![0.0; segments * frames * sites] }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Softmax over segments at every `(t, i)`.
    pub fn softmax(&self) -> SoftSegmentation {
        let (kk, n) = (self.segments, self.frames * self.sites);
        let mut out = vec![0.0; self.values.len()];
        for j in 0..n {
            let max = (0..kk).map(|k| self.values[k * n + j]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in 0..kk {
                let e = (self.values[k * n + j] - max).exp();
                out[k * n + j] = e;
                z += e;
            }
            for k in 0..kk {
                out[k * n + j] /= z;
            }
        }
        SoftSegmentation { segments: kk, frames: self.frames, sites: self.sites, values: out }
    }
}

impl SoftSegmentation {
    /// Validates that every `(t, i)` column lies on the simplex.
    pub fn new(segments: usize, frames: usize, sites: usize, values: Vec<f64>) -> Result<Self, String> {
        if values.len() != segments * frames * sites {
            return Err("probability buffer has wrong length".into());
        }
        let s = Self { segments, frames, sites, values };
        if let Some(bad) = s.column_sum_error().filter(|&e| e > 1e-6) {
            return Err(format!("columns deviate from 1 by {bad}"));
        }
        if s.values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err("probabilities must lie in [0, 1]".into());
        }
        Ok(s)
    }

    /// One-hot segmentation from per-frame labels.
    pub fn from_labels(segments: usize, labels: &[LabelMap]) -> Self {
        let frames = labels.len();
        let sites = labels.first().map_or(0, |l| l.data().len());
        let mut values = vec![0.0; segments * frames * sites];
        for (t, map) in labels.iter().enumerate() {
            for (i, &l) in map.data().iter().enumerate() {
                values[(l as usize * frames + t) * sites + i] = 1.0;
            }
        }
        Self { segments, frames, sites, values }
    }

    /// Largest `|Σ_k g − 1|` over all columns.
    pub fn column_sum_error(&self) -> Option<f64> {
        let n = self.frames * self.sites;
        (0..n)
            .map(|j| ((0..self.segments).map(|k| self.values[k * n + j]).sum::<f64>() - 1.0).abs())
            .reduce(f64::max)
    }
}

/// Argmax over segments for every frame; ties go to the lowest index.
pub fn hard_labels(soft: &SoftSegmentation, width: usize, height: usize) -> Vec<LabelMap> {
    assert_eq!(width * height, soft.sites, "grid does not match segmentation");
    (0..soft.frames)
        .map(|t| {
            let data = (0..soft.sites)
                .map(|i| {
                    let mut best = 0;
                    for k in 1..soft.segments {
                        if soft.get(k, t, i) > soft.get(best, t, i) {
                            best = k;
                        }
                    }
                    best as u8
                })
                .collect();
            LabelMap::new(width, height, data)
        })
        .collect()
}

/// Label covering the most sites over the whole volume; ties go to the lowest label.
pub fn background_label(labels: &[LabelMap]) -> u8 {
    let mut counts = [0usize; 256];
    for map in labels {
        for &l in map.data() {
            counts[l as usize] += 1;
        }
    }
    let mut best = 0;
    for l in 1..256 {
        if counts[l] > counts[best] {
            best = l;
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_hot_labels_survive() {
        let maps = vec![LabelMap::new(3, 1, vec![0, 2, 1]), LabelMap::new(3, 1, vec![1, 1, 0])];
        let soft = SoftSegmentation::from_labels(3, &maps);
        assert_eq!(hard_labels(&soft, 3, 1), maps);
    }

    #[test]
    fn tie_goes_to_lowest() {
        let soft = SoftSegmentation::new(2, 1, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(hard_labels(&soft, 1, 1)[0].data(), &[0]);
    }

    #[test]
    fn rejects_off_simplex() {
        assert!(SoftSegmentation::new(2, 1, 1, vec![0.5, 0.6]).is_err());
        assert!(SoftSegmentation::new(2, 1, 1, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn background_counts_whole_volume() {
        assert_eq!(background_label(&[LabelMap::filled(2, 2, 1)]), 1);
        let a = LabelMap::new(5, 2, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(background_label(&[a]), 0);
        // Label 1 wins each of the first two frames, label 0 dominates the volume.
        let f1 = LabelMap::new(4, 1, vec![1, 1, 1, 0]);
        let f2 = LabelMap::new(4, 1, vec![1, 1, 1, 0]);
        let f3 = LabelMap::new(4, 1, vec![0, 0, 0, 0]);
        let f4 = LabelMap::new(4, 1, vec![0, 0, 0, 2]);
        let maps = [f1, f2, f3, f4];
        let mut brute = [0; 3];
        for m in &maps {
            for &l in m.data() {
                brute[l as usize] += 1;
            }
        }
        let expect = (0..3).max_by_key(|&l| (brute[l], std::cmp::Reverse(l))).unwrap() as u8;
        assert_eq!(background_label(&maps), expect);
        assert_eq!(expect, 0);
        // Exact tie.
        assert_eq!(background_label(&[LabelMap::new(2, 1, vec![3, 1])]), 1);
    }

    proptest! {
        #[test]
        fn softmax_columns_sum_to_one(vals in proptest::collection::vec(-30.0f64..30.0, 3 * 2 * 5)) {
            let soft = SegmentationLogits::new(3, 2, 5, vals).softmax();
            prop_assert!(soft.column_sum_error().unwrap() <= 1e-12);
            prop_assert!(soft.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn hard_labels_match_brute_force(vals in proptest::collection::vec(0.0f64..1.0, 4 * 3 * 6)) {
            // Not normalized: argmax only needs an ordering.
            let soft = SoftSegmentation { segments: 4, frames: 3, sites: 6, values: vals.clone() };
            let labels = hard_labels(&soft, 3, 2);
            for t in 0..3 {
                for i in 0..6 {
                    let col: Vec<f64> = (0..4).map(|k| vals[(k * 3 + t) * 6 + i]).collect();
                    let max = col.iter().cloned().fold(f64::MIN, f64::max);
                    let first = col.iter().position(|&v| v == max).unwrap();
                    prop_assert_eq!(labels[t].data()[i] as usize, first);
                }
            }
        }
    }
}
