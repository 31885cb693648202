use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::soft::SegmentationLogits;
use super::{InitStrategy, SegmenterConfig};
use crate::flow_io::FlowVolume;

const LLOYD_ITERATIONS: usize = 25;
const RANDOM_SCALE: f64 = 0.1;
const KMEANS_LOGIT: f64 = 2.0;
const KMEANS_JITTER: f64 = 1e-3;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, &q) in centroids.iter().enumerate().skip(1) {
        if dist2(p, q) < dist2(p, centroids[best]) {
            best = c;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations on the flow vectors of all
/// `(t, i)`. Returns the cluster of every point, indexed `t · |Ω| + i`.
pub fn kmeans_assign(volume: &FlowVolume, k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1);
    let points: Vec<[f64; 2]> = volume
        .frames()
        .iter()
        .flat_map(|f| f.u().iter().zip(f.v()).map(|(&u, &v)| [u as f64, v as f64]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => points[dist.sample(&mut rng)],
            // Every point coincides with a centroid.
            Err(_) => points[rng.random_range(0..points.len())],
        };
        for (d, &p) in d2.iter_mut().zip(&points) {
            *d = d.min(dist2(p, next));
        }
        centroids.push(next);
    }

    let mut assign: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
    for _ in 0..LLOYD_ITERATIONS {
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(&points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for c in 0..k {
            // An empty cluster keeps its centroid.
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

/// Starting logits for the configured strategy, deterministic in `config.seed`.
pub fn initial_logits(volume: &FlowVolume, config: &SegmenterConfig) -> SegmentationLogits {
    let (k, frames, sites) = (config.segments, volume.len(), volume.sites());
    let n = frames * sites;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = vec![0.0; k * n];
    match config.init {
        InitStrategy::Random => {
            let noise = Normal::new(0.0, RANDOM_SCALE).expect("valid scale");
            values.iter_mut().for_each(|v| *v = noise.sample(&mut rng));
        }
        InitStrategy::KMeans => {
            let assign = kmeans_assign(volume, k, rng.random());
            let noise = Normal::new(0.0, KMEANS_JITTER).expect("valid scale");
            values.iter_mut().for_each(|v| *v = noise.sample(&mut rng));
            for (j, &a) in assign.iter().enumerate() {
                values[a * n + j] += KMEANS_LOGIT;
            }
        }
    }
    SegmentationLogits::new(k, frames, sites, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_io::FlowField;

    fn two_motions() -> FlowVolume {
        let f = FlowField::from_fn(8, 6, |x, _| if x < 3 { (5.0, 0.0) } else { (-5.0, 0.0) });
        FlowVolume::new(vec![f; 3]).unwrap()
    }

    #[test]
    fn kmeans_separates_two_translations() {
        let vol = two_motions();
        let assign = kmeans_assign(&vol, 2, 7);
        for t in 0..3 {
            for i in 0..48 {
                let left = i % 8 < 3;
                assert_eq!(assign[t * 48 + i] == assign[0], left, "t={t} i={i}");
            }
        }
    }

    #[test]
    fn kmeans_handles_identical_points() {
        let vol = FlowVolume::new(vec![FlowField::constant(4, 4, 1.0, 1.0); 2]).unwrap();
        let assign = kmeans_assign(&vol, 3, 0);
        assert!(assign.iter().all(|&a| a == assign[0]));
    }

    #[test]
    fn init_is_seeded() {
        let vol = two_motions();
        for init in [InitStrategy::Random, InitStrategy::KMeans] {
            let c = SegmenterConfig { init, seed: 42, ..Default::default() };
            assert_eq!(initial_logits(&vol, &c), initial_logits(&vol, &c));
            let other = SegmenterConfig { seed: 43, ..c };
            assert_ne!(initial_logits(&vol, &c), initial_logits(&vol, &other));
        }
    }
}
