use crate::flow_io::normalize_axis;

/// Per-frame weights of a set of temporal control functions.
pub trait TemporalBasis {
    /// Number of control parameter sets.
    fn control_count(&self) -> usize;
    /// Number of frames `T` the cache covers.
    fn frame_count(&self) -> usize;
    /// Weights of every control at 0-based frame `t`.
    fn frame_weights(&self, t: usize) -> &[f64];
}

/// `L = 2 + floor((T - 2) / ν)`: one control at each end of the volume, the
/// rest spaced every `ν` frames.
pub fn control_point_count(frames: usize, nu: usize) -> usize {
    assert!(frames >= 2, "a volume needs at least two frames");
    assert!(nu >= 1, "frequency factor must be positive");
    2 + (frames - 2) / nu
}

/// Clamped B-spline basis over normalized time `[-1, 1]` with cached weights
/// for every frame of a `T`-frame volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    knots: Vec<f64>,
    frames: usize,
    weights: Vec<Vec<f64>>,
}

/// Builds the basis for a `frames`-long volume. The effective degree is
/// `min(degree_request, L - 1)`; interior knots are uniform.
pub fn build_basis(frames: usize, nu: usize, degree_request: usize) -> SplineBasis {
    let count = control_point_count(frames, nu);
    SplineBasis::uniform(frames, count, degree_request)
}

impl SplineBasis {
    /// Clamped uniform basis with `count ≥ 2` controls.
    pub fn uniform(frames: usize, count: usize, degree_request: usize) -> Self {
        assert!(count >= 2 && frames >= 1);
        let degree = degree_request.min(count - 1);
        let spans = count - degree;
        let mut knots = vec![-1.0; degree + 1];
        knots.extend((1..spans).map(|j| -1.0 + 2.0 * j as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::from_knots(frames, degree, knots)
    }

    /// Basis from an explicit clamped knot vector of length `L + degree + 1`.
    pub fn from_knots(frames: usize, degree: usize, knots: Vec<f64>) -> Self {
        assert!(knots.len() >= 2 * (degree + 1), "knot vector too short");
        let mut basis = Self { degree, knots, frames, weights: Vec::new() };
        basis.weights = (0..frames).map(|t| basis.weights_at(normalize_axis(t as f64, frames))).collect();
        basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Knot span containing `t`, closed on the right at the last span.
    fn span(&self, t: f64) -> usize {
        let n = self.len();
        if t >= self.knots[n] {
            return n - 1;
        }
        let p = self.degree;
        let mut s = p;
        while s + 1 < n && self.knots[s + 1] <= t {
            s += 1;
        }
        s
    }

    /// Weights of all `L` basis functions at normalized time `t`
    /// (triangular Cox–de Boor evaluation of the non-zero functions).
    pub fn weights_at(&self, t: f64) -> Vec<f64> {
        let end = *self.knots.last().unwrap();
        let t = t.clamp(self.knots[0], end);
        // Clamped ends interpolate their control exactly.
        if t == end || t == self.knots[0] {
            let mut out = vec![0.0; self.len()];
            out[if t == end { self.len() - 1 } else { 0 }] = 1.0;
            return out;
        }
        let p = self.degree;
        let s = self.span(t);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knots[s + 1 - j];
            right[j] = self.knots[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; self.len()];
        out[s - p..=s].copy_from_slice(&n);
        out
    }
}

impl TemporalBasis for SplineBasis {
    fn control_count(&self) -> usize {
        self.len()
    }

    fn frame_count(&self) -> usize {
        self.frames
    }

    fn frame_weights(&self, t: usize) -> &[f64] {
        &self.weights[t]
    }
}

/// Textbook recursive Cox–de Boor definition, `0/0 := 0`, with the last
/// function closed at the right end of the domain.
pub fn cox_de_boor_weights(knots: &[f64], degree: usize, t: f64) -> Vec<f64> {
    fn rec(knots: &[f64], i: usize, p: usize, t: f64, last: usize) -> f64 {
        if p == 0 {
            let (a, b) = (knots[i], knots[i + 1]);
            let end = *knots.last().unwrap();
            return if (a <= t && t < b) || (t == end && i == last && a < b) { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * rec(knots, i, p - 1, t, last);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - t) / d2 * rec(knots, i + 1, p - 1, t, last);
        }
        v
    }
    let count = knots.len() - degree - 1;
    // Index of the last non-empty degree-0 interval.
    let last = (0..knots.len() - 1).rev().find(|&i| knots[i] < knots[i + 1]).unwrap_or(0);
    (0..count).map(|i| rec(knots, i, degree, t, last)).collect()
}

/// Monomials `1, t′, …, t′^degree` of normalized time, cached per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTimeBasis {
    degree: usize,
    frames: usize,
    weights: Vec<Vec<f64>>,
}

impl PolyTimeBasis {
    pub fn new(frames: usize, degree: usize) -> Self {
        let weights = (0..frames).map(|t| Self::powers(normalize_axis(t as f64, frames), degree)).collect();
        Self { degree, frames, weights }
    }

    pub fn powers(t: f64, degree: usize) -> Vec<f64> {
        std::iter::successors(Some(1.0), |p| Some(p * t)).take(degree + 1).collect()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl TemporalBasis for PolyTimeBasis {
    fn control_count(&self) -> usize {
        self.degree + 1
    }

    fn frame_count(&self) -> usize {
        self.frames
    }

    fn frame_weights(&self, t: usize) -> &[f64] {
        &self.weights[t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_counts() {
        assert_eq!(control_point_count(9, 3), 4);
        assert_eq!(control_point_count(2, 1), 2);
        assert_eq!(control_point_count(2, 7), 2);
        assert_eq!(control_point_count(120, 3), 41);
    }

    #[test]
    fn two_frames_is_linear() {
        let b = build_basis(2, 3, 3);
        assert_eq!((b.len(), b.degree()), (2, 1));
        assert_eq!(b.frame_weights(0), &[1.0, 0.0]);
        assert_eq!(b.frame_weights(1), &[0.0, 1.0]);
        let mid = b.weights_at(0.0);
        assert!((mid[0] - 0.5).abs() < 1e-15 && (mid[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nine_frames_cubic_is_bezier() {
        let b = build_basis(9, 3, 3);
        assert_eq!((b.len(), b.degree()), (4, 3));
        assert_eq!(b.knots(), &[-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(b.frame_weights(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.frame_weights(8), &[0.0, 0.0, 0.0, 1.0]);
        // Frame 5 sits at t′ = 0, i.e. Bernstein parameter 1/2.
        let w = b.frame_weights(4);
        for (a, e) in w.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_recursive_definition() {
        for &(frames, nu, deg) in &[(9, 3, 3), (30, 3, 3), (17, 2, 2), (50, 4, 3), (12, 1, 5)] {
            let b = build_basis(frames, nu, deg);
            for k in 0..=200 {
                let t = -1.0 + 2.0 * k as f64 / 200.0;
                let fast = b.weights_at(t);
                let slow = cox_de_boor_weights(b.knots(), b.degree(), t);
                for (a, e) in fast.iter().zip(&slow) {
                    assert!((a - e).abs() < 1e-12, "T={frames} t={t}: {fast:?} vs {slow:?}");
                }
            }
        }
    }

    #[test]
    fn clamped_ends_have_single_unit_weight() {
        for l in 2..=41 {
            let b = SplineBasis::uniform(l * 3, l, 3);
            let first = b.weights_at(-1.0);
            let last = b.weights_at(1.0);
            assert_eq!(first.iter().filter(|&&w| w == 1.0).count(), 1);
            assert_eq!(first[0], 1.0);
            assert_eq!(last[l - 1], 1.0);
            assert_eq!(last.iter().filter(|&&w| w == 1.0).count(), 1);
        }
    }

    #[test]
    fn poly_time_powers() {
        let b = PolyTimeBasis::new(5, 2);
        assert_eq!(b.frame_weights(0), &[1.0, -1.0, 1.0]);
        assert_eq!(b.frame_weights(3), &[1.0, 0.5, 0.25]);
    }

    proptest::proptest! {
        #[test]
        fn partition_of_unity(l in 2usize..42, deg in 0usize..6, t in -1.0f64..=1.0) {
            let b = SplineBasis::uniform(2 * l, l, deg);
            let w = b.weights_at(t);
            proptest::prop_assert!(w.iter().all(|&x| x >= 0.0));
            proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
