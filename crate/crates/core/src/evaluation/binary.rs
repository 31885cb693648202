use super::EvalError;

/// Intersection over union; two empty masks score 1.
pub fn jaccard(pred: &[bool], gt: &[bool]) -> Result<f64, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::Dimensions(format!("masks of {} and {} pixels", pred.len(), gt.len())));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Default boundary tolerance: 0.8% of the image diagonal, rounded up.
pub fn default_tolerance(width: usize, height: usize) -> f64 {
    (0.008 * ((width * width + height * height) as f64).sqrt()).ceil()
}

/// Mask pixels with a 4-neighbour (inside the image) outside the mask.
pub fn boundary(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let at = |x: usize, y: usize| mask[y * width + x];
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            if !at(x, y) {
                continue;
            }
            out[y * width + x] = (x > 0 && !at(x - 1, y))
                || (x + 1 < width && !at(x + 1, y))
                || (y > 0 && !at(x, y - 1))
                || (y + 1 < height && !at(x, y + 1));
        }
    }
    out
}

/// Fraction of `from` pixels with some `to` pixel within Euclidean distance `tol`.
fn matched_fraction(from: &[bool], to: &[bool], width: usize, height: usize, tol: f64) -> (usize, usize) {
    let r = tol.floor() as isize;
    let tol2 = tol * tol;
    let mut hits = 0;
    let mut total = 0;
    for y in 0..height as isize {
        for x in 0..width as isize {
            if !from[(y as usize) * width + x as usize] {
                continue;
            }
            total += 1;
            'search: for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    if ((dx * dx + dy * dy) as f64) <= tol2 && to[ny as usize * width + nx as usize] {
                        hits += 1;
                        break 'search;
                    }
                }
            }
        }
    }
    (hits, total)
}

/// Boundary F-measure within distance `tol` (pixels).
pub fn boundary_f(pred: &[bool], gt: &[bool], width: usize, height: usize, tol: f64) -> Result<f64, EvalError> {
    if pred.len() != width * height || gt.len() != width * height {
        return Err(EvalError::Dimensions(format!("masks do not match a {width}x{height} grid")));
    }
    let bp = boundary(pred, width, height);
    let bg = boundary(gt, width, height);
    let (p_hits, p_total) = matched_fraction(&bp, &bg, width, height, tol);
    let (r_hits, r_total) = matched_fraction(&bg, &bp, width, height, tol);
    if p_total == 0 && r_total == 0 {
        return Ok(1.0);
    }
    if p_total == 0 || r_total == 0 {
        return Ok(0.0);
    }
    let p = p_hits as f64 / p_total as f64;
    let r = r_hits as f64 / r_total as f64;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Per-frame scores with their DAVIS-style summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_frame: Vec<f64>,
    pub mean: f64,
    /// Fraction of frames scoring strictly above 0.5.
    pub recall: f64,
    /// Mean of the first quarter of frames minus mean of the last quarter,
    /// quarters of `ceil(n / 4)` frames by index.
    pub decay: f64,
}

pub fn davis_aggregate(per_frame: &[f64]) -> Result<MetricReport, EvalError> {
    let n = per_frame.len();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let mean_of = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let q = n.div_ceil(4);
    Ok(MetricReport {
        per_frame: per_frame.to_vec(),
        mean: mean_of(per_frame),
        recall: per_frame.iter().filter(|&&s| s > 0.5).count() as f64 / n as f64,
        decay: mean_of(&per_frame[..q]) - mean_of(&per_frame[n - q..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Vec<bool> {
        (0..w * h).map(|i| (x0..x1).contains(&(i % w)) && (y0..y1).contains(&(i / w))).collect()
    }

    #[test]
    fn jaccard_examples() {
        let a = rect(10, 10, 2, 2, 6, 6);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &rect(10, 10, 7, 7, 9, 9)).unwrap(), 0.0);
        assert_eq!(jaccard(&[false; 4], &[false; 4]).unwrap(), 1.0);
        // 50 + 50 pixels sharing 25: union 75.
        let p = rect(10, 10, 0, 0, 10, 5);
        let g = rect(10, 10, 0, 0, 5, 10);
        assert!((jaccard(&p, &g).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(jaccard(&[true], &[true, false]).is_err());
    }

    #[test]
    fn boundary_examples() {
        let (w, h) = (20, 20);
        let sq = rect(w, h, 5, 5, 12, 12);
        assert_eq!(boundary_f(&sq, &sq, w, h, 1.0).unwrap(), 1.0);
        let dilated = rect(w, h, 4, 4, 13, 13);
        assert_eq!(boundary_f(&dilated, &sq, w, h, 2.0).unwrap(), 1.0);
        let far = rect(w, h, 14, 14, 19, 19);
        assert_eq!(boundary_f(&far, &rect(w, h, 0, 0, 4, 4), w, h, 2.0).unwrap(), 0.0);
        let empty = vec![false; w * h];
        assert_eq!(boundary_f(&empty, &empty, w, h, 2.0).unwrap(), 1.0);
        assert_eq!(boundary_f(&sq, &empty, w, h, 2.0).unwrap(), 0.0);
        assert_eq!(default_tolerance(224, 128), 3.0);
        assert_eq!(default_tolerance(64, 64), 1.0);
    }

    #[test]
    fn aggregate_examples() {
        let r = davis_aggregate(&[0.8; 6]).unwrap();
        assert!((r.mean - 0.8).abs() < 1e-15);
        assert_eq!((r.recall, r.decay), (1.0, 0.0));
        let falling: Vec<f64> = (0..8).map(|i| 1.0 - i as f64 / 7.0).collect();
        let r = davis_aggregate(&falling).unwrap();
        assert!((r.decay - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(davis_aggregate(&[0.5; 3]).unwrap().recall, 0.0);
        assert_eq!(davis_aggregate(&[]), Err(EvalError::Empty));
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_bounded(a in proptest::collection::vec(any::<bool>(), 30), b in proptest::collection::vec(any::<bool>(), 30)) {
            let j = jaccard(&a, &b).unwrap();
            prop_assert_eq!(j, jaccard(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&j));
            if a.iter().any(|&x| x) {
                prop_assert_eq!(j == 1.0, a == b);
            }
        }

        #[test]
        fn boundary_f_bounded(a in proptest::collection::vec(any::<bool>(), 36), b in proptest::collection::vec(any::<bool>(), 36)) {
            let f = boundary_f(&a, &b, 6, 6, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
