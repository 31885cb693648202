use super::{FlowField, FlowVolume};

/// Source coordinate and interpolation weight for one destination sample,
/// using pixel-center alignment.
fn taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Bilinear resampling to `new_w`×`new_h`. Vectors are rescaled so that they
/// stay expressed in pixels of the new grid.
///
/// Panics if either target dimension is zero.
pub fn resample(field: &FlowField, new_w: usize, new_h: usize) -> FlowField {
    assert!(new_w >= 1 && new_h >= 1, "resample target must be at least 1x1");
    let (w, h) = (field.width(), field.height());
    if (w, h) == (new_w, new_h) {
        return field.clone();
    }
    let sx = new_w as f64 / w as f64;
    let sy = new_h as f64 / h as f64;
    let xs = taps(w, new_w);
    let ys = taps(h, new_h);
    let sample = |plane: &[f32], x: usize, y: usize| -> f64 {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let at = |xx: usize, yy: usize| plane[yy * w + xx] as f64;
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    };
    FlowField::from_fn(new_w, new_h, |x, y| {
        (
            (sample(field.u(), x, y) * sx) as f32,
            (sample(field.v(), x, y) * sy) as f32,
        )
    })
}

pub fn resample_volume(volume: &FlowVolume, new_w: usize, new_h: usize) -> FlowVolume {
    let frames = volume.frames().iter().map(|f| resample(f, new_w, new_h)).collect();
    FlowVolume::new(frames).expect("resampling preserves volume shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_size() {
        let f = FlowField::from_fn(4, 3, |x, y| (x as f32, y as f32 * 2.0));
        assert_eq!(resample(&f, 4, 3), f);
    }

    #[test]
    fn constant_half_size_rescales_vectors() {
        let f = FlowField::constant(8, 6, 4.0, 2.0);
        let r = resample(&f, 4, 3);
        assert_eq!((r.width(), r.height()), (4, 3));
        assert!(r.u().iter().all(|&a| a == 2.0));
        assert!(r.v().iter().all(|&b| b == 1.0));
    }

    #[test]
    fn bilinear_midpoints_of_2x2() {
        // Upsampling 2x2 -> 3x3 by 1.5 puts the centre sample at source (0.5, 0.5).
        let f = FlowField::new(2, 2, vec![0.0, 2.0, 4.0, 6.0], vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let r = resample(&f, 3, 3);
        let (u, v) = r.get(1, 1);
        assert_eq!(u, (3.0 * 1.5) as f32);
        assert_eq!(v, (2.0 * 1.5) as f32);
        // Top edge midpoint averages the two top pixels only.
        let (u, v) = r.get(1, 0);
        assert_eq!((u, v), ((1.0 * 1.5) as f32, (1.0 * 1.5) as f32));
        // Corners clamp to the source corners.
        assert_eq!(r.get(2, 2), ((6.0 * 1.5) as f32, (3.0 * 1.5) as f32));
    }

    #[test]
    #[should_panic]
    fn zero_target_panics() {
        resample(&FlowField::zeros(2, 2), 0, 2);
    }
}
