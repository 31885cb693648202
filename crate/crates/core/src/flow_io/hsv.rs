use super::{FlowField, FlowVolume};

/// 8-bit interleaved RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; 3 * width * height] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = 3 * (y * self.width + x);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = 3 * (y * self.width + x);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Places images left to right; heights may differ (shorter ones are padded black).
    pub fn montage(images: &[RgbImage]) -> RgbImage {
        let width = images.iter().map(|i| i.width).sum();
        let height = images.iter().map(|i| i.height).max().unwrap_or(0);
        let mut out = RgbImage::new(width, height);
        let mut x0 = 0;
        for img in images {
            for y in 0..img.height {
                for x in 0..img.width {
                    out.put(x0 + x, y, img.pixel(x, y));
                }
            }
            x0 += img.width;
        }
        out
    }
}

/// Magnitude scale used to map flow to saturation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HsvNormalization {
    /// Each frame is scaled by its own maximum magnitude.
    #[default]
    PerFrame,
    /// All frames share the largest magnitude of the volume.
    PerVolumeMax,
    /// Explicit magnitude that maps to full saturation.
    Fixed(f64),
}

/// `h` in degrees, `s` and `v` in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |ch: f64| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

fn render(field: &FlowField, scale: f64) -> RgbImage {
    let mut img = RgbImage::new(field.width(), field.height());
    for y in 0..field.height() {
        for x in 0..field.width() {
            let (u, v) = field.get(x, y);
            let (u, v) = (u as f64, v as f64);
            let mag = u.hypot(v);
            let sat = if scale > 0.0 { (mag / scale).min(1.0) } else { 0.0 };
            let hue = v.atan2(u).to_degrees();
            img.put(x, y, hsv_to_rgb(hue, sat, 1.0));
        }
    }
    img
}

/// Colour-codes a flow field: hue follows direction, saturation grows with
/// magnitude, zero flow is white. `PerVolumeMax` on a single field behaves
/// like `PerFrame`.
pub fn flow_to_hsv(field: &FlowField, normalization: HsvNormalization) -> RgbImage {
    let scale = match normalization {
        HsvNormalization::Fixed(s) => s,
        _ => field.max_magnitude(),
    };
    render(field, scale)
}

pub fn volume_to_hsv(volume: &FlowVolume, normalization: HsvNormalization) -> Vec<RgbImage> {
    let shared = volume.max_magnitude();
    volume
        .frames()
        .iter()
        .map(|f| match normalization {
            HsvNormalization::PerVolumeMax => render(f, shared),
            other => flow_to_hsv(f, other),
        })
        .collect()
}
