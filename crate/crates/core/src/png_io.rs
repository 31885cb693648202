//! PNG encoding of label maps (8-bit indexed) and RGB visualizations.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::flow_io::RgbImage;
use crate::labels::LabelMap;

#[derive(Debug, Error)]
pub enum PngError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: unsupported PNG layout {color:?}/{depth:?} for a label map")]
    Unsupported { path: PathBuf, color: png::ColorType, depth: png::BitDepth },
}

/// Colour for label `i`: the bit-interleaved palette used by common VOS benchmarks.
pub fn label_color(i: u8) -> [u8; 3] {
    let mut c = i;
    let mut rgb = [0u8; 3];
    for j in 0..8 {
        for (ch, out) in rgb.iter_mut().enumerate() {
            *out |= ((c >> ch) & 1) << (7 - j);
        }
        c >>= 3;
    }
    rgb
}

pub fn palette() -> Vec<u8> {
    (0..=255u8).flat_map(label_color).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, PngError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| PngError::Io { path: path.to_path_buf(), source })
}

fn encode_err(path: &Path, e: impl std::fmt::Display) -> PngError {
    PngError::Decode { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes labels as an 8-bit palette PNG; pixel indices are the labels.
pub fn write_label_png(map: &LabelMap, path: impl AsRef<Path>) -> Result<(), PngError> {
    let path = path.as_ref();
    let mut enc = png::Encoder::new(create(path)?, map.width() as u32, map.height() as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette());
    let mut w = enc.write_header().map_err(|e| encode_err(path, e))?;
    w.write_image_data(map.data()).map_err(|e| encode_err(path, e))?;
    w.finish().map_err(|e| encode_err(path, e))
}

pub fn write_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), PngError> {
    let path = path.as_ref();
    let mut enc = png::Encoder::new(create(path)?, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| encode_err(path, e))?;
    w.write_image_data(&img.data).map_err(|e| encode_err(path, e))?;
    w.finish().map_err(|e| encode_err(path, e))
}

/// Reads a label map from an indexed or grayscale PNG. Indices (or gray
/// levels) are returned as labels, without palette expansion.
pub fn read_label_png(path: impl AsRef<Path>) -> Result<LabelMap, PngError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PngError::Io { path: path.to_path_buf(), source })?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| encode_err(path, e))?;
    let size = reader.output_buffer_size().ok_or_else(|| encode_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| encode_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let bits = match (info.color_type, info.bit_depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::One) => 1,
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Two) => 2,
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Four) => 4,
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => 8,
        (color, depth) => return Err(PngError::Unsupported { path: path.to_path_buf(), color, depth }),
    };
    let line = info.line_size;
    let per_byte = 8 / bits;
    let mask = ((1u16 << bits) - 1) as u8;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &buf[y * line..(y + 1) * line];
        for x in 0..w {
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            data.push((byte >> shift) & mask);
        }
    }
    Ok(LabelMap::new(w, h, data))
}

/// Colours a label map with the fixed palette.
pub fn colorize(map: &LabelMap) -> RgbImage {
    let mut img = RgbImage::new(map.width(), map.height());
    for y in 0..map.height() {
        for x in 0..map.width() {
            img.put(x, y, label_color(map.get(x, y)));
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_starts_like_voc() {
        assert_eq!(label_color(0), [0, 0, 0]);
        assert_eq!(label_color(1), [128, 0, 0]);
        assert_eq!(label_color(2), [0, 128, 0]);
        assert_eq!(label_color(3), [128, 128, 0]);
        assert_eq!(palette().len(), 768);
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::from_fn(7, 5, |x, y| ((x * 3 + y) % 5) as u8);
        let path = dir.path().join("l.png");
        write_label_png(&map, &path).unwrap();
        assert_eq!(read_label_png(&path).unwrap(), map);
    }

    #[test]
    fn grayscale_binary_png_is_read_as_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let mut enc = png::Encoder::new(File::create(&path).unwrap(), 3, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0b1010_0000]).unwrap();
        w.finish().unwrap();
        assert_eq!(read_label_png(&path).unwrap().data(), &[1, 0, 1]);
    }

    #[test]
    fn rgb_png_rejected_as_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        write_rgb_png(&RgbImage::new(2, 2), &path).unwrap();
        assert!(matches!(read_label_png(&path), Err(PngError::Unsupported { .. })));
    }
}
