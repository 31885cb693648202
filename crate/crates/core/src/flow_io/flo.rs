use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FlowError, FlowField};

/// Sanity tag at the head of every Middlebury `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_BYTES: usize = 12;

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    let path = path.as_ref();
    let io = |source| FlowError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io)?;
    read_flo_from(BufReader::new(file)).map_err(|e| match e {
        FlowError::Io { source, .. } => io(source),
        other => other,
    })
}

/// Parses a `.flo` stream: magic, int32 width, int32 height, then interleaved
/// little-endian float32 `(u, v)` pairs in row-major order.
pub fn read_flo_from(mut reader: impl Read) -> Result<FlowField, FlowError> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|source| FlowError::Io { path: Default::default(), source })?;
    if bytes.len() < HEADER_BYTES {
        return Err(FlowError::Truncated { expected: HEADER_BYTES, found: bytes.len() });
    }
    let word = |o: usize| [bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(FlowError::BadMagic(magic));
    }
    let width = i32::from_le_bytes(word(4)) as i64;
    let height = i32::from_le_bytes(word(8)) as i64;
    if width <= 0 || height <= 0 {
        return Err(FlowError::BadDimensions { width, height });
    }
    let n = (width * height) as usize;
    let expected = HEADER_BYTES + 8 * n;
    if bytes.len() < expected {
        return Err(FlowError::Truncated { expected, found: bytes.len() });
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let o = HEADER_BYTES + 8 * i;
        u.push(f32::from_le_bytes(word(o)));
        v.push(f32::from_le_bytes(word(o + 4)));
    }
    FlowField::new(width as usize, height as usize, u, v)
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let path = path.as_ref();
    let io = |source| FlowError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write_flo_to(field, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_flo_to(field: &FlowField, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(&FLO_MAGIC.to_le_bytes())?;
    w.write_all(&(field.width() as i32).to_le_bytes())?;
    w.write_all(&(field.height() as i32).to_le_bytes())?;
    for (a, b) in field.u().iter().zip(field.v()) {
        w.write_all(&a.to_le_bytes())?;
        w.write_all(&b.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(field: &FlowField) -> Vec<u8> {
        let mut buf = Vec::new();
        write_flo_to(field, &mut buf).unwrap();
        buf
    }

    #[test]
    fn minimal_zero_file() {
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(1i32.to_le_bytes());
        bytes.extend([0u8; 8]);
        let f = read_flo_from(&bytes[..]).unwrap();
        assert_eq!((f.width(), f.height()), (1, 1));
        assert_eq!(f.get(0, 0), (0.0, 0.0));
    }

    #[test]
    fn zero_2x2_is_header_plus_payload() {
        // 12-byte header + 2·2 pixels · 8 bytes.
        assert_eq!(encode(&FlowField::zeros(2, 2)).len(), 44);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode(&FlowField::zeros(1, 1));
        bytes[..4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(matches!(read_flo_from(&bytes[..]), Err(FlowError::BadMagic(m)) if m == 0.0));
    }

    #[test]
    fn truncated_rejected() {
        let bytes = encode(&FlowField::zeros(3, 2));
        let err = read_flo_from(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, FlowError::Truncated { expected: 60, found: 59 }));
        assert!(matches!(read_flo_from(&bytes[..5]), Err(FlowError::Truncated { .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let mut bytes = encode(&FlowField::zeros(2, 1));
        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_flo_from(&bytes[..]), Err(FlowError::NonFinite { index: 0 })));
    }

    #[test]
    fn file_round_trip_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let field = FlowField::from_fn(5, 3, |x, y| (x as f32 * 0.25 - 1.0, -(y as f32) / 3.0));
        let path = dir.path().join("a.flo");
        write_flo(&field, &path).unwrap();
        assert_eq!(read_flo(&path).unwrap(), field);
        let bad = dir.path().join("missing-dir").join("b.flo");
        assert!(matches!(write_flo(&field, bad), Err(FlowError::Io { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(w in 1usize..6, h in 1usize..6, seed in any::<u32>()) {
            let n = w * h;
            let vals: Vec<f32> = (0..2 * n)
                .map(|i| f32::from_bits((seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 40503)) & 0x7f7f_ffff))
                .collect();
            let field = FlowField::new(w, h, vals[..n].to_vec(), vals[n..].to_vec()).unwrap();
            let back = read_flo_from(&encode(&field)[..]).unwrap();
            let bits = |f: &FlowField| f.u().iter().chain(f.v()).map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&field));
        }
    }
}
