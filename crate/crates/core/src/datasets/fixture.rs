//! Logit-sequence fixtures: `M3LG`, u32 version, u32 L, u32 D, then L·D
//! row-major f32 values, all little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::numerics::Matrix;

const MAGIC: &[u8; 4] = b"M3LG";
pub const FIXTURE_VERSION: u32 = 1;
const HEADER: usize = 16;

pub fn encode_fixture(seq: &Matrix<f32>) -> Result<Vec<u8>> {
    if seq.rows() == 0 || seq.cols() == 0 {
        return Err(Error::Empty("logit sequence"));
    }
    if !seq.is_finite() {
        return Err(Error::NonFinite("logit sequence".into()));
    }
    let mut buf = Vec::with_capacity(HEADER + 4 * seq.len());
    buf.extend_from_slice(MAGIC);
    for v in [FIXTURE_VERSION, seq.rows() as u32, seq.cols() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in seq.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn write_fixture(path: &Path, seq: &Matrix<f32>) -> Result<()> {
    write_atomic(path, &encode_fixture(seq)?)
}

pub fn decode_fixture(path: &Path, bytes: &[u8]) -> Result<Matrix<f32>> {
    if bytes.len() < HEADER {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected M3LG"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let (version, len, width) = (word(1), word(2) as usize, word(3) as usize);
    if version != FIXTURE_VERSION {
        return Err(Error::format(path, format!("unsupported fixture version {version}")));
    }
    if len == 0 || width == 0 {
        return Err(Error::format(path, format!("header declares {len}×{width}")));
    }
    let expected = HEADER + 4 * len * width;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::format(
            path,
            format!("header declares {len}×{width} ({expected} bytes) but file has {}", bytes.len()),
        ));
    }
    let data = bytes[HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Matrix::from_vec(len, width, data)?
        .ensure_finite(&format!("fixture {}", path.display()))
}

pub fn read_fixture(path: &Path) -> Result<Matrix<f32>> {
    decode_fixture(path, &std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::numerics::{init_params, InitScheme};

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.m3lg");
        let m: Matrix<f32> = init_params(7, 5, InitScheme::Uniform { bound: 30.0 }, 1).unwrap();
        write_fixture(&path, &m).unwrap();
        assert_eq!(read_fixture(&path).unwrap(), m);
    }

    #[test]
    fn malformed_inputs() {
        let p = Path::new("f.m3lg");
        let good = encode_fixture(&Matrix::filled(3, 4, 1.5f32)).unwrap();

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_fixture(p, &bad), Err(Error::Format { .. })));

        match decode_fixture(p, &good[..good.len() - 8]) {
            Err(Error::Truncated { expected, actual, .. }) => {
                assert_eq!((expected, actual), (16 + 48, 16 + 40));
            }
            other => panic!("{other:?}"),
        }

        let mut long = good.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(decode_fixture(p, &long), Err(Error::Format { .. })));

        assert!(matches!(decode_fixture(p, b"M3LG"), Err(Error::Truncated { .. })));
        assert!(encode_fixture(&Matrix::filled(1, 1, f32::NAN)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn lossless_for_random_shapes(len in 1usize..=512, width in 1usize..=1024, seed in any::<u64>()) {
            let m: Matrix<f32> = init_params(len, width, InitScheme::Uniform { bound: 1e3 }, seed).unwrap();
            let bytes = encode_fixture(&m).unwrap();
            let back = decode_fixture(Path::new("mem"), &bytes).unwrap();
            prop_assert!(back.as_slice().iter().zip(m.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
