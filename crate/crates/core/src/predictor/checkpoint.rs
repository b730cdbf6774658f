//! Binary checkpoint: `M3CK`, u32 version, u32 config length, config JSON,
//! u32 tensor count, then per tensor u32 rows, u32 cols and row-major f32
//! values. All integers and floats are little-endian.

use std::path::Path;

use super::{PredictorConfig, PredictorParams};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::numerics::{Matrix, ParamSet};

const MAGIC: &[u8; 4] = b"M3CK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, params: &PredictorParams<f32>) -> Result<()> {
    let config = serde_json::to_vec(&params.config)?;
    let tensors = params.tensors();
    let mut buf = Vec::with_capacity(16 + config.len() + 4 * params.param_count() + 8 * tensors.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<PredictorParams<f32>> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { path, bytes: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let len = r.u32()? as usize;
    let config: PredictorConfig = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::format(path, format!("config: {e}")))?;
    let mut params = PredictorParams::<f32>::zeros(&config)?;
    let count = r.u32()? as usize;
    let expected = params.shapes();
    if count != expected.len() {
        return Err(Error::format(
            path,
            format!("{count} tensors, config implies {}", expected.len()),
        ));
    }
    let names = params.tensor_names();
    for ((t, shape), name) in params.tensors_mut().into_iter().zip(expected).zip(names) {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != shape {
            return Err(Error::format(
                path,
                format!("tensor {name} is {rows}×{cols}, expected {}×{}", shape.0, shape.1),
            ));
        }
        let data = r
            .take(rows * cols * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        *t = Matrix::from_vec(rows, cols, data)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite(format!("checkpoint {}", path.display())));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ck");
        let p = PredictorParams::<f32>::init(&PredictorConfig::tiny(), 3).unwrap();
        write_checkpoint(&path, &p).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), p);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ck");
        let p = PredictorParams::<f32>::init(&PredictorConfig::tiny(), 3).unwrap();
        write_checkpoint(&path, &p).unwrap();
        let good = std::fs::read(&path).unwrap();

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Truncated { .. })));

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Format { .. })));

        let mut bad = good.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(read_checkpoint(&path).unwrap_err().to_string().contains("version 9"));

        let mut extra = good;
        extra.push(0);
        std::fs::write(&path, &extra).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Format { .. })));
    }
}
