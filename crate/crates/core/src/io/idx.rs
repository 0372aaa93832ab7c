//! IDX tensors (the MNIST container): `0x00 0x00 <type> <rank>`, then `rank`
//! big-endian `u32` sizes, then the row-major payload. Only unsigned bytes
//! (type `0x08`) are supported.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problems::ClassificationInstance;

pub const IDX_UBYTE: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

fn err(offset: usize, msg: impl Into<String>) -> Error {
    Error::ParseAtOffset {
        context: "idx",
        offset,
        msg: msg.into(),
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "truncated magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(err(0, format!("bad magic prefix {:02x}{:02x}", bytes[0], bytes[1])));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(err(2, format!("unsupported element type 0x{:02x}", bytes[2])));
    }
    let rank = bytes[3] as usize;
    if rank == 0 {
        return Err(err(3, "rank must be >= 1"));
    }
    let header = 4 + 4 * rank;
    let mut dims = Vec::with_capacity(rank);
    for i in 0..rank {
        let at = 4 + 4 * i;
        let Some(chunk) = bytes.get(at..at + 4) else {
            return Err(err(bytes.len(), format!("truncated size of dimension {i}")));
        };
        dims.push(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| err(4, "element count overflows"))?;
    let available = bytes.len() - header;
    if available < count {
        return Err(err(bytes.len(), format!("truncated payload: expected {count} bytes, found {available}")));
    }
    if available > count {
        return Err(err(header + count, format!("{} trailing bytes", available - count)));
    }
    Ok(IdxTensor {
        dims,
        payload: bytes[header..].to_vec(),
    })
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes)
}

pub fn encode_idx(t: &IdxTensor) -> Result<Vec<u8>> {
    if t.dims.is_empty() || t.dims.len() > u8::MAX as usize {
        return Err(Error::Input(format!("rank {} not representable", t.dims.len())));
    }
    let count: usize = t.dims.iter().product();
    if count != t.payload.len() {
        return Err(Error::Dimension {
            expected: count,
            got: t.payload.len(),
        });
    }
    let mut out = vec![0, 0, IDX_UBYTE, t.dims.len() as u8];
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| Error::Input(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&t.payload);
    Ok(out)
}

/// Flattens each image into a row scaled to `[0, 1]` and attaches labels.
/// The class count is `max label + 1` (at least 2).
pub fn to_features(images: &IdxTensor, labels: &IdxTensor) -> Result<ClassificationInstance> {
    if images.dims.len() < 2 {
        return Err(Error::Input(format!("images need rank >= 2, got {}", images.dims.len())));
    }
    if labels.dims.len() != 1 {
        return Err(Error::Input(format!("labels need rank 1, got {}", labels.dims.len())));
    }
    let n = images.dims[0];
    if labels.dims[0] != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.dims[0],
        });
    }
    let d: usize = images.dims[1..].iter().product();
    let x = DMatrix::from_row_iterator(n, d, images.payload.iter().map(|&p| p as f64 / 255.0));
    let y: Vec<usize> = labels.payload.iter().map(|&l| l as usize).collect();
    let classes = y.iter().copied().max().map_or(2, |m| (m + 1).max(2));
    Ok(ClassificationInstance {
        x,
        labels: y,
        classes,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(dims: Vec<usize>) -> IdxTensor {
        let count = dims.iter().product::<usize>();
        IdxTensor {
            dims,
            payload: (0..count).map(|i| (i * 37 % 256) as u8).collect(),
        }
    }

    #[test]
    fn round_trip() {
        for dims in [vec![5], vec![3, 4, 2], vec![0, 28, 28]] {
            let t = tensor(dims);
            assert_eq!(parse_idx(&encode_idx(&t).unwrap()).unwrap(), t);
        }
    }

    #[test]
    fn image_header_layout() {
        let bytes = encode_idx(&tensor(vec![2, 28, 28])).unwrap();
        assert_eq!(&bytes[..4], &[0, 0, 0x08, 3]);
        assert_eq!(&bytes[4..8], &[0, 0, 0, 2]);
        assert_eq!(&bytes[8..12], &[0, 0, 0, 28]);
    }

    #[test]
    fn errors_name_offsets() {
        let bytes = encode_idx(&tensor(vec![2, 3])).unwrap();
        let truncated = &bytes[..bytes.len() - 1];
        match parse_idx(truncated) {
            Err(Error::ParseAtOffset { offset, .. }) => assert_eq!(offset, truncated.len()),
            other => panic!("{other:?}"),
        }
        let mut bad_type = bytes.clone();
        bad_type[2] = 0x0d;
        assert!(matches!(parse_idx(&bad_type), Err(Error::ParseAtOffset { offset: 2, .. })));
        let mut bad_magic = bytes.clone();
        bad_magic[0] = 1;
        assert!(matches!(parse_idx(&bad_magic), Err(Error::ParseAtOffset { offset: 0, .. })));
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(parse_idx(&trailing).is_err());
        assert!(parse_idx(&[0, 0, 8]).is_err());
        assert!(parse_idx(&[0, 0, 8, 2, 0, 0]).is_err());
    }

    #[test]
    fn features_scaled_and_flattened() {
        let images = IdxTensor {
            dims: vec![2, 28, 28],
            payload: [vec![255u8; 784], vec![0u8; 784]].concat(),
        };
        let labels = IdxTensor {
            dims: vec![2],
            payload: vec![3, 7],
        };
        let inst = to_features(&images, &labels).unwrap();
        assert_eq!(inst.x.shape(), (2, 784));
        assert_eq!(inst.x[(0, 0)], 1.0);
        assert_eq!(inst.x[(1, 783)], 0.0);
        assert_eq!(inst.classes, 8);
        let short = IdxTensor {
            dims: vec![1],
            payload: vec![0],
        };
        assert!(to_features(&images, &short).is_err());
    }
}
