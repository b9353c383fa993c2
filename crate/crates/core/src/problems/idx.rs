//! Reader for the IDX binary format used by the MNIST distribution.
//!
//! A file starts with a big-endian magic number whose low byte is the number
//! of dimensions and whose third byte is the element type (`0x08` = unsigned
//! byte), followed by one big-endian `u32` per dimension and the raw payload.

use std::path::Path;

use crate::{Error, Matrix, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// One row per sample, pixels scaled to `[0, 1]`.
    Images {
        samples: Matrix,
        rows: usize,
        cols: usize,
    },
    Labels(Vec<u8>),
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| Error::Parse(format!("idx header truncated at byte {at}")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32(bytes, 0)?;
    let ndims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => return Err(Error::Parse(format!("bad idx magic {other:#010x}"))),
    };
    let dims = (0..ndims)
        .map(|d| read_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let offset = 4 + 4 * ndims;
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parse("idx dimensions overflow".into()))?;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(Error::Parse(format!(
            "idx payload truncated: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Parse(format!(
            "idx dimension mismatch: {} trailing bytes",
            payload.len() - expected
        )));
    }
    if ndims == 1 {
        return Ok(IdxData::Labels(payload.to_vec()));
    }
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let samples = Matrix::from_row_iterator(
        count,
        rows * cols,
        payload.iter().map(|&b| b as f64 / 255.0),
    );
    Ok(IdxData::Images {
        samples,
        rows,
        cols,
    })
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    let bytes = std::fs::read(path.as_ref())?;
    parse_idx(&bytes)
}

/// Serializes images (values in `[0, 1]`, rounded to bytes) in IDX form.
pub fn encode_images(samples: &Matrix, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + samples.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [samples.nrows(), rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for row in samples.row_iter() {
        out.extend(
            row.iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images() {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        bytes.extend([0, 255, 51, 102, 1, 2, 3, 4]);
        let IdxData::Images {
            samples,
            rows,
            cols,
        } = parse_idx(&bytes).unwrap()
        else {
            panic!("expected images");
        };
        assert_eq!((samples.nrows(), samples.ncols(), rows, cols), (2, 4, 2, 2));
        assert_eq!(samples[(0, 1)], 1.0);
        assert!((samples[(0, 2)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn labels() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 1];
        assert_eq!(parse_idx(&bytes).unwrap(), IdxData::Labels(vec![7, 2, 1]));
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            parse_idx(&[0, 0, 8, 1, 0, 0, 0, 3, 7]),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 8, 1, 0, 0, 0, 1, 7, 7]),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 9, 9, 0, 0]),
            Err(Error::Parse(_))
        ));
        assert!(matches!(parse_idx(&[0, 0, 8]), Err(Error::Parse(_))));
        assert!(matches!(
            parse_idx(&[0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0, 0, 0, 2]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn round_trip() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.2, 0.4]);
        let IdxData::Images { samples, .. } = parse_idx(&encode_images(&m, 1, 2)).unwrap() else {
            panic!()
        };
        assert!((samples - m).amax() < 0.5 / 255.0);
        assert_eq!(
            parse_idx(&encode_labels(&[3, 4])).unwrap(),
            IdxData::Labels(vec![3, 4])
        );
    }
}
