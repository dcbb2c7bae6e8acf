//! Big-endian IDX files as used by the MNIST distribution.

use std::path::Path;

use mbd_core::objectives::LabeledDataset;

use crate::error::IdxError;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated { needed: at + 4, found: bytes.len() })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

/// Parses an image file into `(count, rows · cols, pixels / 255)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), IdxError> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let per = rows * cols;
    let needed = 16 + count * per;
    if bytes.len() < needed {
        return Err(IdxError::Truncated { needed, found: bytes.len() });
    }
    let pixels = bytes[16..needed].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((count, per, pixels))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(IdxError::Truncated { needed, found: bytes.len() });
    }
    Ok(bytes[8..needed].to_vec())
}

/// Joins parsed images and labels into a dataset with `n_classes` classes.
pub fn from_bytes(images: &[u8], labels: &[u8], n_classes: usize) -> Result<LabeledDataset, IdxError> {
    let (count, per, pixels) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != count {
        return Err(IdxError::DimMismatch(format!("{count} images but {} labels", labels.len())));
    }
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    LabeledDataset::new(per, n_classes, pixels, labels).map_err(|e| IdxError::DimMismatch(e.to_string()))
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|source| IdxError::Io { path: path.to_path_buf(), source })
}

/// Loads a ten-class image/label pair.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset, IdxError> {
    from_bytes(&read(images_path)?, &read(labels_path)?, 10)
}
