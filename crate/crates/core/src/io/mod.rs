//! On-disk formats: feature maps as NPY `(H, W, D)` float32, masks as PGM P5
//! or NPY `(H, W)` uint8.

pub mod npy;
pub mod pgm;

use std::path::Path;

use crate::error::{Error, Result};
use crate::feature::{BinaryMask, FeatureMap};
use npy::{Dtype, NpyArray};

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let array = npy::decode(bytes)?;
    if array.dtype != Dtype::F32 {
        return Err(Error::Format("feature map must be float32 ('<f4')".into()));
    }
    let [h, w, d] = array.shape[..] else {
        return Err(Error::Format(format!(
            "feature map must have shape (H, W, D), got {:?}",
            array.shape
        )));
    };
    FeatureMap::with_unit_stride(h, w, d, npy::f32_values(&array.data))
        .map_err(|e| Error::Format(format!("invalid feature map: {e}")))
}

pub fn encode_feature_map(map: &FeatureMap) -> Vec<u8> {
    npy::encode(&NpyArray {
        dtype: Dtype::F32,
        shape: vec![map.height(), map.width(), map.dim()],
        data: npy::f32_payload(map.data()),
    })
}

/// Reads an NPY feature map. The image size defaults to the grid size; use
/// [`FeatureMap::with_image_size`] when the source image stride is known.
pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    decode_feature_map(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

pub fn write_feature_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_feature_map(map))
}

/// Decodes a PGM or NPY mask, chosen by magic bytes.
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    if bytes.starts_with(npy::MAGIC) {
        let array = npy::decode(bytes)?;
        if array.dtype != Dtype::U8 {
            return Err(Error::Format("npy mask must be uint8".into()));
        }
        let [h, w] = array.shape[..] else {
            return Err(Error::Format(format!(
                "npy mask must have shape (H, W), got {:?}",
                array.shape
            )));
        };
        BinaryMask::from_nonzero(h, w, &array.data)
    } else {
        pgm::decode(bytes)
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    decode_mask(&read_bytes(path)?).map_err(|e| with_path(path, e))
}

pub fn encode_mask_npy(mask: &BinaryMask) -> Vec<u8> {
    npy::encode(&NpyArray {
        dtype: Dtype::U8,
        shape: vec![mask.height(), mask.width()],
        data: mask.bits().to_vec(),
    })
}

/// Writes NPY when the extension is `.npy`, PGM P5 otherwise.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if path.extension().is_some_and(|e| e == "npy") {
        encode_mask_npy(mask)
    } else {
        pgm::encode(mask)
    };
    write_bytes(path, &bytes)
}
