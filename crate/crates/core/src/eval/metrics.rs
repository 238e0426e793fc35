//! Overlap metrics between binary masks. Two empty masks score 1.

use crate::error::{Error, Result};
use crate::feature::BinaryMask;

fn counts(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    if a.height() != b.height() {
        return Err(Error::DimMismatch {
            what: "mask height",
            expected: a.height(),
            got: b.height(),
        });
    }
    if a.width() != b.width() {
        return Err(Error::DimMismatch {
            what: "mask width",
            expected: a.width(),
            got: b.width(),
        });
    }
    let inter = a
        .bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| **x == 1 && **y == 1)
        .count();
    Ok((inter, a.area(), b.area()))
}

pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = counts(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = counts(a, b)?;
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
