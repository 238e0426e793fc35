//! Feature maps, binary masks, masked selection and grid/pixel mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `height x width x dim` grid of encoder features, stored row-major as
/// 32-bit floats. `image_height`/`image_width` describe the source image the
/// grid was extracted from and drive the grid-to-pixel mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    image_height: usize,
    image_width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        dim: usize,
        image_height: usize,
        image_width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 || image_height == 0 || image_width == 0 {
            return Err(Error::InvalidInput(format!(
                "feature map dims must be positive (grid {height}x{width}x{dim}, image {image_height}x{image_width})"
            )));
        }
        let expected = height * width * dim;
        if data.len() != expected {
            return Err(Error::DimMismatch {
                what: "feature map data length",
                expected,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        Ok(Self {
            height,
            width,
            dim,
            image_height,
            image_width,
            data,
        })
    }

    /// Grid whose image size equals the grid size (stride 1).
    pub fn with_unit_stride(
        height: usize,
        width: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        Self::new(height, width, dim, height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Feature vector at linear (row-major) cell index.
    pub fn vector(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn vector_at(&self, p: GridPoint) -> &[f32] {
        self.vector(p.row * self.width + p.col)
    }

    /// Copy with a different source-image size.
    pub fn with_image_size(mut self, image_height: usize, image_width: usize) -> Result<Self> {
        if image_height == 0 || image_width == 0 {
            return Err(Error::InvalidInput("image dims must be positive".into()));
        }
        self.image_height = image_height;
        self.image_width = image_width;
        Ok(self)
    }

    /// Multiplies the vector at `index` by `factor` in place.
    pub fn scale_vector(&mut self, index: usize, factor: f32) {
        let dim = self.dim;
        for v in &mut self.data[index * dim..(index + 1) * dim] {
            *v *= factor;
        }
    }

    pub fn check_mask(&self, mask: &BinaryMask) -> Result<()> {
        if mask.height() != self.height {
            return Err(Error::DimMismatch {
                what: "mask height vs feature grid",
                expected: self.height,
                got: mask.height(),
            });
        }
        if mask.width() != self.width {
            return Err(Error::DimMismatch {
                what: "mask width vs feature grid",
                expected: self.width,
                got: mask.width(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::DimMismatch {
                what: "mask bit count",
                expected: height * width,
                got: bits.len(),
            });
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidInput(format!(
                "mask bit at {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![1; height * width],
        }
    }

    /// Mask from any byte buffer, mapping nonzero to 1.
    pub fn from_nonzero(height: usize, width: usize, values: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            values.iter().map(|&v| u8::from(v != 0)).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.width + col] = u8::from(on);
    }

    /// Number of foreground cells.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub row: usize,
    pub col: usize,
}

impl GridPoint {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: usize,
    pub y: usize,
}

impl PixelPoint {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Foreground,
    Background,
}

/// Ordered set of feature vectors (64-bit) with the grid cell each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
    coords: Vec<GridPoint>,
}

impl FeatureSet {
    pub fn new(dim: usize, data: Vec<f64>, coords: Vec<GridPoint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("feature dim must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptySelection("feature set"));
        }
        if data.len() != dim * coords.len() {
            return Err(Error::DimMismatch {
                what: "feature set data length",
                expected: dim * coords.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self { dim, data, coords })
    }

    /// Builds a set from explicit vectors; origin coordinates are `(0, i)`.
    pub fn from_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        let dim = vectors.first().map(|v| v.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    what: "vector length in feature set",
                    expected: dim,
                    got: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        let coords = (0..vectors.len()).map(|i| GridPoint::new(0, i)).collect();
        Self::new(dim, data, coords)
    }

    pub fn count(&self) -> usize {
        self.coords.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[GridPoint] {
        &self.coords
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut coords = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.vector(i));
            coords.push(self.coords[i]);
        }
        Self::new(self.dim, data, coords)
    }

    /// Arithmetic mean of all vectors.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for v in self.vectors() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let n = self.count() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = norm(v);
    if norm < 1e-12 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn norm_f32(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// Lower bound on every cosine denominator.
pub const COSINE_EPS: f64 = 1e-12;

/// Cosine similarity with the denominator floored at [`COSINE_EPS`]; zero
/// vectors give 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (norm(a) * norm(b)).max(COSINE_EPS)).clamp(-1.0, 1.0)
}

pub fn masked_select(
    map: &FeatureMap,
    mask: &BinaryMask,
    polarity: Polarity,
) -> Result<FeatureSet> {
    map.check_mask(mask)?;
    let want = match polarity {
        Polarity::Foreground => 1,
        Polarity::Background => 0,
    };
    let mut data = Vec::new();
    let mut coords = Vec::new();
    for (idx, &bit) in mask.bits().iter().enumerate() {
        if bit == want {
            data.extend(map.vector(idx).iter().map(|&x| f64::from(x)));
            coords.push(GridPoint::new(idx / map.width(), idx % map.width()));
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptySelection(match polarity {
            Polarity::Foreground => "foreground",
            Polarity::Background => "background",
        }));
    }
    FeatureSet::new(map.dim(), data, coords)
}

fn axis_to_pixel(cell: usize, grid: usize, image: usize) -> usize {
    // floor((cell + 0.5) * image / grid) in exact integer arithmetic
    ((2 * cell + 1) * image) / (2 * grid)
}

/// Patch-center pixel of a grid cell.
pub fn grid_to_pixel(p: GridPoint, map: &FeatureMap) -> Result<PixelPoint> {
    if p.row >= map.height() || p.col >= map.width() {
        return Err(Error::OutOfBounds {
            row: p.row,
            col: p.col,
            height: map.height(),
            width: map.width(),
        });
    }
    Ok(PixelPoint::new(
        axis_to_pixel(p.col, map.width(), map.image_width()),
        axis_to_pixel(p.row, map.height(), map.image_height()),
    ))
}

fn pixel_to_axis(pixel: usize, grid: usize, image: usize) -> usize {
    let guess = (pixel * grid / image).min(grid - 1);
    let lo = guess.saturating_sub(1);
    let hi = (guess + 1).min(grid - 1);
    (lo..=hi)
        .find(|&c| axis_to_pixel(c, grid, image) == pixel)
        .unwrap_or(guess)
}

/// Grid cell containing a pixel. Exact inverse of [`grid_to_pixel`] for
/// patch-center pixels whenever the image is at least as large as the grid.
pub fn pixel_to_grid(p: PixelPoint, map: &FeatureMap) -> Result<GridPoint> {
    if p.x >= map.image_width() || p.y >= map.image_height() {
        return Err(Error::InvalidInput(format!(
            "pixel ({}, {}) outside image {}x{}",
            p.x,
            p.y,
            map.image_width(),
            map.image_height()
        )));
    }
    Ok(GridPoint::new(
        pixel_to_axis(p.y, map.height(), map.image_height()),
        pixel_to_axis(p.x, map.width(), map.image_width()),
    ))
}
