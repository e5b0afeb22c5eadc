//! Dense rasters over 1D, 2D or 3D grids.
//!
//! Every grid is stored internally as `[z, y, x]` with unused leading axes of
//! length one, so pixel coordinates are always three-component and neighbor
//! iteration does not need to special-case the dimensionality.

use crate::error::{Error, Result};

/// Spatial extent of a single frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    ndim: usize,
    zyx: [usize; 3],
}

impl Shape {
    /// Build a shape from 1 to 3 axis lengths, slowest axis first.
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::Shape(format!(
                "spatial grids need 1 to 3 axes, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-length axis in {dims:?}")));
        }
        let mut zyx = [1usize; 3];
        zyx[3 - dims.len()..].copy_from_slice(dims);
        Ok(Self {
            ndim: dims.len(),
            zyx,
        })
    }

    pub fn d1(x: usize) -> Self {
        Self::new(&[x]).expect("non-zero axis")
    }

    pub fn d2(y: usize, x: usize) -> Self {
        Self::new(&[y, x]).expect("non-zero axes")
    }

    pub fn d3(z: usize, y: usize, x: usize) -> Self {
        Self::new(&[z, y, x]).expect("non-zero axes")
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// The axis lengths as given at construction.
    pub fn dims(&self) -> &[usize] {
        &self.zyx[3 - self.ndim..]
    }

    /// Padded `[z, y, x]` lengths.
    pub fn zyx(&self) -> [usize; 3] {
        self.zyx
    }

    pub fn len(&self) -> usize {
        self.zyx.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [self.zyx[1] * self.zyx[2], self.zyx[2], 1]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.zyx[1] + c[1]) * self.zyx[2] + c[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.zyx[2];
        let rest = idx / self.zyx[2];
        [rest / self.zyx[1], rest % self.zyx[1], x]
    }

    /// Face neighbors (4 in 2D, 6 in 3D) of a linear index.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(idx);
        let strides = self.strides();
        (0..3).flat_map(move |axis| {
            let lower = (c[axis] > 0).then(|| idx - strides[axis]);
            let upper = (c[axis] + 1 < self.zyx[axis]).then(|| idx + strides[axis]);
            lower.into_iter().chain(upper)
        })
    }

    /// Face neighbors with a larger linear index, one per axis at most.
    /// Enumerates every adjacent pair exactly once.
    pub fn forward_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(idx);
        let strides = self.strides();
        (0..3).filter_map(move |axis| (c[axis] + 1 < self.zyx[axis]).then(|| idx + strides[axis]))
    }
}

/// A dense raster with one value per pixel, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    shape: Shape,
    data: Vec<T>,
}

/// Fuzzy boundary likelihood in `[0, 1]`.
pub type ContourMap = Raster<f32>;
/// Cell versus background.
pub type ForegroundMask = Raster<bool>;
/// Instance labels, `0` is background.
pub type LabelImage = Raster<u32>;
/// Raw intensities.
pub type Image = Raster<f32>;

impl<T: Clone> Raster<T> {
    pub fn filled(shape: Shape, value: T) -> Self {
        let data = vec![value; shape.len()];
        Self { shape, data }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.len() != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {} values, got {}",
                shape.dims(),
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> std::ops::Index<usize> for Raster<T> {
    type Output = T;

    fn index(&self, idx: usize) -> &T {
        &self.data[idx]
    }
}

impl<T> std::ops::IndexMut<usize> for Raster<T> {
    fn index_mut(&mut self, idx: usize) -> &mut T {
        &mut self.data[idx]
    }
}

pub(crate) fn ensure_same_shape(a: &Shape, b: &Shape, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{what}: {:?} does not match {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}
