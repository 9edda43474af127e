//! Volumetric data model shared by every pipeline stage.
//!
//! Voxels are stored x-fastest (NIfTI native order): the linear index of
//! voxel `(i, j, k)` is `i + nx * (j + ny * k)`.

mod histogram;
pub mod nifti;
pub(crate) mod ops;

pub use histogram::Histogram;
pub use ops::{clip_rescale, gaussian_kernel, gaussian_smooth, percentile_nonzero};

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Voxel grid geometry: extent, voxel pitch and voxel-to-world transform.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Geometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: [[f64; 4]; 4],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: [[f64; 4]; 4]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Parameter(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Parameter(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("affine has non-finite entries".into()));
        }
        let det = det3([
            [affine[0][0], affine[0][1], affine[0][2]],
            [affine[1][0], affine[1][1], affine[1][2]],
            [affine[2][0], affine[2][1], affine[2][2]],
        ]);
        if det == 0.0 {
            return Err(Error::Parameter("affine rotation/zoom block is singular".into()));
        }
        Ok(Geometry {
            dims,
            spacing,
            affine,
        })
    }

    /// Axis-aligned geometry with a diagonal affine and zero origin.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, diagonal_affine(spacing))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &[[f64; 4]; 4] {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Voxel-to-world mapping of a (possibly fractional) voxel coordinate.
    pub fn to_world(&self, v: [f64; 3]) -> [f64; 3] {
        let a = &self.affine;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = a[r][0] * v[0] + a[r][1] * v[1] + a[r][2] * v[2] + a[r][3];
        }
        out
    }

    /// Dims must match exactly; spacing and affine within [`GEOMETRY_TOL`]
    /// (headers store them as float32).
    pub fn ensure_same(&self, other: &Geometry, what: &str) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= GEOMETRY_TOL * a.abs().max(b.abs()).max(1.0);
        let same = self.dims == other.dims
            && (0..3).all(|a| close(self.spacing[a], other.spacing[a]))
            && (0..4).all(|r| (0..4).all(|c| close(self.affine[r][c], other.affine[r][c])));
        if same {
            Ok(())
        } else {
            Err(Error::Alignment(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Relative tolerance used when comparing spacing and affine entries.
pub const GEOMETRY_TOL: f64 = 1e-5;

pub(crate) fn diagonal_affine(spacing: [f64; 3]) -> [[f64; 4]; 4] {
    [
        [spacing[0], 0.0, 0.0, 0.0],
        [0.0, spacing[1], 0.0, 0.0],
        [0.0, 0.0, spacing[2], 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub(crate) fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Dense scalar voxel grid (HU or dimensionless probability).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D<T> {
    geometry: Geometry,
    data: Vec<T>,
}

impl<T: Real> Volume3D<T> {
    pub fn new(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Parameter(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Volume3D { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: T) -> Self {
        let data = vec![value; geometry.len()];
        Volume3D { geometry, data }
    }

    pub fn zeros(geometry: Geometry) -> Self {
        Self::filled(geometry, T::zero())
    }

    /// Builds a volume by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let [nx, ny, nz] = geometry.dims;
        let mut data = Vec::with_capacity(geometry.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Volume3D { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.geometry.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let idx = self.geometry.index(i, j, k);
        self.data[idx] = v;
    }

    /// Same geometry, new payload produced voxelwise.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Volume3D {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.geometry.clone(), data)
    }

    /// Converts the payload to another scalar type.
    pub fn cast<U: Real>(&self) -> Volume3D<U> {
        Volume3D {
            geometry: self.geometry.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    /// Largest finite voxel value, ignoring NaN sentinels.
    pub fn max_finite(&self) -> Option<T> {
        self.data
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.max(v))))
    }

    pub fn min_finite(&self) -> Option<T> {
        self.data
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.min(v))))
    }
}

/// A volume whose voxels all lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T>(Volume3D<T>);

impl<T: Real> ProbabilityMap<T> {
    pub fn new(volume: Volume3D<T>) -> Result<Self> {
        if let Some((idx, v)) = volume
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Parameter(format!(
                "probability map voxel {idx} = {v} outside [0, 1]"
            )));
        }
        Ok(ProbabilityMap(volume))
    }

    /// Wraps `volume`, clamping every voxel into `[0, 1]` (NaN becomes 0).
    pub fn clamped(mut volume: Volume3D<T>) -> Self {
        for v in volume.data.iter_mut() {
            *v = if v.is_nan() { T::zero() } else { v.max(T::zero()).min(T::one()) };
        }
        ProbabilityMap(volume)
    }

    pub(crate) fn from_unchecked(volume: Volume3D<T>) -> Self {
        debug_assert!(volume.data.iter().all(|v| *v >= T::zero() && *v <= T::one()));
        ProbabilityMap(volume)
    }

    pub fn zeros(geometry: Geometry) -> Self {
        ProbabilityMap(Volume3D::zeros(geometry))
    }

    pub fn volume(&self) -> &Volume3D<T> {
        &self.0
    }

    pub fn into_volume(self) -> Volume3D<T> {
        self.0
    }
}

impl<T> Deref for ProbabilityMap<T> {
    type Target = Volume3D<T>;

    fn deref(&self) -> &Volume3D<T> {
        &self.0
    }
}

impl<T: Real> TryFrom<Volume3D<T>> for ProbabilityMap<T> {
    type Error = Error;

    fn try_from(v: Volume3D<T>) -> Result<Self> {
        ProbabilityMap::new(v)
    }
}
