//! Binary masks: Euclidean dilation, merging, masking and soft organ removal.

use crate::distance::squared_distance;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{gaussian_smooth, Geometry, Volume3D};

/// One bit per voxel, aligned to a reference volume's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    geometry: Geometry,
    data: Vec<bool>,
}

impl LabelMask {
    pub fn new(geometry: Geometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Parameter(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                geometry.dims()
            )));
        }
        Ok(LabelMask { geometry, data })
    }

    pub fn empty(geometry: Geometry) -> Self {
        let data = vec![false; geometry.len()];
        LabelMask { geometry, data }
    }

    pub fn full(geometry: Geometry) -> Self {
        let data = vec![true; geometry.len()];
        LabelMask { geometry, data }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let data = (0..geometry.len())
            .map(|idx| {
                let [i, j, k] = geometry.coords(idx);
                f(i, j, k)
            })
            .collect();
        LabelMask { geometry, data }
    }

    /// Voxels whose value is nonzero (and not NaN).
    pub fn from_nonzero<T: Real>(vol: &Volume3D<T>) -> Self {
        LabelMask {
            geometry: vol.geometry().clone(),
            data: vol.data().iter().map(|v| *v != T::zero() && !v.is_nan()).collect(),
        }
    }

    /// Voxels of an integer label volume equal to `label`.
    pub fn from_label<T: Real>(vol: &Volume3D<T>, label: i64) -> Self {
        LabelMask {
            geometry: vol.geometry().clone(),
            data: vol
                .data()
                .iter()
                .map(|v| v.round().to_i64() == Some(label))
                .collect(),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.geometry.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.geometry.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn none(&self) -> bool {
        !self.data.iter().any(|b| *b)
    }

    pub fn contains(&self, other: &LabelMask) -> bool {
        self.geometry == other.geometry && self.data.iter().zip(&other.data).all(|(a, b)| *a || !*b)
    }

    pub fn and_not(&self, other: &LabelMask) -> Result<LabelMask> {
        self.geometry.ensure_same(&other.geometry, "mask difference")?;
        Ok(LabelMask {
            geometry: self.geometry.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && !*b).collect(),
        })
    }

    pub fn and(&self, other: &LabelMask) -> Result<LabelMask> {
        self.geometry.ensure_same(&other.geometry, "mask intersection")?;
        Ok(LabelMask {
            geometry: self.geometry.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn not(&self) -> LabelMask {
        LabelMask {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// 0/1 volume for export or convolution.
    pub fn to_volume<T: Real>(&self) -> Volume3D<T> {
        let data = self.data.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
        Volume3D::new(self.geometry.clone(), data).expect("geometry preserved")
    }
}

/// Sets every voxel within Euclidean distance `radius_vox` (voxel units) of a set voxel.
///
/// The ball is `{o : |o|^2 <= radius^2}` over integer offsets; radius 0 is the identity.
pub fn dilate(mask: &LabelMask, radius_vox: f64) -> Result<LabelMask> {
    if !(radius_vox >= 0.0) || !radius_vox.is_finite() {
        return Err(Error::Parameter(format!("dilation radius must be >= 0, got {radius_vox}")));
    }
    if radius_vox == 0.0 || mask.none() {
        return Ok(mask.clone());
    }
    let d2 = squared_distance(&mask.data, mask.geometry.dims(), [1.0; 3]);
    let r2 = radius_vox * radius_vox;
    Ok(LabelMask {
        geometry: mask.geometry.clone(),
        data: d2.into_iter().map(|d| d <= r2).collect(),
    })
}

/// Voxelwise OR of a nonempty list of aligned masks.
pub fn merge<'a>(masks: impl IntoIterator<Item = &'a LabelMask>) -> Result<LabelMask> {
    let mut it = masks.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Parameter("merge needs at least one mask".into()))?;
    let mut out = first.clone();
    for m in it {
        out.geometry.ensure_same(&m.geometry, "merge")?;
        for (o, b) in out.data.iter_mut().zip(&m.data) {
            *o |= *b;
        }
    }
    Ok(out)
}

/// Keeps voxels inside `mask`; everything else becomes the NaN sentinel.
pub fn apply_mask<T: Real>(vol: &Volume3D<T>, mask: &LabelMask) -> Result<Volume3D<T>> {
    vol.geometry().ensure_same(&mask.geometry, "apply_mask")?;
    let data = vol
        .data()
        .iter()
        .zip(&mask.data)
        .map(|(&v, &m)| if m { v } else { T::nan() })
        .collect();
    vol.with_data(data)
}

/// Union of organ masks, each dilated by its own radius (voxels).
pub fn removal_mask(geometry: &Geometry, organs: &[(&LabelMask, f64)]) -> Result<LabelMask> {
    let mut out = LabelMask::empty(geometry.clone());
    for (mask, radius) in organs {
        geometry.ensure_same(&mask.geometry, "organ mask")?;
        let d = dilate(mask, *radius)?;
        for (o, b) in out.data.iter_mut().zip(&d.data) {
            *o |= *b;
        }
    }
    Ok(out)
}

/// Blends `fill` into the voxels covered by `removal` with a Gaussian-feathered edge.
///
/// `w = 1 - clamp(smooth(removal, blur_sigma_mm))`, output `w v + (1 - w) fill`.
/// A zero blur is a hard replacement.
pub fn soft_remove<T: Real>(
    vol: &Volume3D<T>,
    removal: &LabelMask,
    blur_sigma_mm: f64,
    fill: T,
) -> Result<Volume3D<T>> {
    vol.geometry().ensure_same(&removal.geometry, "organ removal")?;
    if !(blur_sigma_mm >= 0.0) || !blur_sigma_mm.is_finite() {
        return Err(Error::Parameter(format!("blur sigma must be >= 0, got {blur_sigma_mm}")));
    }
    if removal.none() {
        return Ok(vol.clone());
    }
    let indicator: Volume3D<T> = removal.to_volume();
    let removed = if blur_sigma_mm > 0.0 {
        gaussian_smooth(&indicator, blur_sigma_mm)?
    } else {
        indicator
    };
    let data = vol
        .data()
        .iter()
        .zip(removed.data())
        .map(|(&v, &u)| {
            let w = T::one() - u.max(T::zero()).min(T::one());
            w * v + (T::one() - w) * fill
        })
        .collect();
    vol.with_data(data)
}

/// Dilates each organ by `dilation_vox`, merges them and softly replaces the
/// covered voxels by `fill_value`.
pub fn remove_organs<T: Real>(
    vol: &Volume3D<T>,
    organ_masks: &[LabelMask],
    dilation_vox: f64,
    blur_sigma_mm: f64,
    fill_value: T,
) -> Result<Volume3D<T>> {
    let organs: Vec<(&LabelMask, f64)> = organ_masks.iter().map(|m| (m, dilation_vox)).collect();
    let removal = removal_mask(vol.geometry(), &organs)?;
    soft_remove(vol, &removal, blur_sigma_mm, fill_value)
}
