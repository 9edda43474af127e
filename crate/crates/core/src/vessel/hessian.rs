use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{gaussian_smooth, Volume3D};

/// Scale-normalized second derivatives of a smoothed volume.
#[derive(Debug, Clone)]
pub struct HessianField<T> {
    pub xx: Volume3D<T>,
    pub yy: Volume3D<T>,
    pub zz: Volume3D<T>,
    pub xy: Volume3D<T>,
    pub xz: Volume3D<T>,
    pub yz: Volume3D<T>,
    pub scale_mm: f64,
}

impl<T: Real> HessianField<T> {
    /// `[xx, yy, zz, xy, xz, yz]` at a linear index.
    pub fn at(&self, idx: usize) -> [T; 6] {
        [
            self.xx.data()[idx],
            self.yy.data()[idx],
            self.zz.data()[idx],
            self.xy.data()[idx],
            self.xz.data()[idx],
            self.yz.data()[idx],
        ]
    }
}

/// Central-difference Hessian in physical units, scaled by `gamma_scale`.
/// Out-of-range neighbours replicate the border voxel.
pub(crate) struct Stencil<'a, T> {
    data: &'a [T],
    dims: [usize; 3],
    inv: [T; 3],
    gamma_scale: T,
}

impl<'a, T: Real> Stencil<'a, T> {
    pub(crate) fn new(vol: &'a Volume3D<T>, scale_mm: f64) -> Self {
        let s = vol.spacing();
        Stencil {
            data: vol.data(),
            dims: vol.dims(),
            inv: [T::c(1.0 / s[0]), T::c(1.0 / s[1]), T::c(1.0 / s[2])],
            gamma_scale: T::c(scale_mm * scale_mm),
        }
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize, k: usize) -> [T; 6] {
        let [nx, ny, nz] = self.dims;
        let ip = (i + 1).min(nx - 1);
        let im = i.saturating_sub(1);
        let jp = (j + 1).min(ny - 1);
        let jm = j.saturating_sub(1);
        let kp = (k + 1).min(nz - 1);
        let km = k.saturating_sub(1);
        let v = |x: usize, y: usize, z: usize| self.data[x + nx * (y + ny * z)];
        let c = v(i, j, k);
        let two = T::c(2.0);
        let quarter = T::c(0.25);
        let [ix, iy, iz] = self.inv;
        let g = self.gamma_scale;
        let xx = (v(ip, j, k) - two * c + v(im, j, k)) * ix * ix;
        let yy = (v(i, jp, k) - two * c + v(i, jm, k)) * iy * iy;
        let zz = (v(i, j, kp) - two * c + v(i, j, km)) * iz * iz;
        let xy = (v(ip, jp, k) - v(ip, jm, k) - v(im, jp, k) + v(im, jm, k)) * quarter * ix * iy;
        let xz = (v(ip, j, kp) - v(ip, j, km) - v(im, j, kp) + v(im, j, km)) * quarter * ix * iz;
        let yz = (v(i, jp, kp) - v(i, jp, km) - v(i, jm, kp) + v(i, jm, km)) * quarter * iy * iz;
        [xx * g, yy * g, zz * g, xy * g, xz * g, yz * g]
    }
}

/// Smooths at `scale_mm`, differentiates and applies gamma = 2 normalization
/// (every component multiplied by `scale_mm^2`).
pub fn hessian_at_scale<T: Real>(vol: &Volume3D<T>, scale_mm: f64) -> Result<HessianField<T>> {
    if !(scale_mm > 0.0) || !scale_mm.is_finite() {
        return Err(Error::Parameter(format!("scale must be positive, got {scale_mm}")));
    }
    let smoothed = gaussian_smooth(vol, scale_mm)?;
    let st = Stencil::new(&smoothed, scale_mm);
    let [nx, ny, _] = vol.dims();
    let comps: Vec<[T; 6]> = (0..vol.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
            st.at(i, j, k)
        })
        .collect();
    let field = |c: usize| vol.with_data(comps.iter().map(|h| h[c]).collect()).expect("same geometry");
    Ok(HessianField {
        xx: field(0),
        yy: field(1),
        zz: field(2),
        xy: field(3),
        xz: field(4),
        yz: field(5),
        scale_mm,
    })
}
