//! Multiscale Hessian analysis and the Jerman vesselness response.
//!
//! For bright tubes the two largest-magnitude Hessian eigenvalues are
//! negative; after magnitude sorting they are negated so that a tube has
//! positive `l2`, `l3`. `l3` is regularized per scale into `lambda_rho`:
//!
//! ```text
//! lambda_rho = l3                  if l3 > tau * max(l3)
//!            = tau * max(l3)       if 0 < l3 <= tau * max(l3)
//!            = 0                   otherwise
//! ```
//!
//! and the response is
//!
//! ```text
//! V = 0                                           if l2 <= 0 or lambda_rho <= 0
//!   = 1                                           if l2 >= lambda_rho / 2 > 0
//!   = l2^2 (lambda_rho - l2) (3 / (l2 + lambda_rho))^3   otherwise
//! ```

mod eigen;
mod hessian;

pub use eigen::{eig3_symmetric, EigenTriple};
pub use hessian::{hessian_at_scale, HessianField};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::scalar::Real;
use crate::volume::{gaussian_smooth, ProbabilityMap, Volume3D};
use hessian::Stencil;

/// Jerman response for an eigen triple already in the bright convention.
#[inline]
pub fn jerman_response<T: Real>(e: &EigenTriple<T>, lambda_rho: T) -> T {
    jerman_from_l2(e.l2, lambda_rho)
}

#[inline]
fn jerman_from_l2<T: Real>(l2: T, rho: T) -> T {
    if l2 <= T::zero() || rho <= T::zero() {
        return T::zero();
    }
    if l2 >= rho / T::c(2.0) {
        return T::one();
    }
    let t = T::c(3.0) / (l2 + rho);
    (l2 * l2 * (rho - l2) * t * t * t).max(T::zero()).min(T::one())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VesselnessOptions {
    pub scales_mm: Vec<f64>,
    pub tau_cut: f64,
}

impl Default for VesselnessOptions {
    fn default() -> Self {
        VesselnessOptions {
            scales_mm: vec![1.0, 1.5, 2.0, 2.5],
            tau_cut: 0.5,
        }
    }
}

impl VesselnessOptions {
    pub fn validate(&self) -> Result<()> {
        if self.scales_mm.is_empty() {
            return Err(Error::Parameter("at least one vesselness scale is required".into()));
        }
        if let Some(s) = self.scales_mm.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!("scale {s} must be positive")));
        }
        if !(self.tau_cut > 0.0 && self.tau_cut <= 1.0) {
            return Err(Error::Parameter(format!("tau_cut {} outside (0, 1]", self.tau_cut)));
        }
        Ok(())
    }
}

fn check_input<T: Real>(vol: &Volume3D<T>, analysis: Option<&LabelMask>) -> Result<()> {
    if let Some(idx) = vol.data().iter().position(|v| !(*v >= T::zero())) {
        return Err(Error::Precondition(format!(
            "vesselness input must be nonnegative (clip and rescale first); voxel {idx} is {}",
            vol.data()[idx]
        )));
    }
    if let Some(m) = analysis {
        vol.geometry().ensure_same(m.geometry(), "vesselness analysis mask")?;
    }
    Ok(())
}

/// Response at a single scale. `analysis` restricts the voxels that set the
/// `lambda_rho` normalizer; responses are produced everywhere.
pub fn vesselness_at_scale<T: Real>(
    vol: &Volume3D<T>,
    scale_mm: f64,
    tau_cut: f64,
    analysis: Option<&LabelMask>,
) -> Result<ProbabilityMap<T>> {
    VesselnessOptions {
        scales_mm: vec![scale_mm],
        tau_cut,
    }
    .validate()?;
    check_input(vol, analysis)?;
    Ok(single_scale(vol, scale_mm, tau_cut, analysis))
}

fn single_scale<T: Real>(vol: &Volume3D<T>, scale_mm: f64, tau_cut: f64, analysis: Option<&LabelMask>) -> ProbabilityMap<T> {
    let smoothed = gaussian_smooth(vol, scale_mm).expect("validated scale");
    let st = Stencil::new(&smoothed, scale_mm);
    let [nx, ny, _] = vol.dims();
    let slab = nx * ny;

    // Bright-convention (l2, l3) per voxel.
    let mut pairs = vec![(T::zero(), T::zero()); vol.len()];
    pairs.par_chunks_mut(slab).enumerate().for_each(|(k, out)| {
        for j in 0..ny {
            for i in 0..nx {
                let ev = eigen::eigenvalues(st.at(i, j, k));
                let e = EigenTriple::from_unsorted(ev).bright();
                out[i + nx * j] = (e.l2, e.l3);
            }
        }
    });

    let max_l3 = match analysis {
        Some(m) => pairs
            .par_iter()
            .zip(m.data().par_iter())
            .filter(|(_, &inside)| inside)
            .map(|(p, _)| p.1)
            .reduce(|| T::neg_infinity(), T::max),
        None => pairs.par_iter().map(|p| p.1).reduce(|| T::neg_infinity(), T::max),
    };
    let cap = T::c(tau_cut) * max_l3;
    let data: Vec<T> = if !(cap > T::zero()) {
        vec![T::zero(); vol.len()]
    } else {
        pairs
            .par_iter()
            .map(|&(l2, l3)| {
                let rho = if l3 > cap {
                    l3
                } else if l3 > T::zero() {
                    cap
                } else {
                    T::zero()
                };
                jerman_from_l2(l2, rho)
            })
            .collect()
    };
    ProbabilityMap::from_unchecked(vol.with_data(data).expect("same geometry"))
}

/// Voxelwise maximum of the single-scale responses. Input must be nonnegative.
pub fn vesselness_multiscale<T: Real>(
    vol: &Volume3D<T>,
    opts: &VesselnessOptions,
    analysis: Option<&LabelMask>,
) -> Result<ProbabilityMap<T>> {
    Ok(vesselness_with_scales(vol, opts, analysis)?.0)
}

/// Multiscale response plus each single-scale map (for debug dumps).
pub fn vesselness_with_scales<T: Real>(
    vol: &Volume3D<T>,
    opts: &VesselnessOptions,
    analysis: Option<&LabelMask>,
) -> Result<(ProbabilityMap<T>, Vec<ProbabilityMap<T>>)> {
    opts.validate()?;
    check_input(vol, analysis)?;
    let per_scale: Vec<ProbabilityMap<T>> = opts
        .scales_mm
        .iter()
        .map(|&s| single_scale(vol, s, opts.tau_cut, analysis))
        .collect();
    let mut best = per_scale[0].volume().clone();
    for m in &per_scale[1..] {
        for (b, v) in best.data_mut().iter_mut().zip(m.data()) {
            *b = b.max(*v);
        }
    }
    Ok((ProbabilityMap::from_unchecked(best), per_scale))
}
