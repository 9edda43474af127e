use rayon::prelude::*;

use super::{ProbabilityMap, Volume3D};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Clamps every voxel to `[lo, hi]` and shifts by `-lo` so the output starts at 0.
pub fn clip_rescale<T: Real>(vol: &Volume3D<T>, lo: T, hi: T) -> Result<Volume3D<T>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Parameter(format!("clip bounds need lo < hi, got [{lo}, {hi}]")));
    }
    if let Some(idx) = vol.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("non-finite voxel at index {idx}")));
    }
    Ok(vol.map(|v| v.max(lo).min(hi) - lo))
}

/// Normalized 1D Gaussian truncated at 4 sigma (in voxels).
pub fn gaussian_kernel<T: Real>(sigma_vox: f64) -> Vec<T> {
    let radius = (4.0 * sigma_vox).ceil() as isize;
    let denom = 2.0 * sigma_vox * sigma_vox;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|t| (-((t * t) as f64) / denom).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| T::c(w / sum)).collect()
}

/// Separable Gaussian smoothing with per-axis sigma `sigma_mm / spacing[axis]`.
///
/// Edges are handled by replicating the border voxel.
pub fn gaussian_smooth<T: Real>(vol: &Volume3D<T>, sigma_mm: f64) -> Result<Volume3D<T>> {
    if !(sigma_mm > 0.0) || !sigma_mm.is_finite() {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma_mm}")));
    }
    let spacing = vol.spacing();
    let kernels: [Vec<T>; 3] = std::array::from_fn(|a| gaussian_kernel(sigma_mm / spacing[a]));
    Ok(convolve_separable(vol, &kernels))
}

/// Applies an odd-length 1D kernel along each axis in turn (x, y, z).
pub(crate) fn convolve_separable<T: Real>(vol: &Volume3D<T>, kernels: &[Vec<T>; 3]) -> Volume3D<T> {
    let mut cur = vol.data().to_vec();
    for (axis, kernel) in kernels.iter().enumerate() {
        if kernel.len() <= 1 {
            if let Some(&w) = kernel.first() {
                cur.iter_mut().for_each(|v| *v = *v * w);
            }
            continue;
        }
        cur = convolve_axis(&cur, vol.dims(), axis, kernel);
    }
    Volume3D::new(vol.geometry().clone(), cur).expect("geometry preserved")
}

pub(crate) fn convolve_axis<T: Real>(src: &[T], dims: [usize; 3], axis: usize, kernel: &[T]) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let r = (kernel.len() / 2) as isize;
    let n_axis = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    } as isize;
    let mut out = vec![T::zero(); src.len()];
    let slab = nx * ny;
    out.par_chunks_mut(slab).enumerate().for_each(|(k, dst)| {
        debug_assert!(k < nz);
        for j in 0..ny {
            for i in 0..nx {
                let pos = [i, j, k][axis] as isize;
                let base = (i + nx * (j + ny * k)) as isize - pos * stride;
                let mut acc = T::zero();
                for (t, &w) in kernel.iter().enumerate() {
                    let q = (pos + t as isize - r).clamp(0, n_axis - 1);
                    acc = acc + w * src[(base + q * stride) as usize];
                }
                dst[i + nx * j] = acc;
            }
        }
    });
    out
}

/// Nearest-rank percentile of the strictly positive voxels.
///
/// `rank = ceil(p / 100 * n_nonzero)`, clamped to `[1, n_nonzero]`.
pub fn percentile_nonzero<T: Real>(map: &ProbabilityMap<T>, p: f64) -> Result<T> {
    percentile_nonzero_slice(map.data(), p)
}

pub(crate) fn percentile_nonzero_slice<T: Real>(data: &[T], p: f64) -> Result<T> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Parameter(format!("percentile must lie in (0, 100], got {p}")));
    }
    let mut pos: Vec<T> = data.iter().copied().filter(|v| *v > T::zero()).collect();
    if pos.is_empty() {
        return Err(Error::EmptyPopulation("no nonzero voxels for percentile".into()));
    }
    let n = pos.len();
    let rank = ((p * n as f64) / 100.0).ceil().clamp(1.0, n as f64) as usize;
    let (_, v, _) = pos.select_nth_unstable_by(rank - 1, |a, b| a.partial_cmp(b).expect("positive values are ordered"));
    Ok(*v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn vol(dims: [usize; 3], data: Vec<f64>) -> Volume3D<f64> {
        Volume3D::new(Geometry::axis_aligned(dims, [1.0; 3]).unwrap(), data).unwrap()
    }

    #[test]
    fn clip_rescale_examples() {
        let v = vol([3, 1, 1], vec![400.0, -300.0, 0.0]);
        let out = clip_rescale(&v, -200.0, 350.0).unwrap();
        assert_eq!(out.data(), &[550.0, 0.0, 200.0]);
    }

    #[test]
    fn clip_rescale_errors() {
        let v = vol([1, 1, 1], vec![0.0]);
        assert!(matches!(clip_rescale(&v, 10.0, 10.0), Err(Error::Parameter(_))));
        assert!(matches!(clip_rescale(&v, 10.0, -10.0), Err(Error::Parameter(_))));
        let nan = vol([1, 1, 1], vec![f64::NAN]);
        assert!(matches!(clip_rescale(&nan, -200.0, 350.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k: Vec<f64> = gaussian_kernel(2.0);
        assert_eq!(k.len(), 17);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((k[8] / k[10] - (4.0f64 / 8.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn smoothing_rejects_nonpositive_sigma() {
        let v = vol([2, 2, 2], vec![1.0; 8]);
        assert!(gaussian_smooth(&v, 0.0).is_err());
        assert!(gaussian_smooth(&v, -1.0).is_err());
    }

    #[test]
    fn constant_volume_is_preserved() {
        let v = vol([9, 7, 5], vec![42.5; 315]);
        let s = gaussian_smooth(&v, 1.7).unwrap();
        assert!(s.data().iter().all(|x| (x - 42.5).abs() < 1e-9));
    }

    #[test]
    fn percentile_examples() {
        let data: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).chain([0.0, 0.0]).collect();
        let p = ProbabilityMap::new(vol([12, 1, 1], data)).unwrap();
        assert_eq!(percentile_nonzero(&p, 5.0).unwrap(), 0.1);
        assert_eq!(percentile_nonzero(&p, 50.0).unwrap(), 0.5);
        assert_eq!(percentile_nonzero(&p, 100.0).unwrap(), 1.0);

        let c = ProbabilityMap::new(vol([4, 1, 1], vec![0.3; 4])).unwrap();
        for pct in [1.0, 37.0, 99.0] {
            assert_eq!(percentile_nonzero(&c, pct).unwrap(), 0.3);
        }

        let z = ProbabilityMap::new(vol([4, 1, 1], vec![0.0; 4])).unwrap();
        assert!(matches!(percentile_nonzero(&z, 5.0), Err(Error::EmptyPopulation(_))));
    }
}
