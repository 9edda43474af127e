//! Iterative probabilistic enhancement of a vessel probability map.
//!
//! Each round takes the 27-neighbourhood maximum `M` of the current map `P`,
//! forms the geometric interpolation `M^(1 - lambda) * P^lambda`, zeroes
//! values below the nearest-rank percentile of the nonzero voxels (or below
//! a fixed floor, whichever is larger) and clears excluded voxels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::scalar::Real;
use crate::volume::{ops::percentile_nonzero_slice, ProbabilityMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceParams {
    /// Number of rounds.
    pub iterations: usize,
    /// One lambda per round, or a single value reused for every round.
    pub lambda_schedule: Vec<f64>,
    pub tau_percent: f64,
    pub min_floor: f64,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        EnhanceParams {
            iterations: 3,
            lambda_schedule: vec![0.5],
            tau_percent: 5.0,
            min_floor: 0.01,
        }
    }
}

impl EnhanceParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.lambda_schedule.len();
        if self.iterations > 0 && n != 1 && n != self.iterations {
            return Err(Error::Parameter(format!(
                "lambda schedule has {n} entries for {} iterations",
                self.iterations
            )));
        }
        if let Some(l) = self.lambda_schedule.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Parameter(format!("lambda {l} outside [0, 1]")));
        }
        if !(self.tau_percent > 0.0 && self.tau_percent < 100.0) {
            return Err(Error::Parameter(format!("tau_percent {} outside (0, 100)", self.tau_percent)));
        }
        if !(0.0..=1.0).contains(&self.min_floor) {
            return Err(Error::Parameter(format!("min_floor {} outside [0, 1]", self.min_floor)));
        }
        Ok(())
    }

    pub fn lambda(&self, round: usize) -> f64 {
        if self.lambda_schedule.len() == 1 {
            self.lambda_schedule[0]
        } else {
            self.lambda_schedule[round]
        }
    }
}

/// Maximum over the 3x3x3 neighbourhood (clipped at the borders), computed as
/// three separable 3-tap max passes.
pub fn local_max_27<T: Real>(p: &ProbabilityMap<T>) -> ProbabilityMap<T> {
    let dims = p.dims();
    let mut cur = p.data().to_vec();
    for axis in 0..3 {
        cur = max3_axis(&cur, dims, axis);
    }
    ProbabilityMap::from_unchecked(p.with_data(cur).expect("same geometry"))
}

fn max3_axis<T: Real>(src: &[T], dims: [usize; 3], axis: usize) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let n_axis = dims[axis];
    let stride = [1, nx, nx * ny][axis];
    let mut out = vec![T::zero(); src.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(k, dst)| {
        debug_assert!(k < nz);
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * (j + ny * k);
                let pos = [i, j, k][axis];
                let mut m = src[idx];
                if pos > 0 {
                    m = m.max(src[idx - stride]);
                }
                if pos + 1 < n_axis {
                    m = m.max(src[idx + stride]);
                }
                dst[i + nx * j] = m;
            }
        }
    });
    out
}

#[inline]
fn geometric_voxel<T: Real>(p: T, m: T, lambda: T) -> T {
    if lambda == T::one() {
        p
    } else if lambda == T::zero() {
        m
    } else if p == T::zero() {
        T::zero()
    } else {
        // A weighted geometric mean lies between its arguments; the clamp
        // keeps rounding from breaking that (and so p_hat >= p).
        (m.powf(T::one() - lambda) * p.powf(lambda)).max(p.min(m)).min(p.max(m))
    }
}

/// `M^(1 - lambda) * P^lambda` voxelwise; `lambda = 1` returns `P` and
/// `lambda = 0` returns `M` exactly, and `P = 0` stays 0 for `lambda > 0`.
pub fn geometric_update<T: Real>(p: &ProbabilityMap<T>, m: &ProbabilityMap<T>, lambda: f64) -> Result<ProbabilityMap<T>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!("lambda {lambda} outside [0, 1]")));
    }
    p.geometry().ensure_same(m.geometry(), "geometric update")?;
    let lam = T::c(lambda);
    let data = p
        .data()
        .par_iter()
        .zip(m.data().par_iter())
        .map(|(&pv, &mv)| geometric_voxel(pv, mv, lam))
        .collect();
    Ok(ProbabilityMap::from_unchecked(p.with_data(data)?))
}

/// Keeps `p_hat >= max(percentile_nonzero(p_hat, tau_percent), min_floor)`
/// outside `exclusion`; everything else becomes 0.
pub fn threshold_step<T: Real>(
    p_hat: &ProbabilityMap<T>,
    tau_percent: f64,
    min_floor: f64,
    exclusion: &LabelMask,
) -> Result<ProbabilityMap<T>> {
    p_hat.geometry().ensure_same(exclusion.geometry(), "exclusion mask")?;
    let tau = match percentile_nonzero_slice(p_hat.data(), tau_percent) {
        Ok(t) => t.max(T::c(min_floor)),
        Err(Error::EmptyPopulation(_)) => return Ok(ProbabilityMap::zeros(p_hat.geometry().clone())),
        Err(e) => return Err(e),
    };
    let data = p_hat
        .data()
        .par_iter()
        .zip(exclusion.data().par_iter())
        .map(|(&v, &excluded)| if v >= tau && !excluded { v } else { T::zero() })
        .collect();
    Ok(ProbabilityMap::from_unchecked(p_hat.with_data(data)?))
}

/// Runs `params.iterations` rounds. With zero rounds the exclusion is still applied.
pub fn enhance<T: Real>(p0: &ProbabilityMap<T>, params: &EnhanceParams, exclusion: &LabelMask) -> Result<ProbabilityMap<T>> {
    enhance_traced(p0, params, exclusion, |_, _, _| {})
}

/// Like [`enhance`], calling `observe(round, p_hat, p_next)` after every round.
pub fn enhance_traced<T: Real>(
    p0: &ProbabilityMap<T>,
    params: &EnhanceParams,
    exclusion: &LabelMask,
    mut observe: impl FnMut(usize, &ProbabilityMap<T>, &ProbabilityMap<T>),
) -> Result<ProbabilityMap<T>> {
    params.validate()?;
    p0.geometry().ensure_same(exclusion.geometry(), "exclusion mask")?;
    if params.iterations == 0 {
        let data = p0
            .data()
            .iter()
            .zip(exclusion.data())
            .map(|(&v, &x)| if x { T::zero() } else { v })
            .collect();
        return Ok(ProbabilityMap::from_unchecked(p0.with_data(data)?));
    }
    let mut p = p0.clone();
    for round in 0..params.iterations {
        let m = local_max_27(&p);
        let p_hat = geometric_update(&p, &m, params.lambda(round))?;
        let next = threshold_step(&p_hat, params.tau_percent, params.min_floor, exclusion)?;
        observe(round, &p_hat, &next);
        p = next;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Geometry, Volume3D};

    fn map(dims: [usize; 3], data: Vec<f64>) -> ProbabilityMap<f64> {
        ProbabilityMap::new(Volume3D::new(Geometry::axis_aligned(dims, [1.0; 3]).unwrap(), data).unwrap()).unwrap()
    }

    #[test]
    fn local_max_constant_and_impulse() {
        let c = map([4, 5, 3], vec![0.3; 60]);
        assert_eq!(local_max_27(&c), c);

        let mut d = vec![0.0; 125];
        d[2 + 5 * (2 + 5 * 2)] = 1.0;
        let m = local_max_27(&map([5, 5, 5], d));
        for idx in 0..125 {
            let [i, j, k] = m.geometry().coords(idx);
            let inside = (1..=3).contains(&i) && (1..=3).contains(&j) && (1..=3).contains(&k);
            assert_eq!(m.data()[idx], if inside { 1.0 } else { 0.0 });
        }

        let mut corner = vec![0.0; 27];
        corner[0] = 1.0;
        assert_eq!(local_max_27(&map([3, 3, 3], corner)).data().iter().filter(|v| **v == 1.0).count(), 8);
    }

    #[test]
    fn geometric_update_examples() {
        let p = map([3, 1, 1], vec![0.25, 0.0, 0.6]);
        let m = map([3, 1, 1], vec![1.0, 0.8, 0.6]);
        assert_eq!(geometric_update(&p, &m, 1.0).unwrap(), p);
        assert_eq!(geometric_update(&p, &m, 0.0).unwrap(), m);
        let half = geometric_update(&p, &m, 0.5).unwrap();
        assert!((half.data()[0] - 0.5).abs() < 1e-15);
        assert_eq!(half.data()[1], 0.0);
        assert!((half.data()[2] - 0.6).abs() < 1e-15);
        assert!(geometric_update(&p, &m, 1.5).is_err());
    }

    fn tenths() -> ProbabilityMap<f64> {
        map([12, 1, 1], (1..=10).map(|i| i as f64 / 10.0).chain([0.0, 0.0]).collect())
    }

    #[test]
    fn threshold_examples() {
        let p = tenths();
        let none = LabelMask::empty(p.geometry().clone());
        assert_eq!(threshold_step(&p, 5.0, 0.0, &none).unwrap(), p);

        let floored = threshold_step(&p, 5.0, 0.5, &none).unwrap();
        let kept: Vec<f64> = floored.data().iter().copied().filter(|v| *v > 0.0).collect();
        assert_eq!(kept, vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);

        let all = LabelMask::full(p.geometry().clone());
        assert!(threshold_step(&p, 5.0, 0.0, &all).unwrap().data().iter().all(|v| *v == 0.0));

        let zero = map([3, 1, 1], vec![0.0; 3]);
        let z = threshold_step(&zero, 5.0, 0.0, &LabelMask::empty(zero.geometry().clone())).unwrap();
        assert_eq!(z, zero);
    }

    #[test]
    fn zero_rounds_apply_only_exclusion() {
        let p = tenths();
        let none = LabelMask::empty(p.geometry().clone());
        let params = EnhanceParams { iterations: 0, ..Default::default() };
        assert_eq!(enhance(&p, &params, &none).unwrap(), p);
        let mut ex = none.clone();
        ex.data_mut()[9] = true;
        assert_eq!(enhance(&p, &params, &ex).unwrap().data()[9], 0.0);
    }

    #[test]
    fn isolated_voxel_never_grows() {
        let mut d = vec![0.0; 125];
        d[62] = 0.04;
        let p = map([5, 5, 5], d);
        let none = LabelMask::empty(p.geometry().clone());
        let params = EnhanceParams { iterations: 4, lambda_schedule: vec![0.5], tau_percent: 5.0, min_floor: 0.0 };
        let out = enhance(&p, &params, &none).unwrap();
        assert!((out.data()[62] - 0.04).abs() < 1e-15);
        assert_eq!(out.data().iter().filter(|v| **v > 0.0).count(), 1);
    }

    #[test]
    fn parameter_validation() {
        let bad = [
            EnhanceParams { lambda_schedule: vec![0.5, 0.5], ..Default::default() },
            EnhanceParams { lambda_schedule: vec![-0.1], ..Default::default() },
            EnhanceParams { tau_percent: 0.0, ..Default::default() },
            EnhanceParams { tau_percent: 100.0, ..Default::default() },
            EnhanceParams { min_floor: 2.0, ..Default::default() },
        ];
        for b in bad {
            assert!(b.validate().is_err(), "{b:?}");
        }
        let ok = EnhanceParams { iterations: 2, lambda_schedule: vec![0.2, 0.8], ..Default::default() };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.lambda(1), 0.8);
    }
}
