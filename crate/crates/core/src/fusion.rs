//! Wall proximity, vessel/wall fusion and region scoring.

use serde::{Deserialize, Serialize};

use crate::distance::squared_distance;
use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::scalar::Real;
use crate::volume::{gaussian_smooth, ops::percentile_nonzero_slice, ProbabilityMap, Volume3D};

/// Version tag written into every report.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionParams {
    pub sigma_wall_mm: f64,
    pub roi_distance_mm: f64,
    pub theta: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            sigma_wall_mm: 5.0,
            roi_distance_mm: 15.0,
            theta: 0.05,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_wall_mm > 0.0 && self.sigma_wall_mm.is_finite()) {
            return Err(Error::Parameter(format!("sigma_wall_mm {} must be positive", self.sigma_wall_mm)));
        }
        if !(self.roi_distance_mm > 0.0 && self.roi_distance_mm.is_finite()) {
            return Err(Error::Parameter(format!("roi_distance_mm {} must be positive", self.roi_distance_mm)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Parameter(format!("theta {} outside [0, 1]", self.theta)));
        }
        Ok(())
    }
}

fn nonempty_wall(wall: &LabelMask) -> Result<()> {
    if wall.none() {
        Err(Error::EmptyPopulation("wall mask is empty".into()))
    } else {
        Ok(())
    }
}

/// Wall mask convolved with a normalized Gaussian, before peak normalization.
/// Thick walls accumulate more kernel mass than thin ones.
pub fn proximity_raw<T: Real>(wall: &LabelMask, sigma_wall_mm: f64) -> Result<Volume3D<T>> {
    nonempty_wall(wall)?;
    gaussian_smooth(&wall.to_volume::<T>(), sigma_wall_mm)
}

/// [`proximity_raw`] divided by its global maximum, so the peak is exactly 1.
pub fn proximity_map<T: Real>(wall: &LabelMask, sigma_wall_mm: f64) -> Result<ProbabilityMap<T>> {
    let raw = proximity_raw::<T>(wall, sigma_wall_mm)?;
    let peak = raw
        .max_finite()
        .filter(|m| *m > T::zero())
        .ok_or_else(|| Error::EmptyPopulation("proximity map has no positive voxel".into()))?;
    Ok(ProbabilityMap::clamped(raw.map(|v| v / peak)))
}

/// Voxelwise product of vessel and proximity probabilities.
pub fn comb_map<T: Real>(vessel: &ProbabilityMap<T>, proximity: &ProbabilityMap<T>) -> Result<ProbabilityMap<T>> {
    vessel.geometry().ensure_same(proximity.geometry(), "comb fusion")?;
    let data = vessel.data().iter().zip(proximity.data()).map(|(a, b)| *a * *b).collect();
    Ok(ProbabilityMap::from_unchecked(vessel.with_data(data)?))
}

/// Voxels within `roi_distance_mm` (physical distance) of the wall, wall excluded.
pub fn auto_roi(wall: &LabelMask, roi_distance_mm: f64) -> Result<LabelMask> {
    nonempty_wall(wall)?;
    if !(roi_distance_mm > 0.0) {
        return Err(Error::Parameter(format!("roi distance {roi_distance_mm} must be positive")));
    }
    let g = wall.geometry();
    let d2 = squared_distance(wall.data(), g.dims(), g.spacing());
    let r2 = roi_distance_mm * roi_distance_mm * (1.0 + 1e-12);
    LabelMask::new(g.clone(), d2.into_iter().map(|d| d > 0.0 && d <= r2).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub id: u32,
    /// Mean comb probability over the region.
    pub score: f64,
    pub max: f64,
    pub voxels: usize,
    pub verdict: bool,
    /// Region sits where wall proximity is unusually high (bowel on all sides),
    /// which inflates the score.
    #[serde(default)]
    pub possible_enclosure_artifact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombReport {
    pub version: u32,
    pub regions: Vec<RegionScore>,
    pub theta: f64,
    pub sigma_wall_mm: f64,
    pub roi_distance_mm: f64,
    /// Largest comb probability anywhere in the volume.
    pub global_max: f64,
}

impl CombReport {
    pub fn any_positive(&self) -> bool {
        self.regions.iter().any(|r| r.verdict)
    }
}

/// Mean, max and count of `comb` over `roi`, summed in voxel-index order.
fn region_stats<T: Real>(comb: &ProbabilityMap<T>, roi: &LabelMask) -> Result<(f64, f64, usize)> {
    comb.geometry().ensure_same(roi.geometry(), "region score")?;
    let mut sum = 0.0f64;
    let mut max = 0.0f64;
    let mut n = 0usize;
    for (v, inside) in comb.data().iter().zip(roi.data()) {
        if *inside {
            let x = v.f64();
            sum += x;
            max = max.max(x);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyPopulation("region of interest is empty".into()));
    }
    Ok((sum / n as f64, max, n))
}

/// Scores a single region (id 1).
pub fn region_score<T: Real>(comb: &ProbabilityMap<T>, roi: &LabelMask, theta: f64) -> Result<CombReport> {
    let params = FusionParams {
        theta,
        ..FusionParams::default()
    };
    score_regions(comb, None, &[(1, roi.clone())], &params)
}

/// Scores every `(id, region)`. When `proximity` is given, regions whose mean
/// proximity exceeds the 99th percentile of the nonzero proximity values are
/// flagged as possible enclosure artifacts.
pub fn score_regions<T: Real>(
    comb: &ProbabilityMap<T>,
    proximity: Option<&ProbabilityMap<T>>,
    regions: &[(u32, LabelMask)],
    params: &FusionParams,
) -> Result<CombReport> {
    if !(0.0..=1.0).contains(&params.theta) {
        return Err(Error::Parameter(format!("theta {} outside [0, 1]", params.theta)));
    }
    if regions.is_empty() {
        return Err(Error::EmptyPopulation("no regions to score".into()));
    }
    let p99 = match proximity {
        Some(p) => {
            comb.geometry().ensure_same(p.geometry(), "proximity map")?;
            Some(percentile_nonzero_slice(p.data(), 99.0)?.f64())
        }
        None => None,
    };
    let mut out = Vec::with_capacity(regions.len());
    for (id, roi) in regions {
        let (score, max, voxels) = region_stats(comb, roi)?;
        let possible_enclosure_artifact = match (proximity, p99) {
            (Some(p), Some(cut)) => region_stats(p, roi)?.0 > cut,
            _ => false,
        };
        out.push(RegionScore {
            id: *id,
            score,
            max,
            voxels,
            verdict: score >= params.theta,
            possible_enclosure_artifact,
        });
    }
    Ok(CombReport {
        version: REPORT_VERSION,
        regions: out,
        theta: params.theta,
        sigma_wall_mm: params.sigma_wall_mm,
        roi_distance_mm: params.roi_distance_mm,
        global_max: comb.max_finite().map_or(0.0, |v| v.f64()),
    })
}

/// Splits an integer label volume into `(label, mask)` regions, one per
/// positive label in ascending order.
pub fn regions_from_labels<T: Real>(labels: &Volume3D<T>) -> Vec<(u32, LabelMask)> {
    let mut ids: Vec<u32> = labels
        .data()
        .iter()
        .filter_map(|v| v.round().to_i64())
        .filter(|v| *v > 0)
        .map(|v| v as u32)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| (id, LabelMask::from_label(labels, i64::from(id))))
        .collect()
}
