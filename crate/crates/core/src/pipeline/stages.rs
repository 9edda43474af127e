//! In-memory stage functions shared by `run` and the per-stage subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{HuBounds, MaskConfig, OrganSource, RemovalConfig, WallConfig};
use crate::enhance::{enhance, EnhanceParams};
use crate::error::{Error, Result};
use crate::fusion::{auto_roi, comb_map, proximity_map, regions_from_labels, score_regions, CombReport, FusionParams};
use crate::mask::{apply_mask, dilate, merge, removal_mask, soft_remove, LabelMask};
use crate::vessel::{vesselness_with_scales, VesselnessOptions};
use crate::volume::{clip_rescale, nifti::read_nifti, Histogram, ProbabilityMap, Volume3D};
use crate::wall::{bic, bic_scan, build_histogram, fit_gmm, knee_of_curve, wall_mask, wall_threshold, BicCurve, GmmModel, WallThreshold};

type Vol = Volume3D<f64>;
type Map = ProbabilityMap<f64>;

/// Rounds every voxel to float32, matching what a written and re-read
/// artifact holds.
pub fn as_stored(v: &Vol) -> Vol {
    v.map(|x| x as f32 as f64)
}

pub fn map_as_stored(p: &Map) -> Map {
    ProbabilityMap::from_unchecked(as_stored(p))
}

/// Reads every organ in `masks` on the grid of `reference`, in name order.
pub fn load_organs(masks: &MaskConfig, reference: &Vol) -> Result<Vec<(String, LabelMask)>> {
    let labels: Option<Vol> = masks.label_volume.as_ref().map(read_nifti).transpose()?;
    if let Some(l) = &labels {
        reference.geometry().ensure_same(l.geometry(), "label volume")?;
    }
    masks
        .organs
        .iter()
        .map(|(name, src)| {
            let m = match src {
                OrganSource::File(p) => {
                    let v: Vol = read_nifti(p)?;
                    reference.geometry().ensure_same(v.geometry(), &format!("mask {name}"))?;
                    LabelMask::from_nonzero(&v)
                }
                OrganSource::Label(l) => {
                    let v = labels
                        .as_ref()
                        .ok_or_else(|| Error::Config(format!("{name} uses a label but no label volume is set")))?;
                    LabelMask::from_label(v, *l)
                }
            };
            Ok((name.clone(), m))
        })
        .collect()
}

/// Masks derived from the segmentation.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Dilated bowel masks, merged, minus the dilated other organs.
    pub intestine: LabelMask,
    /// CT restricted to `intestine`, NaN elsewhere.
    pub intestine_ct: Vol,
    /// Dilated non-bowel organs.
    pub removal: LabelMask,
    /// Body hull minus `removal`; sets the vesselness normalizer.
    pub analysis: LabelMask,
    /// `removal` plus everything outside the body hull.
    pub exclusion: LabelMask,
}

pub fn prepare(ct: &Vol, organs: &[(String, LabelMask)], masks: &MaskConfig, removal: &RemovalConfig) -> Result<Prepared> {
    let g = ct.geometry();
    for (name, m) in organs {
        g.ensure_same(m.geometry(), &format!("mask {name}"))?;
    }
    let bowel: Vec<LabelMask> = organs
        .iter()
        .filter(|(n, _)| masks.is_bowel(n))
        .map(|(n, m)| dilate(m, masks.radius(n)))
        .collect::<Result<_>>()?;
    if bowel.is_empty() {
        return Err(Error::Config(format!("no intestine mask among organs; expected one of {:?}", masks.bowel)));
    }
    let others: Vec<(&LabelMask, f64)> = organs
        .iter()
        .filter(|(n, _)| !masks.is_bowel(n))
        .map(|(n, m)| (m, masks.radius(n)))
        .collect();
    let removal_m = removal_mask(g, &others)?;
    let intestine = merge(&bowel)?.and_not(&removal_m)?;
    let intestine_ct = apply_mask(ct, &intestine)?;
    let body = LabelMask::new(
        g.clone(),
        ct.data().iter().map(|v| *v > removal.body_threshold_hu).collect(),
    )?;
    let analysis = body.and_not(&removal_m)?;
    let exclusion = merge([&removal_m, &body.not()])?;
    Ok(Prepared {
        intestine,
        intestine_ct,
        removal: removal_m,
        analysis,
        exclusion,
    })
}

/// Fitted model with its information criterion, as written to `wall_model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallModelReport {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub penalty: crate::wall::BicPenalty,
    pub n: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold_hu: f64,
    pub degenerate: bool,
    pub wall_voxels: usize,
}

#[derive(Debug, Clone)]
pub struct WallEstimate {
    pub histogram: Histogram<f64>,
    pub model: GmmModel<f64>,
    pub threshold: WallThreshold<f64>,
    pub mask: LabelMask,
}

impl WallEstimate {
    pub fn model_report(&self, cfg: &WallConfig) -> WallModelReport {
        let m = &self.model;
        WallModelReport {
            k: m.k,
            weights: m.weights.clone(),
            means: m.means.clone(),
            variances: m.variances.clone(),
            log_likelihood: m.log_likelihood,
            bic: bic(m, self.histogram.total(), cfg.penalty),
            penalty: cfg.penalty,
            n: self.histogram.total(),
            iterations: m.iterations,
            converged: m.converged,
        }
    }

    pub fn threshold_report(&self) -> ThresholdReport {
        ThresholdReport {
            threshold_hu: self.threshold.value,
            degenerate: self.threshold.degenerate,
            wall_voxels: self.mask.count(),
        }
    }
}

pub fn intestine_histogram(intestine_ct: &Vol, cfg: &WallConfig) -> Result<Histogram<f64>> {
    build_histogram(intestine_ct, cfg.bin_width, cfg.min_voxels)
}

/// Histogram, k-component fit, threshold and wall mask of the intestine volume.
pub fn estimate_wall(intestine_ct: &Vol, cfg: &WallConfig) -> Result<WallEstimate> {
    let histogram = intestine_histogram(intestine_ct, cfg)?;
    let model = fit_gmm(&histogram, &cfg.gmm_options())?;
    let threshold = wall_threshold(&model)?;
    let mask = wall_mask(intestine_ct, threshold.value)?;
    if mask.none() {
        return Err(Error::EmptyPopulation(format!("no voxel at or above wall threshold {}", threshold.value)));
    }
    Ok(WallEstimate {
        histogram,
        model,
        threshold,
        mask,
    })
}

/// BIC over `cfg.scan_k` and its knee.
pub fn scan_components(hist: &Histogram<f64>, cfg: &WallConfig) -> Result<(BicCurve<f64>, Option<usize>)> {
    let curve = bic_scan(hist, cfg.scan_k[0], cfg.scan_k[1], &cfg.gmm_options(), cfg.penalty)?;
    let knee = if curve.ks.len() >= 3 {
        Some(knee_of_curve(&curve)?)
    } else {
        None
    };
    Ok((curve, knee))
}

/// Organ removal, HU clipping and rescaling: the vesselness input.
pub fn vessel_input(ct: &Vol, removal: &LabelMask, hu: HuBounds, cfg: &RemovalConfig) -> Result<Vol> {
    if !(hu.lo < hu.hi) {
        return Err(Error::Parameter(format!("HU bounds lo {} must be below hi {}", hu.lo, hu.hi)));
    }
    let removed = soft_remove(ct, removal, cfg.blur_sigma_mm, cfg.fill_hu)?;
    clip_rescale(&removed, hu.lo, hu.hi)
}

/// Multiscale vesselness of the prepared CT and the per-scale maps.
pub fn vessel_map(
    ct: &Vol,
    removal: &LabelMask,
    analysis: Option<&LabelMask>,
    hu: HuBounds,
    cfg: &RemovalConfig,
    opts: &VesselnessOptions,
) -> Result<(Map, Vec<Map>)> {
    opts.validate()?;
    let input = vessel_input(ct, removal, hu, cfg)?;
    vesselness_with_scales(&input, opts, analysis)
}

pub fn enhance_map(p0: &Map, params: &EnhanceParams, exclusion: &LabelMask) -> Result<Map> {
    enhance(p0, params, exclusion)
}

#[derive(Debug, Clone)]
pub struct Fused {
    pub proximity: Map,
    pub comb: Map,
    pub report: CombReport,
}

/// Proximity, comb map and scores. `roi_labels` regions take precedence over
/// the automatic band around the wall.
pub fn fuse(enhanced: &Map, wall: &LabelMask, roi_labels: Option<&Vol>, params: &FusionParams) -> Result<Fused> {
    params.validate()?;
    enhanced.geometry().ensure_same(wall.geometry(), "wall mask")?;
    let proximity = proximity_map(wall, params.sigma_wall_mm)?;
    let comb = comb_map(enhanced, &proximity)?;
    let regions = match roi_labels {
        Some(l) => {
            enhanced.geometry().ensure_same(l.geometry(), "roi volume")?;
            let r = regions_from_labels(l);
            if r.is_empty() {
                return Err(Error::EmptyPopulation("roi volume has no positive label".into()));
            }
            r
        }
        None => vec![(1, auto_roi(wall, params.roi_distance_mm)?)],
    };
    let report = score_regions(&comb, Some(&proximity), &regions, params)?;
    Ok(Fused { proximity, comb, report })
}

pub fn read_roi(path: Option<&Path>) -> Result<Option<Vol>> {
    path.map(read_nifti).transpose()
}
