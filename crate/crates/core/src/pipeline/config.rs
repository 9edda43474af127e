use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::enhance::EnhanceParams;
use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::vessel::VesselnessOptions;
use crate::wall::{BicPenalty, GmmOptions};

/// Everything `run` needs. Every section has defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub masks: MaskConfig,
    #[serde(default)]
    pub hu: HuBounds,
    #[serde(default)]
    pub removal: RemovalConfig,
    #[serde(default)]
    pub gmm: WallConfig,
    #[serde(default)]
    pub vesselness: VesselnessOptions,
    #[serde(default)]
    pub enhance: EnhanceParams,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub dump: DumpConfig,
}

/// Where an organ mask comes from: its own NIfTI file, or a label in the
/// shared label volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrganSource {
    File(PathBuf),
    Label(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    /// Integer label volume used by [`OrganSource::Label`] entries.
    pub label_volume: Option<PathBuf>,
    pub organs: BTreeMap<String, OrganSource>,
    /// Organ names forming the intestine.
    pub bowel: Vec<String>,
    pub bowel_radius_vox: f64,
    pub organ_radius_vox: f64,
    /// Per-organ dilation radius overrides (voxels).
    pub radii: BTreeMap<String, f64>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            label_volume: None,
            organs: BTreeMap::new(),
            bowel: vec!["duodenum".into(), "small_bowel".into(), "colon".into()],
            bowel_radius_vox: 2.0,
            organ_radius_vox: 4.0,
            radii: BTreeMap::new(),
        }
    }
}

impl MaskConfig {
    pub fn is_bowel(&self, name: &str) -> bool {
        self.bowel.iter().any(|b| b == name)
    }

    pub fn radius(&self, name: &str) -> f64 {
        self.radii.get(name).copied().unwrap_or(if self.is_bowel(name) {
            self.bowel_radius_vox
        } else {
            self.organ_radius_vox
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HuBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for HuBounds {
    fn default() -> Self {
        HuBounds { lo: -200.0, hi: 350.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemovalConfig {
    /// Feathering of the organ removal edge.
    pub blur_sigma_mm: f64,
    /// Value written into removed organs (HU, before clipping).
    pub fill_hu: f64,
    /// Voxels above this HU form the body hull.
    pub body_threshold_hu: f64,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        RemovalConfig {
            blur_sigma_mm: 2.0,
            fill_hu: -200.0,
            body_threshold_hu: -500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WallConfig {
    pub bin_width: f64,
    /// Minimum number of intestine voxels for a fit.
    pub min_voxels: usize,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub variance_floor: Option<f64>,
    pub penalty: BicPenalty,
    /// Range of the diagnostic BIC scan.
    pub scan_k: [usize; 2],
}

impl Default for WallConfig {
    fn default() -> Self {
        let g = GmmOptions::default();
        WallConfig {
            bin_width: 1.0,
            min_voxels: 1000,
            k: g.k,
            seed: g.seed,
            tol: g.tol,
            max_iter: g.max_iter,
            restarts: g.restarts,
            variance_floor: g.variance_floor,
            penalty: BicPenalty::default(),
            scan_k: [1, 9],
        }
    }
}

impl WallConfig {
    pub fn gmm_options(&self) -> GmmOptions {
        GmmOptions {
            k: self.k,
            seed: self.seed,
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            variance_floor: self.variance_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub sigma_wall_mm: f64,
    pub roi_distance_mm: f64,
    pub theta: f64,
    /// Label volume of regions to score; each positive label is one region.
    /// Without it the automatic band around the wall is scored.
    pub roi: Option<PathBuf>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let f = FusionParams::default();
        FusionConfig {
            sigma_wall_mm: f.sigma_wall_mm,
            roi_distance_mm: f.roi_distance_mm,
            theta: f.theta,
            roi: None,
        }
    }
}

impl FusionConfig {
    pub fn params(&self) -> FusionParams {
        FusionParams {
            sigma_wall_mm: self.sigma_wall_mm,
            roi_distance_mm: self.roi_distance_mm,
            theta: self.theta,
        }
    }
}

/// Intermediate artifacts written by `run`, all off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DumpConfig {
    pub prep: bool,
    pub wall: bool,
    pub bic_scan: bool,
    pub vesselness: bool,
    pub per_scale: bool,
    pub enhance: bool,
    pub proximity: bool,
}

impl DumpConfig {
    pub fn all() -> Self {
        DumpConfig {
            prep: true,
            wall: true,
            bic_scan: true,
            vesselness: true,
            per_scale: true,
            enhance: true,
            proximity: true,
        }
    }
}

impl PipelineConfig {
    /// Minimal config over `input` with the given organ table; everything else default.
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>, organs: BTreeMap<String, OrganSource>) -> Self {
        PipelineConfig {
            input: input.into(),
            output_dir: output_dir.into(),
            masks: MaskConfig {
                organs,
                ..MaskConfig::default()
            },
            hu: HuBounds::default(),
            removal: RemovalConfig::default(),
            gmm: WallConfig::default(),
            vesselness: VesselnessOptions::default(),
            enhance: EnhanceParams::default(),
            fusion: FusionConfig::default(),
            dump: DumpConfig::default(),
        }
    }

    /// Parses a JSON config. Relative paths are resolved against the config
    /// file's directory, then the whole config is validated.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without resolving paths or validating.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input);
        fix(&mut self.output_dir);
        if let Some(p) = self.masks.label_volume.as_mut() {
            fix(p);
        }
        for src in self.masks.organs.values_mut() {
            if let OrganSource::File(p) = src {
                fix(p);
            }
        }
        if let Some(p) = self.fusion.roi.as_mut() {
            fix(p);
        }
    }

    /// Structural problems (missing files, bad organ table) are config errors;
    /// out-of-range numbers are parameter errors.
    pub fn validate(&self) -> Result<()> {
        let exists = |p: &Path, what: &str| {
            if p.is_file() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        exists(&self.input, "input volume")?;
        if let Some(p) = &self.masks.label_volume {
            exists(p, "label volume")?;
        }
        if self.masks.organs.is_empty() {
            return Err(Error::Config("organ table is empty".into()));
        }
        for (name, src) in &self.masks.organs {
            match src {
                OrganSource::File(p) => exists(p, &format!("mask for {name}"))?,
                OrganSource::Label(l) => {
                    if self.masks.label_volume.is_none() {
                        return Err(Error::Config(format!("{name} uses label {l} but no label_volume is set")));
                    }
                }
            }
        }
        if !self.masks.organs.keys().any(|n| self.masks.is_bowel(n)) {
            return Err(Error::Config(format!(
                "no intestine mask among organs; expected one of {:?}",
                self.masks.bowel
            )));
        }
        for name in self.masks.radii.keys() {
            if !self.masks.organs.contains_key(name) {
                return Err(Error::Config(format!("radius given for unknown organ {name}")));
            }
        }
        if let Some(p) = &self.fusion.roi {
            exists(p, "roi volume")?;
        }

        let radii = [self.masks.bowel_radius_vox, self.masks.organ_radius_vox]
            .into_iter()
            .chain(self.masks.radii.values().copied());
        for r in radii {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Parameter(format!("dilation radius {r} must be >= 0")));
            }
        }
        if !(self.hu.lo < self.hu.hi) {
            return Err(Error::Parameter(format!("HU bounds lo {} must be below hi {}", self.hu.lo, self.hu.hi)));
        }
        if !(self.removal.blur_sigma_mm >= 0.0 && self.removal.blur_sigma_mm.is_finite()) {
            return Err(Error::Parameter(format!("blur sigma {} must be >= 0", self.removal.blur_sigma_mm)));
        }
        let g = &self.gmm;
        if !(g.bin_width > 0.0 && g.bin_width.is_finite()) {
            return Err(Error::Parameter(format!("bin width {} must be positive", g.bin_width)));
        }
        if g.k < 2 {
            return Err(Error::Parameter(format!("wall estimation needs k >= 2, got {}", g.k)));
        }
        if !(g.tol > 0.0) || g.max_iter == 0 {
            return Err(Error::Parameter("gmm tol and max_iter must be positive".into()));
        }
        if g.scan_k[0] < 1 || g.scan_k[0] > g.scan_k[1] {
            return Err(Error::Parameter(format!("scan range {:?} invalid", g.scan_k)));
        }
        self.vesselness.validate()?;
        self.enhance.validate()?;
        self.fusion.params().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn organs() -> BTreeMap<String, OrganSource> {
        BTreeMap::from([
            ("small_bowel".to_string(), OrganSource::Label(1)),
            ("liver".to_string(), OrganSource::Label(2)),
        ])
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = PipelineConfig::from_json(
            r#"{"input": "ct.nii", "output_dir": "out", "masks": {"label_volume": "seg.nii", "organs": {"colon": 3, "liver": "liver.nii.gz"}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.hu, HuBounds { lo: -200.0, hi: 350.0 });
        assert_eq!(cfg.gmm.k, 4);
        assert_eq!(cfg.enhance.tau_percent, 5.0);
        assert_eq!(cfg.masks.organs["colon"], OrganSource::Label(3));
        assert_eq!(cfg.masks.organs["liver"], OrganSource::File("liver.nii.gz".into()));
        assert_eq!(cfg.masks.radius("colon"), 2.0);
        assert_eq!(cfg.masks.radius("liver"), 4.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_json(r#"{"input": "a", "output_dir": "b", "masks": {}, "extra": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = PipelineConfig::from_json(r#"{"input": "a", "output_dir": "b", "masks": {}, "gmm": {"kk": 4}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn inverted_hu_bounds_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let ct = dir.path().join("ct.nii");
        fs::write(&ct, b"x").unwrap();
        let mut cfg = PipelineConfig::new(&ct, dir.path(), organs());
        cfg.masks.label_volume = Some(ct.clone());
        cfg.validate().unwrap();
        cfg.hu = HuBounds { lo: 350.0, hi: -200.0 };
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
    }

    #[test]
    fn structural_problems_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ct = dir.path().join("ct.nii");
        fs::write(&ct, b"x").unwrap();
        let cfg = PipelineConfig::new(dir.path().join("missing.nii"), dir.path(), organs());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = PipelineConfig::new(&ct, dir.path(), organs());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "labels without label volume");
        let mut cfg = PipelineConfig::new(&ct, dir.path(), BTreeMap::from([("liver".into(), OrganSource::File(ct.clone()))]));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "no bowel");
        cfg.masks.organs.insert("colon".into(), OrganSource::File(ct.clone()));
        cfg.validate().unwrap();
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ct.nii"), b"x").unwrap();
        fs::write(dir.path().join("colon.nii"), b"x").unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"input": "ct.nii", "output_dir": "out", "masks": {"organs": {"colon": "colon.nii"}}}"#,
        )
        .unwrap();
        let cfg = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(cfg.input, dir.path().join("ct.nii"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
    }

    #[test]
    fn json_round_trip() {
        let cfg = PipelineConfig::new("a.nii", "out", organs());
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
