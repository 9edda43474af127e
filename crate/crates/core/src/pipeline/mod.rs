//! End-to-end orchestration, configuration and synthetic phantoms.

pub mod config;
pub mod phantom;
pub mod stages;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

pub use config::PipelineConfig;
pub use phantom::{make_phantom, write_phantom, Phantom, PhantomSpec};

use crate::error::Error;
use crate::fusion::CombReport;
use crate::volume::nifti::{read_nifti, write_nifti, write_nifti_as, DataType};
use crate::volume::Volume3D;
use crate::LabelMask;
use stages::*;

/// Artifact file names, shared by `run` and the stage subcommands.
pub mod files {
    pub const INTESTINE: &str = "intestine_mask.nii.gz";
    pub const INTESTINE_CT: &str = "intestine_ct.nii.gz";
    pub const REMOVAL: &str = "removal_mask.nii.gz";
    pub const ANALYSIS: &str = "analysis_mask.nii.gz";
    pub const EXCLUSION: &str = "exclusion_mask.nii.gz";
    pub const HISTOGRAM: &str = "histogram.csv";
    pub const WALL_MODEL: &str = "wall_model.json";
    pub const WALL_THRESHOLD: &str = "wall_threshold.json";
    pub const WALL: &str = "wall_mask.nii.gz";
    pub const BIC: &str = "bic.csv";
    pub const VESSELNESS: &str = "vesselness.nii.gz";
    pub const ENHANCED: &str = "enhanced.nii.gz";
    pub const PROXIMITY: &str = "proximity.nii.gz";
    pub const COMB: &str = "comb.nii.gz";
    pub const REPORT: &str = "report.json";

    pub fn per_scale(scale_mm: f64) -> String {
        format!("vesselness_s{scale_mm}mm.nii.gz")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Prep,
    Wall,
    Vesselness,
    Enhance,
    Fuse,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Prep => "prep",
            Stage::Wall => "wall",
            Stage::Vesselness => "vesselness",
            Stage::Enhance => "enhance",
            Stage::Fuse => "fuse",
        })
    }
}

/// A failed stage, with the last artifact that was fully written before it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub last_artifact: Option<PathBuf>,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)?;
        match &self.last_artifact {
            Some(p) => write!(f, " (last artifact written: {})", p.display()),
            None => write!(f, " (no artifact written)"),
        }
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

/// Writes into one directory and remembers what it wrote.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> crate::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ArtifactWriter { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn last(&self) -> Option<&PathBuf> {
        self.written.last()
    }

    fn done(&mut self, path: PathBuf) -> crate::Result<()> {
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    pub fn volume(&mut self, name: &str, v: &Volume3D<f64>) -> crate::Result<()> {
        let path = self.dir.join(name);
        write_nifti(v, &path)?;
        self.done(path)
    }

    pub fn mask(&mut self, name: &str, m: &LabelMask) -> crate::Result<()> {
        let path = self.dir.join(name);
        write_nifti_as(&m.to_volume::<f64>(), &path, DataType::UInt8)?;
        self.done(path)
    }

    pub fn text(&mut self, name: &str, text: &str) -> crate::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.done(path)
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> crate::Result<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
        self.text(name, &text)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: CombReport,
    pub artifacts: Vec<PathBuf>,
}

/// Runs prep, wall, vesselness, enhancement and fusion in order, writing the
/// comb map, the report and whichever intermediates `cfg.dump` selects.
///
/// Maps handed from one stage to the next are rounded to float32, as they are
/// when the stage subcommands exchange files, so both routes give identical
/// bytes.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome, StageError> {
    let mut out = ArtifactWriter::new(&cfg.output_dir).map_err(|source| StageError {
        stage: Stage::Load,
        last_artifact: None,
        source,
    })?;
    let report = run_stages(cfg, &mut out).map_err(|(stage, source)| StageError {
        stage,
        last_artifact: out.last().cloned(),
        source,
    })?;
    Ok(RunOutcome {
        report,
        artifacts: out.written().to_vec(),
    })
}

fn run_stages(cfg: &PipelineConfig, out: &mut ArtifactWriter) -> Result<CombReport, (Stage, Error)> {
    let dump = cfg.dump;

    let ct: Volume3D<f64> = {
        let at = at(Stage::Load);
        cfg.validate().map_err(at)?;
        read_nifti(&cfg.input).map_err(at)?
    };

    let prep = {
        let organs = load_organs(&cfg.masks, &ct).map_err(at(Stage::Load))?;
        info!("loaded {:?} volume and {} organ masks", ct.dims(), organs.len());
        let at = at(Stage::Prep);
        let p = prepare(&ct, &organs, &cfg.masks, &cfg.removal).map_err(at)?;
        let p = Prepared {
            intestine_ct: as_stored(&p.intestine_ct),
            ..p
        };
        if dump.prep {
            out.mask(files::INTESTINE, &p.intestine).map_err(at)?;
            out.volume(files::INTESTINE_CT, &p.intestine_ct).map_err(at)?;
            out.mask(files::REMOVAL, &p.removal).map_err(at)?;
            out.mask(files::ANALYSIS, &p.analysis).map_err(at)?;
            out.mask(files::EXCLUSION, &p.exclusion).map_err(at)?;
        }
        p
    };

    let wall = {
        let at = at(Stage::Wall);
        let w = estimate_wall(&prep.intestine_ct, &cfg.gmm).map_err(at)?;
        info!(
            "wall threshold {:.2} HU ({} voxels), means {:?}",
            w.threshold.value,
            w.mask.count(),
            w.model.means
        );
        if dump.wall {
            out.text(files::HISTOGRAM, &w.histogram.to_csv()).map_err(at)?;
            out.json(files::WALL_MODEL, &w.model_report(&cfg.gmm)).map_err(at)?;
            out.json(files::WALL_THRESHOLD, &w.threshold_report()).map_err(at)?;
            out.mask(files::WALL, &w.mask).map_err(at)?;
        }
        if dump.bic_scan {
            let (curve, knee) = scan_components(&w.histogram, &cfg.gmm).map_err(at)?;
            info!("BIC knee at k = {knee:?}");
            out.text(files::BIC, &curve.to_csv()).map_err(at)?;
        }
        w
    };

    let vessel = {
        let at = at(Stage::Vesselness);
        let (p0, per_scale) = vessel_map(
            &ct,
            &prep.removal,
            Some(&prep.analysis),
            cfg.hu,
            &cfg.removal,
            &cfg.vesselness,
        )
        .map_err(at)?;
        let p0 = map_as_stored(&p0);
        if dump.vesselness {
            out.volume(files::VESSELNESS, &p0).map_err(at)?;
        }
        if dump.per_scale {
            for (s, m) in cfg.vesselness.scales_mm.iter().zip(&per_scale) {
                out.volume(&files::per_scale(*s), m).map_err(at)?;
            }
        }
        p0
    };

    let enhanced = {
        let at = at(Stage::Enhance);
        let e = map_as_stored(&enhance_map(&vessel, &cfg.enhance, &prep.exclusion).map_err(at)?);
        if dump.enhance {
            out.volume(files::ENHANCED, &e).map_err(at)?;
        }
        e
    };

    let at = at(Stage::Fuse);
    let roi = read_roi(cfg.fusion.roi.as_deref()).map_err(at)?;
    let fused = fuse(&enhanced, &wall.mask, roi.as_ref(), &cfg.fusion.params()).map_err(at)?;
    if dump.proximity {
        out.volume(files::PROXIMITY, &fused.proximity).map_err(at)?;
    }
    out.volume(files::COMB, &fused.comb).map_err(at)?;
    out.json(files::REPORT, &fused.report).map_err(at)?;
    for r in &fused.report.regions {
        info!(
            "region {}: score {:.5} over {} voxels -> {}",
            r.id,
            r.score,
            r.voxels,
            if r.verdict { "comb sign" } else { "no comb sign" }
        );
    }
    Ok(fused.report)
}

fn at(stage: Stage) -> impl Fn(Error) -> (Stage, Error) + Copy {
    move |e| (stage, e)
}
