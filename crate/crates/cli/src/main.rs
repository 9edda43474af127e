use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use autocomb::enhance::EnhanceParams;
use autocomb::fusion::FusionParams;
use autocomb::pipeline::config::{HuBounds, MaskConfig, OrganSource, RemovalConfig, WallConfig};
use autocomb::pipeline::stages::*;
use autocomb::pipeline::{files, make_phantom, run_pipeline, write_phantom, ArtifactWriter, PhantomSpec, PipelineConfig, StageError};
use autocomb::vessel::VesselnessOptions;
use autocomb::volume::nifti::{read_nifti, write_nifti};
use autocomb::wall::BicPenalty;
use autocomb::{Error, LabelMask, ProbMap, Volume};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

#[derive(Parser)]
#[command(name = "autocomb", version, about = "Comb-sign detection on CT enterography volumes")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write every intermediate artifact regardless of the config.
        #[arg(long)]
        dump_all: bool,
    },
    /// Generate a synthetic phantom (CT, masks, manifest).
    Phantom {
        /// JSON phantom spec; the built-in comb phantom when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Drop the vessels (control phantom).
        #[arg(long)]
        no_vessels: bool,
    },
    /// Build intestine, removal, analysis and exclusion masks.
    Prep(PrepArgs),
    /// Fit the intensity mixture and threshold the wall.
    Wall(WallArgs),
    /// Multiscale vesselness of the organ-removed, clipped CT.
    Vesselness(VesselArgs),
    /// Iterative neighbourhood enhancement of a vessel map.
    Enhance(EnhanceArgs),
    /// Wall proximity, comb map and region scores.
    Fuse(FuseArgs),
    /// BIC over a range of component counts.
    BicScan(BicArgs),
}

#[derive(Args)]
struct PrepArgs {
    /// CT volume (HU).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Organ mask file, `name=path`. Repeatable.
    #[arg(long = "organ", value_parser = parse_pair::<PathBuf>)]
    organs: Vec<(String, PathBuf)>,
    /// Integer label volume for `--label` entries.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Organ label in the label volume, `name=int`. Repeatable.
    #[arg(long = "label", value_parser = parse_pair::<i64>)]
    label_ids: Vec<(String, i64)>,
    /// Dilation radius override in voxels, `name=r`. Repeatable.
    #[arg(long = "radius", value_parser = parse_pair::<f64>)]
    radii: Vec<(String, f64)>,
    /// Organ names that form the intestine.
    #[arg(long, value_delimiter = ',')]
    bowel: Option<Vec<String>>,
    #[arg(long)]
    body_hu: Option<f64>,
}

#[derive(Args)]
struct GmmArgs {
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    min_voxels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, value_enum)]
    penalty: Option<Penalty>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Penalty {
    /// k ln N
    LiteralK,
    /// (3k - 1) ln N
    FullParams,
}

impl GmmArgs {
    fn config(&self) -> WallConfig {
        let d = WallConfig::default();
        WallConfig {
            bin_width: self.bin_width.unwrap_or(d.bin_width),
            min_voxels: self.min_voxels.unwrap_or(d.min_voxels),
            seed: self.seed.unwrap_or(d.seed),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            restarts: self.restarts.unwrap_or(d.restarts),
            penalty: match self.penalty {
                Some(Penalty::LiteralK) => BicPenalty::LiteralK,
                Some(Penalty::FullParams) => BicPenalty::FullParams,
                None => d.penalty,
            },
            ..d
        }
    }
}

#[derive(Args)]
struct WallArgs {
    /// Intestine-masked CT (NaN outside the intestine).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    gmm: GmmArgs,
    /// Also write the BIC curve over k = 1..9.
    #[arg(long)]
    bic: bool,
}

#[derive(Args)]
struct BicArgs {
    /// Intestine-masked CT.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV output (`k,bic`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 9)]
    kmax: usize,
    #[command(flatten)]
    gmm: GmmArgs,
}

#[derive(Args)]
struct VesselArgs {
    /// CT volume (HU).
    #[arg(long = "in")]
    input: PathBuf,
    /// Vessel probability map.
    #[arg(long)]
    out: PathBuf,
    /// Organs to remove before filtering.
    #[arg(long)]
    removal: Option<PathBuf>,
    /// Voxels that set the response normalizer.
    #[arg(long)]
    analysis: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long)]
    tau_cut: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hu_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hu_hi: Option<f64>,
    #[arg(long)]
    blur: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fill: Option<f64>,
    /// Directory for one map per scale.
    #[arg(long)]
    per_scale: Option<PathBuf>,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    /// One value, or one per iteration (comma separated).
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    tau_percent: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Voxels forced to zero after every round.
    #[arg(long)]
    exclude: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Enhanced vessel map.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    wall: PathBuf,
    /// Output directory (comb map and report).
    #[arg(long)]
    out: PathBuf,
    /// Label volume of regions to score.
    #[arg(long)]
    roi: Option<PathBuf>,
    #[arg(long)]
    sigma_wall: Option<f64>,
    #[arg(long)]
    roi_distance: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Also write the proximity map.
    #[arg(long)]
    proximity: bool,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(String, T), String>
where
    T::Err: std::fmt::Display,
{
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let value = value.parse().map_err(|e| format!("{name}: {e}"))?;
    Ok((name.to_string(), value))
}

enum Failure {
    Core(Error),
    Stage(StageError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Run { config, dump_all } => run(&config, dump_all),
        Command::Phantom {
            spec,
            out,
            seed,
            no_vessels,
        } => phantom(spec.as_deref(), &out, seed, no_vessels),
        Command::Prep(a) => prep(a),
        Command::Wall(a) => wall(a),
        Command::Vesselness(a) => vesselness(a),
        Command::Enhance(a) => enhance(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::BicScan(a) => bic_scan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Stage(e)) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(config: &Path, dump_all: bool) -> CliResult {
    let mut cfg = PipelineConfig::from_file(config)?;
    if dump_all {
        cfg.dump = autocomb::pipeline::config::DumpConfig::all();
    }
    let outcome = run_pipeline(&cfg).map_err(Failure::Stage)?;
    println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes"));
    Ok(())
}

fn phantom(spec: Option<&Path>, out: &Path, seed: Option<u64>, no_vessels: bool) -> CliResult {
    let mut spec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<PhantomSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => PhantomSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if no_vessels {
        spec = spec.without_vessels();
    }
    let p = make_phantom(&spec)?;
    write_phantom(&p, out)?;
    info!("phantom written to {}", out.display());
    Ok(())
}

fn read_mask(path: &Path, reference: &Volume) -> autocomb::Result<LabelMask> {
    let v: Volume = read_nifti(path)?;
    reference.geometry().ensure_same(v.geometry(), &path.display().to_string())?;
    Ok(LabelMask::from_nonzero(&v))
}

fn read_map(path: &Path) -> autocomb::Result<ProbMap> {
    ProbMap::new(read_nifti(path)?)
}

fn prep(a: PrepArgs) -> CliResult {
    let ct: Volume = read_nifti(&a.input)?;
    let mut organs: BTreeMap<String, OrganSource> = a.organs.into_iter().map(|(n, p)| (n, OrganSource::File(p))).collect();
    organs.extend(a.label_ids.into_iter().map(|(n, l)| (n, OrganSource::Label(l))));
    let d = MaskConfig::default();
    let masks = MaskConfig {
        label_volume: a.labels,
        organs,
        bowel: a.bowel.unwrap_or(d.bowel),
        radii: a.radii.into_iter().collect(),
        ..d
    };
    let removal = RemovalConfig {
        body_threshold_hu: a.body_hu.unwrap_or(RemovalConfig::default().body_threshold_hu),
        ..RemovalConfig::default()
    };
    let loaded = load_organs(&masks, &ct)?;
    let p = prepare(&ct, &loaded, &masks, &removal)?;
    let mut out = ArtifactWriter::new(&a.out)?;
    out.mask(files::INTESTINE, &p.intestine)?;
    out.volume(files::INTESTINE_CT, &p.intestine_ct)?;
    out.mask(files::REMOVAL, &p.removal)?;
    out.mask(files::ANALYSIS, &p.analysis)?;
    out.mask(files::EXCLUSION, &p.exclusion)?;
    Ok(())
}

fn wall(a: WallArgs) -> CliResult {
    let mut cfg = a.gmm.config();
    if let Some(k) = a.k {
        cfg.k = k;
    }
    let v: Volume = read_nifti(&a.input)?;
    let w = estimate_wall(&v, &cfg)?;
    let mut out = ArtifactWriter::new(&a.out)?;
    out.text(files::HISTOGRAM, &w.histogram.to_csv())?;
    out.json(files::WALL_MODEL, &w.model_report(&cfg))?;
    out.json(files::WALL_THRESHOLD, &w.threshold_report())?;
    out.mask(files::WALL, &w.mask)?;
    if a.bic {
        let (curve, knee) = scan_components(&w.histogram, &cfg)?;
        info!("BIC knee at k = {knee:?}");
        out.text(files::BIC, &curve.to_csv())?;
    }
    info!("wall threshold {:.3} HU, {} wall voxels", w.threshold.value, w.mask.count());
    Ok(())
}

fn bic_scan(a: BicArgs) -> CliResult {
    let cfg = WallConfig {
        scan_k: [a.kmin, a.kmax],
        ..a.gmm.config()
    };
    let v: Volume = read_nifti(&a.input)?;
    let hist = intestine_histogram(&v, &cfg)?;
    let (curve, knee) = scan_components(&hist, &cfg)?;
    std::fs::write(&a.out, curve.to_csv()).map_err(|e| Error::Io {
        path: Some(a.out.clone()),
        source: e,
    })?;
    info!("BIC knee at k = {knee:?}");
    Ok(())
}

fn vesselness(a: VesselArgs) -> CliResult {
    let ct: Volume = read_nifti(&a.input)?;
    let removal = match &a.removal {
        Some(p) => read_mask(p, &ct)?,
        None => LabelMask::empty(ct.geometry().clone()),
    };
    let analysis = a.analysis.as_deref().map(|p| read_mask(p, &ct)).transpose()?;
    let (dh, dr, dv) = (HuBounds::default(), RemovalConfig::default(), VesselnessOptions::default());
    let hu = HuBounds {
        lo: a.hu_lo.unwrap_or(dh.lo),
        hi: a.hu_hi.unwrap_or(dh.hi),
    };
    let removal_cfg = RemovalConfig {
        blur_sigma_mm: a.blur.unwrap_or(dr.blur_sigma_mm),
        fill_hu: a.fill.unwrap_or(dr.fill_hu),
        ..dr
    };
    let opts = VesselnessOptions {
        scales_mm: a.scales.unwrap_or(dv.scales_mm),
        tau_cut: a.tau_cut.unwrap_or(dv.tau_cut),
    };
    let (map, per_scale) = vessel_map(&ct, &removal, analysis.as_ref(), hu, &removal_cfg, &opts)?;
    write_nifti(&map, &a.out)?;
    if let Some(dir) = &a.per_scale {
        let mut out = ArtifactWriter::new(dir)?;
        for (s, m) in opts.scales_mm.iter().zip(&per_scale) {
            out.volume(&files::per_scale(*s), m)?;
        }
    }
    Ok(())
}

fn enhance(a: EnhanceArgs) -> CliResult {
    let p0 = read_map(&a.input)?;
    let d = EnhanceParams::default();
    let params = EnhanceParams {
        iterations: a.iters.unwrap_or(d.iterations),
        lambda_schedule: a.lambda.unwrap_or(d.lambda_schedule),
        tau_percent: a.tau_percent.unwrap_or(d.tau_percent),
        min_floor: a.floor.unwrap_or(d.min_floor),
    };
    let exclusion = match &a.exclude {
        Some(p) => read_mask(p, &p0)?,
        None => LabelMask::empty(p0.geometry().clone()),
    };
    let e = enhance_map(&p0, &params, &exclusion)?;
    write_nifti(&e, &a.out)?;
    Ok(())
}

fn fuse_cmd(a: FuseArgs) -> CliResult {
    let enhanced = read_map(&a.input)?;
    let wall = read_mask(&a.wall, &enhanced)?;
    let roi = read_roi(a.roi.as_deref())?;
    let d = FusionParams::default();
    let params = FusionParams {
        sigma_wall_mm: a.sigma_wall.unwrap_or(d.sigma_wall_mm),
        roi_distance_mm: a.roi_distance.unwrap_or(d.roi_distance_mm),
        theta: a.theta.unwrap_or(d.theta),
    };
    let f = fuse(&enhanced, &wall, roi.as_ref(), &params)?;
    let mut out = ArtifactWriter::new(&a.out)?;
    if a.proximity {
        out.volume(files::PROXIMITY, &f.proximity)?;
    }
    out.volume(files::COMB, &f.comb)?;
    out.json(files::REPORT, &f.report)?;
    println!("{}", serde_json::to_string_pretty(&f.report).expect("report serializes"));
    Ok(())
}
