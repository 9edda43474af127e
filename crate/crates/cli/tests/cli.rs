use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use autocomb::pipeline::phantom::{BoxRegion, OrganBlob, VesselArray, WallShape};
use autocomb::pipeline::{files, PhantomSpec};

fn autocomb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autocomb"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = autocomb(args);
    assert!(
        out.status.success(),
        "autocomb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_spec() -> PhantomSpec {
    let d = PhantomSpec::default();
    let mut wall = d.wall.clone().unwrap();
    wall.shape = WallShape::Tube {
        center: [32.0, 40.0],
        z_range: [0.0, 48.0],
    };
    wall.lumen_radius = 7.0;
    PhantomSpec {
        dims: [64, 64, 48],
        wall: Some(wall),
        vessels: Some(VesselArray {
            count: 4,
            length: 12.0,
            center: 24.0,
            ..d.vessels.clone().unwrap()
        }),
        organs: vec![OrganBlob {
            name: "liver".into(),
            center: [52.0, 12.0, 20.0],
            radii: [7.0, 6.0, 8.0],
            hu: 160.0,
        }],
        roi: Some(BoxRegion {
            lo: [29, 22, 8],
            hi: [36, 30, 40],
        }),
        ..d
    }
}

/// Writes the small phantom and a config that runs on it.
fn setup(dir: &Path) -> PathBuf {
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&small_spec()).unwrap()).unwrap();
    ok(&["phantom", "--spec", s(&spec_path), "--out", s(&dir.join("ph"))]);
    let cfg = serde_json::json!({
        "input": "ph/ct.nii.gz",
        "output_dir": "run",
        "masks": {"organs": {"small_bowel": "ph/small_bowel.nii.gz", "liver": "ph/liver.nii.gz"}},
        "fusion": {"roi": "ph/roi.nii.gz"},
    });
    let cfg_path = dir.join("cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    cfg_path
}

#[test]
fn chained_stages_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = setup(dir);
    ok(&["run", "--config", s(&cfg), "--dump-all"]);

    let ph = dir.join("ph");
    let st = dir.join("stages");
    ok(&[
        "prep",
        "--in",
        s(&ph.join("ct.nii.gz")),
        "--organ",
        &format!("small_bowel={}", s(&ph.join("small_bowel.nii.gz"))),
        "--organ",
        &format!("liver={}", s(&ph.join("liver.nii.gz"))),
        "--out",
        s(&st),
    ]);
    ok(&["wall", "--in", s(&st.join(files::INTESTINE_CT)), "--out", s(&st)]);
    ok(&[
        "vesselness",
        "--in",
        s(&ph.join("ct.nii.gz")),
        "--removal",
        s(&st.join(files::REMOVAL)),
        "--analysis",
        s(&st.join(files::ANALYSIS)),
        "--out",
        s(&st.join(files::VESSELNESS)),
    ]);
    ok(&[
        "enhance",
        "--in",
        s(&st.join(files::VESSELNESS)),
        "--exclude",
        s(&st.join(files::EXCLUSION)),
        "--out",
        s(&st.join(files::ENHANCED)),
    ]);
    ok(&[
        "fuse",
        "--in",
        s(&st.join(files::ENHANCED)),
        "--wall",
        s(&st.join(files::WALL)),
        "--roi",
        s(&ph.join("roi.nii.gz")),
        "--proximity",
        "--out",
        s(&st),
    ]);

    let run = dir.join("run");
    for name in [
        files::INTESTINE,
        files::INTESTINE_CT,
        files::REMOVAL,
        files::ANALYSIS,
        files::EXCLUSION,
        files::WALL_MODEL,
        files::WALL,
        files::VESSELNESS,
        files::ENHANCED,
        files::PROXIMITY,
        files::COMB,
        files::REPORT,
    ] {
        assert_eq!(fs::read(run.join(name)).unwrap(), fs::read(st.join(name)).unwrap(), "{name} differs");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join(files::REPORT)).unwrap()).unwrap();
    assert!(report["regions"][0]["verdict"].as_bool().unwrap());
}

#[test]
fn wall_model_means_are_sorted_and_scan_has_nine_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = setup(dir);
    ok(&["run", "--config", s(&cfg), "--dump-all"]);
    let run = dir.join("run");

    let model: serde_json::Value = serde_json::from_slice(&fs::read(run.join(files::WALL_MODEL)).unwrap()).unwrap();
    let means: Vec<f64> = model["means"].as_array().unwrap().iter().map(|m| m.as_f64().unwrap()).collect();
    assert_eq!(means.len(), 4);
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");

    let csv = dir.join("bic.csv");
    ok(&[
        "bic-scan",
        "--in",
        s(&run.join(files::INTESTINE_CT)),
        "--kmin",
        "1",
        "--kmax",
        "9",
        "--out",
        s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,bic");
    assert_eq!(lines.len(), 10);
    assert_eq!(fs::read(run.join(files::BIC)).unwrap(), text.as_bytes());
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = setup(dir);
    let first = ok(&["run", "--config", s(&cfg)]);
    let comb = fs::read(dir.join("run").join(files::COMB)).unwrap();
    let second = ok(&["run", "--config", s(&cfg)]);
    assert_eq!(comb, fs::read(dir.join("run").join(files::COMB)).unwrap());
    assert_eq!(first.stdout, second.stdout);

    ok(&["phantom", "--spec", s(&dir.join("spec.json")), "--out", s(&dir.join("again"))]);
    for f in ["ct.nii.gz", "small_bowel.nii.gz", "manifest.json"] {
        assert_eq!(fs::read(dir.join("ph").join(f)).unwrap(), fs::read(dir.join("again").join(f)).unwrap());
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = setup(dir);

    // Unknown key: config error.
    let bad = dir.join("bad.json");
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&cfg).unwrap()).unwrap();
    v["surprise"] = serde_json::json!(1);
    fs::write(&bad, v.to_string()).unwrap();
    assert_eq!(autocomb(&["run", "--config", s(&bad)]).status.code(), Some(2));

    // Inverted HU window: parameter error, nothing written.
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&cfg).unwrap()).unwrap();
    v["hu"] = serde_json::json!({"lo": 350, "hi": -200});
    v["output_dir"] = serde_json::json!("never");
    fs::write(&bad, v.to_string()).unwrap();
    let out = autocomb(&["run", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HU bounds"));
    assert!(!dir.join("never").join(files::COMB).exists());

    // Unreadable NIfTI: I/O class.
    let junk = dir.join("junk.nii");
    fs::write(&junk, b"not a nifti").unwrap();
    let out = autocomb(&["enhance", "--in", s(&junk), "--out", s(&dir.join("e.nii"))]);
    assert_eq!(out.status.code(), Some(3));

    // Wall mask on another grid: alignment.
    let ph = dir.join("ph");
    let other = dir.join("other");
    let mut spec = small_spec();
    spec.dims = [64, 64, 40];
    spec.wall = Some(autocomb::pipeline::phantom::WallSpec {
        shape: WallShape::Tube {
            center: [32.0, 40.0],
            z_range: [0.0, 40.0],
        },
        ..spec.wall.unwrap()
    });
    spec.vessels = None;
    spec.roi = None;
    fs::write(dir.join("other.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    ok(&["phantom", "--spec", s(&dir.join("other.json")), "--out", s(&other)]);
    let out = autocomb(&[
        "fuse",
        "--in",
        s(&ph.join("vessels.nii.gz")),
        "--wall",
        s(&other.join("wall_truth.nii.gz")),
        "--out",
        s(&dir.join("f")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn stage_failure_names_last_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = setup(dir);
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&cfg).unwrap()).unwrap();
    // More voxels than the intestine holds: the wall stage fails after prep dumped its masks.
    v["gmm"] = serde_json::json!({"min_voxels": 100000000});
    v["dump"] = serde_json::json!({"prep": true});
    let bad = dir.join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let out = autocomb(&["run", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage wall"), "{err}");
    assert!(err.contains(files::EXCLUSION), "{err}");
}
