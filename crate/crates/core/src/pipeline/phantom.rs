//! Synthetic CT phantoms: a bowel segment with an enhancing wall, optional
//! vessels attached to it, organ blobs and additive Gaussian noise.
//!
//! Coordinates are in voxels; `spacing` only affects the written header.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::volume::nifti::{write_nifti_as, DataType};
use crate::volume::{Geometry, Volume3D};

/// Representable range of 12-bit CT stored as int16.
pub const HU_RANGE: (f64, f64) = (-1024.0, 3071.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub background_hu: f64,
    pub wall: Option<WallSpec>,
    pub vessels: Option<VesselArray>,
    pub organs: Vec<OrganBlob>,
    pub noise_sigma_hu: f64,
    pub seed: u64,
    /// Annotated region of interest, emitted as a label mask.
    pub roi: Option<BoxRegion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WallShape {
    /// Straight segment parallel to the z axis.
    Tube { center: [f64; 2], z_range: [f64; 2] },
    /// Ring in the z = center[2] plane.
    Torus { center: [f64; 3], major_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub shape: WallShape,
    pub lumen_radius: f64,
    pub thickness: f64,
    pub wall_hu: f64,
    pub lumen_hu: f64,
    /// Gas above this fraction of the lumen radius (air-fluid level);
    /// `None` for a fluid-filled lumen.
    #[serde(default)]
    pub gas_level: Option<f64>,
    #[serde(default = "default_gas_hu")]
    pub gas_hu: f64,
    /// Name of the emitted bowel mask (lumen plus wall).
    #[serde(default = "default_bowel_name")]
    pub name: String,
}

fn default_gas_hu() -> f64 {
    -700.0
}

fn default_bowel_name() -> String {
    "small_bowel".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Radial, leaving the outer wall surface.
    #[default]
    Perpendicular,
    /// Running alongside the wall.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselArray {
    pub count: usize,
    pub radius: f64,
    pub length: f64,
    /// Distance between neighbouring vessels along the wall.
    pub spacing: f64,
    pub hu: f64,
    #[serde(default)]
    pub orientation: Orientation,
    /// Array centre along the wall: z for a tube, angle in degrees for a torus.
    pub center: f64,
    /// In-plane direction the comb points to (degrees from +x). Tubes only;
    /// a torus always points outward.
    #[serde(default = "default_direction")]
    pub direction_deg: f64,
}

fn default_direction() -> f64 {
    -90.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrganBlob {
    pub name: String,
    pub center: [f64; 3],
    pub radii: [f64; 3],
    pub hu: f64,
}

/// Half-open voxel box `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Default for PhantomSpec {
    /// 128^3 bowel segment with an 8-vessel comb on its mesenteric side.
    fn default() -> Self {
        PhantomSpec {
            dims: [128; 3],
            spacing: [1.0; 3],
            background_hu: -100.0,
            wall: Some(WallSpec {
                shape: WallShape::Tube {
                    center: [64.0, 74.0],
                    z_range: [0.0, 128.0],
                },
                lumen_radius: 10.0,
                thickness: 3.0,
                wall_hu: 140.0,
                lumen_hu: 20.0,
                gas_level: Some(0.5),
                gas_hu: default_gas_hu(),
                name: default_bowel_name(),
            }),
            vessels: Some(VesselArray {
                count: 8,
                radius: 1.5,
                length: 24.0,
                spacing: 8.0,
                hu: 150.0,
                orientation: Orientation::Perpendicular,
                center: 64.0,
                direction_deg: default_direction(),
            }),
            organs: vec![OrganBlob {
                name: "kidney".into(),
                center: [100.0, 26.0, 40.0],
                radii: [12.0, 10.0, 14.0],
                hu: 160.0,
            }],
            noise_sigma_hu: 10.0,
            seed: 0,
            // Mesenteric side of the loop: the comb footprint out to 8 voxels
            // from the outer wall surface.
            roi: Some(BoxRegion {
                lo: [61, 53, 32],
                hi: [68, 61, 97],
            }),
        }
    }
}

impl PhantomSpec {
    /// Same scene without vessels (the control of a paired run).
    pub fn without_vessels(&self) -> Self {
        let mut s = self.clone();
        s.vessels = None;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Parameter(format!("phantom dims {:?} must be positive", self.dims)));
        }
        Geometry::axis_aligned(self.dims, self.spacing)?;
        let mut hus = vec![("background", self.background_hu)];
        if let Some(w) = &self.wall {
            hus.extend([("wall", w.wall_hu), ("lumen", w.lumen_hu), ("gas", w.gas_hu)]);
            if !(w.lumen_radius > 0.0 && w.thickness > 0.0) {
                return Err(Error::Parameter("wall lumen radius and thickness must be positive".into()));
            }
            self.check_wall_fits(w)?;
        }
        if let Some(v) = &self.vessels {
            hus.push(("vessel", v.hu));
            if !(v.radius > 0.0 && v.length > 0.0 && v.spacing >= 0.0) {
                return Err(Error::Parameter("vessel radius and length must be positive".into()));
            }
            if v.count > 0 && self.wall.is_none() {
                return Err(Error::Parameter("vessels are placed relative to a wall".into()));
            }
            for seg in self.vessel_segments() {
                for p in [seg.start, seg.end] {
                    self.check_inside(p, seg.radius, "vessel")?;
                }
            }
        }
        for o in &self.organs {
            hus.push(("organ", o.hu));
            if o.radii.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::Parameter(format!("organ {} radii must be positive", o.name)));
            }
            for a in 0..3 {
                let mut p = o.center;
                p[a] -= o.radii[a];
                self.check_inside(p, 0.0, &o.name)?;
                p[a] += 2.0 * o.radii[a];
                self.check_inside(p, 0.0, &o.name)?;
            }
        }
        for (what, hu) in hus {
            if !(HU_RANGE.0..=HU_RANGE.1).contains(&hu) {
                return Err(Error::Parameter(format!("{what} HU {hu} outside {HU_RANGE:?}")));
            }
        }
        if !(self.noise_sigma_hu >= 0.0 && self.noise_sigma_hu.is_finite()) {
            return Err(Error::Parameter(format!("noise sigma {} must be >= 0", self.noise_sigma_hu)));
        }
        if let Some(b) = &self.roi {
            if (0..3).any(|a| b.lo[a] >= b.hi[a] || b.hi[a] > self.dims[a]) {
                return Err(Error::Parameter(format!("roi box {b:?} is empty or exceeds the grid")));
            }
        }
        Ok(())
    }

    fn check_inside(&self, p: [f64; 3], margin: f64, what: &str) -> Result<()> {
        for a in 0..3 {
            let hi = self.dims[a] as f64 - 1.0;
            if p[a] - margin < -0.5 || p[a] + margin > hi + 0.5 {
                return Err(Error::Parameter(format!(
                    "{what} at {p:?} (margin {margin}) overflows the {:?} grid",
                    self.dims
                )));
            }
        }
        Ok(())
    }

    fn check_wall_fits(&self, w: &WallSpec) -> Result<()> {
        let outer = w.lumen_radius + w.thickness;
        match w.shape {
            WallShape::Tube { center, z_range } => {
                for a in 0..2 {
                    let mut p = [center[0], center[1], 0.0];
                    p[a] -= outer;
                    self.check_inside(p, 0.0, "tube wall")?;
                    p[a] += 2.0 * outer;
                    self.check_inside(p, 0.0, "tube wall")?;
                }
                if !(z_range[0] < z_range[1]) {
                    return Err(Error::Parameter(format!("tube z range {z_range:?} is empty")));
                }
            }
            WallShape::Torus { center, major_radius } => {
                if !(major_radius > outer) {
                    return Err(Error::Parameter("torus major radius must exceed the wall's outer radius".into()));
                }
                let r = major_radius + outer;
                self.check_inside([center[0], center[1], center[2]], 0.0, "torus")?;
                for a in 0..2 {
                    let mut p = center;
                    p[a] -= r;
                    self.check_inside(p, 0.0, "torus wall")?;
                    p[a] += 2.0 * r;
                    self.check_inside(p, 0.0, "torus wall")?;
                }
                let mut p = center;
                p[2] -= outer;
                self.check_inside(p, 0.0, "torus wall")?;
                p[2] += 2.0 * outer;
                self.check_inside(p, 0.0, "torus wall")?;
            }
        }
        Ok(())
    }

    /// Vessel centre segments, in array order.
    pub fn vessel_segments(&self) -> Vec<VesselSegment> {
        let (Some(w), Some(v)) = (&self.wall, &self.vessels) else {
            return Vec::new();
        };
        let outer = w.lumen_radius + w.thickness;
        let offset = |i: usize| (i as f64 - (v.count as f64 - 1.0) / 2.0) * v.spacing;
        (0..v.count)
            .map(|i| {
                let (start, end) = match (w.shape, v.orientation) {
                    (WallShape::Tube { center, .. }, orient) => {
                        let d = v.direction_deg.to_radians();
                        let n = [d.cos(), d.sin(), 0.0];
                        match orient {
                            Orientation::Perpendicular => {
                                let z = v.center + offset(i);
                                let s = [center[0] + outer * n[0], center[1] + outer * n[1], z];
                                (s, add(s, scale(n, v.length)))
                            }
                            Orientation::Parallel => {
                                // Fanned around the tube at a fixed gap, running along z.
                                let ring = outer + v.radius + 1.0;
                                let a = d + offset(i) / ring;
                                let p = [center[0] + ring * a.cos(), center[1] + ring * a.sin()];
                                let half = v.length / 2.0;
                                ([p[0], p[1], v.center - half], [p[0], p[1], v.center + half])
                            }
                        }
                    }
                    (WallShape::Torus { center, major_radius }, orient) => {
                        let ring = major_radius + outer;
                        let a = v.center.to_radians() + offset(i) / ring;
                        let n = [a.cos(), a.sin(), 0.0];
                        match orient {
                            Orientation::Perpendicular => {
                                let s = add(center, scale(n, ring));
                                (s, add(s, scale(n, v.length)))
                            }
                            Orientation::Parallel => {
                                let t = [-a.sin(), a.cos(), 0.0];
                                let mid = add(center, scale(n, ring + v.radius + 1.0));
                                (add(mid, scale(t, -v.length / 2.0)), add(mid, scale(t, v.length / 2.0)))
                            }
                        }
                    }
                };
                VesselSegment {
                    start,
                    end,
                    radius: v.radius,
                }
            })
            .collect()
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSegment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub radius: f64,
}

impl VesselSegment {
    fn distance2(&self, p: [f64; 3]) -> f64 {
        let d = sub(self.end, self.start);
        let len2 = dot(d, d);
        let t = if len2 > 0.0 {
            (dot(sub(p, self.start), d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = sub(p, add(self.start, scale(d, t)));
        dot(q, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tissue {
    Outside,
    Lumen,
    Gas,
    Wall,
}

impl WallSpec {
    fn classify(&self, p: [f64; 3]) -> Tissue {
        let (rho, height) = match self.shape {
            WallShape::Tube { center, z_range } => {
                if p[2] < z_range[0] || p[2] >= z_range[1] {
                    return Tissue::Outside;
                }
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                ((dx * dx + dy * dy).sqrt(), dy)
            }
            WallShape::Torus { center, major_radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let q = (dx * dx + dy * dy).sqrt() - major_radius;
                let dz = p[2] - center[2];
                ((q * q + dz * dz).sqrt(), dz)
            }
        };
        if rho < self.lumen_radius {
            match self.gas_level {
                Some(level) if height > level * self.lumen_radius => Tissue::Gas,
                _ => Tissue::Lumen,
            }
        } else if rho < self.lumen_radius + self.thickness {
            Tissue::Wall
        } else {
            Tissue::Outside
        }
    }
}

/// Generated scene: rounded HU volume, named masks and the manifest.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub ct: Volume3D<f64>,
    /// Bowel, organs, `wall_truth`, `vessels`, `vessel_centerlines` and `roi`
    /// (when annotated).
    pub masks: BTreeMap<String, LabelMask>,
    pub manifest: PhantomManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub spec: PhantomSpec,
    pub vessels: Vec<VesselSegment>,
    pub voxel_counts: BTreeMap<String, usize>,
    /// File name per artifact, relative to the output directory.
    pub files: BTreeMap<String, String>,
}

pub const CT_FILE: &str = "ct.nii.gz";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Rasterizes `spec`. Deterministic for a fixed seed.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let geometry = Geometry::axis_aligned(spec.dims, spec.spacing)?;
    let n = geometry.len();
    let mut hu = vec![spec.background_hu; n];
    let mut bowel = vec![false; n];
    let mut wall_truth = vec![false; n];
    let mut vessels = vec![false; n];
    let mut centerlines = vec![false; n];
    let segments = spec.vessel_segments();

    for idx in 0..n {
        let [i, j, k] = geometry.coords(idx);
        let p = [i as f64, j as f64, k as f64];
        let tissue = spec.wall.as_ref().map_or(Tissue::Outside, |w| w.classify(p));
        if let Some(w) = &spec.wall {
            match tissue {
                Tissue::Outside => {}
                Tissue::Lumen => hu[idx] = w.lumen_hu,
                Tissue::Gas => hu[idx] = w.gas_hu,
                Tissue::Wall => {
                    hu[idx] = w.wall_hu;
                    wall_truth[idx] = true;
                }
            }
            bowel[idx] = tissue != Tissue::Outside;
        }
        if tissue == Tissue::Outside {
            if let Some(v) = &spec.vessels {
                if segments.iter().any(|s| s.distance2(p) <= s.radius * s.radius) {
                    hu[idx] = v.hu;
                    vessels[idx] = true;
                }
            }
        }
    }

    let mut masks = BTreeMap::new();
    for o in &spec.organs {
        let mut m = vec![false; n];
        for (idx, slot) in m.iter_mut().enumerate() {
            let c = geometry.coords(idx);
            let r2: f64 = (0..3).map(|a| ((c[a] as f64 - o.center[a]) / o.radii[a]).powi(2)).sum();
            if r2 <= 1.0 && !bowel[idx] {
                *slot = true;
                hu[idx] = o.hu;
            }
        }
        masks.insert(o.name.clone(), LabelMask::new(geometry.clone(), m)?);
    }

    for s in &segments {
        let len = dot(sub(s.end, s.start), sub(s.end, s.start)).sqrt();
        let steps = (len * 4.0).ceil().max(1.0) as usize;
        for t in 0..=steps {
            let p = add(s.start, scale(sub(s.end, s.start), t as f64 / steps as f64));
            let v = [p[0].round(), p[1].round(), p[2].round()];
            if (0..3).all(|a| v[a] >= 0.0 && (v[a] as usize) < spec.dims[a]) {
                let idx = geometry.index(v[0] as usize, v[1] as usize, v[2] as usize);
                if vessels[idx] {
                    centerlines[idx] = true;
                }
            }
        }
    }

    if spec.noise_sigma_hu > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma_hu).map_err(|e| Error::Parameter(e.to_string()))?;
        for v in hu.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in hu.iter_mut() {
        *v = v.round().clamp(HU_RANGE.0, HU_RANGE.1);
    }

    if let Some(w) = &spec.wall {
        masks.insert(w.name.clone(), LabelMask::new(geometry.clone(), bowel)?);
    }
    masks.insert("wall_truth".into(), LabelMask::new(geometry.clone(), wall_truth)?);
    masks.insert("vessels".into(), LabelMask::new(geometry.clone(), vessels)?);
    masks.insert("vessel_centerlines".into(), LabelMask::new(geometry.clone(), centerlines)?);
    if let Some(b) = &spec.roi {
        let roi = LabelMask::from_fn(geometry.clone(), |i, j, k| {
            let c = [i, j, k];
            (0..3).all(|a| c[a] >= b.lo[a] && c[a] < b.hi[a])
        });
        masks.insert("roi".into(), roi);
    }

    let mut files = BTreeMap::from([("ct".to_string(), CT_FILE.to_string())]);
    files.extend(masks.keys().map(|name| (name.clone(), mask_file(name))));
    let manifest = PhantomManifest {
        spec: spec.clone(),
        vessels: segments,
        voxel_counts: masks.iter().map(|(k, m)| (k.clone(), m.count())).collect(),
        files,
    };
    Ok(Phantom {
        ct: Volume3D::new(geometry, hu)?,
        masks,
        manifest,
    })
}

pub fn mask_file(name: &str) -> String {
    format!("{name}.nii.gz")
}

/// Writes the CT (int16), every mask (uint8) and `manifest.json` into `dir`.
pub fn write_phantom(phantom: &Phantom, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_nifti_as(&phantom.ct, dir.join(CT_FILE), DataType::Int16)?;
    for (name, m) in &phantom.masks {
        write_nifti_as(&m.to_volume::<f64>(), dir.join(mask_file(name)), DataType::UInt8)?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&phantom.manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_scene() -> PhantomSpec {
        PhantomSpec {
            dims: [16, 12, 10],
            wall: None,
            vessels: None,
            organs: vec![],
            noise_sigma_hu: 0.0,
            roi: None,
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn empty_scene_is_constant() {
        let p = make_phantom(&empty_scene()).unwrap();
        assert!(p.ct.data().iter().all(|v| *v == -100.0));
    }

    #[test]
    fn centerline_of_axis_aligned_vessel() {
        let mut spec = empty_scene();
        spec.dims = [32, 48, 32];
        spec.wall = Some(WallSpec {
            shape: WallShape::Tube {
                center: [16.0, 40.0],
                z_range: [0.0, 32.0],
            },
            lumen_radius: 3.0,
            thickness: 2.0,
            wall_hu: 140.0,
            lumen_hu: 20.0,
            gas_level: None,
            gas_hu: -700.0,
            name: "colon".into(),
        });
        spec.vessels = Some(VesselArray {
            count: 1,
            radius: 2.0,
            length: 20.0,
            spacing: 0.0,
            hu: 200.0,
            orientation: Orientation::Perpendicular,
            center: 16.0,
            direction_deg: -90.0,
        });
        let p = make_phantom(&spec).unwrap();
        let cl = &p.masks["vessel_centerlines"];
        // Analytic axis: x = 16, z = 16, y from the outer wall (35) to 15.
        let expect = LabelMask::from_fn(cl.geometry().clone(), |i, j, k| i == 16 && k == 16 && (15..=35).contains(&j));
        let expect = expect.and(&p.masks["vessels"]).unwrap();
        assert_eq!(cl, &expect);
        assert_eq!(p.ct.get(16, 20, 16), 200.0);
        // Radius 2: the 4-neighbours in the cross-section are in, the diagonal at distance sqrt(8) is out.
        assert!(p.masks["vessels"].get(18, 20, 16) && !p.masks["vessels"].get(18, 20, 18));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = PhantomSpec {
            dims: [40, 40, 24],
            wall: Some(WallSpec {
                shape: WallShape::Tube {
                    center: [20.0, 24.0],
                    z_range: [0.0, 24.0],
                },
                ..PhantomSpec::default().wall.unwrap()
            }),
            vessels: Some(VesselArray {
                count: 2,
                length: 6.0,
                center: 12.0,
                ..PhantomSpec::default().vessels.unwrap()
            }),
            organs: vec![],
            roi: None,
            ..PhantomSpec::default()
        };
        let a = make_phantom(&spec).unwrap();
        let b = make_phantom(&spec).unwrap();
        assert_eq!(a.ct, b.ct);
        let c = make_phantom(&PhantomSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.ct, c.ct);
    }

    #[test]
    fn overflow_is_rejected() {
        let mut spec = PhantomSpec::default();
        spec.vessels.as_mut().unwrap().length = 80.0;
        assert!(matches!(make_phantom(&spec), Err(Error::Parameter(_))));
        let mut spec = PhantomSpec::default();
        spec.wall.as_mut().unwrap().wall_hu = 5000.0;
        assert!(matches!(spec.validate(), Err(Error::Parameter(_))));
    }

    #[test]
    fn default_scene_validates() {
        let spec = PhantomSpec::default();
        spec.validate().unwrap();
        let segs = spec.vessel_segments();
        assert_eq!(segs.len(), 8);
        assert_eq!(segs[0].start[1], 61.0);
        assert!(spec.without_vessels().vessel_segments().is_empty());
    }

    #[test]
    fn torus_ring() {
        let spec = PhantomSpec {
            dims: [48, 48, 16],
            wall: Some(WallSpec {
                shape: WallShape::Torus {
                    center: [24.0, 24.0, 8.0],
                    major_radius: 12.0,
                },
                lumen_radius: 3.0,
                thickness: 2.0,
                ..PhantomSpec::default().wall.unwrap()
            }),
            vessels: None,
            organs: vec![],
            noise_sigma_hu: 0.0,
            roi: None,
            ..PhantomSpec::default()
        };
        let p = make_phantom(&spec).unwrap();
        assert_eq!(p.ct.get(36, 24, 8), 20.0);
        assert_eq!(p.ct.get(40, 24, 8), 140.0);
        assert_eq!(p.ct.get(24, 24, 8), -100.0);
    }
}
