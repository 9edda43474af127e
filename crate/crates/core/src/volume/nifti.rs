//! NIfTI-1 single-file reader and writer.
//!
//! Reads `.nii` / `.nii.gz` (and `.hdr`/`.img` pairs) with int16, uint8,
//! int32, float32 or float64 payloads. Writes little-endian NIfTI-1 with a
//! 348-byte header, a zeroed 4-byte extension flag and the payload at offset 352.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{diagonal_affine, Geometry, Volume3D};
use crate::error::{Error, Result};
use crate::scalar::Real;

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

mod off {
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const CAL_MAX: usize = 124;
    pub const CAL_MIN: usize = 128;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// Voxel storage types handled by this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::UInt8 => 2,
            DataType::Int16 => 4,
            DataType::Int32 => 8,
            DataType::Float32 => 16,
            DataType::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::UInt8,
            4 => DataType::Int16,
            8 => DataType::Int32,
            16 => DataType::Float32,
            64 => DataType::Float64,
            other => return Err(Error::Unsupported(format!("datatype code {other}"))),
        })
    }

    pub fn size(self) -> usize {
        match self {
            DataType::UInt8 => 1,
            DataType::Int16 => 2,
            DataType::Int32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    if is_gz(path) {
        MultiGzDecoder::new(file)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
    } else {
        file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    }
    Ok(buf)
}

/// Parsed subset of a NIfTI-1 header.
#[derive(Debug, Clone)]
struct Header {
    big_endian: bool,
    dims: [usize; 3],
    datatype: DataType,
    pixdim: [f32; 8],
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    qform_code: i16,
    sform_code: i16,
    quatern: [f32; 3],
    qoffset: [f32; 3],
    srow: [[f32; 4]; 3],
    paired: bool,
}

struct Fields<'a> {
    buf: &'a [u8],
    big: bool,
}

impl Fields<'_> {
    fn i16(&self, at: usize) -> i16 {
        if self.big {
            BigEndian::read_i16(&self.buf[at..])
        } else {
            LittleEndian::read_i16(&self.buf[at..])
        }
    }

    fn f32(&self, at: usize) -> f32 {
        if self.big {
            BigEndian::read_f32(&self.buf[at..])
        } else {
            LittleEndian::read_f32(&self.buf[at..])
        }
    }
}

fn parse_header(buf: &[u8]) -> Result<Header> {
    if buf.len() < HEADER_SIZE {
        return Err(Error::Format(format!("header truncated at {} bytes", buf.len())));
    }
    let magic = &buf[off::MAGIC..off::MAGIC + 4];
    let paired = match magic {
        b"n+1\0" => false,
        b"ni1\0" => true,
        _ => return Err(Error::Format(format!("bad magic {:?}", String::from_utf8_lossy(magic)))),
    };
    let big = match (LittleEndian::read_i32(buf), BigEndian::read_i32(buf)) {
        (348, _) => false,
        (_, 348) => true,
        (n, _) => return Err(Error::Format(format!("sizeof_hdr is {n}, expected 348"))),
    };
    let f = Fields { buf, big };

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = f.i16(off::DIM + 2 * i);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("dim[0] = {ndim} out of range")));
    }
    let mut dims = [1usize; 3];
    for a in 0..3 {
        if (a as i16) < ndim {
            let d = dim[a + 1];
            if d < 1 {
                return Err(Error::Format(format!("dim[{}] = {d}", a + 1)));
            }
            dims[a] = d as usize;
        }
    }
    if (4..=ndim as usize).any(|a| dim[a] > 1) {
        return Err(Error::Unsupported(format!("non-spatial dimensions {:?}", &dim[4..=ndim as usize])));
    }

    let datatype = DataType::from_code(f.i16(off::DATATYPE))?;
    let bitpix = f.i16(off::BITPIX);
    if bitpix != 0 && bitpix as usize != 8 * datatype.size() {
        return Err(Error::Format(format!("bitpix {bitpix} inconsistent with {datatype:?}")));
    }

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f.f32(off::PIXDIM + 4 * i);
    }
    let vox_offset = f.f32(off::VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= 0.0) {
        return Err(Error::Format(format!("vox_offset {vox_offset}")));
    }
    let vox_offset = if paired { vox_offset as usize } else { (vox_offset as usize).max(HEADER_SIZE) };

    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = f.f32(off::SROW_X + 16 * r + 4 * c);
        }
    }

    Ok(Header {
        big_endian: big,
        dims,
        datatype,
        pixdim,
        vox_offset,
        scl_slope: f.f32(off::SCL_SLOPE),
        scl_inter: f.f32(off::SCL_INTER),
        qform_code: f.i16(off::QFORM_CODE),
        sform_code: f.i16(off::SFORM_CODE),
        quatern: std::array::from_fn(|i| f.f32(off::QUATERN_B + 4 * i)),
        qoffset: std::array::from_fn(|i| f.f32(off::QOFFSET_X + 4 * i)),
        srow,
        paired,
    })
}

/// qform quaternion + offsets to a voxel-to-world matrix.
fn quatern_to_affine(h: &Header, spacing: [f64; 3]) -> [[f64; 4]; 4] {
    let [mut b, mut c, mut d] = h.quatern.map(f64::from);
    let mut a = 1.0 - (b * b + c * c + d * d);
    if a < 1e-7 {
        let s = 1.0 / (b * b + c * c + d * d).sqrt();
        b *= s;
        c *= s;
        d *= s;
        a = 0.0;
    } else {
        a = a.sqrt();
    }
    let qfac = if h.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let [dx, dy, dz] = [spacing[0], spacing[1], spacing[2] * qfac];
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        m[i][0] = r[i][0] * dx;
        m[i][1] = r[i][1] * dy;
        m[i][2] = r[i][2] * dz;
        m[i][3] = f64::from(h.qoffset[i]);
    }
    m[3][3] = 1.0;
    m
}

fn decode<T: Real>(raw: &[u8], h: &Header, n: usize) -> Vec<T> {
    let size = h.datatype.size();
    let big = h.big_endian;
    let slope = f64::from(h.scl_slope);
    let inter = f64::from(h.scl_inter);
    let scale = slope != 0.0 && slope.is_finite() && inter.is_finite();
    (0..n)
        .map(|i| {
            let b = &raw[i * size..(i + 1) * size];
            let v = match (h.datatype, big) {
                (DataType::UInt8, _) => f64::from(b[0]),
                (DataType::Int16, false) => f64::from(LittleEndian::read_i16(b)),
                (DataType::Int16, true) => f64::from(BigEndian::read_i16(b)),
                (DataType::Int32, false) => f64::from(LittleEndian::read_i32(b)),
                (DataType::Int32, true) => f64::from(BigEndian::read_i32(b)),
                (DataType::Float32, false) => f64::from(LittleEndian::read_f32(b)),
                (DataType::Float32, true) => f64::from(BigEndian::read_f32(b)),
                (DataType::Float64, false) => LittleEndian::read_f64(b),
                (DataType::Float64, true) => BigEndian::read_f64(b),
            };
            T::c(if scale { v * slope + inter } else { v })
        })
        .collect()
}

fn image_path_for(hdr: &Path) -> PathBuf {
    let name = hdr.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let img = if let Some(stem) = name.strip_suffix(".hdr.gz") {
        format!("{stem}.img.gz")
    } else if let Some(stem) = name.strip_suffix(".hdr") {
        format!("{stem}.img")
    } else {
        format!("{name}.img")
    };
    hdr.with_file_name(img)
}

/// Reads a NIfTI-1 volume, applying `scl_slope`/`scl_inter` when the slope is nonzero.
///
/// The affine comes from the sform when `sform_code > 0`, else the qform when
/// `qform_code > 0`, else `diag(pixdim)`.
pub fn read_nifti<T: Real>(path: impl AsRef<Path>) -> Result<Volume3D<T>> {
    let path = path.as_ref();
    let buf = read_file(path)?;
    let h = parse_header(&buf)?;

    let spacing: [f64; 3] = std::array::from_fn(|a| f64::from(h.pixdim[a + 1]).abs());
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Format(format!("pixdim spacing {spacing:?} not positive")));
    }
    let affine = if h.sform_code > 0 {
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..4 {
                m[r][c] = f64::from(h.srow[r][c]);
            }
        }
        m[3][3] = 1.0;
        m
    } else if h.qform_code > 0 {
        quatern_to_affine(&h, spacing)
    } else {
        diagonal_affine(spacing)
    };
    let geometry = Geometry::new(h.dims, spacing, affine).map_err(|e| Error::Format(e.to_string()))?;

    let n = geometry.len();
    let nbytes = n * h.datatype.size();
    let img_buf;
    let payload: &[u8] = if h.paired {
        img_buf = read_file(&image_path_for(path))?;
        &img_buf
    } else {
        &buf
    };
    let start = h.vox_offset;
    if payload.len() < start + nbytes {
        return Err(Error::io(
            path,
            io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("data section truncated: need {} bytes, have {}", start + nbytes, payload.len()),
            ),
        ));
    }
    let data = decode(&payload[start..start + nbytes], &h, n);
    Volume3D::new(geometry, data)
}

/// Writes `vol` as float32 NIfTI-1 (gzip-compressed when the path ends in `.gz`).
pub fn write_nifti<T: Real>(vol: &Volume3D<T>, path: impl AsRef<Path>) -> Result<()> {
    write_nifti_as(vol, path, DataType::Float32)
}

/// Writes `vol` with the requested storage type. Integer types round to nearest
/// and saturate; NaN is stored as 0.
pub fn write_nifti_as<T: Real>(vol: &Volume3D<T>, path: impl AsRef<Path>, dtype: DataType) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(vol, dtype);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = io::BufWriter::new(file);
    if is_gz(path) {
        let mut enc = GzEncoder::new(w, Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish()
            .and_then(|mut inner| inner.flush())
            .map_err(|e| Error::io(path, e))?;
    } else {
        w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Serializes header and payload into one buffer.
pub fn encode<T: Real>(vol: &Volume3D<T>, dtype: DataType) -> Vec<u8> {
    let g = vol.geometry();
    let n = g.len();
    let mut buf = vec![0u8; VOX_OFFSET + n * dtype.size()];
    let h = &mut buf[..VOX_OFFSET];

    LittleEndian::write_i32(&mut h[0..], HEADER_SIZE as i32);
    h[38] = b'r'; // regular
    let d = g.dims();
    let dim: [i16; 8] = [3, d[0] as i16, d[1] as i16, d[2] as i16, 1, 1, 1, 1];
    for (i, v) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[off::DIM + 2 * i..], *v);
    }
    LittleEndian::write_i16(&mut h[off::DATATYPE..], dtype.code());
    LittleEndian::write_i16(&mut h[off::BITPIX..], 8 * dtype.size() as i16);
    let s = g.spacing();
    let pixdim = [1.0f32, s[0] as f32, s[1] as f32, s[2] as f32, 0.0, 0.0, 0.0, 0.0];
    for (i, v) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[off::PIXDIM + 4 * i..], *v);
    }
    LittleEndian::write_f32(&mut h[off::VOX_OFFSET..], VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[off::SCL_SLOPE..], 1.0);
    LittleEndian::write_f32(&mut h[off::SCL_INTER..], 0.0);
    h[off::XYZT_UNITS] = 2; // mm
    let lo = vol.min_finite().map_or(0.0, Real::f64) as f32;
    let hi = vol.max_finite().map_or(0.0, Real::f64) as f32;
    LittleEndian::write_f32(&mut h[off::CAL_MAX..], hi);
    LittleEndian::write_f32(&mut h[off::CAL_MIN..], lo);
    let descrip = b"autocomb";
    h[off::DESCRIP..off::DESCRIP + descrip.len()].copy_from_slice(descrip);
    LittleEndian::write_i16(&mut h[off::QFORM_CODE..], 0);
    LittleEndian::write_i16(&mut h[off::SFORM_CODE..], 1);
    let a = g.affine();
    for r in 0..3 {
        for c in 0..4 {
            LittleEndian::write_f32(&mut h[off::SROW_X + 16 * r + 4 * c..], a[r][c] as f32);
        }
    }
    h[off::MAGIC..off::MAGIC + 4].copy_from_slice(b"n+1\0");

    let body = &mut buf[VOX_OFFSET..];
    for (i, v) in vol.data().iter().enumerate() {
        let x = v.f64();
        let b = &mut body[i * dtype.size()..];
        match dtype {
            DataType::UInt8 => b[0] = saturate(x, 0.0, 255.0) as u8,
            DataType::Int16 => LittleEndian::write_i16(b, saturate(x, i16::MIN as f64, i16::MAX as f64) as i16),
            DataType::Int32 => LittleEndian::write_i32(b, saturate(x, i32::MIN as f64, i32::MAX as f64) as i32),
            DataType::Float32 => LittleEndian::write_f32(b, x as f32),
            DataType::Float64 => LittleEndian::write_f64(b, x),
        }
    }
    buf
}

fn saturate(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.round().clamp(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled 2x2x2 float32 file with values 0..7.
    fn minimal_file(slope: f32, inter: f32, magic: &[u8; 4]) -> Vec<u8> {
        let mut b = vec![0u8; 352 + 32];
        LittleEndian::write_i32(&mut b[0..], 348);
        for (i, d) in [3i16, 2, 2, 2, 1, 1, 1, 1].iter().enumerate() {
            LittleEndian::write_i16(&mut b[40 + 2 * i..], *d);
        }
        LittleEndian::write_i16(&mut b[70..], 16);
        LittleEndian::write_i16(&mut b[72..], 32);
        for (i, p) in [1.0f32, 1.0, 1.0, 1.0].iter().enumerate() {
            LittleEndian::write_f32(&mut b[76 + 4 * i..], *p);
        }
        LittleEndian::write_f32(&mut b[108..], 352.0);
        LittleEndian::write_f32(&mut b[112..], slope);
        LittleEndian::write_f32(&mut b[116..], inter);
        b[344..348].copy_from_slice(magic);
        for i in 0..8 {
            LittleEndian::write_f32(&mut b[352 + 4 * i..], i as f32);
        }
        b
    }

    fn write_tmp(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn reads_identity_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.nii", &minimal_file(1.0, 0.0, b"n+1\0"));
        let v: Volume3D<f64> = read_nifti(&p).unwrap();
        assert_eq!(v.dims(), [2, 2, 2]);
        assert_eq!(v.data(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(v.geometry().affine(), &diagonal_affine([1.0; 3]));
    }

    #[test]
    fn applies_slope_and_intercept() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.nii", &minimal_file(2.0, -1000.0, b"n+1\0"));
        let v: Volume3D<f64> = read_nifti(&p).unwrap();
        let expect: Vec<f64> = (0..8).map(|i| 2.0 * i as f64 - 1000.0).collect();
        assert_eq!(v.data(), expect.as_slice());
    }

    #[test]
    fn zero_slope_means_raw_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.nii", &minimal_file(0.0, 5.0, b"n+1\0"));
        let v: Volume3D<f64> = read_nifti(&p).unwrap();
        assert_eq!(v.data()[7], 7.0);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.nii", &minimal_file(1.0, 0.0, b"XXX\0"));
        assert!(matches!(read_nifti::<f64>(&p), Err(Error::Format(_))));
    }

    #[test]
    fn unsupported_datatype() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = minimal_file(1.0, 0.0, b"n+1\0");
        LittleEndian::write_i16(&mut b[70..], 128); // RGB24
        LittleEndian::write_i16(&mut b[72..], 24);
        let p = write_tmp(&dir, "a.nii", &b);
        assert!(matches!(read_nifti::<f64>(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let b = minimal_file(1.0, 0.0, b"n+1\0");
        let p = write_tmp(&dir, "a.nii", &b[..b.len() - 3]);
        assert!(matches!(read_nifti::<f64>(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn reads_big_endian() {
        let le = minimal_file(1.0, 0.0, b"n+1\0");
        let mut be = le.clone();
        BigEndian::write_i32(&mut be[0..], 348);
        for i in 0..8 {
            BigEndian::write_i16(&mut be[40 + 2 * i..], LittleEndian::read_i16(&le[40 + 2 * i..]));
        }
        for at in [70usize, 72] {
            BigEndian::write_i16(&mut be[at..], LittleEndian::read_i16(&le[at..]));
        }
        for at in [76usize, 80, 84, 88, 108, 112, 116] {
            BigEndian::write_f32(&mut be[at..], LittleEndian::read_f32(&le[at..]));
        }
        for i in 0..8 {
            BigEndian::write_f32(&mut be[352 + 4 * i..], i as f32);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "be.nii", &be);
        let v: Volume3D<f64> = read_nifti(&p).unwrap();
        assert_eq!(v.data()[5], 5.0);
    }

    #[test]
    fn qform_rotation_is_honored() {
        // 180 degrees about z: quaternion (b, c, d) = (0, 0, 1).
        let mut b = minimal_file(1.0, 0.0, b"n+1\0");
        LittleEndian::write_i16(&mut b[252..], 1);
        LittleEndian::write_f32(&mut b[264..], 1.0);
        LittleEndian::write_f32(&mut b[268..], 10.0);
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "q.nii", &b);
        let v: Volume3D<f64> = read_nifti(&p).unwrap();
        let a = v.geometry().affine();
        assert_eq!(a[0][0], -1.0);
        assert_eq!(a[1][1], -1.0);
        assert_eq!(a[2][2], 1.0);
        assert_eq!(a[0][3], 10.0);
    }

    #[test]
    fn round_trip_is_bit_identical_float32() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_tmp(&dir, "a.nii", &minimal_file(1.0, 0.0, b"n+1\0"));
        let v: Volume3D<f32> = read_nifti(&src).unwrap();
        for name in ["b.nii", "b.nii.gz"] {
            let out = dir.path().join(name);
            write_nifti(&v, &out).unwrap();
            let back: Volume3D<f32> = read_nifti(&out).unwrap();
            assert_eq!(back, v);
            let raw = read_file(&out).unwrap();
            assert_eq!(&raw[352..], &minimal_file(1.0, 0.0, b"n+1\0")[352..]);
        }
    }

    #[test]
    fn gz_output_is_compressed() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::axis_aligned([16, 16, 16], [1.0; 3]).unwrap();
        let v = Volume3D::<f64>::zeros(g);
        let p = dir.path().join("z.nii.gz");
        write_nifti(&v, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..2], &[0x1f, 0x8b]);
        assert!(bytes.len() < 352 + 4 * 4096);
    }

    #[test]
    fn integer_outputs_saturate() {
        let g = Geometry::axis_aligned([4, 1, 1], [1.0; 3]).unwrap();
        let v = Volume3D::new(g, vec![-5.0f64, 1.6, 300.0, f64::NAN]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.nii");
        write_nifti_as(&v, &p, DataType::UInt8).unwrap();
        let back: Volume3D<f64> = read_nifti(&p).unwrap();
        assert_eq!(back.data(), &[0.0, 2.0, 255.0, 0.0]);
    }

    #[test]
    fn write_to_missing_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::axis_aligned([2, 2, 2], [1.0; 3]).unwrap();
        let v = Volume3D::<f64>::zeros(g);
        let p = dir.path().join("nope").join("x.nii");
        assert!(matches!(write_nifti(&v, &p), Err(Error::Io { .. })));
    }

    #[test]
    fn paired_header_and_image() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = minimal_file(1.0, 0.0, b"ni1\0");
        LittleEndian::write_f32(&mut b[108..], 0.0);
        let hdr = write_tmp(&dir, "p.hdr", &b[..348]);
        write_tmp(&dir, "p.img", &b[352..]);
        let v: Volume3D<f64> = read_nifti(&hdr).unwrap();
        assert_eq!(v.data()[3], 3.0);
    }
}
