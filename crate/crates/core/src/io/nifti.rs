//! Minimal NIfTI-1 single-file (`.nii`, `.nii.gz`) reader and writer.
//!
//! Only 3-D scalar volumes are supported (trailing singleton dimensions are
//! accepted on read). Voxels are stored x-fastest, which is the native NIfTI
//! order. The writer emits a 348-byte little-endian header, an empty
//! extension block and the data at offset 352; the volume kind is recorded
//! in `intent_name` as `qmrisim:<kind>`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};

use crate::error::{Error, Result};
use crate::volume::{Affine, Grid3D, Volume3D, VolumeKind, IDENTITY_AFFINE};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;
const INTENT_PREFIX: &str = "qmrisim:";

/// NIfTI datatype codes handled by the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    U8,
    I8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Datatype {
    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::U8,
            256 => Datatype::I8,
            4 => Datatype::I16,
            512 => Datatype::U16,
            8 => Datatype::I32,
            768 => Datatype::U32,
            16 => Datatype::F32,
            64 => Datatype::F64,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I8 => 256,
            Datatype::I16 => 4,
            Datatype::U16 => 512,
            Datatype::I32 => 8,
            Datatype::U32 => 768,
            Datatype::F32 => 16,
            Datatype::F64 => 64,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::U8 | Datatype::I8 => 1,
            Datatype::I16 | Datatype::U16 => 2,
            Datatype::I32 | Datatype::U32 | Datatype::F32 => 4,
            Datatype::F64 => 8,
        }
    }
}

/// Header fields that matter for a 3-D scalar volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub affine: Affine,
    pub datatype: Datatype,
    pub kind: VolumeKind,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub vox_offset: usize,
}

struct Cursor<'a> {
    buf: &'a [u8],
    big_endian: bool,
}

impl Cursor<'_> {
    fn bytes<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[at..at + N]);
        if self.big_endian {
            b.reverse();
        }
        b
    }
    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.bytes(at))
    }
    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.bytes(at))
    }
    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.bytes(at))
    }
}

fn quaternion_affine(c: &Cursor<'_>, spacing: [f64; 3]) -> Affine {
    let (b, cq, d) = (c.f32(256) as f64, c.f32(260) as f64, c.f32(264) as f64);
    let a = (1.0 - (b * b + cq * cq + d * d)).max(0.0).sqrt();
    let qfac = if c.f32(76) < 0.0 { -1.0 } else { 1.0 };
    let r = [
        [
            a * a + b * b - cq * cq - d * d,
            2.0 * (b * cq - a * d),
            2.0 * (b * d + a * cq),
        ],
        [
            2.0 * (b * cq + a * d),
            a * a + cq * cq - b * b - d * d,
            2.0 * (cq * d - a * b),
        ],
        [
            2.0 * (b * d - a * cq),
            2.0 * (cq * d + a * b),
            a * a + d * d - b * b - cq * cq,
        ],
    ];
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let offset = [c.f32(268) as f64, c.f32(272) as f64, c.f32(276) as f64];
    let mut m = IDENTITY_AFFINE;
    for row in 0..3 {
        for col in 0..3 {
            m[row][col] = r[row][col] * scale[col];
        }
        m[row][3] = offset[row];
    }
    m
}

fn parse_header(buf: &[u8]) -> Result<VolumeHeader> {
    if buf.len() < HEADER_SIZE {
        return Err(Error::Malformed(format!(
            "header needs {HEADER_SIZE} bytes, file has {}",
            buf.len()
        )));
    }
    let sizeof_le = i32::from_le_bytes(buf[0..4].try_into().unwrap());
    let big_endian = match sizeof_le {
        348 => false,
        _ if i32::from_be_bytes(buf[0..4].try_into().unwrap()) == 348 => true,
        other => {
            return Err(Error::Malformed(format!(
                "sizeof_hdr is {other}, expected 348"
            )))
        }
    };
    if &buf[344..347] != b"n+1" {
        return Err(Error::Malformed(
            "magic is not \"n+1\" (only single-file NIfTI-1 is supported)".into(),
        ));
    }
    let c = Cursor { buf, big_endian };

    let ndim = c.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Malformed(format!("dim[0] = {ndim}")));
    }
    let mut shape = [1usize; 3];
    for i in 1..=ndim as usize {
        let n = c.i16(40 + 2 * i);
        if n < 1 {
            return Err(Error::Malformed(format!("dim[{i}] = {n}")));
        }
        if i <= 3 {
            shape[i - 1] = n as usize;
        } else if n != 1 {
            return Err(Error::UnsupportedDims(format!(
                "{ndim}-D volume with dim[{i}] = {n}"
            )));
        }
    }

    let datatype = Datatype::from_code(c.i16(70))?;
    let spacing: [f64; 3] = std::array::from_fn(|i| {
        let p = (c.f32(80 + 4 * i) as f64).abs();
        if p > 0.0 && p.is_finite() {
            p
        } else {
            1.0
        }
    });
    let vox_offset = c.f32(108);
    if !(vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::Malformed(format!("vox_offset {vox_offset}")));
    }

    let affine = if c.i16(254) > 0 {
        let mut m = IDENTITY_AFFINE;
        for (row, base) in [280usize, 296, 312].into_iter().enumerate() {
            for col in 0..4 {
                m[row][col] = c.f32(base + 4 * col) as f64;
            }
        }
        m
    } else if c.i16(252) > 0 {
        quaternion_affine(&c, spacing)
    } else {
        let mut m = IDENTITY_AFFINE;
        for (i, s) in spacing.iter().enumerate() {
            m[i][i] = *s;
        }
        m
    };

    let intent = &buf[328..344];
    let intent = std::str::from_utf8(&intent[..intent.iter().position(|&b| b == 0).unwrap_or(16)])
        .unwrap_or("");
    let kind = match intent.strip_prefix(INTENT_PREFIX) {
        Some("mask") => VolumeKind::Mask,
        Some("map") => VolumeKind::Map,
        _ => VolumeKind::Intensity,
    };

    Ok(VolumeHeader {
        shape,
        spacing,
        affine,
        datatype,
        kind,
        scl_slope: c.f32(112),
        scl_inter: c.f32(116),
        vox_offset: vox_offset as usize,
    })
}

fn decode_data(buf: &[u8], h: &VolumeHeader, big_endian: bool) -> Result<Vec<f32>> {
    let n: usize = h.shape.iter().product();
    let size = h.datatype.size();
    let end = h.vox_offset + n * size;
    if buf.len() < end {
        return Err(Error::Malformed(format!(
            "data needs {end} bytes, file has {}",
            buf.len()
        )));
    }
    let c = Cursor {
        buf: &buf[h.vox_offset..end],
        big_endian,
    };
    let raw = |i: usize| -> f64 {
        let at = i * size;
        match h.datatype {
            Datatype::U8 => c.buf[at] as f64,
            Datatype::I8 => c.buf[at] as i8 as f64,
            Datatype::I16 => c.i16(at) as f64,
            Datatype::U16 => u16::from_le_bytes(c.bytes(at)) as f64,
            Datatype::I32 => c.i32(at) as f64,
            Datatype::U32 => u32::from_le_bytes(c.bytes(at)) as f64,
            Datatype::F32 => c.f32(at) as f64,
            Datatype::F64 => f64::from_le_bytes(c.bytes(at)),
        }
    };
    let scaled = h.scl_slope != 0.0
        && h.scl_slope.is_finite()
        && !(h.scl_slope == 1.0 && h.scl_inter == 0.0);
    let (slope, inter) = (h.scl_slope as f64, h.scl_inter as f64);
    Ok((0..n)
        .map(|i| {
            let v = raw(i);
            (if scaled { v * slope + inter } else { v }) as f32
        })
        .collect())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Malformed(format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Decode a NIfTI-1 image held in memory (optionally gzip-compressed).
pub fn decode_nifti(bytes: &[u8]) -> Result<Volume3D> {
    let owned;
    let buf = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::Malformed(format!("gzip stream: {e}")))?;
        owned = out;
        owned.as_slice()
    } else {
        bytes
    };
    let header = parse_header(buf)?;
    let big_endian = i32::from_le_bytes(buf[0..4].try_into().unwrap()) != 348;
    let data = decode_data(buf, &header, big_endian)?;
    let grid = Grid3D::new(header.shape, header.spacing, header.affine)
        .map_err(|e| Error::Malformed(e.to_string()))?;
    let kind = header.kind;
    match Volume3D::from_data(grid.clone(), data, kind) {
        // a mask tag on non-binary data is not trusted
        Err(Error::NonBinary { .. }) => {
            let data = decode_data(buf, &header, big_endian)?;
            Volume3D::from_data(grid, data, VolumeKind::Intensity)
        }
        other => other,
    }
}

/// Read a `.nii` or `.nii.gz` file; compression is detected from content.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    decode_nifti(&bytes).map_err(|e| match e {
        Error::Malformed(msg) => Error::Malformed(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Header only.
pub fn read_header(path: impl AsRef<Path>) -> Result<VolumeHeader> {
    parse_header(&read_bytes(path.as_ref())?)
}

/// Unit rotation quaternion `(b, c, d)` and `qfac` for the orientation part
/// of `affine`, when its columns are orthogonal.
fn quaternion(affine: &Affine) -> Option<([f64; 3], f64)> {
    let mut r = [[0.0; 3]; 3];
    for col in 0..3 {
        let n = (0..3)
            .map(|row| affine[row][col].powi(2))
            .sum::<f64>()
            .sqrt();
        if n == 0.0 {
            return None;
        }
        for row in 0..3 {
            r[row][col] = affine[row][col] / n;
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let d: f64 = (0..3).map(|row| r[row][i] * r[row][j]).sum();
        if d.abs() > 1e-6 {
            return None;
        }
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let qfac = if det < 0.0 {
        for row in r.iter_mut() {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let trace = r[0][0] + r[1][1] + r[2][2];
    let (a, b, c, d);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        a = 0.25 * s;
        b = (r[2][1] - r[1][2]) / s;
        c = (r[0][2] - r[2][0]) / s;
        d = (r[1][0] - r[0][1]) / s;
    } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
        a = (r[2][1] - r[1][2]) / s;
        b = 0.25 * s;
        c = (r[0][1] + r[1][0]) / s;
        d = (r[0][2] + r[2][0]) / s;
    } else if r[1][1] > r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
        a = (r[0][2] - r[2][0]) / s;
        b = (r[0][1] + r[1][0]) / s;
        c = 0.25 * s;
        d = (r[1][2] + r[2][1]) / s;
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
        a = (r[1][0] - r[0][1]) / s;
        b = (r[0][2] + r[2][0]) / s;
        c = (r[1][2] + r[2][1]) / s;
        d = 0.25 * s;
    }
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    Some(([b * sign, c * sign, d * sign], qfac))
}

/// Serialise a volume to NIfTI-1 bytes (uncompressed). Masks are stored as
/// `uint8`, everything else as `float32`.
pub fn encode_nifti(v: &Volume3D) -> Vec<u8> {
    let grid = v.grid();
    let shape = grid.shape();
    let spacing = grid.spacing();
    let affine = grid.affine();
    let datatype = if v.kind() == VolumeKind::Mask {
        Datatype::U8
    } else {
        Datatype::F32
    };

    let mut h = vec![0u8; DATA_OFFSET];
    let put_i16 = |h: &mut [u8], at: usize, x: i16| h[at..at + 2].copy_from_slice(&x.to_le_bytes());
    let put_i32 = |h: &mut [u8], at: usize, x: i32| h[at..at + 4].copy_from_slice(&x.to_le_bytes());
    let put_f32 = |h: &mut [u8], at: usize, x: f32| h[at..at + 4].copy_from_slice(&x.to_le_bytes());

    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    put_i16(&mut h, 40, 3);
    for (i, &n) in shape.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * i, n as i16);
    }
    for i in 3..7 {
        put_i16(&mut h, 42 + 2 * i, 1);
    }
    put_i16(&mut h, 70, datatype.code());
    put_i16(&mut h, 72, (datatype.size() * 8) as i16);

    let q = quaternion(affine);
    put_f32(&mut h, 76, q.map_or(1.0, |(_, qfac)| qfac as f32));
    for (i, &s) in spacing.iter().enumerate() {
        put_f32(&mut h, 80 + 4 * i, s as f32);
    }
    put_f32(&mut h, 108, DATA_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2 | 8; // mm, s
    let descrip = b"qmrisim; voxel order x-fastest";
    h[148..148 + descrip.len()].copy_from_slice(descrip);

    if let Some(([b, c, d], _)) = q {
        put_i16(&mut h, 252, 1);
        put_f32(&mut h, 256, b as f32);
        put_f32(&mut h, 260, c as f32);
        put_f32(&mut h, 264, d as f32);
        for row in 0..3 {
            put_f32(&mut h, 268 + 4 * row, affine[row][3] as f32);
        }
    }
    put_i16(&mut h, 254, 1);
    for (row, base) in [280usize, 296, 312].into_iter().enumerate() {
        for col in 0..4 {
            put_f32(&mut h, base + 4 * col, affine[row][col] as f32);
        }
    }
    let intent = format!(
        "{INTENT_PREFIX}{}",
        match v.kind() {
            VolumeKind::Intensity => "intensity",
            VolumeKind::Map => "map",
            VolumeKind::Mask => "mask",
        }
    );
    h[328..328 + intent.len()].copy_from_slice(intent.as_bytes());
    h[344..348].copy_from_slice(b"n+1\0");

    h.reserve(v.len() * datatype.size());
    match datatype {
        Datatype::U8 => h.extend(v.data().iter().map(|&x| x as u8)),
        _ => {
            for &x in v.data() {
                h.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    h
}

/// Write a volume; a path ending in `.gz` is gzip-compressed. Output bytes
/// are a pure function of the volume (the gzip header carries no timestamp).
pub fn write_nifti(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(v);
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let out = if gz {
        let mut enc: GzEncoder<Vec<u8>> = GzBuilder::new()
            .mtime(0)
            .write(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
