//! Flips and linear resampling (rotation, shear) about the volume centre.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::volume::{Volume3D, VolumeKind};

pub type Mat3 = [[f64; 3]; 3];

/// Sample positions closer than this to an integer are snapped to it, so
/// quarter-turn rotations reproduce index permutations exactly.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Mirror the volume along every axis flagged in `axes`.
pub fn flip(v: &Volume3D, axes: [bool; 3]) -> Volume3D {
    let [nx, ny, nz] = v.shape();
    let src = v.data();
    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slab)| {
            let sz = if axes[2] { nz - 1 - z } else { z };
            for y in 0..ny {
                let sy = if axes[1] { ny - 1 - y } else { y };
                let row = &src[(sy + ny * sz) * nx..][..nx];
                let dst = &mut slab[y * nx..][..nx];
                if axes[0] {
                    for (d, s) in dst.iter_mut().zip(row.iter().rev()) {
                        *d = *s;
                    }
                } else {
                    dst.copy_from_slice(row);
                }
            }
        });
    v.with_data(out)
}

/// Rotation matrix for a right-handed turn of `angle_deg` about `axis`.
pub fn rotation_matrix(axis: Axis, angle_deg: f64) -> Mat3 {
    let (s, c) = angle_deg.to_radians().sin_cos();
    match axis {
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

pub fn rotate(v: &Volume3D, axis: Axis, angle_deg: f64) -> Volume3D {
    transform(v, &rotation_matrix(axis, angle_deg))
}

pub fn shear(v: &Volume3D, matrix: &Mat3) -> Volume3D {
    transform(v, matrix)
}

pub(crate) fn invert3(m: &Mat3) -> Option<Mat3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            // cofactor of (c, r)
            let (r0, r1) = ((c + 1) % 3, (c + 2) % 3);
            let (c0, c1) = ((r + 1) % 3, (r + 2) % 3);
            *cell = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// Apply the physical-space linear map `forward` about the volume centre by
/// pulling each output voxel from the inverse-mapped input position with
/// trilinear interpolation; samples outside the field of view read as zero.
///
/// A singular matrix leaves the volume unchanged.
pub fn transform(v: &Volume3D, forward: &Mat3) -> Volume3D {
    let Some(inv) = invert3(forward) else {
        return v.clone();
    };
    let shape = v.shape();
    let spacing = v.grid().spacing();
    // voxel-space pull matrix: S^-1 · inv · S
    let mut pull = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            pull[r][c] = inv[r][c] * spacing[c] / spacing[r];
        }
    }
    let centre: [f64; 3] = std::array::from_fn(|a| (shape[a] as f64 - 1.0) / 2.0);
    let [nx, ny, _] = shape;
    let src = v.data();

    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slab)| {
            let dz = z as f64 - centre[2];
            for y in 0..ny {
                let dy = y as f64 - centre[1];
                for x in 0..nx {
                    let dx = x as f64 - centre[0];
                    let p: [f64; 3] = std::array::from_fn(|r| {
                        snap(centre[r] + pull[r][0] * dx + pull[r][1] * dy + pull[r][2] * dz)
                    });
                    slab[x + nx * y] = trilinear(src, shape, p);
                }
            }
        });
    let kind = match v.kind() {
        VolumeKind::Mask => VolumeKind::Intensity,
        k => k,
    };
    Volume3D::from_data(v.grid().clone(), out, kind).expect("length preserved")
}

#[inline]
fn trilinear(src: &[f32], shape: [usize; 3], p: [f64; 3]) -> f32 {
    let mut base = [0i64; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let f = p[a].floor();
        if f < -1.0 || f > shape[a] as f64 {
            return 0.0;
        }
        base[a] = f as i64;
        frac[a] = p[a] - f;
    }
    let fetch = |x: i64, y: i64, z: i64| -> f64 {
        if x < 0
            || y < 0
            || z < 0
            || x >= shape[0] as i64
            || y >= shape[1] as i64
            || z >= shape[2] as i64
        {
            0.0
        } else {
            src[x as usize + shape[0] * (y as usize + shape[1] * z as usize)] as f64
        }
    };
    let [x0, y0, z0] = base;
    let [fx, fy, fz] = frac;
    let mut acc = 0.0;
    for (dz, wz) in [(0, 1.0 - fz), (1, fz)] {
        if wz == 0.0 {
            continue;
        }
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                acc += wx * wy * wz * fetch(x0 + dx, y0 + dy, z0 + dz);
            }
        }
    }
    acc as f32
}
