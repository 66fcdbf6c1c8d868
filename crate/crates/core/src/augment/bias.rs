//! Smooth multiplicative intensity non-uniformity.

use crate::error::{Error, Result};
use crate::volume::{Grid3D, Volume3D, VolumeKind};

/// Clamped linear interpolation; exact when `a == b` and never leaves the
/// closed interval spanned by `a` and `b`.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}

/// For every output index along an axis of length `n`, the lower control
/// index and interpolation weight for a control axis of length `c`.
fn axis_weights(n: usize, c: usize) -> Vec<(usize, f64)> {
    (0..n)
        .map(|i| {
            if n == 1 {
                return (0, 0.0);
            }
            let u = i as f64 * (c - 1) as f64 / (n - 1) as f64;
            let i0 = (u.floor() as usize).min(c - 2);
            (i0, (u - i0 as f64).clamp(0.0, 1.0))
        })
        .collect()
}

/// Trilinear upsampling of a coarse control grid (x-fastest `values`) to the
/// full `grid`. Control points sit at evenly spaced positions with the first
/// and last on the volume's edge voxels.
pub fn bias_field(
    grid: &Grid3D,
    control_shape: [usize; 3],
    values: &[f64],
    amplitude: f64,
) -> Result<Volume3D> {
    if control_shape.iter().any(|&c| c < 2) {
        return Err(Error::InvalidConfig(format!(
            "bias control grid must be at least 2 per axis, got {control_shape:?}"
        )));
    }
    let count: usize = control_shape.iter().product();
    if values.len() != count {
        return Err(Error::InvalidConfig(format!(
            "bias control grid expects {count} values, got {}",
            values.len()
        )));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bias amplitude {amplitude} < 0"
        )));
    }
    let (lo, hi) = (1.0 - amplitude, 1.0 + amplitude);
    if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
        return Err(Error::InvalidConfig(format!(
            "bias control value {v} outside [{lo}, {hi}]"
        )));
    }

    let shape = grid.shape();
    let [cx, cy, _] = control_shape;
    let wx = axis_weights(shape[0], control_shape[0]);
    let wy = axis_weights(shape[1], control_shape[1]);
    let wz = axis_weights(shape[2], control_shape[2]);
    let ctrl = |i: usize, j: usize, k: usize| values[i + cx * (j + cy * k)];

    let mut data = Vec::with_capacity(grid.len());
    for &(k, tz) in &wz {
        for &(j, ty) in &wy {
            for &(i, tx) in &wx {
                let c00 = lerp(ctrl(i, j, k), ctrl(i + 1, j, k), tx);
                let c10 = lerp(ctrl(i, j + 1, k), ctrl(i + 1, j + 1, k), tx);
                let c01 = lerp(ctrl(i, j, k + 1), ctrl(i + 1, j, k + 1), tx);
                let c11 = lerp(ctrl(i, j + 1, k + 1), ctrl(i + 1, j + 1, k + 1), tx);
                let c0 = lerp(c00, c10, ty);
                let c1 = lerp(c01, c11, ty);
                data.push(lerp(c0, c1, tz) as f32);
            }
        }
    }
    Volume3D::from_data(grid.clone(), data, VolumeKind::Map)
}

/// Multiply `v` voxelwise by `field` (same grid assumed).
pub(crate) fn modulate(v: &Volume3D, field: &Volume3D) -> Volume3D {
    let data = v
        .data()
        .iter()
        .zip(field.data())
        .map(|(&a, &b)| a * b)
        .collect();
    let out = v.with_data(data);
    if v.kind() == VolumeKind::Mask {
        out.with_kind(VolumeKind::Intensity)
            .expect("intensity accepts any value")
    } else {
        out
    }
}
