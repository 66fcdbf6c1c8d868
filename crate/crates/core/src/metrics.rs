//! Image-quality and segmentation metrics: PSNR, Dice and HD95.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Index3, Result};
use crate::volume::Volume3D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    /// dB for PSNR (`+inf` for identical inputs), mm for HD95.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<i64, f64>>,
}

/// Shapes must match exactly and spacings to 1e-6 relative.
pub(crate) fn check_same_grid(a: &Volume3D, b: &Volume3D) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::GridMismatch(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    let (sa, sb) = (a.grid().spacing(), b.grid().spacing());
    if (0..3).any(|i| (sa[i] - sb[i]).abs() > 1e-6 * sa[i].max(sb[i])) {
        return Err(Error::GridMismatch(format!(
            "spacings {sa:?} and {sb:?} differ"
        )));
    }
    Ok(())
}

pub fn mse(reference: &Volume3D, test: &Volume3D) -> Result<f64> {
    check_same_grid(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `20·log10(peak / sqrt(MSE))`; `f64::INFINITY` when the inputs are equal.
pub fn psnr(reference: &Volume3D, test: &Volume3D, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "PSNR peak must be > 0, got {peak}"
        )));
    }
    let mse = mse(reference, test)?;
    Ok(psnr_from_mse(mse, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / mse.sqrt()).log10()
    }
}

/// Dynamic range `max − min` of a volume, used as the PSNR peak when the
/// caller asks for it automatically.
pub fn dynamic_range(v: &Volume3D) -> f64 {
    let (lo, hi) = v
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi as f64 - lo as f64
}

fn require_binary(v: &Volume3D) -> Result<()> {
    if let Some(i) = v.data().iter().position(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::NonBinary {
            index: v.grid().coords(i),
            value: v.data()[i],
        });
    }
    Ok(())
}

fn dice_counts(overlap: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        2.0 * overlap as f64 / (a + b) as f64
    }
}

/// `2|Y∩Ŷ| / (|Y| + |Ŷ|)`, defined as 1 when both masks are empty.
pub fn dice(y: &Volume3D, yhat: &Volume3D) -> Result<f64> {
    check_same_grid(y, yhat)?;
    require_binary(y)?;
    require_binary(yhat)?;
    let (mut overlap, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &q) in y.data().iter().zip(yhat.data()) {
        let (p, q) = (p == 1.0, q == 1.0);
        a += p as usize;
        b += q as usize;
        overlap += (p && q) as usize;
    }
    Ok(dice_counts(overlap, a, b))
}

/// One-vs-rest Dice per label; a label absent from both volumes scores 1.
pub fn multiclass_dice(
    y: &Volume3D,
    yhat: &Volume3D,
    labels: &[i64],
) -> Result<BTreeMap<i64, f64>> {
    check_same_grid(y, yhat)?;
    let mut out = BTreeMap::new();
    for &label in labels {
        let l = label as f32;
        let (mut overlap, mut a, mut b) = (0usize, 0usize, 0usize);
        for (&p, &q) in y.data().iter().zip(yhat.data()) {
            let (p, q) = (p == l, q == l);
            a += p as usize;
            b += q as usize;
            overlap += (p && q) as usize;
        }
        out.insert(label, dice_counts(overlap, a, b));
    }
    Ok(out)
}

/// Foreground voxels with at least one 6-connected neighbour that is
/// background or outside the volume.
pub fn boundary_voxels(mask: &Volume3D) -> Vec<Index3> {
    let shape = mask.shape();
    let fg = |x: i64, y: i64, z: i64| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < shape[0]
            && (y as usize) < shape[1]
            && (z as usize) < shape[2]
            && mask.get(x as usize, y as usize, z as usize) == 1.0
    };
    let mut out = Vec::new();
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                if mask.get(x, y, z) != 1.0 {
                    continue;
                }
                let (xi, yi, zi) = (x as i64, y as i64, z as i64);
                let surface = !fg(xi - 1, yi, zi)
                    || !fg(xi + 1, yi, zi)
                    || !fg(xi, yi - 1, zi)
                    || !fg(xi, yi + 1, zi)
                    || !fg(xi, yi, zi - 1)
                    || !fg(xi, yi, zi + 1);
                if surface {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

#[inline]
fn axis_term(a: usize, b: usize, spacing: f64) -> f64 {
    let d = (a as f64 - b as f64) * spacing;
    d * d
}

/// Squared world distance between voxel centres, summed x, y, z.
#[inline]
pub fn squared_distance(p: Index3, q: Index3, spacing: [f64; 3]) -> f64 {
    axis_term(p[0], q[0], spacing[0])
        + axis_term(p[1], q[1], spacing[1])
        + axis_term(p[2], q[2], spacing[2])
}

/// Distance from every point of `from` to its nearest point in `to`.
///
/// `to` is sorted by x and scanned outwards from each query; the scan stops
/// once the x term alone exceeds the best squared distance found, so the
/// result is the exact minimum over all pairs.
fn directed_distances(from: &[Index3], to: &[Index3], spacing: [f64; 3]) -> Vec<f64> {
    let mut sorted = to.to_vec();
    sorted.sort_unstable();
    from.par_iter()
        .map(|&p| {
            let start = sorted.partition_point(|q| q[0] < p[0]);
            let mut best = f64::INFINITY;
            for q in &sorted[start..] {
                if axis_term(q[0], p[0], spacing[0]) > best {
                    break;
                }
                best = best.min(squared_distance(p, *q, spacing));
            }
            for q in sorted[..start].iter().rev() {
                if axis_term(q[0], p[0], spacing[0]) > best {
                    break;
                }
                best = best.min(squared_distance(p, *q, spacing));
            }
            best.sqrt()
        })
        .collect()
}

/// Percentile `q` in [0, 100] with linear interpolation between order
/// statistics. Sorts `values` in place.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] + (values[hi] - values[lo]) * frac
}

/// 95th percentile of the pooled directed boundary-to-boundary distances in
/// both directions, in world units (mm).
pub fn hd95(y: &Volume3D, yhat: &Volume3D) -> Result<f64> {
    check_same_grid(y, yhat)?;
    require_binary(y)?;
    require_binary(yhat)?;
    let a = boundary_voxels(y);
    if a.is_empty() {
        return Err(Error::EmptyMask("reference"));
    }
    let b = boundary_voxels(yhat);
    if b.is_empty() {
        return Err(Error::EmptyMask("prediction"));
    }
    let spacing = y.grid().spacing();
    let mut pooled = directed_distances(&a, &b, spacing);
    pooled.extend(directed_distances(&b, &a, spacing));
    Ok(percentile(&mut pooled, 95.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Grid3D, VolumeKind};

    fn mask_from(shape: Index3, spacing: [f64; 3], on: &[Index3]) -> Volume3D {
        let g = Grid3D::with_spacing(shape, spacing).unwrap();
        Volume3D::from_fn(g, VolumeKind::Mask, |x, y, z| {
            if on.contains(&[x, y, z]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn intensity(values: Vec<f32>) -> Volume3D {
        let g = Grid3D::isotropic([values.len(), 1, 1]).unwrap();
        Volume3D::from_data(g, values, VolumeKind::Intensity).unwrap()
    }

    #[test]
    fn psnr_fixtures() {
        let r = intensity(vec![0.0; 10]);
        let t = intensity(vec![0.1; 10]);
        assert!((psnr(&r, &t, 1.0).unwrap() - 20.0).abs() < 1e-6);
        assert_eq!(psnr(&r, &r, 1.0).unwrap(), f64::INFINITY);
        let t = intensity(vec![1.0; 10]);
        let expected = 48.130_803_608_679_1;
        assert!((psnr(&r, &t, 255.0).unwrap() - expected).abs() < 1e-9);
        assert!(psnr(&r, &t, 0.0).is_err());
    }

    #[test]
    fn psnr_decreases_with_mse() {
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let v = psnr_from_mse(k as f64 * 0.01, 1.0);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn dynamic_range_peak() {
        assert_eq!(dynamic_range(&intensity(vec![-1.5, 0.0, 2.5])), 4.0);
    }

    #[test]
    fn dice_fixtures() {
        let a = mask_from([4, 4, 1], [1.0; 3], &[[0, 0, 0], [1, 1, 0]]);
        let b = mask_from([4, 4, 1], [1.0; 3], &[[3, 3, 0]]);
        let empty = mask_from([4, 4, 1], [1.0; 3], &[]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn dice_half_overlap() {
        // 100 voxels each, 50 shared
        let g = Grid3D::isotropic([150, 1, 1]).unwrap();
        let y = Volume3D::from_fn(g.clone(), VolumeKind::Mask, |x, _, _| {
            (x < 100) as u8 as f32
        })
        .unwrap();
        let yhat =
            Volume3D::from_fn(g, VolumeKind::Mask, |x, _, _| (x >= 50) as u8 as f32).unwrap();
        assert_eq!(dice(&y, &yhat).unwrap(), 0.5);
        assert_eq!(dice(&yhat, &y).unwrap(), 0.5);
    }

    #[test]
    fn dice_rejects_non_binary() {
        let v = intensity(vec![0.0, 2.0]);
        assert!(matches!(dice(&v, &v), Err(Error::NonBinary { .. })));
    }

    #[test]
    fn hd95_fixtures() {
        let a = mask_from([8, 8, 8], [1.0; 3], &[[2, 2, 2]]);
        assert_eq!(hd95(&a, &a).unwrap(), 0.0);

        let b = mask_from([8, 8, 8], [1.0; 3], &[[5, 2, 2]]);
        assert_eq!(hd95(&a, &b).unwrap(), 3.0);

        let a = mask_from([6, 6, 6], [1.0, 1.0, 2.0], &[[2, 2, 2]]);
        let b = mask_from([6, 6, 6], [1.0, 1.0, 2.0], &[[2, 2, 3]]);
        assert_eq!(hd95(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn hd95_empty_mask() {
        let a = mask_from([4, 4, 4], [1.0; 3], &[[1, 1, 1]]);
        let empty = mask_from([4, 4, 4], [1.0; 3], &[]);
        assert!(matches!(hd95(&a, &empty), Err(Error::EmptyMask(_))));
        assert!(matches!(hd95(&empty, &a), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn boundary_of_solid_cube() {
        let g = Grid3D::isotropic([5, 5, 5]).unwrap();
        let m = Volume3D::from_fn(g, VolumeKind::Mask, |x, y, z| {
            ((1..4).contains(&x) && (1..4).contains(&y) && (1..4).contains(&z)) as u8 as f32
        })
        .unwrap();
        // 3^3 cube minus its single interior voxel
        assert_eq!(boundary_voxels(&m).len(), 26);
    }

    #[test]
    fn percentile_linear() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&mut v, 50.0), 3.0);
        assert_eq!(percentile(&mut v, 100.0), 5.0);
        assert!((percentile(&mut v, 95.0) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn multiclass_fixtures() {
        let g = Grid3D::isotropic([4, 1, 1]).unwrap();
        let truth =
            Volume3D::from_data(g.clone(), vec![0.0, 0.0, 1.0, 1.0], VolumeKind::Map).unwrap();
        let pred = Volume3D::from_data(g, vec![0.0; 4], VolumeKind::Map).unwrap();
        let d = multiclass_dice(&truth, &truth, &[0, 1, 2]).unwrap();
        assert!(d.values().all(|&x| x == 1.0));
        let d = multiclass_dice(&truth, &pred, &[0, 1]).unwrap();
        assert_eq!(d[&1], 0.0);
        assert!((d[&0] - 2.0 * 2.0 / 6.0).abs() < 1e-15);
    }
}
