//! Gibbs ringing by hard truncation of k-space.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::volume::{Volume3D, VolumeKind};

fn fft_axis(buf: &mut [Complex64], shape: [usize; 3], axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let [nx, ny, nz] = shape;
    match axis {
        0 => buf.par_chunks_mut(nx).for_each(|row| fft.process(row)),
        1 => buf.par_chunks_mut(nx * ny).for_each(|slab| {
            let mut line = vec![Complex64::default(); ny];
            for x in 0..nx {
                for (y, c) in line.iter_mut().enumerate() {
                    *c = slab[x + nx * y];
                }
                fft.process(&mut line);
                for (y, c) in line.iter().enumerate() {
                    slab[x + nx * y] = *c;
                }
            }
        }),
        _ => {
            let plane = nx * ny;
            let lines: Vec<Vec<Complex64>> = (0..plane)
                .into_par_iter()
                .map(|p| {
                    let mut line: Vec<Complex64> = (0..nz).map(|z| buf[p + plane * z]).collect();
                    fft.process(&mut line);
                    line
                })
                .collect();
            for (p, line) in lines.iter().enumerate() {
                for (z, c) in line.iter().enumerate() {
                    buf[p + plane * z] = *c;
                }
            }
        }
    }
}

fn fft3(buf: &mut [Complex64], shape: [usize; 3], direction: FftDirection) {
    let mut planner = FftPlanner::new();
    for (axis, &n) in shape.iter().enumerate() {
        if n > 1 {
            let fft = planner.plan_fft(n, direction);
            fft_axis(buf, shape, axis, &fft);
        }
    }
}

/// Whether frequency bin `k` of an `n`-point transform lies inside the
/// band `|f| <= keep / 2` (f in cycles per sample).
#[inline]
fn in_band(k: usize, n: usize, keep: f64) -> bool {
    let dist = k.min(n - k) as f64;
    2.0 * dist <= keep * n as f64
}

/// Zero every Fourier coefficient whose normalised frequency along any axis
/// exceeds `keep[axis] / 2`, then return the real part of the inverse.
///
/// `keep = 1` passes the full band. The DC term is always retained.
pub fn gibbs_truncate(v: &Volume3D, keep: [f64; 3]) -> Result<Volume3D> {
    if let Some(k) = keep.iter().find(|&&k| !(k > 0.0 && k <= 1.0)) {
        return Err(Error::InvalidConfig(format!(
            "gibbs keep fraction {k} outside (0, 1]"
        )));
    }
    let shape = v.shape();
    let [nx, ny, nz] = shape;
    let mut buf: Vec<Complex64> = v
        .data()
        .iter()
        .map(|&x| Complex64::new(x as f64, 0.0))
        .collect();

    fft3(&mut buf, shape, FftDirection::Forward);

    let mx: Vec<bool> = (0..nx).map(|k| in_band(k, nx, keep[0])).collect();
    let my: Vec<bool> = (0..ny).map(|k| in_band(k, ny, keep[1])).collect();
    let mz: Vec<bool> = (0..nz).map(|k| in_band(k, nz, keep[2])).collect();
    buf.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..ny {
                for x in 0..nx {
                    if !(mz[z] && my[y] && mx[x]) {
                        slab[x + nx * y] = Complex64::default();
                    }
                }
            }
        });

    fft3(&mut buf, shape, FftDirection::Inverse);

    let scale = 1.0 / v.len() as f64;
    let data = buf.iter().map(|c| (c.re * scale) as f32).collect();
    let out = v.with_data(data);
    Ok(if v.kind() == VolumeKind::Mask {
        out.with_kind(VolumeKind::Intensity)?
    } else {
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::volume::{new_volume, Grid3D};

    fn random(shape: [usize; 3], seed: u64) -> Volume3D {
        let g = Grid3D::isotropic(shape).unwrap();
        let mut rng = RngStream::new(seed);
        Volume3D::from_fn(g, VolumeKind::Intensity, |_, _, _| {
            rng.standard_normal() as f32
        })
        .unwrap()
    }

    fn max_abs_diff(a: &Volume3D, b: &Volume3D) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (x as f64 - y as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn full_band_is_identity() {
        let v = random([9, 8, 7], 1);
        let out = gibbs_truncate(&v, [1.0; 3]).unwrap();
        assert!(max_abs_diff(&v, &out) < 1e-5);
    }

    #[test]
    fn truncation_is_idempotent() {
        let v = random([12, 10, 16], 2);
        let once = gibbs_truncate(&v, [0.5, 0.7, 0.3]).unwrap();
        let twice = gibbs_truncate(&once, [0.5, 0.7, 0.3]).unwrap();
        assert!(max_abs_diff(&v, &once) > 0.1);
        assert!(max_abs_diff(&once, &twice) < 1e-5);
    }

    #[test]
    fn constant_volume_unchanged() {
        let g = Grid3D::isotropic([8, 6, 5]).unwrap();
        let v = new_volume(g, 2.5, VolumeKind::Intensity).unwrap();
        for keep in [0.01, 0.3, 1.0] {
            let out = gibbs_truncate(&v, [keep; 3]).unwrap();
            assert!(max_abs_diff(&v, &out) < 1e-5);
        }
    }

    #[test]
    fn dc_preserved() {
        let v = random([16, 16, 16], 3);
        let out = gibbs_truncate(&v, [0.2, 0.4, 0.6]).unwrap();
        let mean = |x: &Volume3D| x.data().iter().map(|&a| a as f64).sum::<f64>();
        let (a, b) = (mean(&v), mean(&out));
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
    }

    #[test]
    fn step_edge_rings() {
        let g = Grid3D::isotropic([64, 1, 1]).unwrap();
        let v = Volume3D::from_fn(g, VolumeKind::Intensity, |x, _, _| {
            if (16..48).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let out = gibbs_truncate(&v, [0.25, 1.0, 1.0]).unwrap();
        let max = out.data().iter().cloned().fold(f32::MIN, f32::max);
        // overshoot near the edges
        assert!(max > 1.05, "{max}");
    }

    #[test]
    fn keep_out_of_range() {
        let v = random([4, 4, 4], 4);
        assert!(gibbs_truncate(&v, [0.0, 1.0, 1.0]).is_err());
        assert!(gibbs_truncate(&v, [1.0, 1.1, 1.0]).is_err());
    }
}
