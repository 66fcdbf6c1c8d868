//! Shared inputs for the criterion benchmarks.

use qmrisim::{brain_phantom, EmbeddingBatch, Grid3D, QMRIMaps, RngStream, Volume3D, VolumeKind};

/// Phantom map set of edge `n`.
pub fn maps(n: usize) -> QMRIMaps {
    brain_phantom([n, n, n]).expect("phantom")
}

/// Standard-normal intensity volume of edge `n`.
pub fn noise_volume(n: usize, seed: u64) -> Volume3D {
    let mut rng = RngStream::new(seed);
    Volume3D::from_fn(
        Grid3D::isotropic([n, n, n]).unwrap(),
        VolumeKind::Intensity,
        |_, _, _| rng.standard_normal() as f32,
    )
    .unwrap()
}

/// Random embeddings for `n_pairs` positive pairs.
pub fn embeddings(n_pairs: usize, dim: usize, seed: u64) -> EmbeddingBatch {
    let mut rng = RngStream::new(seed);
    let vectors = (0..2 * n_pairs)
        .map(|_| (0..dim).map(|_| rng.standard_normal()).collect())
        .collect();
    EmbeddingBatch::new(vectors, 0.5).unwrap()
}

/// Two offset solid balls of radius `r` in a volume of edge `n`.
pub fn ball_masks(n: usize, r: f64) -> (Volume3D, Volume3D) {
    let grid = Grid3D::isotropic([n, n, n]).unwrap();
    let ball = |cx: f64| {
        let c = (n as f64 - 1.0) / 2.0;
        Volume3D::from_fn(grid.clone(), VolumeKind::Mask, |x, y, z| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
            if d2 <= r * r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    };
    let c = (n as f64 - 1.0) / 2.0;
    (ball(c), ball(c + 2.0))
}
