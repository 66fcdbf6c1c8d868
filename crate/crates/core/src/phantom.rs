//! Synthetic head phantom built from nested ellipsoids.
//!
//! Useful for smoke tests and benchmarks where real qMRI maps are not
//! available. Tissue values are typical 3 T figures (rates in 1/s).

use crate::error::{Index3, Result};
use crate::volume::{Grid3D, QMRIMaps, Volume3D, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tissue {
    pub pd: f32,
    pub r1: f32,
    pub r2star: f32,
    pub mt: f32,
}

// Background keeps positive rates so the map set stays valid.
pub const BACKGROUND: Tissue = Tissue {
    pd: 0.0,
    r1: 1.0,
    r2star: 1.0,
    mt: 0.0,
};
pub const CSF: Tissue = Tissue {
    pd: 1.0,
    r1: 0.25,
    r2star: 0.5,
    mt: 0.0,
};
pub const GREY_MATTER: Tissue = Tissue {
    pd: 0.8,
    r1: 0.7,
    r2star: 17.0,
    mt: 0.015,
};
pub const WHITE_MATTER: Tissue = Tissue {
    pd: 0.69,
    r1: 1.2,
    r2star: 22.0,
    mt: 0.03,
};

/// Label of each tissue in [`phantom_labels`].
pub const LABELS: [(i64, Tissue); 4] = [
    (0, BACKGROUND),
    (1, CSF),
    (2, GREY_MATTER),
    (3, WHITE_MATTER),
];

struct Ellipsoid {
    centre: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, u: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((u[a] - self.centre[a]) / self.radii[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

fn label_at(u: [f64; 3]) -> i64 {
    let head = Ellipsoid {
        centre: [0.0; 3],
        radii: [0.92, 0.95, 0.88],
    };
    let brain = Ellipsoid {
        centre: [0.0; 3],
        radii: [0.84, 0.88, 0.8],
    };
    let white = Ellipsoid {
        centre: [0.0, 0.02, 0.05],
        radii: [0.64, 0.7, 0.58],
    };
    let ventricles = [
        Ellipsoid {
            centre: [-0.17, 0.05, 0.08],
            radii: [0.09, 0.28, 0.14],
        },
        Ellipsoid {
            centre: [0.17, 0.05, 0.08],
            radii: [0.09, 0.28, 0.14],
        },
    ];
    if !head.contains(u) {
        0
    } else if !brain.contains(u) || ventricles.iter().any(|v| v.contains(u)) {
        1
    } else if white.contains(u) {
        3
    } else {
        2
    }
}

fn normalised(grid: &Grid3D, x: usize, y: usize, z: usize) -> [f64; 3] {
    let s = grid.shape();
    let p = [x, y, z];
    std::array::from_fn(|a| {
        let half = (s[a] as f64 - 1.0) / 2.0;
        if half == 0.0 {
            0.0
        } else {
            (p[a] as f64 - half) / half
        }
    })
}

/// Integer tissue labels (0 background, 1 CSF, 2 grey matter, 3 white matter).
pub fn phantom_labels(shape: Index3) -> Result<Volume3D> {
    let grid = Grid3D::isotropic(shape)?;
    let g = grid.clone();
    Volume3D::from_fn(grid, VolumeKind::Map, |x, y, z| {
        label_at(normalised(&g, x, y, z)) as f32
    })
}

/// Map set with PD, R1, R2* and MT on a 1 mm isotropic grid of `shape`.
pub fn brain_phantom(shape: Index3) -> Result<QMRIMaps> {
    let labels = phantom_labels(shape)?;
    let grid = labels.grid().clone();
    let tissue = |l: f32| LABELS[l as usize].1;
    let map = |f: fn(Tissue) -> f32| {
        let data = labels.data().iter().map(|&l| f(tissue(l))).collect();
        Volume3D::from_data(grid.clone(), data, VolumeKind::Map)
    };
    QMRIMaps::new(
        map(|t| t.pd)?,
        map(|t| t.r1)?,
        map(|t| t.r2star)?,
        Some(map(|t| t.mt)?),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tissues_present() {
        let labels = phantom_labels([32, 32, 32]).unwrap();
        for (l, _) in LABELS {
            assert!(labels.data().contains(&(l as f32)), "label {l} missing");
        }
        // corners are background
        assert_eq!(labels.get(0, 0, 0), 0.0);
        assert_eq!(labels.get(31, 31, 31), 0.0);
        assert_eq!(labels.get(16, 16, 16), 3.0);
    }

    #[test]
    fn maps_are_valid() {
        let m = brain_phantom([20, 24, 16]).unwrap();
        assert_eq!(m.grid().shape(), [20, 24, 16]);
        assert!(m.mt.is_some());
    }
}
