use serde::{Deserialize, Serialize};

use crate::error::{Index3, Result};
use crate::volume::{check_region, Volume3D};

/// Axis-aligned block `[origin, origin + size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cuboid {
    pub origin: Index3,
    pub size: Index3,
}

impl Cuboid {
    pub fn contains(&self, p: Index3) -> bool {
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + self.size[a])
    }
}

/// Zero every voxel inside any of `cuboids`.
pub fn cuboid_dropout(v: &Volume3D, cuboids: &[Cuboid]) -> Result<Volume3D> {
    let shape = v.shape();
    for c in cuboids {
        check_region(shape, c.origin, c.size)?;
    }
    let grid = v.grid();
    let mut data = v.data().to_vec();
    for c in cuboids {
        for z in c.origin[2]..c.origin[2] + c.size[2] {
            for y in c.origin[1]..c.origin[1] + c.size[1] {
                let start = grid.index(c.origin[0], y, z);
                data[start..start + c.size[0]].fill(0.0);
            }
        }
    }
    Ok(v.with_data(data))
}
