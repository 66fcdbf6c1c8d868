//! Volumetric data model: grid geometry, scalar volumes and qMRI map sets.
//!
//! Voxels are stored as `f32` in x-fastest order, i.e. the linear index of
//! `(x, y, z)` is `x + nx * (y + ny * z)`. Volumes are immutable once built;
//! every transform in the crate returns a new volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Index3, Result};

pub type Affine = [[f64; 4]; 4];

pub const IDENTITY_AFFINE: Affine = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Voxel lattice: shape, voxel size in millimetres and voxel-to-world affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    shape: Index3,
    spacing: [f64; 3],
    affine: Affine,
}

impl Grid3D {
    pub fn new(shape: Index3, spacing: [f64; 3], affine: Affine) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidGrid(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-positive spacing {spacing:?}"
            )));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite affine".into()));
        }
        let det = det4(&affine);
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidGrid("singular affine".into()));
        }
        Ok(Self {
            shape,
            spacing,
            affine,
        })
    }

    /// Grid whose affine is the diagonal scaling by `spacing` with zero origin.
    pub fn with_spacing(shape: Index3, spacing: [f64; 3]) -> Result<Self> {
        let mut affine = IDENTITY_AFFINE;
        for (axis, &s) in spacing.iter().enumerate() {
            affine[axis][axis] = s;
        }
        Self::new(shape, spacing, affine)
    }

    /// Unit-spacing grid with identity affine.
    pub fn isotropic(shape: Index3) -> Result<Self> {
        Self::with_spacing(shape, [1.0; 3])
    }

    pub fn shape(&self) -> Index3 {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> Index3 {
        let [nx, ny, _] = self.shape;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    /// Grid of a sub-block starting at `origin`; spacing is kept and the
    /// affine is translated so world coordinates are unchanged.
    pub fn sub_grid(&self, origin: Index3, size: Index3) -> Result<Self> {
        check_region(self.shape, origin, size)?;
        let mut affine = self.affine;
        for row in affine.iter_mut().take(3) {
            row[3] += (0..3).map(|c| row[c] * origin[c] as f64).sum::<f64>();
        }
        Self::new(size, self.spacing, affine)
    }
}

pub(crate) fn check_region(shape: Index3, origin: Index3, size: Index3) -> Result<()> {
    let fits = (0..3).all(|a| size[a] >= 1 && origin[a] + size[a] <= shape[a]);
    if fits {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            origin,
            size,
            shape,
        })
    }
}

fn det4(m: &Affine) -> f64 {
    fn det3(a: [[f64; 3]; 3]) -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }
    let mut det = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0; 3]; 3];
        for (r, row) in m.iter().enumerate().skip(1) {
            let mut cc = 0;
            for (c, &v) in row.iter().enumerate() {
                if c != col {
                    minor[r - 1][cc] = v;
                    cc += 1;
                }
            }
        }
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * det3(minor);
    }
    det
}

/// What a volume's values mean; masks are restricted to 0/1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Intensity,
    Map,
    Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    grid: Grid3D,
    data: Vec<f32>,
    kind: VolumeKind,
}

impl Volume3D {
    /// Volume with every voxel set to `fill`.
    pub fn filled(grid: Grid3D, fill: f32, kind: VolumeKind) -> Result<Self> {
        let data = vec![fill; grid.len()];
        Self::from_data(grid, data, kind)
    }

    pub fn from_data(grid: Grid3D, data: Vec<f32>, kind: VolumeKind) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DataLength {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        if kind == VolumeKind::Mask {
            if let Some(i) = data.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinary {
                    index: grid.coords(i),
                    value: data[i],
                });
            }
        }
        Ok(Self { grid, data, kind })
    }

    /// Build from a function of voxel coordinates.
    pub fn from_fn(
        grid: Grid3D,
        kind: VolumeKind,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let data = (0..grid.len())
            .map(|i| {
                let [x, y, z] = grid.coords(i);
                f(x, y, z)
            })
            .collect();
        Self::from_data(grid, data, kind)
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn shape(&self) -> Index3 {
        self.grid.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Same grid and kind, new voxel values. The caller guarantees the length.
    pub(crate) fn with_data(&self, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            grid: self.grid.clone(),
            data,
            kind: self.kind,
        }
    }

    /// Reinterpret with a different kind tag (validated for masks).
    pub fn with_kind(self, kind: VolumeKind) -> Result<Self> {
        Self::from_data(self.grid, self.data, kind)
    }

    pub fn same_grid(&self, other: &Volume3D) -> bool {
        self.grid == other.grid
    }
}

/// Volume with every voxel equal to `fill`.
pub fn new_volume(grid: Grid3D, fill: f32, kind: VolumeKind) -> Result<Volume3D> {
    Volume3D::filled(grid, fill, kind)
}

/// Copy the block `[origin, origin + size)` out of `v`.
pub fn extract_patch(v: &Volume3D, origin: Index3, size: Index3) -> Result<Volume3D> {
    let grid = v.grid.sub_grid(origin, size)?;
    let mut data = Vec::with_capacity(grid.len());
    for z in 0..size[2] {
        for y in 0..size[1] {
            let start = v.grid.index(origin[0], origin[1] + y, origin[2] + z);
            data.extend_from_slice(&v.data[start..start + size[0]]);
        }
    }
    Ok(Volume3D {
        grid,
        data,
        kind: v.kind,
    })
}

/// Co-registered quantitative parameter maps.
///
/// `r2` is read as R2* by the gradient-echo model. Absent `mt` behaves as
/// zero everywhere and absent `b1` as one.
#[derive(Debug, Clone, PartialEq)]
pub struct QMRIMaps {
    pub pd: Volume3D,
    pub r1: Volume3D,
    pub r2: Volume3D,
    pub mt: Option<Volume3D>,
    pub b1: Option<Volume3D>,
}

impl QMRIMaps {
    /// Assemble and validate a map set.
    pub fn new(
        pd: Volume3D,
        r1: Volume3D,
        r2: Volume3D,
        mt: Option<Volume3D>,
        b1: Option<Volume3D>,
    ) -> Result<Self> {
        let maps = Self { pd, r1, r2, mt, b1 };
        validate_maps(&maps)?;
        Ok(maps)
    }

    pub fn grid(&self) -> &Grid3D {
        self.pd.grid()
    }

    pub fn len(&self) -> usize {
        self.pd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pd.is_empty()
    }

    #[inline]
    pub fn mt_at(&self, i: usize) -> f64 {
        self.mt.as_ref().map_or(0.0, |m| m.data[i] as f64)
    }

    #[inline]
    pub fn b1_at(&self, i: usize) -> f64 {
        self.b1.as_ref().map_or(1.0, |m| m.data[i] as f64)
    }
}

/// Check the map-set invariants, reporting the first violation found.
///
/// Checks run in the order: grids, pd, r1, r2, mt, b1; within a map the
/// lowest linear voxel index is reported.
pub fn validate_maps(maps: &QMRIMaps) -> Result<()> {
    let reference = maps.pd.grid();
    let others = [
        ("r1", Some(&maps.r1)),
        ("r2", Some(&maps.r2)),
        ("mt", maps.mt.as_ref()),
        ("b1", maps.b1.as_ref()),
    ];
    for (name, vol) in others {
        if let Some(vol) = vol {
            if vol.grid() != reference {
                return Err(Error::GridMismatch(format!(
                    "{name} grid (shape {:?}) differs from pd grid (shape {:?})",
                    vol.shape(),
                    reference.shape()
                )));
            }
        }
    }

    let first = |vol: &Volume3D, bad: &dyn Fn(f32) -> bool| {
        vol.data
            .iter()
            .position(|&v| bad(v))
            .map(|i| (reference.coords(i), vol.data[i]))
    };

    if let Some((index, value)) = first(&maps.pd, &|v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativePd { index, value });
    }
    for (name, vol) in [("r1", &maps.r1), ("r2", &maps.r2)] {
        if let Some((index, value)) = first(vol, &|v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveRate {
                map: name,
                index,
                value,
            });
        }
    }
    if let Some(mt) = &maps.mt {
        if let Some((index, value)) = first(mt, &|v| !(0.0..1.0).contains(&v)) {
            return Err(Error::MtOutOfRange {
                index,
                value: value as f64,
            });
        }
    }
    if let Some(b1) = &maps.b1 {
        if let Some((index, value)) = first(b1, &|v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveB1 { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> Grid3D {
        Grid3D::isotropic([n, n, n]).unwrap()
    }

    fn ramp(shape: Index3) -> Volume3D {
        let grid = Grid3D::isotropic(shape).unwrap();
        let n = grid.len();
        Volume3D::from_data(
            grid,
            (0..n).map(|i| i as f32).collect(),
            VolumeKind::Intensity,
        )
        .unwrap()
    }

    fn valid_maps(n: usize) -> QMRIMaps {
        let g = cube(n);
        QMRIMaps {
            pd: new_volume(g.clone(), 1.0, VolumeKind::Map).unwrap(),
            r1: new_volume(g.clone(), 1.0, VolumeKind::Map).unwrap(),
            r2: new_volume(g.clone(), 10.0, VolumeKind::Map).unwrap(),
            mt: Some(new_volume(g.clone(), 0.1, VolumeKind::Map).unwrap()),
            b1: Some(new_volume(g, 1.0, VolumeKind::Map).unwrap()),
        }
    }

    fn set(vol: &mut Volume3D, at: Index3, value: f32) {
        let i = vol.grid.index(at[0], at[1], at[2]);
        vol.data[i] = value;
    }

    #[test]
    fn constant_fill() {
        let v = new_volume(cube(2), 0.0, VolumeKind::Map).unwrap();
        assert_eq!(v.len(), 8);
        assert!(v.data().iter().all(|&x| x == 0.0));

        let v = new_volume(cube(1), 1.5, VolumeKind::Intensity).unwrap();
        assert_eq!(v.data(), &[1.5]);
    }

    #[test]
    fn invalid_grids() {
        assert!(matches!(
            Grid3D::isotropic([0, 2, 2]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            Grid3D::with_spacing([2, 2, 2], [1.0, 0.0, 1.0]),
            Err(Error::InvalidGrid(_))
        ));
        let mut singular = IDENTITY_AFFINE;
        singular[2][2] = 0.0;
        assert!(matches!(
            Grid3D::new([2, 2, 2], [1.0; 3], singular),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn mask_must_be_binary() {
        let err = Volume3D::from_data(cube(1), vec![0.5], VolumeKind::Mask).unwrap_err();
        assert!(matches!(err, Error::NonBinary { .. }));
    }

    #[test]
    fn validate_accepts_valid_set() {
        validate_maps(&valid_maps(3)).unwrap();
    }

    #[test]
    fn zero_r1_is_reported_with_index() {
        let mut maps = valid_maps(3);
        set(&mut maps.r1, [1, 2, 0], 0.0);
        match validate_maps(&maps) {
            Err(Error::NonPositiveRate { map, index, .. }) => {
                assert_eq!(map, "r1");
                assert_eq!(index, [1, 2, 0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mt_interval_is_half_open() {
        let mut maps = valid_maps(2);
        set(maps.mt.as_mut().unwrap(), [0, 0, 1], 1.0);
        assert!(matches!(
            validate_maps(&maps),
            Err(Error::MtOutOfRange {
                index: [0, 0, 1],
                ..
            })
        ));
        let mut maps = valid_maps(2);
        set(maps.mt.as_mut().unwrap(), [0, 0, 1], 0.0);
        validate_maps(&maps).unwrap();
    }

    #[test]
    fn negative_pd_and_grid_mismatch() {
        let mut maps = valid_maps(2);
        set(&mut maps.pd, [1, 1, 1], -0.1);
        assert!(matches!(
            validate_maps(&maps),
            Err(Error::NegativePd { .. })
        ));

        let mut maps = valid_maps(2);
        maps.r2 = new_volume(cube(3), 10.0, VolumeKind::Map).unwrap();
        assert!(matches!(validate_maps(&maps), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn patch_of_default_size() {
        let v = new_volume(cube(128), 2.0, VolumeKind::Intensity).unwrap();
        let p = extract_patch(&v, [0, 0, 0], [96, 96, 96]).unwrap();
        assert_eq!(p.shape(), [96, 96, 96]);
        assert_eq!(p.grid().spacing(), v.grid().spacing());
    }

    #[test]
    fn full_patch_is_identity() {
        let v = ramp([4, 5, 6]);
        let p = extract_patch(&v, [0, 0, 0], [4, 5, 6]).unwrap();
        assert_eq!(p, v);
    }

    #[test]
    fn patch_out_of_bounds() {
        let v = new_volume(cube(128), 0.0, VolumeKind::Intensity).unwrap();
        assert!(matches!(
            extract_patch(&v, [100, 0, 0], [96, 96, 96]),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn patch_affine_keeps_world_position() {
        let mut affine = IDENTITY_AFFINE;
        affine[0][0] = 2.0;
        affine[1][1] = 3.0;
        affine[2][2] = 4.0;
        affine[0][3] = -10.0;
        let grid = Grid3D::new([8, 8, 8], [2.0, 3.0, 4.0], affine).unwrap();
        let v = new_volume(grid, 0.0, VolumeKind::Intensity).unwrap();
        let p = extract_patch(&v, [1, 2, 3], [2, 2, 2]).unwrap();
        let a = p.grid().affine();
        assert_eq!([a[0][3], a[1][3], a[2][3]], [-8.0, 6.0, 12.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn patch_matches_direct_indexing(
                shape in prop::array::uniform3(1usize..=16),
                seed in any::<[usize; 6]>(),
            ) {
                let v = ramp(shape);
                let origin: Index3 = std::array::from_fn(|a| seed[a] % shape[a]);
                let size: Index3 =
                    std::array::from_fn(|a| 1 + seed[a + 3] % (shape[a] - origin[a]));
                let p = extract_patch(&v, origin, size).unwrap();
                for z in 0..size[2] {
                    for y in 0..size[1] {
                        for x in 0..size[0] {
                            prop_assert_eq!(
                                p.get(x, y, z),
                                v.get(origin[0] + x, origin[1] + y, origin[2] + z)
                            );
                        }
                    }
                }
            }

            #[test]
            fn validation_agrees_with_scan(
                pd in prop::collection::vec(-0.2f32..1.0, 27),
                r1 in prop::collection::vec(-0.1f32..2.0, 27),
                mt in prop::collection::vec(0.0f32..1.1, 27),
            ) {
                let g = cube(3);
                let maps = QMRIMaps {
                    pd: Volume3D::from_data(g.clone(), pd.clone(), VolumeKind::Map).unwrap(),
                    r1: Volume3D::from_data(g.clone(), r1.clone(), VolumeKind::Map).unwrap(),
                    r2: new_volume(g.clone(), 5.0, VolumeKind::Map).unwrap(),
                    mt: Some(Volume3D::from_data(g, mt.clone(), VolumeKind::Map).unwrap()),
                    b1: None,
                };
                let mut violation = false;
                for i in 0..27 {
                    violation |= pd[i] < 0.0 || r1[i] <= 0.0 || !(mt[i] < 1.0);
                }
                prop_assert_eq!(validate_maps(&maps).is_ok(), !violation);
            }
        }
    }
}
