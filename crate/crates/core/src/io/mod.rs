//! File formats: NIfTI-1 volumes, qMRI map directories and JSON records.

mod nifti;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use nifti::{
    decode_nifti, encode_nifti, read_header, read_nifti, write_nifti, Datatype, VolumeHeader,
};

use crate::error::{Error, Result};
use crate::volume::{QMRIMaps, Volume3D, VolumeKind};

/// Explicit file locations of a map set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QmriPaths {
    pub pd: PathBuf,
    pub r1: PathBuf,
    pub r2: PathBuf,
    pub mt: Option<PathBuf>,
    pub b1: Option<PathBuf>,
}

/// Base names tried for each map, in order. `.nii.gz` is preferred over
/// `.nii` for the same base name.
const NAMES: [(&str, &[&str]); 5] = [
    ("pd", &["pd", "PD"]),
    ("r1", &["r1", "R1"]),
    ("r2", &["r2", "R2", "r2s", "R2s", "r2star", "R2star"]),
    ("mt", &["mt", "MT"]),
    ("b1", &["b1", "B1"]),
];

fn find_map(dir: &Path, bases: &[&str]) -> Option<PathBuf> {
    bases.iter().find_map(|base| {
        ["nii.gz", "nii"]
            .iter()
            .map(|ext| dir.join(format!("{base}.{ext}")))
            .find(|p| p.is_file())
    })
}

impl QmriPaths {
    /// Locate `pd`, `r1`, `r2` (or `r2s`/`r2star`) and optional `mt`, `b1`
    /// files in a directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut found: Vec<Option<PathBuf>> = NAMES
            .iter()
            .map(|(_, bases)| find_map(dir, bases))
            .collect();
        let mut required = |slot: usize| {
            found[slot].take().ok_or_else(|| Error::MissingMap {
                name: NAMES[slot].0,
                dir: dir.to_path_buf(),
            })
        };
        let (pd, r1, r2) = (required(0)?, required(1)?, required(2)?);
        Ok(Self {
            pd,
            r1,
            r2,
            mt: found[3].take(),
            b1: found[4].take(),
        })
    }
}

fn read_map(path: &Path) -> Result<Volume3D> {
    let v = read_nifti(path)?;
    if v.kind() == VolumeKind::Map {
        Ok(v)
    } else {
        v.with_kind(VolumeKind::Map)
    }
}

pub fn read_qmri_paths(paths: &QmriPaths) -> Result<QMRIMaps> {
    QMRIMaps::new(
        read_map(&paths.pd)?,
        read_map(&paths.r1)?,
        read_map(&paths.r2)?,
        paths.mt.as_deref().map(read_map).transpose()?,
        paths.b1.as_deref().map(read_map).transpose()?,
    )
}

/// Load and validate the map set stored in `dir`.
pub fn read_qmri_set(dir: impl AsRef<Path>) -> Result<QMRIMaps> {
    read_qmri_paths(&QmriPaths::from_dir(dir)?)
}

/// Write a map set as `pd.nii.gz`, `r1.nii.gz`, `r2.nii.gz` and, when
/// present, `mt.nii.gz` and `b1.nii.gz`.
pub fn write_qmri_set(maps: &QMRIMaps, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let all = [
        ("pd", Some(&maps.pd)),
        ("r1", Some(&maps.r1)),
        ("r2", Some(&maps.r2)),
        ("mt", maps.mt.as_ref()),
        ("b1", maps.b1.as_ref()),
    ];
    for (name, vol) in all {
        if let Some(vol) = vol {
            write_nifti(vol, dir.join(format!("{name}.nii.gz")))?;
        }
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{new_volume, Grid3D};

    fn maps(shape: [usize; 3]) -> QMRIMaps {
        let g = Grid3D::isotropic(shape).unwrap();
        QMRIMaps::new(
            new_volume(g.clone(), 0.8, VolumeKind::Map).unwrap(),
            new_volume(g.clone(), 1.1, VolumeKind::Map).unwrap(),
            new_volume(g, 20.0, VolumeKind::Map).unwrap(),
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn directory_without_mt() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps([3, 4, 5]);
        write_qmri_set(&m, dir.path()).unwrap();
        let back = read_qmri_set(dir.path()).unwrap();
        assert!(back.mt.is_none());
        assert_eq!(back, m);
    }

    #[test]
    fn r2star_alias_and_plain_nii() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps([2, 2, 2]);
        write_nifti(&m.pd, dir.path().join("pd.nii")).unwrap();
        write_nifti(&m.r1, dir.path().join("R1.nii")).unwrap();
        write_nifti(&m.r2, dir.path().join("r2star.nii.gz")).unwrap();
        let paths = QmriPaths::from_dir(dir.path()).unwrap();
        assert!(paths.r2.ends_with("r2star.nii.gz"));
        assert_eq!(read_qmri_paths(&paths).unwrap(), m);
    }

    #[test]
    fn missing_required_map() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps([2, 2, 2]);
        write_nifti(&m.pd, dir.path().join("pd.nii.gz")).unwrap();
        write_nifti(&m.r2, dir.path().join("r2.nii.gz")).unwrap();
        assert!(matches!(
            read_qmri_set(dir.path()),
            Err(Error::MissingMap { name: "r1", .. })
        ));
    }

    #[test]
    fn mismatched_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps([2, 2, 2]);
        write_qmri_set(&m, dir.path()).unwrap();
        write_nifti(&maps([3, 2, 2]).r1, dir.path().join("r1.nii.gz")).unwrap();
        assert!(matches!(
            read_qmri_set(dir.path()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn mt_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps([2, 2, 2]);
        write_qmri_set(&m, dir.path()).unwrap();
        let mt = new_volume(m.grid().clone(), 1.2, VolumeKind::Map).unwrap();
        write_nifti(&mt, dir.path().join("mt.nii.gz")).unwrap();
        assert!(matches!(
            read_qmri_set(dir.path()),
            Err(Error::MtOutOfRange { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = crate::signal::SequenceParams::Gre {
            te: 0.0123456789,
            tr: 0.7,
            alpha_deg: 13.0,
        };
        let path = dir.path().join("p.json");
        write_json(&p, &path).unwrap();
        let back: crate::signal::SequenceParams = read_json(&path).unwrap();
        assert_eq!(back, p);
    }
}
