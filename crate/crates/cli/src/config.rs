//! TOML run configuration and the JSON records written next to outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qmrisim::pipeline::{DistinctPolicy, PipelineConfig};
use qmrisim::{AugmentationConfig, Index3, PairMode, SamplerConfig, SequenceParams, RNG_ALGORITHM};
use serde::{Deserialize, Serialize};

use crate::error::{failed, usage, CliResult};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// Human-edited configuration. Every field is optional; flags on the
/// command line override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<PairMode>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Relative paths are resolved against the config file's directory.
    pub maps: Vec<PathBuf>,
    pub seqinv_policy: Option<DistinctPolicy>,
    pub sampler: SamplerConfig,
    pub augment: AugmentationConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| failed(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for m in &mut cfg.maps {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        if let Some(out) = &mut cfg.out {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Written as `run.json` at the root of a `pair` output directory. The
/// worker count is left out so output bytes do not depend on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub mode: PairMode,
    pub seed: u64,
    pub count: usize,
    /// Source id to map directory.
    pub sources: BTreeMap<String, PathBuf>,
    pub pipeline: PipelineConfig,
}

/// Sidecar of `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub maps: PathBuf,
    pub sequence: SequenceParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_algorithm: Option<String>,
}

/// Sidecar of `noise`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub input: PathBuf,
    pub sigma: f64,
    pub seed: u64,
    pub rng_algorithm: String,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn rng_algorithm() -> String {
    RNG_ALGORITHM.to_string()
}

/// `out.nii.gz` -> `out.json`; other names get `.json` appended.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .map(str::to_string)
        .unwrap_or(name);
    out.with_file_name(format!("{stem}.json"))
}

/// `N` or `XxYxZ`.
pub fn parse_shape(s: &str) -> CliResult<Index3> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("cannot parse size {s:?}; expected N or XxYxZ")))?;
    let shape = match nums.as_slice() {
        [n] => [*n; 3],
        [x, y, z] => [*x, *y, *z],
        _ => {
            return Err(usage(format!(
                "cannot parse size {s:?}; expected N or XxYxZ"
            )))
        }
    };
    if shape.contains(&0) {
        return Err(usage(format!("size {s:?} has a zero extent")));
    }
    Ok(shape)
}

pub fn create_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| failed(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/s.nii.gz")), Path::new("a/s.json"));
        assert_eq!(sidecar_path(Path::new("s.nii")), Path::new("s.json"));
        assert_eq!(sidecar_path(Path::new("s.img")), Path::new("s.img.json"));
    }

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("64").unwrap(), [64; 3]);
        assert_eq!(parse_shape("32x48x16").unwrap(), [32, 48, 16]);
        assert!(parse_shape("0").is_err());
        assert!(parse_shape("3x4").is_err());
        assert!(parse_shape("abc").is_err());
    }

    #[test]
    fn toml_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            r#"
mode = "seqinv"
seed = 7
maps = ["subj01"]
seqinv_policy = "kind"

[sampler]
mprage_n = 160

[augment]
crop_size = [32, 32, 32]
gibbs_prob = 0.0
"#,
        )
        .unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.mode, Some(PairMode::SeqInv));
        assert_eq!(cfg.maps, vec![dir.path().join("subj01")]);
        assert_eq!(cfg.sampler.mprage_n, 160);
        assert_eq!(cfg.augment.crop_size, [32; 3]);
        assert_eq!(
            cfg.augment.rotate_prob,
            AugmentationConfig::default().rotate_prob
        );
        assert_eq!(cfg.seqinv_policy, Some(DistinctPolicy::Kind));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "mode = \"base\"\ncrop = 3\n").unwrap();
        assert!(FileConfig::load(&path).is_err());
    }
}
