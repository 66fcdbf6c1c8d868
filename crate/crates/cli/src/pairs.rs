//! `pair` and `replay`.
//!
//! Layout of a run directory:
//!
//! ```text
//! <out>/run.json
//! <out>/0000/view_a.nii.gz
//! <out>/0000/view_b.nii.gz
//! <out>/0000/manifest.json
//! ...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qmrisim::pipeline::{for_each_pair, PairManifest, PipelineConfig};
use qmrisim::{io, read_nifti, read_qmri_set, regenerate_from_manifest, NamedMaps, Volume3D};

use crate::args::{PairArgs, ReplayArgs};
use crate::config::{
    parse_shape, rng_algorithm, tool_version, FileConfig, RunRecord, RECORD_SCHEMA_VERSION,
};
use crate::error::{failed, usage, CliError, CliResult};

pub const RUN_FILE: &str = "run.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VIEW_FILES: [&str; 2] = ["view_a.nii.gz", "view_b.nii.gz"];

pub fn pair_dir_name(index: usize) -> String {
    format!("{index:04}")
}

fn source_id(dir: &Path) -> CliResult<String> {
    let named = dir.file_name().map(|n| n.to_string_lossy().into_owned());
    let named = match named {
        Some(n) if n != ".." => n,
        _ => fs::canonicalize(dir)
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .ok_or_else(|| failed(format!("cannot name map directory {}", dir.display())))?,
    };
    Ok(named)
}

/// Source id to directory, rejecting duplicate ids.
fn source_table(dirs: &[PathBuf]) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut table = BTreeMap::new();
    for dir in dirs {
        let id = source_id(dir)?;
        let abs = fs::canonicalize(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))?;
        if table.insert(id.clone(), abs).is_some() {
            return Err(usage(format!("two map directories share the name {id:?}")));
        }
    }
    Ok(table)
}

fn load_sources(table: &BTreeMap<String, PathBuf>) -> CliResult<Vec<NamedMaps>> {
    table
        .iter()
        .map(|(id, dir)| Ok(NamedMaps::new(id.clone(), read_qmri_set(dir)?)))
        .collect()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn pair(a: PairArgs) -> CliResult {
    let file = FileConfig::load_opt(a.config.as_deref())?;
    let mode = a
        .mode
        .map(Into::into)
        .or(file.mode)
        .ok_or_else(|| usage("missing --mode"))?;
    let count = a
        .count
        .or(file.count)
        .ok_or_else(|| usage("missing --count"))?;
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| usage("pair requires --seed (or QMRISIM_SEED)"))?;
    let out = a
        .out
        .clone()
        .or(file.out.clone())
        .ok_or_else(|| usage("missing --out"))?;
    let workers = a.workers.or(file.workers).unwrap_or_else(default_workers);
    let map_dirs = if a.maps.is_empty() {
        file.maps.clone()
    } else {
        a.maps.clone()
    };
    if map_dirs.is_empty() {
        return Err(usage("missing --maps"));
    }
    if count == 0 {
        return Err(usage("--count must be >= 1"));
    }
    if workers == 0 {
        return Err(usage("--workers must be >= 1"));
    }

    let mut pipeline = PipelineConfig {
        augment: file.augment,
        sampler: file.sampler,
        seqinv_policy: file.seqinv_policy.unwrap_or_default(),
    };
    if let Some(crop) = &a.crop {
        pipeline.augment.crop_size = parse_shape(crop)?;
    }
    if let Some(p) = a.policy {
        pipeline.seqinv_policy = match p {
            crate::args::Policy::Record => qmrisim::DistinctPolicy::Record,
            crate::args::Policy::Kind => qmrisim::DistinctPolicy::Kind,
        };
    }
    pipeline.validate()?;

    let table = source_table(&map_dirs)?;
    let sources = load_sources(&table)?;
    fs::create_dir_all(&out).map_err(|e| failed(format!("{}: {e}", out.display())))?;
    let record = RunRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        tool_version: tool_version(),
        rng_algorithm: rng_algorithm(),
        mode,
        seed,
        count,
        sources: table,
        pipeline: pipeline.clone(),
    };
    io::write_json(&record, out.join(RUN_FILE))?;

    for_each_pair(&sources, mode, &pipeline, seed, count, workers, |i, p| {
        let dir = out.join(pair_dir_name(i));
        fs::create_dir_all(&dir).map_err(|e| qmrisim::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        io::write_nifti(&p.view_a, dir.join(VIEW_FILES[0]))?;
        io::write_nifti(&p.view_b, dir.join(VIEW_FILES[1]))?;
        io::write_json(&p.manifest, dir.join(MANIFEST_FILE))
    })?;
    Ok(())
}

/// Pair directories under `dir`: `dir` itself when it holds a manifest,
/// otherwise its subdirectories that do.
fn pair_dirs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| failed(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    if dirs.is_empty() {
        return Err(usage(format!(
            "no {MANIFEST_FILE} found in {}",
            dir.display()
        )));
    }
    dirs.sort();
    Ok(dirs)
}

fn recorded_sources(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    for candidate in [Some(dir), dir.parent()].into_iter().flatten() {
        let run = candidate.join(RUN_FILE);
        if run.is_file() {
            let record: RunRecord = io::read_json(&run)?;
            return Ok(record.sources);
        }
    }
    Err(usage(format!(
        "no --maps given and no {RUN_FILE} next to {}",
        dir.display()
    )))
}

/// First voxel where the two volumes differ bitwise, if any.
fn first_difference(stored: &Volume3D, fresh: &Volume3D) -> Option<String> {
    if stored.shape() != fresh.shape() {
        return Some(format!(
            "shape {:?} stored, {:?} regenerated",
            stored.shape(),
            fresh.shape()
        ));
    }
    let i = stored
        .data()
        .iter()
        .zip(fresh.data())
        .position(|(a, b)| a.to_bits() != b.to_bits())?;
    let [x, y, z] = stored.grid().coords(i);
    Some(format!(
        "voxel ({x}, {y}, {z}): stored {}, regenerated {}",
        stored.data()[i],
        fresh.data()[i]
    ))
}

pub fn replay(a: ReplayArgs) -> CliResult {
    let dirs = pair_dirs(&a.dir)?;
    let table = if a.maps.is_empty() {
        recorded_sources(&a.dir)?
    } else {
        source_table(&a.maps)?
    };
    let mut manifests = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let m: PairManifest = io::read_json(d.join(MANIFEST_FILE))?;
        manifests.push(m);
    }
    let needed: BTreeMap<String, PathBuf> = table
        .into_iter()
        .filter(|(id, _)| manifests.iter().any(|m| &m.source_id == id))
        .collect();
    let sources = load_sources(&needed)?;

    for (d, m) in dirs.iter().zip(&manifests) {
        let fresh = regenerate_from_manifest(&sources, m)?;
        for (name, view) in VIEW_FILES.iter().zip([&fresh.view_a, &fresh.view_b]) {
            let path = d.join(name);
            let stored = read_nifti(&path)?;
            if let Some(diff) = first_difference(&stored, view) {
                return Err(CliError::Diff(format!("{}: {diff}", path.display())));
            }
        }
    }
    println!("{} pair(s) identical", dirs.len());
    Ok(())
}
