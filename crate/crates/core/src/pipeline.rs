//! Base / SeqAug / SeqInv view-pair generation and manifest replay.
//!
//! Every random choice of a pair is derived from a single 64-bit seed:
//! sequence draws use stream 0 of the seed, the two augmentation plans use
//! `derive_seed(seed, 1)` and `derive_seed(seed, 2)`. The manifest records
//! the resolved sequences and plans, so replay never touches the sampler.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_plan, make_plan, AugmentationConfig, AugmentationPlan};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngStream, RNG_ALGORITHM};
use crate::sampler::{sample_kind, sample_sequence, SamplerConfig};
use crate::signal::{simulate_volume, SequenceKind, SequenceParams};
use crate::volume::{QMRIMaps, Volume3D};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Draws allowed before SeqInv gives up looking for a distinct second sequence.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// One sampled MPRAGE, augmented twice.
    Base,
    /// One sampled sequence of any kind, augmented twice.
    SeqAug,
    /// Two different sampled sequences, each augmented once.
    SeqInv,
}

impl PairMode {
    pub const ALL: [PairMode; 3] = [PairMode::Base, PairMode::SeqAug, PairMode::SeqInv];

    pub fn name(self) -> &'static str {
        match self {
            PairMode::Base => "base",
            PairMode::SeqAug => "seqaug",
            PairMode::SeqInv => "seqinv",
        }
    }
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown pair mode {s:?}")))
    }
}

/// What "different sequence" means for SeqInv.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistinctPolicy {
    /// The two parameter records differ (same kind allowed).
    #[default]
    Record,
    /// The two sequence kinds differ.
    Kind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub augment: AugmentationConfig,
    pub sampler: SamplerConfig,
    pub seqinv_policy: DistinctPolicy,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.sampler.validate()
    }
}

/// A map set with the identifier recorded in manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMaps {
    pub id: String,
    pub maps: QMRIMaps,
}

impl NamedMaps {
    pub fn new(id: impl Into<String>, maps: QMRIMaps) -> Self {
        Self {
            id: id.into(),
            maps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewRecord {
    /// Index into [`PairManifest::sequences`].
    pub sequence_index: usize,
    pub plan: AugmentationPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairManifest {
    pub schema_version: u32,
    pub rng_algorithm: String,
    pub source_id: String,
    pub mode: PairMode,
    pub seed: u64,
    pub seqinv_policy: DistinctPolicy,
    /// One record for Base and SeqAug, two for SeqInv.
    pub sequences: Vec<SequenceParams>,
    pub views: [ViewRecord; 2],
}

impl PairManifest {
    pub fn view_sequence(&self, view: usize) -> Option<&SequenceParams> {
        self.sequences.get(self.views.get(view)?.sequence_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub view_a: Volume3D,
    pub view_b: Volume3D,
    pub manifest: PairManifest,
}

fn distinct(policy: DistinctPolicy, a: &SequenceParams, b: &SequenceParams) -> bool {
    match policy {
        DistinctPolicy::Record => a != b,
        DistinctPolicy::Kind => a.kind() != b.kind(),
    }
}

fn sample_sequences(
    mode: PairMode,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Vec<SequenceParams>> {
    let mut rng = RngStream::with_stream(seed, 0);
    let s = &cfg.sampler;
    Ok(match mode {
        PairMode::Base => vec![sample_sequence(SequenceKind::Mprage, s, &mut rng)?],
        PairMode::SeqAug => {
            let kind = sample_kind(&mut rng);
            vec![sample_sequence(kind, s, &mut rng)?]
        }
        PairMode::SeqInv => {
            let kind = sample_kind(&mut rng);
            let first = sample_sequence(kind, s, &mut rng)?;
            let mut second = None;
            for _ in 0..MAX_REDRAWS {
                let kind = sample_kind(&mut rng);
                let cand = sample_sequence(kind, s, &mut rng)?;
                if distinct(cfg.seqinv_policy, &first, &cand) {
                    second = Some(cand);
                    break;
                }
            }
            let second = second.ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no distinct second sequence after {MAX_REDRAWS} draws"
                ))
            })?;
            vec![first, second]
        }
    })
}

/// Build the manifest for one pair without simulating anything.
pub fn plan_pair(
    source: &NamedMaps,
    mode: PairMode,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PairManifest> {
    cfg.validate()?;
    let sequences = sample_sequences(mode, cfg, seed)?;
    let grid = source.maps.grid();
    let second = if mode == PairMode::SeqInv { 1 } else { 0 };
    Ok(PairManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        source_id: source.id.clone(),
        mode,
        seed,
        seqinv_policy: cfg.seqinv_policy,
        sequences,
        views: [
            ViewRecord {
                sequence_index: 0,
                plan: make_plan(&cfg.augment, grid, derive_seed(seed, 1))?,
            },
            ViewRecord {
                sequence_index: second,
                plan: make_plan(&cfg.augment, grid, derive_seed(seed, 2))?,
            },
        ],
    })
}

fn render(maps: &QMRIMaps, manifest: PairManifest) -> Result<ViewPair> {
    let simulated = manifest
        .sequences
        .iter()
        .map(|p| simulate_volume(maps, p))
        .collect::<Result<Vec<_>>>()?;
    let view = |i: usize| {
        let rec = &manifest.views[i];
        let base = simulated.get(rec.sequence_index).ok_or_else(|| {
            Error::Malformed(format!(
                "view {i} references sequence {} of {}",
                rec.sequence_index,
                simulated.len()
            ))
        })?;
        apply_plan(base, &rec.plan)
    };
    Ok(ViewPair {
        view_a: view(0)?,
        view_b: view(1)?,
        manifest,
    })
}

/// Generate one view pair from `source`.
pub fn generate_pair(
    source: &NamedMaps,
    mode: PairMode,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<ViewPair> {
    let manifest = plan_pair(source, mode, cfg, seed)?;
    render(&source.maps, manifest)
}

/// Rebuild both views of a pair from its manifest.
pub fn regenerate_from_manifest(
    sources: &[NamedMaps],
    manifest: &PairManifest,
) -> Result<ViewPair> {
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            found: manifest.schema_version,
            supported: MANIFEST_SCHEMA_VERSION,
        });
    }
    if manifest.rng_algorithm != RNG_ALGORITHM {
        return Err(Error::Malformed(format!(
            "manifest uses RNG {:?}, this build provides {RNG_ALGORITHM:?}",
            manifest.rng_algorithm
        )));
    }
    let source = sources
        .iter()
        .find(|s| s.id == manifest.source_id)
        .ok_or_else(|| Error::MissingSource(manifest.source_id.clone()))?;
    render(&source.maps, manifest.clone())
}

/// Seed of pair `index` in a batch.
pub fn pair_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn check_batch(sources: &[NamedMaps], count: usize, cfg: &PipelineConfig) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::InvalidConfig("no map sets given".into()));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("pair count must be >= 1".into()));
    }
    cfg.validate()
}

/// Generate `count` pairs on `workers` threads and hand each to `sink`
/// together with its index. Pair `i` uses source `i % sources.len()` and
/// seed [`pair_seed`]`(seed, i)`; `sink` may be called in any order.
pub fn for_each_pair<F>(
    sources: &[NamedMaps],
    mode: PairMode,
    cfg: &PipelineConfig,
    seed: u64,
    count: usize,
    workers: usize,
    sink: F,
) -> Result<()>
where
    F: Fn(usize, ViewPair) -> Result<()> + Sync,
{
    check_batch(sources, count, cfg)?;
    pool(workers)?.install(|| {
        (0..count).into_par_iter().try_for_each(|i| {
            let pair = generate_pair(&sources[i % sources.len()], mode, cfg, pair_seed(seed, i))?;
            sink(i, pair)
        })
    })
}

/// Generate `count` pairs, returned in index order.
pub fn generate_batch(
    sources: &[NamedMaps],
    mode: PairMode,
    cfg: &PipelineConfig,
    seed: u64,
    count: usize,
    workers: usize,
) -> Result<Vec<ViewPair>> {
    check_batch(sources, count, cfg)?;
    pool(workers)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| generate_pair(&sources[i % sources.len()], mode, cfg, pair_seed(seed, i)))
            .collect()
    })
}
