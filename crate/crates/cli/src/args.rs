use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmrisim::{PairMode, SequenceKind};

#[derive(Debug, Parser)]
#[command(
    name = "qmrisim",
    version,
    about = "Synthesise MRI contrasts from quantitative maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one sequence from a map set
    Simulate(SimulateArgs),
    /// Print sampled sequence parameters as JSON lines
    Sample(SampleArgs),
    /// Generate self-supervised view pairs
    Pair(PairArgs),
    /// Regenerate stored pairs from their manifests and compare
    Replay(ReplayArgs),
    /// Add Rician noise to a volume
    Noise(NoiseArgs),
    /// Compare two volumes
    Metrics(MetricsArgs),
    /// Write a synthetic head phantom map set
    Phantom(PhantomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Fse,
    Gre,
    Flair,
    Mprage,
}

impl From<Kind> for SequenceKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Fse => SequenceKind::Fse,
            Kind::Gre => SequenceKind::Gre,
            Kind::Flair => SequenceKind::Flair,
            Kind::Mprage => SequenceKind::Mprage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Base,
    Seqaug,
    Seqinv,
}

impl From<Mode> for PairMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Base => PairMode::Base,
            Mode::Seqaug => PairMode::SeqAug,
            Mode::Seqinv => PairMode::SeqInv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Record,
    Kind,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory holding pd, r1, r2 (and optionally mt, b1) NIfTI files
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long, value_enum)]
    pub sequence: Kind,
    /// Echo time (s)
    #[arg(long)]
    pub te: Option<f64>,
    /// Repetition time (s)
    #[arg(long)]
    pub tr: Option<f64>,
    /// Inversion time (s)
    #[arg(long)]
    pub ti: Option<f64>,
    /// MPRAGE echo spacing (s)
    #[arg(long)]
    pub tx: Option<f64>,
    /// MPRAGE delay time (s); derived from tr, ti, tx and n when omitted
    #[arg(long)]
    pub td: Option<f64>,
    /// Flip angle (degrees)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// MPRAGE readout length
    #[arg(long)]
    pub n: Option<u32>,
    /// Draw the parameters from the sampler instead of flags
    #[arg(long, conflicts_with_all = ["te", "tr", "ti", "tx", "td", "alpha"])]
    pub sample: bool,
    #[arg(long, env = "QMRISIM_SEED")]
    pub seed: Option<u64>,
    /// TOML run configuration (its [sampler] table is used with --sample)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output volume (.nii or .nii.gz); a .json sidecar is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Sequence kind; drawn uniformly when omitted
    #[arg(long, value_enum)]
    pub sequence: Option<Kind>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, env = "QMRISIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Map set directories (repeatable); the directory name is the source id
    #[arg(long, num_args = 1..)]
    pub maps: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, env = "QMRISIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML run configuration; command-line flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Crop size, either N or XxYxZ
    #[arg(long)]
    pub crop: Option<String>,
    /// How SeqInv decides that two sequences differ
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
    #[arg(long, env = "QMRISIM_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A pair directory, or a run directory containing pair directories
    #[arg(long)]
    pub dir: PathBuf,
    /// Map set directories; defaults to the sources recorded in run.json
    #[arg(long, num_args = 1..)]
    pub maps: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, env = "QMRISIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Psnr,
    Dice,
    Hd95,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(value_enum)]
    pub metric: Metric,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// PSNR peak value, or `auto` for the reference's max - min
    #[arg(long)]
    pub peak: Option<String>,
    /// Comma-separated labels for per-class Dice
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<i64>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Grid size, either N or XxYxZ
    #[arg(long, default_value = "64")]
    pub shape: String,
    #[arg(long)]
    pub out: PathBuf,
}
