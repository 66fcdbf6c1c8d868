//! Physics-based synthesis of MRI contrasts from quantitative parameter
//! maps, with augmentation, self-supervised view-pair generation and the
//! loss and evaluation maths that go with it.
//!
//! ```
//! use qmrisim::{brain_phantom, simulate_volume, SequenceParams};
//!
//! let maps = brain_phantom([16, 16, 16]).unwrap();
//! let t1w = SequenceParams::Fse { te: 0.012, tr: 0.5 };
//! let image = simulate_volume(&maps, &t1w).unwrap();
//! assert_eq!(image.shape(), [16, 16, 16]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod augment;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod signal;
pub mod ssl;
pub mod volume;

pub use augment::{apply_plan, make_plan, AugmentationConfig, AugmentationPlan, Step};
pub use error::{Error, Index3, Result};
pub use io::{read_nifti, read_qmri_set, write_nifti, QmriPaths};
pub use metrics::{dice, hd95, multiclass_dice, psnr, MetricResult};
pub use phantom::brain_phantom;
pub use pipeline::{
    generate_batch, generate_pair, regenerate_from_manifest, DistinctPolicy, NamedMaps,
    PairManifest, PairMode, PipelineConfig, ViewPair,
};
pub use rng::{derive_seed, RngStream, RNG_ALGORITHM};
pub use sampler::{sample_sequence, SamplerConfig};
pub use signal::{add_rician, simulate_volume, NoiseParams, SequenceKind, SequenceParams};
pub use ssl::{nt_xent_grad, nt_xent_loss, EmbeddingBatch};
pub use volume::{Affine, Grid3D, QMRIMaps, Volume3D, VolumeKind};
