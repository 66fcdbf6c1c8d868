//! Forward signal models for FSE, GRE, FLAIR and MPRAGE, and Rician
//! magnitude corruption.
//!
//! All exponentials are evaluated in `f64`; results are stored as `f32`.
//! Flip angles are given in degrees. Times are in seconds, rates in 1/s.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::volume::{validate_maps, QMRIMaps, Volume3D, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Fse,
    Gre,
    Flair,
    Mprage,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 4] = [
        SequenceKind::Fse,
        SequenceKind::Gre,
        SequenceKind::Flair,
        SequenceKind::Mprage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Fse => "fse",
            SequenceKind::Gre => "gre",
            SequenceKind::Flair => "flair",
            SequenceKind::Mprage => "mprage",
        }
    }
}

impl std::fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fse" => Ok(SequenceKind::Fse),
            "gre" => Ok(SequenceKind::Gre),
            "flair" => Ok(SequenceKind::Flair),
            "mprage" => Ok(SequenceKind::Mprage),
            other => Err(Error::InvalidSequence(format!(
                "unknown sequence {other:?}"
            ))),
        }
    }
}

/// Acquisition parameters for one sequence. Each variant carries exactly the
/// fields its signal equation uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SequenceParams {
    Fse {
        te: f64,
        tr: f64,
    },
    Gre {
        te: f64,
        tr: f64,
        alpha_deg: f64,
    },
    Flair {
        te: f64,
        tr: f64,
        ti: f64,
    },
    /// `td` is the delay after the readout train; `n` the number of
    /// excitations spaced `tx` apart. `te` is recorded but does not enter
    /// the signal equation.
    Mprage {
        te: f64,
        tr: f64,
        ti: f64,
        tx: f64,
        td: f64,
        alpha_deg: f64,
        n: u32,
    },
}

impl SequenceParams {
    pub fn kind(&self) -> SequenceKind {
        match self {
            SequenceParams::Fse { .. } => SequenceKind::Fse,
            SequenceParams::Gre { .. } => SequenceKind::Gre,
            SequenceParams::Flair { .. } => SequenceKind::Flair,
            SequenceParams::Mprage { .. } => SequenceKind::Mprage,
        }
    }

    pub fn te(&self) -> f64 {
        match *self {
            SequenceParams::Fse { te, .. }
            | SequenceParams::Gre { te, .. }
            | SequenceParams::Flair { te, .. }
            | SequenceParams::Mprage { te, .. } => te,
        }
    }

    pub fn tr(&self) -> f64 {
        match *self {
            SequenceParams::Fse { tr, .. }
            | SequenceParams::Gre { tr, .. }
            | SequenceParams::Flair { tr, .. }
            | SequenceParams::Mprage { tr, .. } => tr,
        }
    }

    /// Check sign and range constraints of every field.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSequence(format!(
                    "{name} must be > 0, got {v}"
                )))
            }
        }
        fn flip(v: f64) -> Result<()> {
            if v > 0.0 && v <= 90.0 {
                Ok(())
            } else {
                Err(Error::InvalidSequence(format!(
                    "alpha_deg must be in (0, 90], got {v}"
                )))
            }
        }
        positive("te", self.te())?;
        positive("tr", self.tr())?;
        match *self {
            SequenceParams::Fse { .. } => Ok(()),
            SequenceParams::Gre { alpha_deg, .. } => flip(alpha_deg),
            SequenceParams::Flair { ti, .. } => positive("ti", ti),
            SequenceParams::Mprage {
                ti,
                tx,
                td,
                alpha_deg,
                n,
                ..
            } => {
                positive("ti", ti)?;
                positive("tx", tx)?;
                if !(td >= 0.0 && td.is_finite()) {
                    return Err(Error::InvalidSequence(format!("td must be >= 0, got {td}")));
                }
                if n == 0 {
                    return Err(Error::InvalidSequence("n must be >= 1".into()));
                }
                flip(alpha_deg)
            }
        }
    }

    /// Signal for one voxel. The caller guarantees `mt < 1` for GRE.
    #[inline]
    fn eval(&self, pd: f64, b1: f64, r1: f64, r2: f64, mt: f64) -> f64 {
        match *self {
            SequenceParams::Fse { te, tr } => fse(pd, b1, r1, r2, te, tr),
            SequenceParams::Gre { te, tr, alpha_deg } => {
                gre(pd, b1, r1, r2, mt, te, tr, alpha_deg.to_radians())
            }
            SequenceParams::Flair { te, tr, ti } => flair(pd, b1, r1, r2, te, tr, ti),
            SequenceParams::Mprage {
                tr,
                tx,
                td,
                alpha_deg,
                n,
                ..
            } => mprage(pd, b1, r1, tr, tx, td, alpha_deg.to_radians(), n),
        }
    }
}

fn wrong_kind(expected: SequenceKind, p: &SequenceParams) -> Error {
    Error::WrongSequenceKind {
        expected: expected.name(),
        actual: p.kind().name(),
    }
}

#[inline]
fn fse(pd: f64, b1: f64, r1: f64, r2: f64, te: f64, tr: f64) -> f64 {
    pd * b1 * (1.0 - (-r1 * tr).exp()) * (-r2 * te).exp()
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn gre(pd: f64, b1: f64, r1: f64, r2s: f64, mt: f64, te: f64, tr: f64, alpha: f64) -> f64 {
    let e1 = (-r1 * tr).exp();
    let keep = 1.0 - mt;
    pd * b1 * alpha.sin() * keep * (1.0 - e1) / (1.0 - alpha.cos() * keep * e1) * (-r2s * te).exp()
}

#[inline]
fn flair(pd: f64, b1: f64, r1: f64, r2: f64, te: f64, tr: f64, ti: f64) -> f64 {
    pd * b1 * (-r2 * te).exp() * (1.0 - 2.0 * (-r1 * ti).exp() + (-r1 * tr).exp())
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn mprage(pd: f64, b1: f64, r1: f64, tr: f64, tx: f64, td: f64, alpha: f64, n: u32) -> f64 {
    let (sin_a, cos_a) = alpha.sin_cos();
    let e1 = (-r1 * tr).exp();
    let ed = (-td * r1).exp();
    let steady = sin_a * (1.0 - e1) / (1.0 - cos_a * e1);
    let train = 1.0 - (cos_a * (-tx * r1).exp()).powf(n as f64);
    pd * b1 * (steady * train * ed + 1.0 - ed).abs()
}

/// Fast spin echo: `PD·B1·(1 − e^(−R1·TR))·e^(−R2·TE)`.
pub fn signal_fse(pd: f64, b1: f64, r1: f64, r2: f64, p: &SequenceParams) -> Result<f64> {
    match *p {
        SequenceParams::Fse { te, tr } => Ok(fse(pd, b1, r1, r2, te, tr)),
        _ => Err(wrong_kind(SequenceKind::Fse, p)),
    }
}

/// Spoiled gradient echo with magnetisation-transfer attenuation `(1 − MT)`.
pub fn signal_gre(
    pd: f64,
    b1: f64,
    r1: f64,
    r2star: f64,
    mt: f64,
    p: &SequenceParams,
) -> Result<f64> {
    match *p {
        SequenceParams::Gre { te, tr, alpha_deg } => {
            if !(0.0..1.0).contains(&mt) {
                return Err(Error::MtOutOfRange {
                    index: [0, 0, 0],
                    value: mt,
                });
            }
            Ok(gre(pd, b1, r1, r2star, mt, te, tr, alpha_deg.to_radians()))
        }
        _ => Err(wrong_kind(SequenceKind::Gre, p)),
    }
}

/// Inversion recovery. Returns the signed value; it can be negative when
/// TI is below the tissue null point.
pub fn signal_flair(pd: f64, b1: f64, r1: f64, r2: f64, p: &SequenceParams) -> Result<f64> {
    match *p {
        SequenceParams::Flair { te, tr, ti } => Ok(flair(pd, b1, r1, r2, te, tr, ti)),
        _ => Err(wrong_kind(SequenceKind::Flair, p)),
    }
}

/// Magnetisation-prepared rapid gradient echo (magnitude).
pub fn signal_mprage(pd: f64, b1: f64, r1: f64, p: &SequenceParams) -> Result<f64> {
    match *p {
        SequenceParams::Mprage {
            tr,
            tx,
            td,
            alpha_deg,
            n,
            ..
        } => Ok(mprage(pd, b1, r1, tr, tx, td, alpha_deg.to_radians(), n)),
        _ => Err(wrong_kind(SequenceKind::Mprage, p)),
    }
}

/// Evaluate the sequence's signal equation at every voxel of `maps`.
pub fn simulate_volume(maps: &QMRIMaps, p: &SequenceParams) -> Result<Volume3D> {
    validate_maps(maps)?;
    p.validate()?;
    let (pd, r1, r2) = (maps.pd.data(), maps.r1.data(), maps.r2.data());
    let data: Vec<f32> = (0..maps.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            p.eval(
                pd[i] as f64,
                maps.b1_at(i),
                r1[i] as f64,
                r2[i] as f64,
                maps.mt_at(i),
            ) as f32
        })
        .collect();
    Volume3D::from_data(maps.grid().clone(), data, VolumeKind::Intensity)
}

/// Standard deviation of the real and imaginary Gaussian noise components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma >= 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::InvalidConfig(format!(
                "noise sigma must be >= 0, got {sigma}"
            )))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Voxels per independently seeded noise chunk. Chunk `c` draws from stream
/// `c` of the seed, so output does not depend on how chunks are scheduled.
pub const RICIAN_CHUNK: usize = 4096;

/// Rician magnitude corruption: `sqrt((S + e_r)^2 + e_i^2)` with
/// `e_r, e_i ~ N(0, sigma^2)` drawn independently per voxel.
pub fn add_rician(v: &Volume3D, noise: NoiseParams, seed: u64) -> Volume3D {
    let sigma = noise.sigma;
    let mut out = vec![0.0f32; v.len()];
    out.par_chunks_mut(RICIAN_CHUNK)
        .zip(v.data().par_chunks(RICIAN_CHUNK))
        .enumerate()
        .for_each(|(chunk, (dst, src))| {
            if sigma == 0.0 {
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s.abs();
                }
                return;
            }
            let mut rng = RngStream::with_stream(seed, chunk as u64);
            for (d, &s) in dst.iter_mut().zip(src) {
                let re = s as f64 + sigma * rng.standard_normal();
                let im = sigma * rng.standard_normal();
                *d = re.hypot(im) as f32;
            }
        });
    let kind = match v.kind() {
        VolumeKind::Mask => VolumeKind::Intensity,
        k => k,
    };
    Volume3D::from_data(v.grid().clone(), out, kind).expect("length preserved")
}
