//! Random acquisition parameters for each sequence.
//!
//! Default ranges (seconds, degrees):
//!
//! | sequence | TE              | TR              | other                                              |
//! |----------|-----------------|-----------------|----------------------------------------------------|
//! | FLAIR    | logU(0.02,0.10) | logU(0.001,5)   | TI ~ logU(0.001,3)                                 |
//! | FSE      | logU(0.001,3)   | logU(0.001,3)   |                                                    |
//! | MPRAGE   | U(0.002,0.004)  | \|N(23,2.3)\|   | TI ~ U(0.6,0.9), TX ~ U(0.004,0.008), α ~ U(5,12)  |
//! | GRE      | logU(0.002,0.08)| logU(0.005,5)   | α ~ U(5,50)                                        |
//!
//! Normal draws are reflected at zero. The MPRAGE excitation count `n` is a
//! fixed configuration value (192 by default) and the delay is derived as
//! `TD = max(0, TR − TI − n·TX)`. Flip angles are clamped to
//! `(0, alpha_max_deg]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::signal::{SequenceKind, SequenceParams};

/// Distribution of one scalar acquisition parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    ReflectedNormal { mean: f64, sd: f64 },
}

impl Dist {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi,
            Dist::LogUniform { lo, hi } => hi.is_finite() && lo > 0.0 && lo < hi,
            Dist::ReflectedNormal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRange(format!("{name}: {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Dist::Uniform { lo, hi } => rng.uniform_in(lo, hi),
            Dist::LogUniform { lo, hi } => loguniform(lo, hi, rng),
            Dist::ReflectedNormal { mean, sd } => {
                reflected_normal_from(mean, sd, rng.standard_normal())
            }
        }
    }

    /// Closed support of the distribution.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Dist::Uniform { lo, hi } | Dist::LogUniform { lo, hi } => (lo, hi),
            Dist::ReflectedNormal { .. } => (0.0, f64::INFINITY),
        }
    }
}

fn loguniform(lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (a + (b - a) * rng.uniform()).exp().clamp(lo, hi)
}

/// `exp(u)` with `u` uniform on `[ln lo, ln hi]`.
pub fn sample_loguniform(lo: f64, hi: f64, rng: &mut RngStream) -> Result<f64> {
    Dist::LogUniform { lo, hi }.validate("loguniform")?;
    Ok(loguniform(lo, hi, rng))
}

/// Fold a draw onto the non-negative half-line.
#[inline]
pub fn reflect(x: f64) -> f64 {
    x.abs()
}

/// Reflected normal given a standard-normal variate `z`.
#[inline]
pub fn reflected_normal_from(mean: f64, sd: f64, z: f64) -> f64 {
    reflect(mean + sd * z)
}

/// `|x|` for `x ~ N(mean, sd²)`.
pub fn sample_reflected_normal(mean: f64, sd: f64, rng: &mut RngStream) -> Result<f64> {
    Dist::ReflectedNormal { mean, sd }.validate("reflected_normal")?;
    Ok(reflected_normal_from(mean, sd, rng.standard_normal()))
}

/// Delay after the MPRAGE readout train that completes the repetition.
pub fn mprage_delay(tr: f64, ti: f64, tx: f64, n: u32) -> f64 {
    (tr - ti - n as f64 * tx).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FseRanges {
    pub te: Dist,
    pub tr: Dist,
}

impl Default for FseRanges {
    fn default() -> Self {
        Self {
            te: Dist::LogUniform { lo: 0.001, hi: 3.0 },
            tr: Dist::LogUniform { lo: 0.001, hi: 3.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreRanges {
    pub te: Dist,
    pub tr: Dist,
    pub alpha_deg: Dist,
}

impl Default for GreRanges {
    fn default() -> Self {
        Self {
            te: Dist::LogUniform {
                lo: 0.002,
                hi: 0.08,
            },
            tr: Dist::LogUniform { lo: 0.005, hi: 5.0 },
            alpha_deg: Dist::Uniform { lo: 5.0, hi: 50.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlairRanges {
    pub te: Dist,
    pub tr: Dist,
    pub ti: Dist,
}

impl Default for FlairRanges {
    fn default() -> Self {
        Self {
            te: Dist::LogUniform { lo: 0.02, hi: 0.10 },
            tr: Dist::LogUniform { lo: 0.001, hi: 5.0 },
            ti: Dist::LogUniform { lo: 0.001, hi: 3.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MprageRanges {
    pub te: Dist,
    pub tr: Dist,
    pub ti: Dist,
    pub tx: Dist,
    pub alpha_deg: Dist,
}

impl Default for MprageRanges {
    fn default() -> Self {
        Self {
            te: Dist::Uniform {
                lo: 0.002,
                hi: 0.004,
            },
            tr: Dist::ReflectedNormal {
                mean: 23.0,
                sd: 2.3,
            },
            ti: Dist::Uniform { lo: 0.6, hi: 0.9 },
            tx: Dist::Uniform {
                lo: 0.004,
                hi: 0.008,
            },
            alpha_deg: Dist::Uniform { lo: 5.0, hi: 12.0 },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerRanges {
    pub fse: FseRanges,
    pub gre: GreRanges,
    pub flair: FlairRanges,
    pub mprage: MprageRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mprage_n: u32,
    pub alpha_max_deg: f64,
    pub ranges: SamplerRanges,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mprage_n: 192,
            alpha_max_deg: 90.0,
            ranges: SamplerRanges::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mprage_n == 0 {
            return Err(Error::InvalidConfig("mprage_n must be >= 1".into()));
        }
        if !(self.alpha_max_deg > 0.0 && self.alpha_max_deg <= 90.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_max_deg must be in (0, 90], got {}",
                self.alpha_max_deg
            )));
        }
        let r = &self.ranges;
        let all = [
            ("fse.te", &r.fse.te),
            ("fse.tr", &r.fse.tr),
            ("gre.te", &r.gre.te),
            ("gre.tr", &r.gre.tr),
            ("gre.alpha_deg", &r.gre.alpha_deg),
            ("flair.te", &r.flair.te),
            ("flair.tr", &r.flair.tr),
            ("flair.ti", &r.flair.ti),
            ("mprage.te", &r.mprage.te),
            ("mprage.tr", &r.mprage.tr),
            ("mprage.ti", &r.mprage.ti),
            ("mprage.tx", &r.mprage.tx),
            ("mprage.alpha_deg", &r.mprage.alpha_deg),
        ];
        for (name, dist) in all {
            dist.validate(name)?;
        }
        Ok(())
    }

    fn flip(&self, dist: &Dist, rng: &mut RngStream) -> f64 {
        dist.sample(rng).min(self.alpha_max_deg)
    }
}

/// Draw a sequence kind uniformly from the four supported sequences.
pub fn sample_kind(rng: &mut RngStream) -> SequenceKind {
    SequenceKind::ALL[rng.int_in(0, SequenceKind::ALL.len() - 1)]
}

/// Draw a full parameter record for `kind`.
///
/// Parameters are drawn in declaration order (TE, TR, then the rest), so
/// the stream position after a call depends only on `kind`.
pub fn sample_sequence(
    kind: SequenceKind,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<SequenceParams> {
    cfg.validate()?;
    let r = &cfg.ranges;
    let params = match kind {
        SequenceKind::Fse => SequenceParams::Fse {
            te: r.fse.te.sample(rng),
            tr: r.fse.tr.sample(rng),
        },
        SequenceKind::Gre => SequenceParams::Gre {
            te: r.gre.te.sample(rng),
            tr: r.gre.tr.sample(rng),
            alpha_deg: cfg.flip(&r.gre.alpha_deg, rng),
        },
        SequenceKind::Flair => SequenceParams::Flair {
            te: r.flair.te.sample(rng),
            tr: r.flair.tr.sample(rng),
            ti: r.flair.ti.sample(rng),
        },
        SequenceKind::Mprage => {
            let te = r.mprage.te.sample(rng);
            let tr = r.mprage.tr.sample(rng);
            let ti = r.mprage.ti.sample(rng);
            let tx = r.mprage.tx.sample(rng);
            let alpha_deg = cfg.flip(&r.mprage.alpha_deg, rng);
            let n = cfg.mprage_n;
            SequenceParams::Mprage {
                te,
                tr,
                ti,
                tx,
                td: mprage_delay(tr, ti, tx, n),
                alpha_deg,
                n,
            }
        }
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_loguniform_collapses() {
        let mut rng = RngStream::new(5);
        let lo = 0.25;
        let hi = lo + 1e-12;
        for _ in 0..100 {
            let x = sample_loguniform(lo, hi, &mut rng).unwrap();
            assert!((x - lo).abs() <= 1e-12);
        }
    }

    #[test]
    fn loguniform_support_and_errors() {
        let mut rng = RngStream::new(6);
        for _ in 0..10_000 {
            let x = sample_loguniform(0.001, 5.0, &mut rng).unwrap();
            assert!((0.001..=5.0).contains(&x));
        }
        assert!(sample_loguniform(0.0, 1.0, &mut rng).is_err());
        assert!(sample_loguniform(2.0, 1.0, &mut rng).is_err());
        assert!(sample_loguniform(1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect(-0.5), 0.5);
        assert_eq!(reflect(23.0), 23.0);
        assert_eq!(reflected_normal_from(23.0, 2.3, 0.0), 23.0);
        assert_eq!(reflected_normal_from(0.0, 1.0, -0.5), 0.5);
        let mut rng = RngStream::new(1);
        assert!(sample_reflected_normal(0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn mprage_tr_draws_positive() {
        let mut rng = RngStream::new(11);
        for _ in 0..100_000 {
            assert!(sample_reflected_normal(23.0, 2.3, &mut rng).unwrap() > 0.0);
        }
    }

    #[test]
    fn mprage_delay_rule() {
        assert!((mprage_delay(23.0, 0.75, 0.006, 192) - 21.098).abs() < 1e-12);
        assert_eq!(mprage_delay(1.0, 0.9, 0.008, 192), 0.0);
    }

    #[test]
    fn gre_sweep_in_range() {
        let cfg = SamplerConfig::default();
        let mut rng = RngStream::new(99);
        for _ in 0..100_000 {
            match sample_sequence(SequenceKind::Gre, &cfg, &mut rng).unwrap() {
                SequenceParams::Gre { te, tr, alpha_deg } => {
                    assert!((5.0..=50.0).contains(&alpha_deg));
                    assert!((0.002..=0.08).contains(&te));
                    assert!((0.005..=5.0).contains(&tr));
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn determinism() {
        let cfg = SamplerConfig::default();
        for kind in SequenceKind::ALL {
            let a = sample_sequence(kind, &cfg, &mut RngStream::new(3)).unwrap();
            let b = sample_sequence(kind, &cfg, &mut RngStream::new(3)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.kind(), kind);
        }
    }

    #[test]
    fn mprage_uses_configured_n() {
        let cfg = SamplerConfig {
            mprage_n: 64,
            ..Default::default()
        };
        let p = sample_sequence(SequenceKind::Mprage, &cfg, &mut RngStream::new(0)).unwrap();
        match p {
            SequenceParams::Mprage {
                n, td, tr, ti, tx, ..
            } => {
                assert_eq!(n, 64);
                assert_eq!(td, mprage_delay(tr, ti, tx, 64));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_clamped_to_max() {
        let cfg = SamplerConfig {
            alpha_max_deg: 10.0,
            ..Default::default()
        };
        let mut rng = RngStream::new(4);
        for _ in 0..1000 {
            if let SequenceParams::Gre { alpha_deg, .. } =
                sample_sequence(SequenceKind::Gre, &cfg, &mut rng).unwrap()
            {
                assert!(alpha_deg > 0.0 && alpha_deg <= 10.0);
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = SamplerConfig::default();
        cfg.ranges.fse.te = Dist::LogUniform { lo: 0.0, hi: 1.0 };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            mprage_n: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            alpha_max_deg: 120.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kind_prior_covers_all() {
        let mut rng = RngStream::new(8);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[sample_kind(&mut rng) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
    }

    #[test]
    fn partial_override_from_json() {
        let cfg: SamplerConfig = serde_json::from_str(
            r#"{"ranges":{"gre":{"alpha_deg":{"dist":"uniform","lo":10,"hi":20}}}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.ranges.gre.alpha_deg,
            Dist::Uniform { lo: 10.0, hi: 20.0 }
        );
        assert_eq!(cfg.ranges.gre.te, GreRanges::default().te);
        assert_eq!(cfg.mprage_n, 192);
    }
}
