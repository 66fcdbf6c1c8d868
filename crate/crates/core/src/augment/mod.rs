//! Seeded, replayable augmentation chains.
//!
//! [`make_plan`] resolves every random choice up front into an
//! [`AugmentationPlan`]; [`apply_plan`] is then a pure function of the
//! volume and the plan. Steps always run in this order: rotations, shear,
//! crop, flip, bias field, Gibbs truncation, Rician noise, cuboid dropout.
//!
//! Default magnitudes (rotation ≤ 15°, shear ≤ 0.1, bias amplitude 0.3,
//! Gibbs keep fraction in [0.5, 1], noise σ in [0, 0.1], 1–4 cuboids with
//! sides 8–32) are repository choices.

mod bias;
mod dropout;
mod gibbs;
mod spatial;

use serde::{Deserialize, Serialize};

pub use bias::bias_field;
pub use dropout::{cuboid_dropout, Cuboid};
pub use gibbs::gibbs_truncate;
pub use spatial::{flip, rotate, rotation_matrix, shear, transform, Axis, Mat3};

use crate::error::{Error, Index3, Result};
use crate::rng::RngStream;
use crate::signal::{add_rician, NoiseParams};
use crate::volume::{extract_patch, Grid3D, Volume3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub crop_size: Index3,
    pub rotate_prob: f64,
    pub rotate_max_deg: f64,
    pub shear_prob: f64,
    pub shear_max: f64,
    pub flip_prob: [f64; 3],
    pub bias_prob: f64,
    pub bias_amplitude: f64,
    pub bias_control_points: Index3,
    pub gibbs_prob: f64,
    pub gibbs_keep_range: [f64; 2],
    pub noise_prob: f64,
    pub noise_sigma_range: [f64; 2],
    pub dropout_prob: f64,
    pub dropout_count_range: [usize; 2],
    pub dropout_size_range: [usize; 2],
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            crop_size: [96, 96, 96],
            rotate_prob: 0.5,
            rotate_max_deg: 15.0,
            shear_prob: 0.5,
            shear_max: 0.1,
            flip_prob: [0.5; 3],
            bias_prob: 0.5,
            bias_amplitude: 0.3,
            bias_control_points: [4, 4, 4],
            gibbs_prob: 0.3,
            gibbs_keep_range: [0.5, 1.0],
            noise_prob: 0.5,
            noise_sigma_range: [0.0, 0.1],
            dropout_prob: 0.5,
            dropout_count_range: [1, 4],
            dropout_size_range: [8, 32],
        }
    }
}

impl AugmentationConfig {
    /// Every step disabled; only the crop remains.
    pub fn crop_only(crop_size: Index3) -> Self {
        Self {
            crop_size,
            rotate_prob: 0.0,
            shear_prob: 0.0,
            flip_prob: [0.0; 3],
            bias_prob: 0.0,
            gibbs_prob: 0.0,
            noise_prob: 0.0,
            dropout_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let probs = [
            ("rotate_prob", self.rotate_prob),
            ("shear_prob", self.shear_prob),
            ("flip_prob[x]", self.flip_prob[0]),
            ("flip_prob[y]", self.flip_prob[1]),
            ("flip_prob[z]", self.flip_prob[2]),
            ("bias_prob", self.bias_prob),
            ("gibbs_prob", self.gibbs_prob),
            ("noise_prob", self.noise_prob),
            ("dropout_prob", self.dropout_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.crop_size.contains(&0) {
            return bad(format!("crop_size {:?} has a zero entry", self.crop_size));
        }
        for (name, v) in [
            ("rotate_max_deg", self.rotate_max_deg),
            ("shear_max", self.shear_max),
            ("bias_amplitude", self.bias_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be >= 0"));
            }
        }
        if self.bias_control_points.iter().any(|&c| c < 2) {
            return bad(format!(
                "bias_control_points {:?} must be >= 2 per axis",
                self.bias_control_points
            ));
        }
        let [klo, khi] = self.gibbs_keep_range;
        if !(klo > 0.0 && klo <= khi && khi <= 1.0) {
            return bad(format!(
                "gibbs_keep_range {:?} not within (0, 1]",
                self.gibbs_keep_range
            ));
        }
        let [slo, shi] = self.noise_sigma_range;
        if !(slo >= 0.0 && slo <= shi && shi.is_finite()) {
            return bad(format!(
                "noise_sigma_range {:?} is not ordered",
                self.noise_sigma_range
            ));
        }
        let [clo, chi] = self.dropout_count_range;
        if clo > chi {
            return bad(format!(
                "dropout_count_range {:?} is not ordered",
                self.dropout_count_range
            ));
        }
        let [zlo, zhi] = self.dropout_size_range;
        if zlo == 0 || zlo > zhi {
            return bad(format!(
                "dropout_size_range {:?} is not ordered",
                self.dropout_size_range
            ));
        }
        Ok(())
    }
}

/// One fully resolved transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Rotate {
        axis: Axis,
        angle_deg: f64,
    },
    Shear {
        matrix: Mat3,
    },
    Crop {
        origin: Index3,
        size: Index3,
    },
    Flip {
        axes: [bool; 3],
    },
    BiasField {
        control_shape: Index3,
        values: Vec<f64>,
        amplitude: f64,
    },
    Gibbs {
        keep: [f64; 3],
    },
    RicianNoise {
        sigma: f64,
        seed: u64,
    },
    CuboidDropout {
        cuboids: Vec<Cuboid>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationPlan {
    pub seed: u64,
    /// Shape of the volume the plan was resolved for.
    pub input_shape: Index3,
    pub steps: Vec<Step>,
}

impl AugmentationPlan {
    /// Shape of the volume produced by [`apply_plan`].
    pub fn output_shape(&self) -> Index3 {
        self.steps
            .iter()
            .rev()
            .find_map(|s| match s {
                Step::Crop { size, .. } => Some(*size),
                _ => None,
            })
            .unwrap_or(self.input_shape)
    }
}

/// Resolve every random choice of an augmentation chain for a volume on
/// `grid`, drawing from stream 0 of `seed`.
pub fn make_plan(cfg: &AugmentationConfig, grid: &Grid3D, seed: u64) -> Result<AugmentationPlan> {
    cfg.validate()?;
    let shape = grid.shape();
    let crop = cfg.crop_size;
    if (0..3).any(|a| crop[a] > shape[a]) {
        return Err(Error::CropTooLarge { crop, shape });
    }
    let mut rng = RngStream::new(seed);
    let mut steps = Vec::new();

    for axis in Axis::ALL {
        if rng.bernoulli(cfg.rotate_prob) {
            let angle_deg = rng.uniform_in(-cfg.rotate_max_deg, cfg.rotate_max_deg);
            steps.push(Step::Rotate { axis, angle_deg });
        }
    }

    if rng.bernoulli(cfg.shear_prob) {
        let mut matrix = [[0.0; 3]; 3];
        for (r, row) in matrix.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = if r == c {
                    1.0
                } else {
                    rng.uniform_in(-cfg.shear_max, cfg.shear_max)
                };
            }
        }
        steps.push(Step::Shear { matrix });
    }

    let origin: Index3 = std::array::from_fn(|a| rng.int_in(0, shape[a] - crop[a]));
    steps.push(Step::Crop { origin, size: crop });

    let axes: [bool; 3] = std::array::from_fn(|a| rng.bernoulli(cfg.flip_prob[a]));
    if axes.contains(&true) {
        steps.push(Step::Flip { axes });
    }

    if rng.bernoulli(cfg.bias_prob) {
        let a = cfg.bias_amplitude;
        let count: usize = cfg.bias_control_points.iter().product();
        let values = (0..count)
            .map(|_| rng.uniform_in(1.0 - a, 1.0 + a))
            .collect();
        steps.push(Step::BiasField {
            control_shape: cfg.bias_control_points,
            values,
            amplitude: a,
        });
    }

    if rng.bernoulli(cfg.gibbs_prob) {
        let [lo, hi] = cfg.gibbs_keep_range;
        let keep = std::array::from_fn(|_| rng.uniform_in(lo, hi));
        steps.push(Step::Gibbs { keep });
    }

    if rng.bernoulli(cfg.noise_prob) {
        let [lo, hi] = cfg.noise_sigma_range;
        let sigma = rng.uniform_in(lo, hi);
        steps.push(Step::RicianNoise {
            sigma,
            seed: rng.next_u64(),
        });
    }

    if rng.bernoulli(cfg.dropout_prob) {
        let [clo, chi] = cfg.dropout_count_range;
        let [zlo, zhi] = cfg.dropout_size_range;
        let count = rng.int_in(clo, chi);
        let cuboids: Vec<Cuboid> = (0..count)
            .map(|_| {
                let size: Index3 = std::array::from_fn(|a| rng.int_in(zlo, zhi).min(crop[a]));
                let origin: Index3 = std::array::from_fn(|a| rng.int_in(0, crop[a] - size[a]));
                Cuboid { origin, size }
            })
            .collect();
        if !cuboids.is_empty() {
            steps.push(Step::CuboidDropout { cuboids });
        }
    }

    Ok(AugmentationPlan {
        seed,
        input_shape: shape,
        steps,
    })
}

fn apply_step(v: &Volume3D, step: &Step) -> Result<Volume3D> {
    Ok(match step {
        Step::Rotate { axis, angle_deg } => rotate(v, *axis, *angle_deg),
        Step::Shear { matrix } => shear(v, matrix),
        Step::Crop { origin, size } => extract_patch(v, *origin, *size)?,
        Step::Flip { axes } => flip(v, *axes),
        Step::BiasField {
            control_shape,
            values,
            amplitude,
        } => {
            let field = bias_field(v.grid(), *control_shape, values, *amplitude)?;
            bias::modulate(v, &field)
        }
        Step::Gibbs { keep } => gibbs_truncate(v, *keep)?,
        Step::RicianNoise { sigma, seed } => add_rician(v, NoiseParams::new(*sigma)?, *seed),
        Step::CuboidDropout { cuboids } => cuboid_dropout(v, cuboids)?,
    })
}

/// Run the plan's steps in order on `v`.
pub fn apply_plan(v: &Volume3D, plan: &AugmentationPlan) -> Result<Volume3D> {
    if v.shape() != plan.input_shape {
        return Err(Error::GridMismatch(format!(
            "plan resolved for shape {:?}, volume has {:?}",
            plan.input_shape,
            v.shape()
        )));
    }
    let mut out = v.clone();
    for step in &plan.steps {
        out = apply_step(&out, step)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VolumeKind;

    fn phantom(n: usize) -> Volume3D {
        let g = Grid3D::isotropic([n, n, n]).unwrap();
        let c = (n as f32 - 1.0) / 2.0;
        Volume3D::from_fn(g, VolumeKind::Intensity, |x, y, z| {
            let r2 = (x as f32 - c).powi(2) + (y as f32 - c).powi(2) + (z as f32 - c).powi(2);
            if r2 < (n as f32 / 3.0).powi(2) {
                1.0 + 0.01 * x as f32
            } else {
                0.2
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_probabilities_give_identity_plan() {
        let g = Grid3D::isotropic([10, 8, 6]).unwrap();
        let cfg = AugmentationConfig::crop_only([10, 8, 6]);
        let plan = make_plan(&cfg, &g, 1).unwrap();
        assert_eq!(
            plan.steps,
            vec![Step::Crop {
                origin: [0; 3],
                size: [10, 8, 6]
            }]
        );
        let v = Volume3D::from_fn(g, VolumeKind::Intensity, |x, y, z| (x * y + z) as f32).unwrap();
        assert_eq!(apply_plan(&v, &plan).unwrap(), v);
    }

    #[test]
    fn default_patch_size() {
        let g = Grid3D::isotropic([128, 128, 128]).unwrap();
        let plan = make_plan(&AugmentationConfig::default(), &g, 9).unwrap();
        let crop = plan.steps.iter().find_map(|s| match s {
            Step::Crop { size, origin } => Some((*origin, *size)),
            _ => None,
        });
        let (origin, size) = crop.unwrap();
        assert_eq!(size, [96, 96, 96]);
        assert!(origin.iter().all(|&o| o <= 32));
        assert_eq!(plan.output_shape(), [96, 96, 96]);
    }

    #[test]
    fn crop_too_large() {
        let g = Grid3D::isotropic([64, 64, 64]).unwrap();
        assert!(matches!(
            make_plan(&AugmentationConfig::default(), &g, 0),
            Err(Error::CropTooLarge { .. })
        ));
    }

    #[test]
    fn plans_are_deterministic() {
        let g = Grid3D::isotropic([40, 40, 40]).unwrap();
        let cfg = AugmentationConfig {
            crop_size: [32; 3],
            ..Default::default()
        };
        for seed in 0..20 {
            let a = make_plan(&cfg, &g, seed).unwrap();
            let b = make_plan(&cfg, &g, seed).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(
            make_plan(&cfg, &g, 1).unwrap(),
            make_plan(&cfg, &g, 2).unwrap()
        );
    }

    #[test]
    fn noise_only_plan_matches_add_rician() {
        let v = phantom(12);
        let plan = AugmentationPlan {
            seed: 0,
            input_shape: v.shape(),
            steps: vec![Step::RicianNoise {
                sigma: 0.2,
                seed: 4242,
            }],
        };
        let a = apply_plan(&v, &plan).unwrap();
        let b = add_rician(&v, NoiseParams::new(0.2).unwrap(), 4242);
        assert_eq!(a, b);
    }

    #[test]
    fn double_flip_step_restores() {
        let v = phantom(9);
        let plan = AugmentationPlan {
            seed: 0,
            input_shape: v.shape(),
            steps: vec![
                Step::Flip {
                    axes: [true, false, false]
                };
                2
            ],
        };
        assert_eq!(apply_plan(&v, &plan).unwrap(), v);
    }

    #[test]
    fn full_plan_replays_bit_exactly() {
        let v = phantom(24);
        let cfg = AugmentationConfig {
            crop_size: [16; 3],
            rotate_prob: 1.0,
            shear_prob: 1.0,
            flip_prob: [1.0; 3],
            bias_prob: 1.0,
            gibbs_prob: 1.0,
            noise_prob: 1.0,
            dropout_prob: 1.0,
            dropout_size_range: [2, 6],
            ..Default::default()
        };
        let plan = make_plan(&cfg, v.grid(), 31).unwrap();
        assert_eq!(plan.steps.len(), 10);
        let a = apply_plan(&v, &plan).unwrap();
        let b = apply_plan(&v, &plan).unwrap();
        assert_eq!(a.shape(), [16; 3]);
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));

        let json = serde_json::to_string(&plan).unwrap();
        let back: AugmentationPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        assert_eq!(apply_plan(&v, &back).unwrap(), a);
    }

    #[test]
    fn plan_shape_mismatch() {
        let v = phantom(8);
        let plan = make_plan(&AugmentationConfig::crop_only([4; 3]), v.grid(), 0).unwrap();
        let other = phantom(9);
        assert!(matches!(
            apply_plan(&other, &plan),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = AugmentationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.noise_prob = 1.5;
        assert!(cfg.validate().is_err());
        let cfg = AugmentationConfig {
            gibbs_keep_range: [0.8, 0.5],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AugmentationConfig {
            bias_control_points: [1, 4, 4],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dropout_sizes_clip_to_small_crops() {
        let g = Grid3D::isotropic([6, 6, 6]).unwrap();
        let cfg = AugmentationConfig {
            crop_size: [4; 3],
            dropout_prob: 1.0,
            ..AugmentationConfig::crop_only([4; 3])
        };
        let plan = make_plan(&cfg, &g, 3).unwrap();
        let v = phantom(6);
        let out = apply_plan(&v, &plan).unwrap();
        assert!(out.data().contains(&0.0));
    }
}
