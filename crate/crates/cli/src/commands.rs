use std::path::Path;

use qmrisim::metrics::{dynamic_range, multiclass_dice};
use qmrisim::phantom::phantom_labels;
use qmrisim::sampler::{mprage_delay, sample_kind};
use qmrisim::{
    add_rician, brain_phantom, dice, hd95, io, psnr, read_nifti, read_qmri_set, sample_sequence,
    simulate_volume, write_nifti, NoiseParams, RngStream, SamplerConfig, SequenceKind,
    SequenceParams, VolumeKind,
};
use serde_json::{json, Value};

use crate::args::{Metric, MetricsArgs, NoiseArgs, PhantomArgs, SampleArgs, SimulateArgs};
use crate::config::{
    create_parent, parse_shape, rng_algorithm, sidecar_path, tool_version, FileConfig, NoiseRecord,
    SimulateRecord, RECORD_SCHEMA_VERSION,
};
use crate::error::{failed, usage, CliResult};

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| usage(format!("{what} requires --seed (or QMRISIM_SEED)")))
}

fn explicit_params(a: &SimulateArgs, sampler: &SamplerConfig) -> CliResult<SequenceParams> {
    let kind: SequenceKind = a.sequence.into();
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| {
            usage(format!(
                "missing --{flag} for {} (or pass --sample)",
                kind.name()
            ))
        })
    };
    let (te, tr) = (need(a.te, "te")?, need(a.tr, "tr")?);
    Ok(match kind {
        SequenceKind::Fse => SequenceParams::Fse { te, tr },
        SequenceKind::Gre => SequenceParams::Gre {
            te,
            tr,
            alpha_deg: need(a.alpha, "alpha")?,
        },
        SequenceKind::Flair => SequenceParams::Flair {
            te,
            tr,
            ti: need(a.ti, "ti")?,
        },
        SequenceKind::Mprage => {
            let ti = need(a.ti, "ti")?;
            let tx = need(a.tx, "tx")?;
            let alpha_deg = need(a.alpha, "alpha")?;
            let n = a.n.unwrap_or(sampler.mprage_n);
            SequenceParams::Mprage {
                te,
                tr,
                ti,
                tx,
                td: a.td.unwrap_or_else(|| mprage_delay(tr, ti, tx, n)),
                alpha_deg,
                n,
            }
        }
    })
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let file = FileConfig::load_opt(a.config.as_deref())?;
    let mut sampler = file.sampler;
    if let Some(n) = a.n {
        sampler.mprage_n = n;
    }
    let (params, seed) = if a.sample {
        let seed = require_seed(a.seed, "--sample")?;
        let mut rng = RngStream::with_stream(seed, 0);
        (
            sample_sequence(a.sequence.into(), &sampler, &mut rng)?,
            Some(seed),
        )
    } else {
        (explicit_params(&a, &sampler)?, None)
    };
    params.validate()?;
    let maps = read_qmri_set(&a.maps)?;
    let image = simulate_volume(&maps, &params)?;
    create_parent(&a.out)?;
    write_nifti(&image, &a.out)?;
    let record = SimulateRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        tool_version: tool_version(),
        command: "simulate".into(),
        maps: a.maps.clone(),
        sequence: params,
        seed,
        rng_algorithm: seed.map(|_| rng_algorithm()),
    };
    io::write_json(&record, sidecar_path(&a.out))?;
    Ok(())
}

pub fn sample(a: SampleArgs) -> CliResult {
    let seed = require_seed(a.seed, "sample")?;
    if a.count == 0 {
        return Err(usage("--count must be >= 1"));
    }
    let sampler = FileConfig::load_opt(a.config.as_deref())?.sampler;
    let mut rng = RngStream::with_stream(seed, 0);
    let mut out = String::new();
    for _ in 0..a.count {
        let kind = match a.sequence {
            Some(k) => k.into(),
            None => sample_kind(&mut rng),
        };
        let p = sample_sequence(kind, &sampler, &mut rng)?;
        out.push_str(&serde_json::to_string(&p).map_err(|e| failed(e.to_string()))?);
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

pub fn noise(a: NoiseArgs) -> CliResult {
    let seed = require_seed(a.seed, "noise")?;
    let noise = NoiseParams::new(a.sigma)?;
    let v = read_nifti(&a.input)?;
    let out = add_rician(&v, noise, seed);
    create_parent(&a.out)?;
    write_nifti(&out, &a.out)?;
    let record = NoiseRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        tool_version: tool_version(),
        command: "noise".into(),
        input: a.input.clone(),
        sigma: a.sigma,
        seed,
        rng_algorithm: rng_algorithm(),
    };
    io::write_json(&record, sidecar_path(&a.out))?;
    Ok(())
}

/// JSON has no infinity; it is written as the string "Infinity".
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("Infinity")
    } else if x < 0.0 {
        json!("-Infinity")
    } else {
        json!("NaN")
    }
}

fn read_mask(path: &Path) -> CliResult<qmrisim::Volume3D> {
    let v = read_nifti(path)?;
    if v.kind() == VolumeKind::Mask {
        return Ok(v);
    }
    v.with_kind(VolumeKind::Mask)
        .map_err(|e| failed(format!("{}: {e} (expected a binary mask)", path.display())))
}

pub fn metrics(a: MetricsArgs) -> CliResult {
    let result = match a.metric {
        Metric::Psnr => {
            let reference = read_nifti(&a.reference)?;
            let test = read_nifti(&a.test)?;
            let peak = match a.peak.as_deref() {
                None => return Err(usage("psnr requires --peak <value|auto>")),
                Some("auto") => dynamic_range(&reference),
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| usage(format!("--peak must be a number or `auto`, got {s:?}")))?,
            };
            json!({ "psnr": number(psnr(&reference, &test, peak)?), "peak": number(peak) })
        }
        Metric::Dice if !a.labels.is_empty() => {
            let reference = read_nifti(&a.reference)?;
            let test = read_nifti(&a.test)?;
            let per = multiclass_dice(&reference, &test, &a.labels)?;
            let mean = per.values().sum::<f64>() / per.len() as f64;
            let per: serde_json::Map<String, Value> = per
                .iter()
                .map(|(k, v)| (k.to_string(), number(*v)))
                .collect();
            json!({ "dice": number(mean), "per_class": per })
        }
        Metric::Dice => {
            json!({ "dice": number(dice(&read_mask(&a.reference)?, &read_mask(&a.test)?)?) })
        }
        Metric::Hd95 => {
            json!({ "hd95": number(hd95(&read_mask(&a.reference)?, &read_mask(&a.test)?)?) })
        }
    };
    println!("{result}");
    Ok(())
}

pub fn phantom(a: PhantomArgs) -> CliResult {
    let shape = parse_shape(&a.shape)?;
    let maps = brain_phantom(shape)?;
    io::write_qmri_set(&maps, &a.out)?;
    write_nifti(&phantom_labels(shape)?, a.out.join("labels.nii.gz"))?;
    Ok(())
}
