use qmrisim::io::{read_json, write_json, write_qmri_set};
use qmrisim::{
    add_rician, brain_phantom, generate_batch, generate_pair, read_nifti, read_qmri_set,
    regenerate_from_manifest, simulate_volume, write_nifti, AugmentationConfig, Error, NamedMaps,
    NoiseParams, PairManifest, PairMode, PipelineConfig, SequenceParams,
};

fn config(crop: usize) -> PipelineConfig {
    PipelineConfig {
        augment: AugmentationConfig {
            crop_size: [crop; 3],
            ..AugmentationConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn bits(v: &qmrisim::Volume3D) -> Vec<u32> {
    v.data().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn map_set_survives_disk_and_simulates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let maps = brain_phantom([20, 18, 16]).unwrap();
    write_qmri_set(&maps, dir.path()).unwrap();
    let loaded = read_qmri_set(dir.path()).unwrap();

    let p = SequenceParams::Gre {
        te: 0.01,
        tr: 0.05,
        alpha_deg: 20.0,
    };
    let a = simulate_volume(&maps, &p).unwrap();
    let b = simulate_volume(&loaded, &p).unwrap();
    assert_eq!(bits(&a), bits(&b));

    let path = dir.path().join("gre.nii.gz");
    write_nifti(&b, &path).unwrap();
    let back = read_nifti(&path).unwrap();
    assert_eq!(back.shape(), [20, 18, 16]);
    assert_eq!(bits(&back), bits(&a));
}

#[test]
fn manifest_json_replays_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let source = NamedMaps::new("subject", brain_phantom([24; 3]).unwrap());
    let cfg = config(16);
    for (k, mode) in PairMode::ALL.into_iter().enumerate() {
        let pair = generate_pair(&source, mode, &cfg, 900 + k as u64).unwrap();
        let path = dir.path().join(format!("{mode}.json"));
        write_json(&pair.manifest, &path).unwrap();
        let manifest: PairManifest = read_json(&path).unwrap();
        assert_eq!(manifest, pair.manifest);

        let again = regenerate_from_manifest(std::slice::from_ref(&source), &manifest).unwrap();
        assert_eq!(bits(&again.view_a), bits(&pair.view_a));
        assert_eq!(bits(&again.view_b), bits(&pair.view_b));
        assert_eq!(pair.view_a.shape(), [16; 3]);
    }
}

#[test]
fn replay_rejects_foreign_manifests() {
    let source = NamedMaps::new("a", brain_phantom([16; 3]).unwrap());
    let pair = generate_pair(&source, PairMode::SeqAug, &config(8), 5).unwrap();
    let sources = [source];

    let mut m = pair.manifest.clone();
    m.source_id = "b".into();
    assert!(matches!(
        regenerate_from_manifest(&sources, &m),
        Err(Error::MissingSource(id)) if id == "b"
    ));

    let mut m = pair.manifest.clone();
    m.schema_version += 1;
    assert!(matches!(
        regenerate_from_manifest(&sources, &m),
        Err(Error::SchemaMismatch { .. })
    ));

    let mut m = pair.manifest;
    m.rng_algorithm = "pcg64".into();
    assert!(matches!(
        regenerate_from_manifest(&sources, &m),
        Err(Error::Malformed(_))
    ));
}

#[test]
fn batch_does_not_depend_on_worker_count() {
    let sources = [
        NamedMaps::new("s0", brain_phantom([20; 3]).unwrap()),
        NamedMaps::new("s1", brain_phantom([18, 20, 22]).unwrap()),
    ];
    let cfg = config(12);
    let one = generate_batch(&sources, PairMode::SeqInv, &cfg, 77, 6, 1).unwrap();
    let four = generate_batch(&sources, PairMode::SeqInv, &cfg, 77, 6, 4).unwrap();
    for (i, (a, b)) in one.iter().zip(&four).enumerate() {
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.manifest.source_id, sources[i % 2].id);
        assert_eq!(bits(&a.view_a), bits(&b.view_a));
        assert_eq!(bits(&a.view_b), bits(&b.view_b));
    }
}

#[test]
fn noisy_simulation_stays_non_negative_and_seeded() {
    let maps = brain_phantom([24; 3]).unwrap();
    let p = SequenceParams::Flair {
        te: 0.1,
        tr: 8.0,
        ti: 2.2,
    };
    let clean = simulate_volume(&maps, &p).unwrap();
    let noise = NoiseParams::new(0.05).unwrap();
    let a = add_rician(&clean, noise, 3);
    let b = add_rician(&clean, noise, 3);
    let c = add_rician(&clean, noise, 4);
    assert!(a.data().iter().all(|&x| x >= 0.0));
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
}
