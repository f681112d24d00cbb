use std::path::Path;

use zsl::data::{
    encode_matrix, generate_synthetic, load_checkpoint, load_dataset, load_matrix,
    save_checkpoint, save_dataset, save_matrix, Checkpoint, DataError, SynthConfig,
};
use zsl_core::training::TrainOptions;
use zsl_core::{init_model, train_with, HyperParams, Matrix, TrainSet};

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) {
    std::fs::write(dir.join(name), bytes).unwrap();
}

fn matrix_bytes(rows: u32, cols: u32, values: &[f32]) -> Vec<u8> {
    let mut b = b"ZSLM".to_vec();
    b.extend(1u16.to_le_bytes());
    b.extend(rows.to_le_bytes());
    b.extend(cols.to_le_bytes());
    for v in values {
        b.extend(v.to_le_bytes());
    }
    b
}

#[test]
fn hand_written_fixture_loads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "x.zslm", matrix_bytes(4, 2, &[1.0, 2.0, 3.0, 4.0, 0.5, -0.5, -1.0, 8.0]));
    write(d, "z.zslm", matrix_bytes(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.25]));
    write(d, "y.txt", "0\n0\n1\n1\n");
    write(
        d,
        "fixture.json",
        r#"{"features":"x.zslm","attributes":"z.zslm","labels":"y.txt",
            "seen":[0],"unseen":[1],
            "splits":{"train":[0,1],"test_unseen":[2,3]}}"#,
    );
    let ds = load_dataset(d.join("fixture.json")).unwrap();
    assert_eq!(
        ds.features(),
        &Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.5, -0.5], [-1.0, 8.0]])
    );
    assert_eq!(
        ds.attributes(),
        &Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.25]])
    );
    assert_eq!(ds.labels(), &[0, 0, 1, 1]);
    assert_eq!(ds.seen(), &[0]);
    assert_eq!(ds.unseen(), &[1]);
    assert_eq!(ds.splits().train, vec![0, 1]);
    assert_eq!(ds.splits().test_unseen, vec![2, 3]);
    assert!(ds.splits().test_seen.is_empty());

    // Same fixture with an unseen-class sample in the training split.
    write(
        d,
        "bad.json",
        r#"{"features":"x.zslm","attributes":"z.zslm","labels":"y.txt",
            "seen":[0],"unseen":[1],
            "splits":{"train":[0,2],"test_unseen":[3]}}"#,
    );
    match load_dataset(d.join("bad.json")) {
        Err(DataError::Invalid { source, .. }) => assert!(matches!(
            source,
            zsl_core::Error::Dataset(zsl_core::DatasetError::SplitViolation { sample: 2, .. })
        )),
        other => panic!("expected a split violation, got {other:?}"),
    }

    write(d, "short.txt", "0\n0\n1\n");
    write(
        d,
        "short.json",
        r#"{"features":"x.zslm","attributes":"z.zslm","labels":"short.txt",
            "seen":[0],"unseen":[1],"splits":{"train":[0],"test_unseen":[2]}}"#,
    );
    assert!(matches!(
        load_dataset(d.join("short.json")),
        Err(DataError::Dimension { .. })
    ));
    assert!(matches!(
        load_dataset(d.join("missing.json")),
        Err(DataError::Io { .. })
    ));
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        train_per_class: 5,
        test_per_class: 3,
        ..SynthConfig::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let path = save_dataset(dir.path(), &ds).unwrap();
    let back = load_dataset(&path).unwrap();
    // Values pass through 32-bit storage.
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.splits(), ds.splits());
    assert_eq!(back.seen(), ds.seen());
    for (a, b) in back.features().as_slice().iter().zip(ds.features().as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    // A second save/load cycle is exact.
    let again = load_dataset(save_dataset(dir.path().join("2"), &back).unwrap()).unwrap();
    assert_eq!(again, back);
}

#[test]
fn matrix_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.zslm");
    save_matrix(&p, &Matrix::from_rows(&[[42.0]])).unwrap();
    assert_eq!(load_matrix(&p).unwrap(), Matrix::from_rows(&[[42.0]]));

    let m = Matrix::from_vec(7, 5, (0..35).map(|i| (i as f64 * 0.731).sin() * 1e3).collect()).unwrap();
    save_matrix(&p, &m).unwrap();
    let back = load_matrix(&p).unwrap();
    for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
        // Half an f32 ulp, relative.
        assert!((a - b).abs() <= b.abs() * f32::EPSILON as f64 / 2.0);
    }
    assert_eq!(std::fs::read(&p).unwrap(), encode_matrix(&m).unwrap());

    let empty = dir.path().join("empty.zslm");
    std::fs::write(&empty, b"").unwrap();
    assert!(matches!(load_matrix(&empty), Err(DataError::Magic { .. })));
}

#[test]
fn synthetic_class_means_are_well_separated() {
    let cfg = SynthConfig::default();
    let ds = generate_synthetic(&cfg).unwrap();
    let classes = cfg.seen_classes + cfg.unseen_classes;
    let d = cfg.visual_dim;
    let mut sums = vec![vec![0.0; d]; classes];
    let mut counts = vec![0usize; classes];
    for (i, &c) in ds.labels().iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(ds.features().row(i)) {
            *s += v;
        }
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n as f64).collect())
        .collect();
    let mut min = f64::INFINITY;
    for a in 0..classes {
        for b in a + 1..classes {
            let dist: f64 = means[a]
                .iter()
                .zip(&means[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            min = min.min(dist);
        }
    }
    assert!(min > 5.0 * cfg.sigma, "closest class means only {min} apart");
}

#[test]
fn checkpoint_resume_equals_uninterrupted_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        train_per_class: 10,
        test_per_class: 4,
        ..SynthConfig::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let hp = HyperParams {
        embed_dim: 32,
        epochs: 2,
        seed: 5,
        ..HyperParams::new(1.0, 1e-4)
    };
    let set = TrainSet::labeled(&ds);
    let init = init_model(ds.visual_dim(), ds.semantic_dim(), ds.num_classes(), &hp, hp.seed).unwrap();
    let (full, _) = train_with(&ds, &set, &hp, init.clone(), TrainOptions::default()).unwrap();

    let one = HyperParams { epochs: 1, ..hp.clone() };
    let (mid, _) = train_with(&ds, &set, &one, init, TrainOptions::default()).unwrap();
    let path = dir.path().join("mid.zslc");
    save_checkpoint(
        &path,
        &Checkpoint {
            hp: one,
            params: mid,
            completed_iterations: 1,
        },
    )
    .unwrap();
    let ckpt = load_checkpoint(&path).unwrap();
    ckpt.check_dataset(&ds, &path).unwrap();
    let opts = TrainOptions {
        start_iteration: ckpt.completed_iterations,
        clock: None,
    };
    let (resumed, _) = train_with(&ds, &set, &hp, ckpt.params, opts).unwrap();
    assert_eq!(resumed, full);
}

#[test]
fn checkpoint_for_another_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SynthConfig {
        train_per_class: 2,
        test_per_class: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let hp = HyperParams {
        embed_dim: 8,
        ..HyperParams::new(1.0, 0.0)
    };
    let params = init_model(ds.visual_dim() + 1, ds.semantic_dim(), ds.num_classes(), &hp, 0).unwrap();
    let path = dir.path().join("c.zslc");
    let ckpt = Checkpoint {
        hp,
        params,
        completed_iterations: 0,
    };
    save_checkpoint(&path, &ckpt).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    assert!(matches!(
        back.check_dataset(&ds, &path),
        Err(DataError::Dimension { .. })
    ));
}
