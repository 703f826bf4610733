mod common;

use brainfreq::checkpoint;
use brainfreq::data_ingest::{generate_synthetic, SyntheticSpec};
use brainfreq::encoders::{init_params, ParamTensors};
use brainfreq::spectral::Band;
use brainfreq::training::{
    finetune, pretrain, prepare_subjects, pretrain_prepared, ActiveEncoders, EncoderParams, FinetuneConfig, LossConfig,
    PretrainConfig,
};
use brainfreq::Dataset;
use ndarray::Array2;

fn small(seed: u64) -> Dataset {
    generate_synthetic(SyntheticSpec {
        n_subjects: 12,
        n_rois: 8,
        n_timepoints: 16,
        band: Band::High,
        snr: 2.0,
        seed,
    })
    .unwrap()
}

fn cfg(epochs: usize) -> PretrainConfig {
    PretrainConfig {
        epochs,
        ..PretrainConfig::for_width(16)
    }
}

fn bits(p: &EncoderParams) -> Vec<u64> {
    p.named_tensors().into_iter().flat_map(|(_, _, t)| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
}

#[test]
fn zero_epochs_returns_initialization() {
    let out = pretrain(&small(1), &cfg(0), 42).unwrap();
    let (tgnn, fgnn) = init_params(cfg(0).dims, 42).unwrap();
    assert_eq!(out.params, EncoderParams { tgnn, fgnn });
    assert!(out.trace.epochs.is_empty());
    assert_eq!(out.trace.first_total(), None);
}

#[test]
fn pretraining_is_bit_reproducible_and_seed_sensitive() {
    let ds = small(2);
    let a = pretrain(&ds, &cfg(3), 5).unwrap();
    let b = pretrain(&ds, &cfg(3), 5).unwrap();
    assert_eq!(bits(&a.params), bits(&b.params));
    let c = pretrain(&ds, &cfg(3), 6).unwrap();
    assert_ne!(bits(&a.params), bits(&c.params));
}

#[test]
fn worker_count_does_not_change_results() {
    let ds = small(3);
    let serial = pretrain(&ds, &cfg(2), 9).unwrap();
    let parallel = pretrain(&ds, &PretrainConfig { workers: 3, ..cfg(2) }, 9).unwrap();
    assert_eq!(bits(&serial.params), bits(&parallel.params));
}

#[test]
fn scrambled_labels_leave_pretraining_bit_identical() {
    let ds = small(4);
    let flipped: Vec<u8> = ds.labels().iter().map(|l| 1 - l).collect();
    let constant = vec![0u8; ds.len()];
    let reference = pretrain(&ds, &cfg(3), 11).unwrap();
    for labels in [flipped, constant] {
        let other = pretrain(&ds.with_labels(&labels).unwrap(), &cfg(3), 11).unwrap();
        assert_eq!(bits(&reference.params), bits(&other.params));
        assert_eq!(checkpoint::fingerprint(&reference.params), checkpoint::fingerprint(&other.params));
    }
}

#[test]
fn trace_records_every_epoch() {
    let out = pretrain(&small(5), &cfg(4), 1).unwrap();
    assert_eq!(out.trace.epochs.len(), 4);
    assert!(out.trace.epochs.iter().all(|e| e.terms.is_finite()));
    let csv = out.trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,total,term1,term2,term3,wall_ms"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn time_only_pretraining_leaves_frequency_encoder_at_init() {
    let c = PretrainConfig { active: ActiveEncoders::TimeOnly, ..cfg(3) };
    let out = pretrain(&small(6), &c, 3).unwrap();
    let (tgnn, fgnn) = init_params(c.dims, 3).unwrap();
    assert_eq!(out.params.fgnn, fgnn);
    assert_ne!(out.params.tgnn, tgnn);

    let c = PretrainConfig { active: ActiveEncoders::FreqOnly, ..cfg(3) };
    let out = pretrain(&small(6), &c, 3).unwrap();
    assert_eq!(out.params.tgnn, tgnn);
}

#[test]
fn decorrelation_pressure_reduces_gram_penalty() {
    let ds = small(7);
    let c = PretrainConfig {
        active: ActiveEncoders::TimeOnly,
        loss: LossConfig { gamma: 1.0, beta: 1.0 },
        optim: cfg(0).optim.with_learning_rate(1e-3),
        ..cfg(100)
    };
    let subjects = prepare_subjects(&ds, &c).unwrap();
    let out = pretrain_prepared(&subjects[..2], &c, 8).unwrap();
    let first = out.trace.epochs.first().unwrap().terms.decor_time;
    let last = out.trace.epochs.last().unwrap().terms.decor_time;
    assert!(last < first, "gram penalty {first} -> {last}");
}

#[test]
fn checkpoint_file_round_trips() {
    let out = pretrain(&small(8), &cfg(1), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.ckpt");
    checkpoint::save(&path, &out.params, 2).unwrap();
    let mut restored = out.params.zeros_like();
    assert_eq!(checkpoint::load_into(&path, &mut restored).unwrap(), 2);
    assert_eq!(bits(&restored), bits(&out.params));
}

/// Textbook perceptron; returns a separating (w, b) if one is found.
fn perceptron(x: &Array2<f64>, y: &[u8]) -> Option<(Vec<f64>, f64)> {
    let d = x.ncols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..1000 {
        let mut mistakes = 0;
        for (row, &label) in x.rows().into_iter().zip(y) {
            let t = if label == 1 { 1.0 } else { -1.0 };
            let s: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            if t * s <= 0.0 {
                for (wi, xi) in w.iter_mut().zip(row) {
                    *wi += t * xi;
                }
                b += t;
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            return Some((w, b));
        }
    }
    None
}

#[test]
fn head_fits_linearly_separable_features() {
    let n = 30;
    let base = common::gaussian(n, 5, 3, "test/separable");
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let mut x = base.clone();
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        row[0] += if labels[i] == 1 { 4.0 } else { -4.0 };
    }
    assert!(perceptron(&x, &labels).is_some(), "fixture must be separable");
    let all: Vec<usize> = (0..n).collect();
    let head = finetune(&x, &labels, &all, &FinetuneConfig::default()).unwrap();
    let probs = head.predict_proba(&x).unwrap();
    let correct = (0..n).filter(|&i| (probs[[i, 1]] >= 0.5) == (labels[i] == 1)).count();
    assert_eq!(correct, n);
    for row in probs.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn head_rejects_single_class_labeled_set() {
    let x = common::gaussian(6, 3, 1, "test/single");
    let err = finetune(&x, &[1, 1, 1, 0, 0, 0], &[0, 1, 2], &FinetuneConfig::default()).unwrap_err();
    assert!(matches!(err, brainfreq::Error::SingleClass));
}

#[test]
fn pretraining_rejects_nonsensical_settings() {
    let ds = small(9);
    let mut bad = cfg(1);
    bad.dims.k = 17;
    assert!(pretrain(&ds, &bad, 1).is_err());
    let bad = PretrainConfig { workers: 0, ..cfg(1) };
    assert!(pretrain(&ds, &bad, 1).is_err());
    let bad = PretrainConfig { loss: LossConfig { gamma: -1.0, beta: 0.0 }, ..cfg(1) };
    assert!(pretrain(&ds, &bad, 1).is_err());
}
