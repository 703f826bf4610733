use brainfreq::checkpoint;
use brainfreq::data_ingest::{generate_synthetic, SyntheticSpec};
use brainfreq::eval_harness::protocol::{pretrain_seed, split_seed};
use brainfreq::eval_harness::{
    label_fraction_sweep, run_ablation, run_protocol, run_protocol_detailed, LabelLedger, Phase, ProtocolConfig, Variant,
};
use brainfreq::spectral::Band;
use brainfreq::training::pretrain;
use brainfreq::Dataset;

fn small() -> Dataset {
    generate_synthetic(SyntheticSpec {
        n_subjects: 20,
        n_rois: 8,
        n_timepoints: 16,
        band: Band::High,
        snr: 2.0,
        seed: 21,
    })
    .unwrap()
}

fn cfg() -> ProtocolConfig {
    let mut c = ProtocolConfig::for_width(16);
    c.pretrain.epochs = 2;
    c.finetune.epochs = 30;
    c
}

#[test]
fn emits_one_record_per_fold_and_seed() {
    let ds = small();
    let report = run_protocol(&ds, &cfg(), &[1, 2, 3]).unwrap();
    assert_eq!(report.records.len(), 15);
    assert!(report.label_audit_ok);
    for r in &report.records {
        assert_eq!(r.n_test, 4);
        assert_eq!(r.n_labeled, 4);
        assert!(r.metrics.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let acc: Vec<f64> = report.records.iter().map(|r| r.metrics.accuracy).collect();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / acc.len() as f64;
    assert!((report.mean.accuracy - mean).abs() < 1e-12);
    assert!((report.std.accuracy - var.sqrt()).abs() < 1e-12);
}

#[test]
fn protocol_is_deterministic_and_worker_independent() {
    let ds = small();
    let a = run_protocol(&ds, &cfg(), &[4, 5]).unwrap();
    let b = run_protocol(&ds, &cfg(), &[4, 5]).unwrap();
    assert_eq!(a, b);
    let mut parallel = cfg();
    parallel.pretrain.workers = 2;
    assert_eq!(run_protocol(&ds, &parallel, &[4, 5]).unwrap().records, a.records);
}

#[test]
fn encoders_are_the_label_free_pretraining_output() {
    let ds = small();
    let c = cfg();
    let run = run_protocol_detailed(&ds, &c, &[8], &[0.2]).unwrap();
    let standalone = pretrain(&ds, &c.pretrain, pretrain_seed(8)).unwrap();
    assert_eq!(run.artifacts[0].encoders, vec![standalone.params.clone()]);

    let scrambled = ds.with_labels(&ds.labels().iter().map(|l| 1 - l).collect::<Vec<_>>()).unwrap();
    let other = run_protocol_detailed(&scrambled, &c, &[8], &[0.2]).unwrap();
    assert_eq!(other.artifacts[0].fingerprints(), vec![checkpoint::fingerprint(&standalone.params)]);
}

#[test]
fn ledger_has_no_pretraining_reads_and_audit_catches_leaks() {
    let ds = small();
    let run = run_protocol_detailed(&ds, &cfg(), &[3], &[0.2]).unwrap();
    assert!(run.ledger.reads().iter().all(|r| r.phase != Phase::Pretrain));
    assert!(run.ledger.audit(&run.plans));
    let plan = &run.plans[0].1[0];
    assert_eq!(plan.seed, split_seed(3));

    let mut leaky = LabelLedger::new(ds.labels());
    leaky.read(Phase::Finetune, 3, 0, Some(0), &plan.test_indices(0));
    assert!(!leaky.audit(&run.plans));

    let mut early = LabelLedger::new(ds.labels());
    early.read(Phase::Evaluate, 3, 0, Some(0), &plan.test_indices(0));
    assert!(!early.audit(&run.plans));

    let mut pretrain_read = LabelLedger::new(ds.labels());
    pretrain_read.read(Phase::Pretrain, 3, 0, None, &[0]);
    assert!(!pretrain_read.audit(&run.plans));
}

#[test]
fn full_variant_matches_plain_protocol() {
    let ds = small();
    let plain = run_protocol(&ds, &cfg(), &[6]).unwrap();
    assert_eq!(run_ablation(&ds, &cfg(), Variant::Full, &[6]).unwrap(), plain);
}

#[test]
fn sweep_shares_encoders_and_reproduces_single_fraction_runs() {
    let ds = small();
    let mut c = cfg();
    let table = label_fraction_sweep(&ds, &c, &[0.25, 0.5, 1.0], &[1, 2]).unwrap();
    assert_eq!(table.rows.len(), 3);
    for (_, fps) in &table.encoder_fingerprints {
        assert_eq!(fps.len(), 1);
    }
    c.label_fraction = 1.0;
    let single = run_protocol(&ds, &c, &[1, 2]).unwrap();
    assert_eq!(table.rows[2].1.records, single.records);
    let labeled: Vec<usize> = table.rows.iter().map(|(_, r)| r.records[0].n_labeled).collect();
    assert_eq!(labeled, vec![4, 8, 16]);
}

#[test]
fn strict_mode_pretrains_per_fold_on_training_subjects() {
    let ds = small();
    let mut c = cfg();
    c.strict = true;
    let run = run_protocol_detailed(&ds, &c, &[5], &[0.2]).unwrap();
    let art = &run.artifacts[0];
    assert_eq!(art.encoders.len(), 5);
    assert!(run.reports[0].label_audit_ok);
    let plan = &run.plans[0].1[0];
    let train = plan.train_indices(2);
    let subset = Dataset::new(
        train.iter().map(|&i| ds.records[i].clone()).collect(),
        ds.provenance.clone(),
    )
    .unwrap();
    let expected = pretrain(&subset, &c.pretrain, pretrain_seed(5)).unwrap();
    assert_eq!(art.encoders[2], expected.params);
}

#[test]
fn rejects_bad_seed_and_fraction_lists() {
    let ds = small();
    assert!(run_protocol(&ds, &cfg(), &[]).is_err());
    assert!(run_protocol(&ds, &cfg(), &[1, 1]).is_err());
    assert!(run_protocol_detailed(&ds, &cfg(), &[1], &[0.0]).is_err());
    assert!(run_protocol_detailed(&ds, &cfg(), &[1], &[]).is_err());
    let mut c = cfg();
    c.folds = 11;
    assert!(run_protocol(&ds, &c, &[1]).is_err());
}
