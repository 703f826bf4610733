use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::checkpoint;
use crate::data_ingest::{make_splits, Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::eval_harness::metrics::{compute_metrics, FoldRecord, MetricReport};
use crate::seed;
use crate::training::{
    finetune, pooled_readouts, prepare_subjects, pretrain_prepared, stack_features, EncoderParams, FinetuneConfig,
    PreparedSubject, PretrainConfig, TrainTrace,
};

/// Cross-validation settings around a pretraining configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub folds: usize,
    pub label_fraction: f64,
    /// Pretrain once per fold on that fold's training subjects only, instead
    /// of once per seed on every subject.
    pub strict: bool,
}

impl ProtocolConfig {
    pub fn for_width(d: usize) -> Self {
        Self {
            pretrain: PretrainConfig::for_width(d),
            finetune: FinetuneConfig::default(),
            folds: 5,
            label_fraction: 0.2,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Fold assignment (stratification only; never reaches a model).
    Split,
    Pretrain,
    Finetune,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRead {
    pub phase: Phase,
    pub seed: u64,
    /// Index into the label fractions of the run.
    pub fraction: usize,
    pub fold: Option<usize>,
    pub indices: Vec<usize>,
}

/// Sole gateway to the labels during a protocol run; every read is logged.
#[derive(Debug, Clone)]
pub struct LabelLedger {
    labels: Vec<u8>,
    reads: Vec<LabelRead>,
}

impl LabelLedger {
    pub fn new(labels: Vec<u8>) -> Self {
        Self { labels, reads: Vec::new() }
    }

    pub fn read(&mut self, phase: Phase, seed: u64, fraction: usize, fold: Option<usize>, indices: &[usize]) -> Vec<u8> {
        self.reads.push(LabelRead {
            phase,
            seed,
            fraction,
            fold,
            indices: indices.to_vec(),
        });
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn reads(&self) -> &[LabelRead] {
        &self.reads
    }

    fn absorb(&mut self, other: LabelLedger) {
        self.reads.extend(other.reads);
    }

    /// Checks every read against the split plans: nothing during pretraining,
    /// fine-tuning sees only its fold's labeled subset, evaluation sees only
    /// its test fold and comes after that fold was fine-tuned.
    pub fn audit(&self, plans: &[(u64, Vec<SplitPlan>)]) -> bool {
        let plan_for = |seed: u64, fraction: usize| {
            plans
                .iter()
                .find(|(s, _)| *s == seed)
                .and_then(|(_, p)| p.get(fraction))
        };
        let mut tuned = BTreeSet::new();
        for r in &self.reads {
            match (r.phase, r.fold) {
                (Phase::Split, None) => {}
                (Phase::Finetune, Some(f)) => {
                    let Some(plan) = plan_for(r.seed, r.fraction) else { return false };
                    let allowed: BTreeSet<usize> = plan.labeled[f].iter().copied().collect();
                    if r.indices.iter().any(|i| !allowed.contains(i)) {
                        return false;
                    }
                    tuned.insert((r.seed, r.fraction, f));
                }
                (Phase::Evaluate, Some(f)) => {
                    let Some(plan) = plan_for(r.seed, r.fraction) else { return false };
                    let allowed: BTreeSet<usize> = plan.test_indices(f).into_iter().collect();
                    if !tuned.contains(&(r.seed, r.fraction, f)) || r.indices.iter().any(|i| !allowed.contains(i)) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }
}

/// What one protocol seed produced besides its metrics.
#[derive(Debug, Clone)]
pub struct SeedArtifacts {
    pub seed: u64,
    /// One encoder per seed, or one per fold in strict mode.
    pub encoders: Vec<EncoderParams>,
    pub traces: Vec<TrainTrace>,
}

impl SeedArtifacts {
    pub fn fingerprints(&self) -> Vec<String> {
        self.encoders.iter().map(checkpoint::fingerprint).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    /// One report per requested label fraction.
    pub reports: Vec<MetricReport>,
    pub artifacts: Vec<SeedArtifacts>,
    /// Per seed, one split plan per label fraction.
    pub plans: Vec<(u64, Vec<SplitPlan>)>,
    pub ledger: LabelLedger,
}

pub fn split_seed(seed: u64) -> u64 {
    seed::derive(seed, "protocol/splits")
}

pub fn pretrain_seed(seed: u64) -> u64 {
    seed::derive(seed, "protocol/pretrain")
}

struct SeedOutcome {
    records: Vec<Vec<FoldRecord>>,
    artifacts: SeedArtifacts,
    plans: Vec<SplitPlan>,
    ledger: LabelLedger,
}

fn run_seed(
    ds: &Dataset,
    subjects: &[PreparedSubject],
    cfg: &ProtocolConfig,
    seed: u64,
    fractions: &[f64],
) -> Result<SeedOutcome> {
    let mut ledger = LabelLedger::new(ds.labels());
    let all: Vec<usize> = (0..ds.len()).collect();
    ledger.read(Phase::Split, seed, 0, None, &all);
    let plans = fractions
        .iter()
        .map(|&f| make_splits(ds, cfg.folds, f, split_seed(seed)))
        .collect::<Result<Vec<_>>>()?;
    let folds = plans[0].fold_count;

    let mut encoders = Vec::new();
    let mut traces = Vec::new();
    if cfg.strict {
        for f in 0..folds {
            let train: Vec<PreparedSubject> = plans[0].train_indices(f).iter().map(|&i| subjects[i].clone()).collect();
            let out = pretrain_prepared(&train, &cfg.pretrain, pretrain_seed(seed))?;
            encoders.push(out.params);
            traces.push(out.trace);
        }
    } else {
        let out = pretrain_prepared(subjects, &cfg.pretrain, pretrain_seed(seed))?;
        encoders.push(out.params);
        traces.push(out.trace);
    }

    let features: Vec<Array2<f64>> = encoders
        .iter()
        .map(|p| stack_features(&pooled_readouts(subjects, p, cfg.pretrain.active)?))
        .collect::<Result<_>>()?;

    let mut records = vec![Vec::with_capacity(folds); fractions.len()];
    for (fi, plan) in plans.iter().enumerate() {
        for f in 0..folds {
            let x = &features[if cfg.strict { f } else { 0 }];
            let labeled = &plan.labeled[f];
            let y = ledger.read(Phase::Finetune, seed, fi, Some(f), labeled);
            let xl = x.select(Axis(0), labeled);
            let idx: Vec<usize> = (0..labeled.len()).collect();
            let head = finetune(&xl, &y, &idx, &cfg.finetune)?;
            let test = plan.test_indices(f);
            let scores = head.scores(&x.select(Axis(0), &test))?;
            let truth = ledger.read(Phase::Evaluate, seed, fi, Some(f), &test);
            records[fi].push(FoldRecord {
                seed,
                fold: f,
                n_test: test.len(),
                n_labeled: labeled.len(),
                metrics: compute_metrics(&scores, &truth)?,
            });
        }
    }
    Ok(SeedOutcome {
        records,
        artifacts: SeedArtifacts { seed, encoders, traces },
        plans,
        ledger,
    })
}

/// Pretrain, fine-tune and evaluate for every seed, once per label fraction.
/// Pretraining happens once per seed (per fold in strict mode) and is shared
/// by all fractions.
pub fn run_protocol_detailed(
    ds: &Dataset,
    cfg: &ProtocolConfig,
    seeds: &[u64],
    fractions: &[f64],
) -> Result<ProtocolRun> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("at least one label fraction is required".into()));
    }
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(Error::InvalidArgument(format!("duplicate seeds in {seeds:?}")));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!("label fraction {f} outside (0, 1]")));
        }
    }
    // Labels never enter subject preparation or pretraining.
    let subjects = prepare_subjects(ds, &cfg.pretrain)?;
    let workers = cfg.pretrain.workers;
    let outcomes: Vec<SeedOutcome> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_seed(ds, &subjects, cfg, s, fractions))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        seeds
            .iter()
            .map(|&s| run_seed(ds, &subjects, cfg, s, fractions))
            .collect::<Result<Vec<_>>>()?
    };

    let mut ledger = LabelLedger::new(Vec::new());
    let mut per_fraction: Vec<Vec<FoldRecord>> = vec![Vec::new(); fractions.len()];
    let mut artifacts = Vec::new();
    let mut plans = Vec::new();
    for o in outcomes {
        for (acc, recs) in per_fraction.iter_mut().zip(o.records) {
            acc.extend(recs);
        }
        ledger.absorb(o.ledger);
        plans.push((o.artifacts.seed, o.plans));
        artifacts.push(o.artifacts);
    }
    let audit_ok = ledger.audit(&plans);
    if !audit_ok {
        log::warn!("label-access audit failed");
    }
    let reports = per_fraction
        .into_iter()
        .map(|r| MetricReport::from_records(r, audit_ok))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolRun {
        reports,
        artifacts,
        plans,
        ledger,
    })
}

/// Cross-validated metrics over folds × seeds at the configured label fraction.
pub fn run_protocol(ds: &Dataset, cfg: &ProtocolConfig, seeds: &[u64]) -> Result<MetricReport> {
    let run = run_protocol_detailed(ds, cfg, seeds, &[cfg.label_fraction])?;
    Ok(run.reports.into_iter().next().expect("one fraction requested"))
}
