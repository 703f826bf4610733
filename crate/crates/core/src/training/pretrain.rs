use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::brain_graph::{eigendecompose, laplacian, BrainGraph, DEFAULT_DENSITY};
use crate::data_ingest::Dataset;
use crate::encoders::{init_params, ModelDims, ParamTensors};
use crate::error::{Error, Result};
use crate::seed;
use crate::spectral::BandSet;
use crate::training::backward::{backward, forward, EncoderParams, PreparedSubject};
use crate::training::loss::{ActiveEncoders, LossConfig, LossTerms, Objective};
use crate::training::optim::{optimizer_step, OptimConfig, OptimState};

/// Everything that shapes a pretraining run apart from the data and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub dims: ModelDims,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub density: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub retained: BandSet,
    pub objective: Objective,
    pub active: ActiveEncoders,
    /// Threads used for per-subject preparation; results never depend on it.
    pub workers: usize,
}

impl PretrainConfig {
    /// Defaults for inputs with `d` time points: `K = d`.
    pub fn for_width(d: usize) -> Self {
        Self {
            epochs: 200,
            dims: ModelDims::new(d, d),
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
            density: DEFAULT_DENSITY,
            p_low: 0.2,
            p_high: 0.2,
            retained: BandSet::LOW_HIGH,
            objective: Objective::Consistency,
            active: ActiveEncoders::Both,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.loss.validate()?;
        self.optim.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Flat `key=value` listing of every field.
    pub fn snapshot(&self) -> Vec<(String, String)> {
        let d = &self.dims;
        vec![
            ("epochs".into(), self.epochs.to_string()),
            ("model.d".into(), d.d.to_string()),
            ("model.k".into(), d.k.to_string()),
            ("model.gcn_layers".into(), d.gcn_layers.to_string()),
            ("model.gcn_width".into(), d.gcn_width.to_string()),
            ("model.fgo_layers".into(), d.fgo_layers.to_string()),
            ("model.mlp_hidden".into(), d.mlp_hidden.to_string()),
            ("loss.gamma".into(), self.loss.gamma.to_string()),
            ("loss.beta".into(), self.loss.beta.to_string()),
            ("optim.lr".into(), self.optim.learning_rate.to_string()),
            ("optim.weight_decay".into(), self.optim.weight_decay.to_string()),
            ("optim.beta1".into(), self.optim.beta1.to_string()),
            ("optim.beta2".into(), self.optim.beta2.to_string()),
            ("optim.eps".into(), self.optim.eps.to_string()),
            ("graph.density".into(), self.density.to_string()),
            ("bands.p_low".into(), self.p_low.to_string()),
            ("bands.p_high".into(), self.p_high.to_string()),
            ("bands.retained".into(), self.retained.to_string()),
            ("objective".into(), format!("{:?}", self.objective)),
            ("encoders".into(), format!("{:?}", self.active)),
            ("workers".into(), self.workers.to_string()),
        ]
    }
}

/// One row of the training trace: mean per-subject loss over an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub terms: LossTerms,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,total,term1,term2,term3,wall_ms\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:.3}",
                r.epoch, r.terms.total, r.terms.align, r.terms.decor_time, r.terms.decor_freq, r.wall_ms
            );
        }
        out
    }

    pub fn first_total(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.terms.total)
    }

    pub fn last_total(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.terms.total)
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub params: EncoderParams,
    pub trace: TrainTrace,
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Builds graph, basis and filtered spectrum for every record, in manifest order.
/// Labels are not read.
pub fn prepare_subjects(ds: &Dataset, cfg: &PretrainConfig) -> Result<Vec<PreparedSubject>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ds.n_timepoints != cfg.dims.d {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} time points, dataset has {}",
            cfg.dims.d, ds.n_timepoints
        )));
    }
    let prepare = |series: &ndarray::Array2<f64>, id: &str| -> Result<PreparedSubject> {
        let graph = BrainGraph::from_series(series, cfg.density)?;
        let basis = eigendecompose(&laplacian(&graph))?;
        PreparedSubject::new(id, &graph, basis, cfg.p_low, cfg.p_high, cfg.retained, cfg.dims.k)
    };
    with_workers(cfg.workers, || {
        ds.records
            .par_iter()
            .map(|r| prepare(&r.series, &r.id))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Label-free pretraining on a dataset.
pub fn pretrain(ds: &Dataset, cfg: &PretrainConfig, seed: u64) -> Result<PretrainOutput> {
    let subjects = prepare_subjects(ds, cfg)?;
    pretrain_prepared(&subjects, cfg, seed)
}

/// Pretraining on already prepared subjects: one optimizer step per subject,
/// subjects visited in a seed-determined order that is reshuffled every epoch.
pub fn pretrain_prepared(subjects: &[PreparedSubject], cfg: &PretrainConfig, seed: u64) -> Result<PretrainOutput> {
    cfg.validate()?;
    if subjects.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (tgnn, fgnn) = init_params(cfg.dims, seed)?;
    let mut params = EncoderParams { tgnn, fgnn };
    let mut joint = OptimState::new(&params, cfg.optim);
    let mut time_state = OptimState::new(&params.tgnn, cfg.optim);
    let mut freq_state = OptimState::new(&params.fgnn, cfg.optim);
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    let mut rng = seed::rng(seed, "pretrain/order");
    let mut trace = TrainTrace {
        seed,
        config: cfg.snapshot(),
        epochs: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = LossTerms::default();
        for &i in &order {
            let subject = &subjects[i];
            let cache = forward(subject, &params)?;
            let (terms, grads) = backward(subject, &params, &cache, cfg.loss, cfg.objective, cfg.active)?;
            match cfg.active {
                ActiveEncoders::Both => optimizer_step(&mut params, &grads, &mut joint)?,
                ActiveEncoders::TimeOnly => optimizer_step(&mut params.tgnn, &grads.tgnn, &mut time_state)?,
                ActiveEncoders::FreqOnly => optimizer_step(&mut params.fgnn, &grads.fgnn, &mut freq_state)?,
            }
            sum.accumulate(&terms);
        }
        if !params.all_finite() {
            return Err(Error::NumericFailure(format!(
                "encoder parameters became non-finite in epoch {epoch}"
            )));
        }
        sum.scale(1.0 / subjects.len() as f64);
        log::debug!("epoch {epoch}: loss {:.6e}", sum.total);
        trace.epochs.push(EpochRecord {
            epoch,
            terms: sum,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    if let (Some(first), Some(last)) = (trace.first_total(), trace.last_total()) {
        log::info!("pretraining seed {seed}: mean loss {first:.4e} -> {last:.4e} over {} epochs", cfg.epochs);
    }
    Ok(PretrainOutput { params, trace })
}
