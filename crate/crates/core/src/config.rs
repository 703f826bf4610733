//! Run configuration: flat `key = value` lines with dotted section prefixes.
//! `#` starts a comment. Unknown or repeated keys are errors, and every key
//! has a default, so `RunConfig::default().to_text()` is a complete file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data_ingest::{generate_synthetic, load_dataset, Dataset, SyntheticSpec};
use crate::encoders::ModelDims;
use crate::error::{Error, Result};
use crate::eval_harness::ProtocolConfig;
use crate::seed;
use crate::spectral::{Band, BandSet};
use crate::training::{FinetuneConfig, LossConfig, OptimConfig, PretrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Manifest(PathBuf),
    Synthetic {
        subjects: usize,
        rois: usize,
        timepoints: usize,
        band: Band,
        snr: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Root of every random choice in the run.
    pub seed: u64,
    pub data: DataSource,
    /// `None` means "same as the input width".
    pub k: Option<usize>,
    pub gcn_layers: usize,
    pub gcn_width: Option<usize>,
    pub fgo_layers: usize,
    pub mlp_hidden: Option<usize>,
    pub density: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub retained: BandSet,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub finetune: FinetuneConfig,
    pub folds: usize,
    pub repeats: usize,
    pub epochs: usize,
    pub label_fraction: f64,
    pub strict: bool,
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            data: DataSource::Synthetic {
                subjects: 40,
                rois: 16,
                timepoints: 64,
                band: Band::High,
                snr: 2.0,
            },
            k: None,
            gcn_layers: 2,
            gcn_width: None,
            fgo_layers: 3,
            mlp_hidden: None,
            density: 0.2,
            p_low: 0.2,
            p_high: 0.2,
            retained: BandSet::LOW_HIGH,
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
            finetune: FinetuneConfig::default(),
            folds: 5,
            repeats: 5,
            epochs: 200,
            label_fraction: 0.2,
            strict: false,
            workers: 1,
            output: PathBuf::from("runs"),
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "data.manifest",
    "data.subjects",
    "data.rois",
    "data.timepoints",
    "data.band",
    "data.snr",
    "model.k",
    "model.gcn_layers",
    "model.gcn_width",
    "model.fgo_layers",
    "model.mlp_hidden",
    "graph.density",
    "bands.p_low",
    "bands.p_high",
    "bands.retained",
    "loss.gamma",
    "loss.beta",
    "optim.lr",
    "optim.weight_decay",
    "finetune.lr",
    "finetune.weight_decay",
    "finetune.epochs",
    "protocol.folds",
    "protocol.repeats",
    "protocol.epochs",
    "protocol.label_fraction",
    "protocol.strict",
    "run.workers",
    "run.output",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn show_auto(v: Option<usize>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Parses config text. Relative manifest paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", lineno + 1)));
            }
            if pairs.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: key `{k}` given twice", lineno + 1)));
            }
        }
        let mut cfg = RunConfig::default();
        let DataSource::Synthetic {
            mut subjects,
            mut rois,
            mut timepoints,
            mut band,
            mut snr,
        } = cfg.data.clone()
        else {
            unreachable!("default source is synthetic")
        };
        let mut manifest = None;
        let mut synthetic_keys = false;
        for (k, v) in &pairs {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "seed" => cfg.seed = parse_value(k, v)?,
                "data.manifest" => manifest = Some(PathBuf::from(v)),
                "data.subjects" => subjects = parse_value(k, v)?,
                "data.rois" => rois = parse_value(k, v)?,
                "data.timepoints" => timepoints = parse_value(k, v)?,
                "data.band" => band = v.parse()?,
                "data.snr" => snr = parse_value(k, v)?,
                "model.k" => cfg.k = parse_auto(k, v)?,
                "model.gcn_layers" => cfg.gcn_layers = parse_value(k, v)?,
                "model.gcn_width" => cfg.gcn_width = parse_auto(k, v)?,
                "model.fgo_layers" => cfg.fgo_layers = parse_value(k, v)?,
                "model.mlp_hidden" => cfg.mlp_hidden = parse_auto(k, v)?,
                "graph.density" => cfg.density = parse_value(k, v)?,
                "bands.p_low" => cfg.p_low = parse_value(k, v)?,
                "bands.p_high" => cfg.p_high = parse_value(k, v)?,
                "bands.retained" => cfg.retained = v.parse()?,
                "loss.gamma" => cfg.loss.gamma = parse_value(k, v)?,
                "loss.beta" => cfg.loss.beta = parse_value(k, v)?,
                "optim.lr" => cfg.optim.learning_rate = parse_value(k, v)?,
                "optim.weight_decay" => cfg.optim.weight_decay = parse_value(k, v)?,
                "finetune.lr" => cfg.finetune.optim.learning_rate = parse_value(k, v)?,
                "finetune.weight_decay" => cfg.finetune.optim.weight_decay = parse_value(k, v)?,
                "finetune.epochs" => cfg.finetune.epochs = parse_value(k, v)?,
                "protocol.folds" => cfg.folds = parse_value(k, v)?,
                "protocol.repeats" => cfg.repeats = parse_value(k, v)?,
                "protocol.epochs" => cfg.epochs = parse_value(k, v)?,
                "protocol.label_fraction" => cfg.label_fraction = parse_value(k, v)?,
                "protocol.strict" => cfg.strict = parse_value(k, v)?,
                "run.workers" => cfg.workers = parse_value(k, v)?,
                "run.output" => cfg.output = PathBuf::from(v),
                _ => unreachable!("key list checked above"),
            }
            synthetic_keys |= k.starts_with("data.") && k != "data.manifest";
        }
        cfg.data = match manifest {
            Some(_) if synthetic_keys => {
                return Err(Error::Config(
                    "data.manifest cannot be combined with synthetic data keys".into(),
                ))
            }
            Some(p) => DataSource::Manifest(match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }),
            None => DataSource::Synthetic {
                subjects,
                rois,
                timepoints,
                band,
                snr,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optim.validate()?;
        self.finetune.optim.validate()?;
        if self.folds < 2 {
            return Err(Error::Config("protocol.folds must be at least 2".into()));
        }
        if self.repeats == 0 || self.workers == 0 || self.gcn_layers == 0 {
            return Err(Error::Config(
                "protocol.repeats, run.workers and model.gcn_layers must be positive".into(),
            ));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "protocol.label_fraction must be in (0, 1], got {}",
                self.label_fraction
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config(format!("graph.density must be in (0, 1], got {}", self.density)));
        }
        for (name, p) in [("bands.p_low", self.p_low), ("bands.p_high", self.p_high)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {p}")));
            }
        }
        if let DataSource::Synthetic { snr, .. } = self.data {
            if !(snr > 0.0) {
                return Err(Error::Config(format!("data.snr must be positive, got {snr}")));
            }
        }
        Ok(())
    }

    /// Every key with its resolved value, in a stable order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![("seed".into(), self.seed.to_string())];
        match &self.data {
            DataSource::Manifest(p) => out.push(("data.manifest".into(), p.display().to_string())),
            DataSource::Synthetic {
                subjects,
                rois,
                timepoints,
                band,
                snr,
            } => {
                out.push(("data.subjects".into(), subjects.to_string()));
                out.push(("data.rois".into(), rois.to_string()));
                out.push(("data.timepoints".into(), timepoints.to_string()));
                out.push(("data.band".into(), band.to_string()));
                out.push(("data.snr".into(), snr.to_string()));
            }
        }
        let rest = [
            ("model.k", show_auto(self.k)),
            ("model.gcn_layers", self.gcn_layers.to_string()),
            ("model.gcn_width", show_auto(self.gcn_width)),
            ("model.fgo_layers", self.fgo_layers.to_string()),
            ("model.mlp_hidden", show_auto(self.mlp_hidden)),
            ("graph.density", self.density.to_string()),
            ("bands.p_low", self.p_low.to_string()),
            ("bands.p_high", self.p_high.to_string()),
            ("bands.retained", self.retained.to_string()),
            ("loss.gamma", self.loss.gamma.to_string()),
            ("loss.beta", self.loss.beta.to_string()),
            ("optim.lr", self.optim.learning_rate.to_string()),
            ("optim.weight_decay", self.optim.weight_decay.to_string()),
            ("finetune.lr", self.finetune.optim.learning_rate.to_string()),
            ("finetune.weight_decay", self.finetune.optim.weight_decay.to_string()),
            ("finetune.epochs", self.finetune.epochs.to_string()),
            ("protocol.folds", self.folds.to_string()),
            ("protocol.repeats", self.repeats.to_string()),
            ("protocol.epochs", self.epochs.to_string()),
            ("protocol.label_fraction", self.label_fraction.to_string()),
            ("protocol.strict", self.strict.to_string()),
            ("run.workers", self.workers.to_string()),
            ("run.output", self.output.display().to_string()),
        ];
        out.extend(rest.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.resolved() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Protocol seeds, one per repeat, expanded from the root seed.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64)
            .map(|r| seed::derive_indexed(self.seed, "protocol/repeat", r))
            .collect()
    }

    /// Loads the manifest or generates the synthetic dataset (seeded by `seed`).
    pub fn dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Manifest(p) => load_dataset(p),
            DataSource::Synthetic {
                subjects,
                rois,
                timepoints,
                band,
                snr,
            } => generate_synthetic(SyntheticSpec {
                n_subjects: *subjects,
                n_rois: *rois,
                n_timepoints: *timepoints,
                band: *band,
                snr: *snr,
                seed: self.seed,
            }),
        }
    }

    /// Protocol settings for inputs with `d` time points.
    pub fn protocol(&self, d: usize) -> ProtocolConfig {
        let k = self.k.unwrap_or(d);
        let dims = ModelDims {
            d,
            k,
            gcn_layers: self.gcn_layers,
            gcn_width: self.gcn_width.unwrap_or(d),
            fgo_layers: self.fgo_layers,
            mlp_hidden: self.mlp_hidden.unwrap_or(k.max(d)),
        };
        ProtocolConfig {
            pretrain: PretrainConfig {
                epochs: self.epochs,
                dims,
                loss: self.loss,
                optim: self.optim,
                density: self.density,
                p_low: self.p_low,
                p_high: self.p_high,
                retained: self.retained,
                workers: self.workers,
                ..PretrainConfig::for_width(d)
            },
            finetune: self.finetune,
            folds: self.folds,
            label_fraction: self.label_fraction,
            strict: self.strict,
        }
    }
}
