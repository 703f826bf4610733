use std::fmt;
use std::str::FromStr;

use crate::data_ingest::Dataset;
use crate::error::{Error, Result};
use crate::eval_harness::metrics::MetricReport;
use crate::eval_harness::protocol::{run_protocol, ProtocolConfig};
use crate::spectral::{Band, BandSet};
use crate::training::{ActiveEncoders, LossConfig, Objective, PretrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    TimeOnly,
    FreqOnly,
    LowBand,
    MidBand,
    HighBand,
    LossEqualCoeff,
    LossCosine,
    LossCosineDecorr,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Full,
        Variant::TimeOnly,
        Variant::FreqOnly,
        Variant::LowBand,
        Variant::MidBand,
        Variant::HighBand,
        Variant::LossEqualCoeff,
        Variant::LossCosine,
        Variant::LossCosineDecorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TimeOnly => "time_only",
            Variant::FreqOnly => "freq_only",
            Variant::LowBand => "low_band",
            Variant::MidBand => "mid_band",
            Variant::HighBand => "high_band",
            Variant::LossEqualCoeff => "loss_equal_coeff",
            Variant::LossCosine => "loss_cosine",
            Variant::LossCosineDecorr => "loss_cosine_decorr",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`; valid: {}", Self::valid_names())))
    }
}

/// A variant and the settings it overrides. `None` keeps the base value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationSpec {
    pub variant: Variant,
    pub loss: Option<LossConfig>,
    pub retained: Option<BandSet>,
    pub active: Option<ActiveEncoders>,
    pub objective: Option<Objective>,
}

impl AblationSpec {
    /// Overrides for `variant` relative to `base`. Band variants and
    /// `freq_only` read out the frequency encoder alone; `freq_only` keeps
    /// every band, the band variants keep exactly one. The equal-coefficient
    /// variant sets the time weight to the frequency weight.
    pub fn new(variant: Variant, base: &PretrainConfig) -> Self {
        let mut spec = Self {
            variant,
            loss: None,
            retained: None,
            active: None,
            objective: None,
        };
        let band_only = |b| (Some(BandSet::only(b)), Some(ActiveEncoders::FreqOnly));
        match variant {
            Variant::Full => {}
            Variant::TimeOnly => spec.active = Some(ActiveEncoders::TimeOnly),
            Variant::FreqOnly => {
                spec.active = Some(ActiveEncoders::FreqOnly);
                spec.retained = Some(BandSet::ALL);
            }
            Variant::LowBand => (spec.retained, spec.active) = band_only(Band::Low),
            Variant::MidBand => (spec.retained, spec.active) = band_only(Band::Mid),
            Variant::HighBand => (spec.retained, spec.active) = band_only(Band::High),
            Variant::LossEqualCoeff => {
                spec.loss = Some(LossConfig {
                    gamma: base.loss.beta,
                    beta: base.loss.beta,
                })
            }
            Variant::LossCosine => spec.objective = Some(Objective::Cosine),
            Variant::LossCosineDecorr => spec.objective = Some(Objective::CosineDecorrelation),
        }
        spec
    }

    pub fn apply(&self, base: &PretrainConfig) -> PretrainConfig {
        let mut cfg = base.clone();
        if let Some(l) = self.loss {
            cfg.loss = l;
        }
        if let Some(r) = self.retained {
            cfg.retained = r;
        }
        if let Some(a) = self.active {
            cfg.active = a;
        }
        if let Some(o) = self.objective {
            cfg.objective = o;
        }
        cfg
    }

    /// Snapshot keys this spec is allowed to change.
    pub fn declared_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.loss.is_some() {
            keys.extend(["loss.gamma", "loss.beta"]);
        }
        if self.retained.is_some() {
            keys.push("bands.retained");
        }
        if self.active.is_some() {
            keys.push("encoders");
        }
        if self.objective.is_some() {
            keys.push("objective");
        }
        keys
    }
}

/// `(key, base value, variant value)` for every snapshot entry that differs.
pub fn config_diff(base: &PretrainConfig, other: &PretrainConfig) -> Vec<(String, String, String)> {
    base.snapshot()
        .into_iter()
        .zip(other.snapshot())
        .filter(|((_, a), (_, b))| a != b)
        .map(|((k, a), (_, b))| (k, a, b))
        .collect()
}

pub fn run_ablation(ds: &Dataset, base: &ProtocolConfig, variant: Variant, seeds: &[u64]) -> Result<MetricReport> {
    let spec = AblationSpec::new(variant, &base.pretrain);
    let cfg = ProtocolConfig {
        pretrain: spec.apply(&base.pretrain),
        ..base.clone()
    };
    log::info!("ablation {variant}: overrides {:?}", config_diff(&base.pretrain, &cfg.pretrain));
    run_protocol(ds, &cfg, seeds)
}
