//! Metrics, the cross-validation protocol, ablations, the label-fraction
//! sweep and the encoder scaling probe.

pub mod ablation;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod scaling;
pub mod sweep;

pub use ablation::{config_diff, run_ablation, AblationSpec, Variant};
pub use metrics::{auc_midrank, compute_metrics, FoldMetrics, FoldRecord, MetricReport};
pub use protocol::{run_protocol, run_protocol_detailed, LabelLedger, Phase, ProtocolConfig, ProtocolRun, SeedArtifacts};
pub use scaling::{log_log_slope, scaling_probe, ScalingTable};
pub use sweep::{label_fraction_sweep, SweepTable};
