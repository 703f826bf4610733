use crate::data_ingest::Dataset;
use crate::error::Result;
use crate::eval_harness::metrics::MetricReport;
use crate::eval_harness::protocol::{run_protocol_detailed, ProtocolConfig};

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<(f64, MetricReport)>,
    /// Per seed, the fingerprints of the encoders every fraction was evaluated on.
    pub encoder_fingerprints: Vec<(u64, Vec<String>)>,
}

/// Fine-tunes and evaluates at each label fraction on encoders pretrained
/// once per seed. Fold assignment does not depend on the fraction.
pub fn label_fraction_sweep(ds: &Dataset, cfg: &ProtocolConfig, fractions: &[f64], seeds: &[u64]) -> Result<SweepTable> {
    let run = run_protocol_detailed(ds, cfg, seeds, fractions)?;
    Ok(SweepTable {
        rows: fractions.iter().copied().zip(run.reports).collect(),
        encoder_fingerprints: run.artifacts.iter().map(|a| (a.seed, a.fingerprints())).collect(),
    })
}
