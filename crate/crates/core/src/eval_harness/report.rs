use std::fmt::Write as _;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::checkpoint::hex;
use crate::data_ingest::Dataset;
use crate::eval_harness::metrics::{FoldMetrics, MetricReport};
use crate::eval_harness::scaling::ScalingTable;
use crate::eval_harness::sweep::SweepTable;

/// SHA-256 over the dataset contents and the resolved configuration text.
pub fn content_hash(ds: &Dataset, config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update((ds.n_rois as u64).to_le_bytes());
    h.update((ds.n_timepoints as u64).to_le_bytes());
    for r in &ds.records {
        h.update(r.id.as_bytes());
        h.update([0, r.label]);
        for v in r.series.iter() {
            h.update(v.to_le_bytes());
        }
    }
    h.update(config_text.as_bytes());
    hex(&h.finalize())
}

/// One row per (seed, fold).
pub fn records_csv(report: &MetricReport) -> String {
    let mut out = String::from("seed,fold,n_test,n_labeled,accuracy,auc,recall,f1\n");
    for r in &report.records {
        let m = r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed, r.fold, r.n_test, r.n_labeled, m.accuracy, m.auc, m.recall, m.f1
        );
    }
    out
}

fn metrics_json(m: &FoldMetrics) -> Value {
    json!({ "accuracy": m.accuracy, "auc": m.auc, "recall": m.recall, "f1": m.f1 })
}

/// Pretty-printed JSON: means, stds, label audit, config snapshot, input hash.
pub fn summary_json(report: &MetricReport, config: &[(String, String)], input_hash: &str) -> String {
    let cfg: serde_json::Map<String, Value> = config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    let v = json!({
        "runs": report.records.len(),
        "mean": metrics_json(&report.mean),
        "std": metrics_json(&report.std),
        "label_audit_ok": report.label_audit_ok,
        "config": cfg,
        "input_hash": input_hash,
    });
    serde_json::to_string_pretty(&v).expect("JSON values always serialize")
}

fn metric_header(first: &str) -> String {
    let mut h = first.to_string();
    for n in FoldMetrics::NAMES {
        let _ = write!(h, ",{n}_mean,{n}_std");
    }
    h.push('\n');
    h
}

fn metric_cells(r: &MetricReport) -> String {
    r.mean
        .values()
        .iter()
        .zip(r.std.values())
        .map(|(m, s)| format!(",{m},{s}"))
        .collect()
}

/// One row per named report: mean and std of every metric.
pub fn comparison_csv(rows: &[(String, &MetricReport)]) -> String {
    let mut out = metric_header("variant");
    for (name, r) in rows {
        let _ = writeln!(out, "{name}{}", metric_cells(r));
    }
    out
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = metric_header("label_fraction");
    for (f, r) in &table.rows {
        let _ = writeln!(out, "{f}{}", metric_cells(r));
    }
    out
}

pub fn scaling_csv(table: &ScalingTable) -> String {
    let mut out = String::from("n,k,mean_seconds\n");
    for (n, t) in &table.rows {
        let _ = writeln!(out, "{n},{},{t:e}", table.k);
    }
    out
}
