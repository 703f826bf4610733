//! `brainfreq`: dataset synthesis, cross-validated pretraining runs,
//! ablations, label-fraction sweeps, the encoder scaling probe and spectrum
//! dumps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use brainfreq::brain_graph::{eigendecompose, laplacian, BrainGraph};
use brainfreq::checkpoint;
use brainfreq::config::RunConfig;
use brainfreq::data_ingest::{generate_synthetic, load_dataset, write_dataset, Dataset};
use brainfreq::eval_harness::{
    label_fraction_sweep, report, run_protocol_detailed, scaling_probe, AblationSpec, MetricReport, ProtocolConfig,
    Variant,
};
use brainfreq::spectral::{band_energies, build_filter_bank, gft, Band};
use brainfreq::{Error, ErrorKind, SyntheticSpec};

/// Overrides the directory that relative output paths are resolved against.
const OUTPUT_ROOT_ENV: &str = "BRAINFREQ_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "brainfreq", version, about = "Time/frequency self-supervised learning on brain graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-spectrum synthetic dataset (manifest + per-subject files).
    Synth(SynthArgs),
    /// Pretrain, fine-tune and evaluate under cross-validation.
    Run(RunArgs),
    /// Run ablation variants and write a comparison table.
    Ablate(AblateArgs),
    /// Evaluate several label fractions on shared pretrained encoders.
    Sweep(SweepArgs),
    /// Time the frequency encoder forward pass across graph sizes.
    ProbeScaling(ProbeArgs),
    /// Print one subject's Laplacian spectrum and band energies.
    DumpSpectrum(DumpArgs),
}

#[derive(Args)]
struct Output {
    /// Output directory (defaults to `run.output` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into an existing non-empty directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    subjects: usize,
    #[arg(long, default_value_t = 16)]
    rois: usize,
    #[arg(long, default_value_t = 64)]
    timepoints: usize,
    #[arg(long, default_value = "high")]
    band: Band,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AblateArgs {
    config: PathBuf,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',', required = true)]
    variants: Vec<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Comma-separated label fractions in (0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    fractions: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the table as CSV into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DumpArgs {
    /// Dataset manifest.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    manifest: Option<PathBuf>,
    /// Run config whose dataset to use.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subject id (defaults to the first record).
    #[arg(long)]
    subject: Option<String>,
    /// Write spectrum.csv and adjacency.csv here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn resolve_out(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// Creates `dir`, refusing a non-empty existing directory unless `force`.
fn prepare_out(dir: &Path, force: bool) -> Result<PathBuf, Error> {
    let dir = resolve_out(dir);
    if let Ok(mut entries) = fs::read_dir(&dir) {
        if entries.next().is_some() && !force {
            return Err(Error::InvalidArgument(format!(
                "output directory {} is not empty (use --force to write into it)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        n_subjects: a.subjects,
        n_rois: a.rois,
        n_timepoints: a.timepoints,
        band: a.band,
        snr: a.snr,
        seed: a.seed,
    };
    let ds = generate_synthetic(spec)?;
    let dir = prepare_out(&a.out, a.force)?;
    let manifest = write_dataset(&ds, &dir)?;
    println!("wrote {} subjects to {}", ds.len(), manifest.display());
    Ok(())
}

struct Loaded {
    cfg: RunConfig,
    ds: Dataset,
    protocol: ProtocolConfig,
    config_text: String,
}

fn load(config: &Path) -> Result<Loaded, Error> {
    let cfg = RunConfig::load(config)?;
    let ds = cfg.dataset()?;
    let protocol = cfg.protocol(ds.n_timepoints);
    let config_text = cfg.to_text();
    Ok(Loaded {
        cfg,
        ds,
        protocol,
        config_text,
    })
}

fn out_dir(output: &Output, cfg: &RunConfig) -> Result<PathBuf, Error> {
    prepare_out(output.out.as_deref().unwrap_or(&cfg.output), output.force)
}

fn write_report(dir: &Path, r: &MetricReport, l: &Loaded, extra: &[(String, String)]) -> Result<(), Error> {
    let mut snapshot = l.cfg.resolved();
    snapshot.extend(extra.iter().cloned());
    let hash = report::content_hash(&l.ds, &l.config_text);
    write(&dir.join("metrics.csv"), report::records_csv(r))?;
    write(&dir.join("summary.json"), report::summary_json(r, &snapshot, &hash))
}

fn print_summary(name: &str, r: &MetricReport) {
    println!(
        "{name}: accuracy {:.3} ± {:.3}, auc {:.3} ± {:.3}, recall {:.3}, f1 {:.3} ({} runs)",
        r.mean.accuracy,
        r.std.accuracy,
        r.mean.auc,
        r.std.auc,
        r.mean.recall,
        r.mean.f1,
        r.records.len()
    );
}

fn cmd_run(a: RunArgs) -> Result<(), Error> {
    if a.dry_run {
        let cfg = RunConfig::load(&a.config)?;
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let l = load(&a.config)?;
    let dir = out_dir(&a.output, &l.cfg)?;
    write(&dir.join("config.txt"), &l.config_text)?;
    let run = run_protocol_detailed(&l.ds, &l.protocol, &l.cfg.seeds(), &[l.protocol.label_fraction])?;
    for art in &run.artifacts {
        let strict = art.encoders.len() > 1;
        for (i, (params, trace)) in art.encoders.iter().zip(&art.traces).enumerate() {
            let tag = if strict {
                format!("seed{}_fold{i}", art.seed)
            } else {
                format!("seed{}", art.seed)
            };
            write(&dir.join(format!("trace_{tag}.csv")), trace.to_csv())?;
            checkpoint::save(&dir.join(format!("encoders_{tag}.ckpt")), params, art.seed)?;
        }
    }
    let r = &run.reports[0];
    write_report(&dir, r, &l, &[])?;
    print_summary("run", r);
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<(), Error> {
    let variants = a
        .variants
        .iter()
        .map(|v| v.parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()?;
    let l = load(&a.config)?;
    let dir = out_dir(&a.output, &l.cfg)?;
    write(&dir.join("config.txt"), &l.config_text)?;
    let seeds = l.cfg.seeds();
    let mut reports = Vec::new();
    for v in variants {
        let spec = AblationSpec::new(v, &l.protocol.pretrain);
        let cfg = ProtocolConfig {
            pretrain: spec.apply(&l.protocol.pretrain),
            ..l.protocol.clone()
        };
        let run = run_protocol_detailed(&l.ds, &cfg, &seeds, &[cfg.label_fraction])?;
        let r = run.reports.into_iter().next().expect("one fraction");
        let sub = dir.join(v.name());
        fs::create_dir_all(&sub).map_err(|e| Error::Io {
            path: sub.clone(),
            source: e,
        })?;
        let overrides: Vec<(String, String)> = brainfreq::eval_harness::config_diff(&l.protocol.pretrain, &cfg.pretrain)
            .into_iter()
            .map(|(k, _, new)| (format!("override.{k}"), new))
            .chain([("variant".to_string(), v.name().to_string())])
            .collect();
        write_report(&sub, &r, &l, &overrides)?;
        print_summary(v.name(), &r);
        reports.push((v.name().to_string(), r));
    }
    let rows: Vec<(String, &MetricReport)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    write(&dir.join("comparison.csv"), report::comparison_csv(&rows))?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Error> {
    let l = load(&a.config)?;
    let dir = out_dir(&a.output, &l.cfg)?;
    write(&dir.join("config.txt"), &l.config_text)?;
    let table = label_fraction_sweep(&l.ds, &l.protocol, &a.fractions, &l.cfg.seeds())?;
    for (f, r) in &table.rows {
        let sub = dir.join(format!("fraction_{f}"));
        fs::create_dir_all(&sub).map_err(|e| Error::Io {
            path: sub.clone(),
            source: e,
        })?;
        write_report(&sub, r, &l, &[("label_fraction".to_string(), f.to_string())])?;
        print_summary(&format!("fraction {f}"), r);
    }
    write(&dir.join("sweep.csv"), report::sweep_csv(&table))?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_probe(a: ProbeArgs) -> Result<(), Error> {
    let table = scaling_probe(&a.sizes, a.k, a.trials, a.seed)?;
    print!("{}", report::scaling_csv(&table));
    match table.slope {
        Some(s) => println!("log-log slope: {s:.3}"),
        None => println!("log-log slope: undefined (single size)"),
    }
    if let Some(out) = &a.out {
        let dir = prepare_out(out, a.force)?;
        write(&dir.join("scaling.csv"), report::scaling_csv(&table))?;
    }
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> Result<(), Error> {
    let (ds, density, p_low, p_high) = match (&a.manifest, &a.config) {
        (Some(m), _) => (load_dataset(m)?, 0.2, 0.2, 0.2),
        (None, Some(c)) => {
            let cfg = RunConfig::load(c)?;
            (cfg.dataset()?, cfg.density, cfg.p_low, cfg.p_high)
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let record = match &a.subject {
        Some(id) => ds
            .records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no subject with id `{id}`")))?,
        None => &ds.records[0],
    };
    let graph = BrainGraph::from_series(&record.series, density)?;
    let basis = eigendecompose(&laplacian(&graph))?;
    let bank = build_filter_bank(&basis, p_low, p_high)?;
    let spec = gft(&graph.features_time, &basis)?;
    let mut csv = String::from("index,eigenvalue,band,energy\n");
    for (i, &lambda) in basis.eigenvalues.iter().enumerate() {
        let band = Band::ALL
            .into_iter()
            .find(|&b| bank.mask(b)[i] == 1.0)
            .expect("bands partition the spectrum");
        let energy: f64 = spec.coefficients.row(i).iter().map(|c| c * c).sum();
        csv.push_str(&format!("{i},{lambda:e},{band},{energy:e}\n"));
    }
    let [lo, mid, hi] = band_energies(&spec, &bank);
    match &a.out {
        Some(out) => {
            let dir = prepare_out(out, a.force)?;
            write(&dir.join("spectrum.csv"), &csv)?;
            let mut adj = String::new();
            for row in graph.adjacency.rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                adj.push_str(&cells.join(","));
                adj.push('\n');
            }
            write(&dir.join("adjacency.csv"), adj)?;
            println!("wrote spectrum of {} to {}", record.id, dir.display());
        }
        None => print!("{csv}"),
    }
    println!(
        "# subject {} edges {} band energy low {lo:e} mid {mid:e} high {hi:e}",
        record.id,
        graph.edge_count()
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ProbeScaling(a) => cmd_probe(a),
        Command::DumpSpectrum(a) => cmd_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            log::debug!("{e:?}");
            ExitCode::from(exit_code(&e))
        }
    }
}
