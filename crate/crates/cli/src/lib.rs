//! Experiment runner behind the `gec` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Parser;

use crate::commands::Context;
use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;
use crate::output::{sha256_hex, Collector, RunManifest};

#[derive(Clone, Debug, Parser)]
#[command(
    name = "gec",
    version,
    about = "Graph-energy centrality experiments from a TOML config"
)]
pub struct Args {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Wall-clock budget in seconds; overrides the config.
    #[arg(long, value_name = "SECONDS")]
    pub budget: Option<f64>,
}

/// What a finished (or failed) run left behind.
#[derive(Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: Option<RunManifest>,
    pub error: Option<CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        self.error.as_ref().map_or(0, CliError::exit_code)
    }
}

/// Parses and validates the config, runs the experiment and writes the
/// manifest next to the data files. Config errors write nothing.
pub fn run(args: &Args) -> Outcome {
    let fail = |out_dir: PathBuf, e: CliError| Outcome {
        out_dir,
        manifest: None,
        error: Some(e),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                PathBuf::new(),
                CliError::config(format!("cannot read {}: {e}", args.config.display())),
            )
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(PathBuf::new(), e),
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("gec-out"));
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let workers = args
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return fail(out_dir, CliError::config("--workers must be at least 1"));
    }
    let budget = args.budget.or(cfg.budget);
    if let Some(b) = budget {
        if !(b > 0.0 && b.is_finite()) {
            return fail(
                out_dir,
                CliError::config(format!("budget must be a positive number of seconds, got {b}")),
            );
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            return fail(
                out_dir,
                CliError::config(format!("cannot start {workers} workers: {e}")),
            )
        }
    };

    let ctx = Context {
        seed,
        deadline: budget.map(|b| Instant::now() + Duration::from_secs_f64(b)),
    };
    let mut collector = Collector::new(&out_dir);
    let result = pool.install(|| match cfg.kind {
        Kind::AnalyticSweep => commands::analytic_sweep(cfg.analytic.as_ref().expect("checked"), &mut collector),
        Kind::EdDistribution => commands::ed_distribution(cfg.ed.as_ref().expect("checked"), &ctx, &mut collector),
        Kind::TlgSweep => commands::tlg_sweep_cmd(cfg.tlg.as_ref().expect("checked"), &ctx, &mut collector),
        Kind::Diagnostics => commands::diagnostics(cfg.diagnostics.as_ref().expect("checked"), &ctx, &mut collector),
        Kind::GraphExport => commands::graph_export(cfg.graph.as_ref().expect("checked"), &ctx, &mut collector),
    });

    // A run rejected before producing anything leaves no trace on disk.
    if let Err(e) = &result {
        if e.exit_code() == 2 && collector.is_empty() {
            return fail(out_dir, result.unwrap_err());
        }
    }
    let (status, error) = match &result {
        Ok(()) => ("ok", None),
        Err(e) if e.exit_code() == 4 => ("budget-exceeded", Some(e.to_string())),
        Err(e) => ("failed", Some(e.to_string())),
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind.label(),
        config_sha256: sha256_hex(text.as_bytes()),
        master_seed: seed,
        workers,
        status: status.into(),
        error,
        stages: Vec::new(),
        files: Vec::new(),
    };
    match collector.finish(manifest) {
        Ok(m) => Outcome {
            out_dir,
            manifest: Some(m),
            error: result.err(),
        },
        Err(e) => fail(out_dir, result.err().unwrap_or(e)),
    }
}
