use std::path::PathBuf;
use std::process::ExitCode;

use alphatron_core::harness::{
    load_config, run_experiment, run_sweep, MetricsRecord, Overrides, SweepConfig,
};
use alphatron_core::Error;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "alphatron", version, about = "Run Alphatron / KMtron experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its metrics record.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every cell of a parameter grid and write a CSV summary.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics file for `run`, output directory for `sweep`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the oracle query cap of dnf-kmtron experiments.
    #[arg(long)]
    max_queries: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        max_queries: c.max_queries,
    }
}

fn run(config: PathBuf, common: Common) -> anyhow::Result<()> {
    let mut cfg = load_config(&config)?;
    overrides(&common).apply(&mut cfg)?;
    let out = common.out.clone().or_else(|| cfg.output.clone());
    let record = run_experiment(&cfg)?;
    match &out {
        Some(path) => {
            record
                .write(path)
                .with_context(|| format!("writing {}", path.display()))?;
            if !common.quiet {
                print_summary(&record);
                println!("wrote {}", path.display());
            }
        }
        None if !common.quiet => println!("{}", record.to_json()),
        None => {}
    }
    Ok(())
}

fn print_summary(r: &MetricsRecord) {
    let m = &r.metrics;
    let mut line = format!(
        "{} [{}] eps_hat={:.6} err_hat={:.6}",
        r.id, r.kind, m.eps_hat, m.err_hat
    );
    if let Some(z) = m.zero_one {
        line += &format!(" zero_one={z:.4}");
    }
    if let Some(q) = m.queries {
        line += &format!(" queries={q}");
    }
    line += &format!(" t={:.2}s", r.timing.wall_seconds);
    println!("{line}");
}

fn sweep(config: PathBuf, common: Common) -> anyhow::Result<()> {
    let mut cfg = SweepConfig::load(&config)?;
    if let Some(obj) = cfg.base.as_object_mut() {
        if let Some(s) = common.seed {
            obj.insert("seed".into(), json!(s));
        }
        if let Some(q) = common.max_queries {
            if obj.get("kind").and_then(|k| k.as_str()) != Some("dnf-kmtron") {
                return Err(Error::Config(
                    "--max-queries only applies to dnf-kmtron experiments".into(),
                )
                .into());
            }
            obj.insert("max_queries".into(), json!(q));
        }
    }
    let dir = common.out.clone().or_else(|| cfg.output_dir.clone());
    let report = run_sweep(&cfg, dir.as_deref())?;
    if !common.quiet {
        for cell in &report.cells {
            match (&cell.record, &cell.error) {
                (Some(r), _) => print_summary(r),
                (None, Some(e)) => println!("{} failed: {e}", cell.id),
                (None, None) => {}
            }
        }
        if let Some(d) = &dir {
            println!("wrote {}", d.join("summary.csv").display());
        }
        println!(
            "{} cells, {} failed",
            report.cells.len(),
            report.failures()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run { config, common } => run(config, common),
        Command::Sweep { config, common } => sweep(config, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ("config", 2),
                Some(inner) => (inner.kind(), 1),
                None => ("io", 1),
            };
            let record = json!({"error": {"kind": kind, "message": format!("{e:#}")}});
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
