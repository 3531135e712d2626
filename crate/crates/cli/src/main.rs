use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dvnet::harness::{self, ExperimentConfig, ExperimentId, Outcome};
use dvnet::par::{configure_threads, Execution};

/// Dual-view breast ultrasound experiments on synthetic data.
#[derive(Debug, Parser)]
#[command(name = "dvnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic dataset and its manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Replace an existing dataset in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Enhance every PGM under a dataset directory and extract lesion masks.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Dataset directory [default: <output_dir>/data].
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run one experiment and write its result table.
    Run {
        #[command(flatten)]
        common: Common,
        /// features, classifiers, ratios or views; overrides the config.
        #[arg(long)]
        experiment: Option<ExperimentId>,
        /// Use a generated dataset instead of rendering one in memory.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Merge result tables into a summary with AUC bars.
    Report {
        /// Output directory [default: <output_dir>/report].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Result directories or results.json files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> dvnet::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_or(common: &Common, cfg: &ExperimentConfig, sub: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.output_dir.join(sub))
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("DVNET_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("DVNET_THREADS must be a positive integer, got `{v}`")),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> dvnet::Result<Outcome> {
    let exec = Execution::Parallel;
    match cli.command {
        Command::Generate { common, force } => {
            let cfg = load(&common)?;
            let out = out_or(&common, &cfg, "data");
            let m = harness::cmd_generate(&cfg, &out, force, exec)?;
            println!(
                "wrote {} samples ({} benign, {} malignant) to {}",
                m.samples.len(),
                m.benign_count,
                m.malignant_count,
                out.display()
            );
            Ok(Outcome::Complete)
        }
        Command::Preprocess { common, input } => {
            let cfg = load(&common)?;
            let input = input.unwrap_or_else(|| cfg.output_dir.join("data"));
            let out = out_or(&common, &cfg, "preprocessed");
            let (records, outcome) = harness::cmd_preprocess(&cfg, &input, &out, exec)?;
            let failed: Vec<_> = records.iter().filter(|r| r.error.is_some()).collect();
            for r in &failed {
                eprintln!("{}: {}", r.file, r.error.as_deref().unwrap_or(""));
            }
            println!("processed {} images ({} failed) into {}", records.len(), failed.len(), out.display());
            Ok(outcome)
        }
        Command::Run { common, experiment, data } => {
            let mut cfg = load(&common)?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let (table, outcome) = harness::cmd_run(&cfg, data.as_deref(), &out, exec)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            for r in &table.rows {
                match (r.auc, &r.error) {
                    (Some(auc), _) => println!("{:<24} AUC {auc:.3}", r.method),
                    (None, e) => println!("{:<24} ERROR {}", r.method, e.as_deref().unwrap_or("")),
                }
            }
            println!("wrote {}", out.join(cfg.experiment.name()).display());
            Ok(outcome)
        }
        Command::Report { out, inputs } => {
            let out = out.unwrap_or_else(|| ExperimentConfig::default().output_dir.join("report"));
            let summary = harness::cmd_report(&inputs, &out)?;
            print!("{}", summary.text);
            Ok(Outcome::Complete)
        }
    }
}

fn report_error(e: &dyn std::error::Error) {
    eprintln!("error: {e}");
    let mut src = e.source();
    while let Some(s) = src {
        eprintln!("  caused by: {s}");
        src = s.source();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match threads_from_env() {
        Ok(t) => configure_threads(t),
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            report_error(&e);
            ExitCode::from(1)
        }
    }
}
