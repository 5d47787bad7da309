use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tfr_harness::pipeline::{evaluate, generate, reconstruct};
use tfr_harness::report::render_markdown;
use tfr_harness::{Experiment, HarnessError, Overrides, Result};

/// Temperature field reconstruction benchmark.
#[derive(Parser)]
#[command(name = "tfr", version)]
struct Cli {
    /// Worker threads (0 = all cores). TFR_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write the dataset.
    Generate(Common),
    /// Run the configured baselines on the dataset's test sets.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Dataset directory (default: <out>/dataset).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score predictions and write the CSV / JSON reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// generate, reconstruct and evaluate in one go.
    Run(Common),
    /// Merge metrics CSVs into markdown tables.
    Report {
        /// Metrics CSVs; defaults to <out>/reports/metrics.csv of --config.
        csv: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write report.md here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> Result<Experiment> {
    Experiment::load(
        &c.config,
        &Overrides {
            seed: c.seed,
            out_dir: c.out.clone(),
        },
    )
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(c) => {
            let summary = generate(&load(&c)?)?;
            print(json!({ "generate": summary }));
        }
        Command::Reconstruct { common, dataset } => {
            let exp = load(&common)?;
            let dataset = dataset.unwrap_or_else(|| exp.dataset_dir());
            print(json!({ "reconstruct": reconstruct(&exp, &dataset)? }));
        }
        Command::Evaluate {
            common,
            dataset,
            predictions,
        } => {
            let exp = load(&common)?;
            let dataset = dataset.unwrap_or_else(|| exp.dataset_dir());
            let predictions = predictions.unwrap_or_else(|| exp.predictions_dir());
            let report = evaluate(&exp, &dataset, &predictions)?;
            print(json!({ "evaluate": { "reports": exp.reports_dir(), "rows": report.rows.len() } }));
        }
        Command::Run(c) => {
            let exp = load(&c)?;
            let g = generate(&exp)?;
            let r = reconstruct(&exp, &exp.dataset_dir())?;
            let e = evaluate(&exp, &exp.dataset_dir(), &exp.predictions_dir())?;
            print(json!({ "generate": g, "reconstruct": r, "evaluate": { "reports": exp.reports_dir(), "rows": e.rows.len() } }));
        }
        Command::Report { csv, config, out } => {
            let mut paths = csv;
            if paths.is_empty() {
                let Some(config) = config else {
                    return Err(HarnessError::Config("report needs CSV paths or --config".into()));
                };
                let exp = Experiment::load(&config, &Overrides::default())?;
                paths.push(exp.reports_dir().join("metrics.csv"));
            }
            let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
            let md = render_markdown(&refs)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
                    let path = dir.join("report.md");
                    std::fs::write(&path, md).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
                    print(json!({ "report": path }));
                }
                None => print!("{md}"),
            }
        }
    }
    Ok(())
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    match std::env::var("TFR_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("TFR_THREADS must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } }));
            return ExitCode::from(2);
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(&HarnessError::Config(format!("thread pool: {e}"))),
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
