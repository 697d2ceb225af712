use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use percentmatch_core::experiment::{read_trace_file, run_experiment_to_path};
use percentmatch_core::toy::generate_dataset;
use percentmatch_core::{compare_runs, Error, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "percentmatch",
    version,
    about = "Percentile-based dynamic thresholding experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its trace.
    Run {
        /// Flat key-value (TOML) config file.
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare final metrics across traces; the first trace's run label is
    /// the reference.
    Compare {
        #[arg(required = true, num_args = 2..)]
        traces: Vec<PathBuf>,
        /// Emit the comparison as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Write the dataset a config would train on.
    GenData {
        /// Config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(Some(&config), seed)?;
            let outcome = run_experiment_to_path(&cfg, &out)?;
            let summary = serde_json::json!({
                "label": cfg.label(),
                "seed": cfg.seed,
                "map": outcome.report.map,
                "macro_auc": outcome.report.macro_auc,
                "trace": out.display().to_string(),
            });
            println!("{summary}");
        }
        Command::Compare { traces, json } => {
            let loaded = traces
                .iter()
                .map(read_trace_file)
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_runs(&loaded)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&cmp)?);
            } else {
                print!("{}", cmp.render());
            }
        }
        Command::GenData { config, seed, out } => {
            let cfg = load_config(config.as_ref(), seed)?;
            let data = generate_dataset(cfg.seed, &cfg.dataset_spec())?;
            let file = std::fs::File::create(&out)?;
            data.write_to(BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record =
                serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
