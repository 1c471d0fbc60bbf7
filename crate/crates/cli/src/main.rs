use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anece::barrier::BarrierSettings;
use anece::experiment::{compare_fairness, design, emit, run, write_fairness_csv, ExperimentSpec, Format, Method, PilotFile};
use anece::metrics::{evaluate, MetricSet};
use anece::model::ConfigSpec;
use clap::{Parser, Subcommand};

/// Design, evaluate and sweep anti-eavesdropping pilots.
#[derive(Parser)]
#[command(name = "anece", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a pilot and write it as JSON.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Closed-form split index and min-max starting point.
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Barrier settings as JSON.
        #[arg(long)]
        barrier: Option<PathBuf>,
    },
    /// Print the metrics of a stored pilot as JSON.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pilot: PathBuf,
        #[arg(long, default_value = "mse,mi,eve")]
        metrics: String,
    },
    /// Run an experiment grid; `.json` output selects JSON, anything else CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare fairness ratios of the sum and min-max designs over a grid.
    Fairness {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn read(path: &Path) -> Result<String, Box<dyn std::error::Error>> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run_command(cmd: Command) -> CliResult {
    match cmd {
        Command::Design { config, method, out, m, barrier } => {
            let cfg = ConfigSpec::from_json(&read(&config)?)?.build()?;
            let settings: BarrierSettings = match barrier {
                Some(p) => serde_json::from_str(&read(&p)?)?,
                None => BarrierSettings::default(),
            };
            settings.validate()?;
            let d = design(&cfg, method, m, &settings)?;
            let file = PilotFile::from_design(&cfg, Some(method), &d)?;
            fs::write(&out, serde_json::to_string_pretty(&file)?)?;
            if !d.converged {
                eprintln!("warning: {method} did not converge");
            }
            if let Some(users) = &d.rank_collapse {
                eprintln!("warning: rank collapse for users {users:?}");
            }
        }
        Command::Evaluate { config, pilot, metrics } => {
            let cfg = ConfigSpec::from_json(&read(&config)?)?.build()?;
            let file: PilotFile = serde_json::from_str(&read(&pilot)?)?;
            let report = evaluate(&cfg, &file.to_factor(&cfg)?, MetricSet::parse(&metrics)?)?;
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report)?;
            writeln!(stdout)?;
        }
        Command::Sweep { spec, out } => {
            let spec = ExperimentSpec::from_json(&read(&spec)?)?;
            let rows = run(&spec)?;
            emit(&rows, Format::from_path(&out), &out)?;
        }
        Command::Fairness { spec, out } => {
            let spec = ExperimentSpec::from_json(&read(&spec)?)?;
            let table = compare_fairness(&spec)?;
            let file = std::io::BufWriter::new(fs::File::create(&out)?);
            match Format::from_path(&out) {
                Format::Csv => write_fairness_csv(&table, file)?,
                Format::Json => serde_json::to_writer_pretty(file, &table)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run_command(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
