use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use erasure_qec::analysis::{fit_threshold, Axis};
use erasure_qec::cli::{self, Command, Format, RunConfig};
use erasure_qec::{Error, Result};

#[derive(Parser)]
#[command(name = "erasure-qec", version, about = "Surface-code thresholds under erasure and Pauli noise, and transmon gate physics")]
struct Args {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config and ERASURE_QEC_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config and ERASURE_QEC_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; overrides [output].path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the logical failure rate at one noise point.
    Simulate,
    /// Sample a threshold grid and fit it.
    Sweep,
    /// Fit a threshold to records from an earlier run.
    Fit {
        /// CSV or JSON records.
        input: PathBuf,
        /// Swept rate.
        #[arg(long, default_value = "p")]
        axis: Axis,
    },
    /// Evaluate the closed-form device physics.
    Physics,
    /// Simulate the dual-rail √iSWAP gate.
    Evolve,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn run(args: Args) -> Result<()> {
    let command = match args.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Sweep => Command::Sweep,
        Cmd::Fit { .. } => Command::Fit,
        Cmd::Physics => Command::Physics,
        Cmd::Evolve => Command::Evolve,
    };
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None if matches!(command, Command::Simulate | Command::Sweep) => return Err(Error::Config("--config is required".into())),
        None => RunConfig::default(),
    };
    cli::apply_overrides(&mut config, args.seed, args.threads)?;
    config.validate(command)?;
    if let Some(n) = config.run.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = args.out.or_else(|| config.output.path.clone());
    let format = config.output.format;

    match args.command {
        Cmd::Simulate => {
            let est = cli::simulate(&config)?;
            emit(&[est], format, out.as_deref())
        }
        Cmd::Sweep => {
            let report = cli::run_sweep(&config)?;
            emit(&report.records, format, out.as_deref())?;
            let fit_out = out.as_deref().map(|p| sibling(p, "_fit.json"));
            cli::write_json(&report.fit?, writer(fit_out.as_deref())?)
        }
        Cmd::Fit { input, axis } => {
            let records = cli::load_records(&input)?;
            let fit = fit_threshold(&records, axis)?;
            cli::write_json(&fit, writer(out.as_deref())?)
        }
        Cmd::Physics => {
            let params = config.device.unwrap_or_default().params();
            cli::write_json(&cli::physics_report(&params)?, writer(out.as_deref())?)
        }
        Cmd::Evolve => {
            let (summary, trace) = cli::evolve(&config)?;
            trace.write_csv(writer(out.as_deref())?)?;
            let summary_out = out.as_deref().map(|p| sibling(p, "_summary.json"));
            match summary_out {
                Some(p) => cli::write_json(&summary, writer(Some(&p))?),
                None => cli::write_json(&summary, io::stderr().lock()),
            }
        }
    }
}

fn emit(records: &[erasure_qec::analysis::PfailEstimate], format: Format, out: Option<&Path>) -> Result<()> {
    match (out, format) {
        (Some(p), _) => cli::emit_results(records, format, p),
        (None, Format::Csv) => cli::write_csv(records, io::stdout().lock()),
        (None, Format::Json) => cli::write_json(records, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::from(cli::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
