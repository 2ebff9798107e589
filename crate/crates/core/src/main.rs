use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};

use eotx::pipeline::{run, write_provenance, write_report, Command, ExperimentConfig, Output, Provenance, TableFormat};
use eotx::Error;

#[derive(Parser, Debug)]
#[command(name = "eotx", version, about = "Simulate microwave-to-optical single-photon transduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML experiment configuration; the built-in reference when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory for report and plot data
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// override the configured master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Closed-form figures of merit, rate and Bell-fidelity tables
    Figures,
    /// Photon generation and propagation to the transducer
    Photon,
    /// Heterodyne moment tomography and Wigner functions
    Tomography,
    /// Repetition-rate sweep and detector count record
    Sweep,
    /// Optical and microwave Rabi scans with fits
    Rabi,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let started = now();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    let command = match cli.command {
        Cmd::Figures => Command::Figures,
        Cmd::Photon => Command::Photon,
        Cmd::Tomography => Command::Tomography,
        Cmd::Sweep => Command::Sweep,
        Cmd::Rabi => Command::Rabi,
    };
    let format = match cli.format {
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config { path: "--threads".into(), reason: e.to_string() })?;
    let mut out = Output::new(&cli.out, format)?;
    let report = pool.install(|| run(command, &cfg, &mut out))?;
    let prov = Provenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        seed: cfg.run.seed,
        threads: pool.current_num_threads(),
        started_unix_s: started,
        finished_unix_s: now(),
    };
    write_provenance(&prov, &out)?;
    write_report(&report, &out)?;
    eprintln!("{}: wrote {} files to {}", command.name(), report.files.len() + 2, out.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
