mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, GenKind};
use zivr::dataio::ClassificationParams;

/// Zeroth-order incremental variance reduction: experiments and checks.
#[derive(Parser)]
#[command(name = "zivr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (solver, seed) pair of a config or manifest.
    Run {
        config: PathBuf,
        /// Overrides `run.output`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Tabulate the runs recorded in an output directory.
    Compare {
        dir: PathBuf,
        /// Optimality-gap level for the calls-to-threshold columns; repeatable.
        #[arg(long = "threshold")]
        thresholds: Vec<f64>,
    },
    /// Run the verification battery.
    Verify {
        /// Monte-Carlo draws per check.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the results as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Test hook: scale every claimed sigma and nu.
        #[arg(long, hide = true)]
        inject_sigma_scale: Option<f64>,
    },
    /// Write synthetic datasets.
    GenData {
        #[command(subcommand)]
        kind: GenData,
    },
    /// List the known LIBSVM datasets and whether they are present.
    Datasets {
        /// Parse the files that are present and print n and d.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Subcommand)]
enum GenData {
    /// Cox regression data as CSV `t,delta,f1..fd`.
    Survival {
        #[arg(long, default_value_t = 112)]
        n: usize,
        #[arg(long, default_value_t = 160)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.3)]
        censor_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Strongly convex quadratic sum with its minimizer, as TOML.
    Quadratic {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 100.0)]
        cond: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Planted-model binary classification data in LIBSVM format.
    Classification {
        /// `a9a_like` reproduces the a9a shape; the size flags are then ignored.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long)]
        nnz: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        label_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, output, threads } => commands::cmd_run(&config, output.as_deref(), threads),
        Command::Compare { dir, thresholds } => commands::cmd_compare(&dir, &thresholds),
        Command::Verify { samples, seed, csv, inject_sigma_scale } => {
            commands::cmd_verify(samples, seed, csv.as_deref(), inject_sigma_scale)
        }
        Command::GenData { kind } => match kind {
            GenData::Survival { n, d, sparsity, censor_rate, seed, out } => {
                commands::cmd_gen_data(GenKind::Survival { n, d, sparsity, censor_rate }, seed, &out)
            }
            GenData::Quadratic { n, d, cond, seed, out } => {
                commands::cmd_gen_data(GenKind::Quadratic { n, d, cond }, seed, &out)
            }
            GenData::Classification { preset, n, d, nnz, label_noise, seed, out } => {
                let params = match preset.as_deref() {
                    Some("a9a_like") => ClassificationParams::a9a_like(seed),
                    Some(other) => return Err(CliError::new(2, format!("unknown preset `{other}`"))),
                    None => ClassificationParams {
                        n,
                        d,
                        nnz_per_row: nnz.unwrap_or(d),
                        binary: false,
                        label_noise,
                        unit_rows: true,
                        seed,
                    },
                };
                commands::cmd_gen_data(GenKind::Classification { params }, seed, &out)
            }
        },
        Command::Datasets { check } => commands::cmd_datasets(check),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code.clamp(1, 255) as u8)
        }
    }
}
