use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qnd_cli::config::{self, Experiment};
use qnd_cli::CliError;

/// Continuous QND energy measurement and joint-energy state preparation.
///
/// Times are dimensionless in units of 1/μ; `mu_hz` (default 1e6 s⁻¹) converts
/// them to seconds in reports. Set QNDSIM_THREADS to cap worker threads.
#[derive(Parser, Debug)]
#[command(name = "qndsim", version)]
struct Cli {
    /// Experiment to run.
    experiment: Experiment,
    /// JSON config (a previous manifest.json also works). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key by dotted path, e.g. `--set params.k=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QNDSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(vec![format!("QNDSIM_THREADS: expected a positive integer, got {raw:?}")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads()
        .and_then(|_| config::load(cli.config.as_deref(), &cli.overrides))
        .and_then(|cfg| qnd_cli::run(cli.experiment, cfg, cli.out));
    match result {
        Ok(outcome) => {
            // a closed pipe on stdout is not a failure of the run
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{} finished; outputs in {}", cli.experiment, outcome.dir.display());
            if let Some(map) = outcome.summary.as_object() {
                for (k, v) in map {
                    let _ = writeln!(out, "  {k}: {v}");
                }
            }
            for a in &outcome.artifacts {
                let _ = writeln!(out, "  wrote {}", a.file);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{e}");
            if !matches!(e, CliError::Validation(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
