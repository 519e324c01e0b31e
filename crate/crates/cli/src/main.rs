use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hrf_cli::config::{parse_bit_list, parse_mu_grid, ExperimentConfig, ExperimentKind};
use hrf_cli::{execute, write_outputs, CliError, Result};

/// CRB-rate experiments for hybrid radar fusion with low-resolution ADCs.
#[derive(Debug, Parser)]
#[command(name = "hrf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CRB-rate boundary per ADC resolution.
    Boundary(RunArgs),
    /// Pareto endpoint as the target moves away.
    DistanceSweep(RunArgs),
    /// Required ADC resolution over random target positions.
    MinBits(RunArgs),
    /// Oracle checks of the FIM evaluators.
    ValidateFim(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ADC resolutions, e.g. 1,2,4.
    #[arg(long)]
    bits: Option<String>,
    /// Spacing of the rate floors along a boundary: lin or log.
    #[arg(long)]
    mu_grid: Option<String>,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(&args.config, kind)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(bits) = &args.bits {
        cfg.bits = parse_bit_list(bits)?;
    }
    if let Some(g) = &args.mu_grid {
        cfg.mu_grid = parse_mu_grid(g)?;
    }
    cfg.validate()?;
    let dir = match (args.out, &cfg.output_dir) {
        (Some(d), _) => d,
        (None, Some(d)) => args.config.parent().unwrap_or(".".as_ref()).join(d),
        (None, None) => return Err(CliError::Config("no output directory: pass --out or set output_dir".into())),
    };
    let output = execute(&cfg)?;
    write_outputs(&dir, &output)?;
    for (name, _) in &output.files {
        println!("{}", dir.join(name).display());
    }
    if output.failed_checks > 0 {
        eprintln!("{} validation check(s) failed", output.failed_checks);
        return Ok(3);
    }
    if output.solver_failures > 0 {
        eprintln!("{} solve(s) did not reach optimality", output.solver_failures);
        return Ok(2);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are config errors; help and version are not errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (kind, args) = match cli.command {
        Command::Boundary(a) => (ExperimentKind::Boundary, a),
        Command::DistanceSweep(a) => (ExperimentKind::DistanceSweep, a),
        Command::MinBits(a) => (ExperimentKind::MinBits, a),
        Command::ValidateFim(a) => (ExperimentKind::ValidateFim, a),
    };
    match run(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hrf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
