use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corescale_cli::commands::{cmd_omega, cmd_predict, cmd_simulate, cmd_trace, cmd_waterfall, write_output, Output};
use corescale_cli::config::{Config, OutputFormat};
use corescale_cli::CliResult;

#[derive(Parser)]
#[command(name = "corescale", version, about = "Finite-size scaling of hypergraph 2-core peeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replaces the simulation and Omega seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to output.path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Expansion objects and predictions over the (n, r) grid.
    Predict,
    /// Monte Carlo estimate of P(no core) over the grid.
    Simulate {
        /// Write the trajectory of every trial.
        #[arg(long)]
        dump_traces: bool,
    },
    /// Predictions joined with simulation.
    Waterfall,
    /// The constant Omega.
    Omega,
    /// Replays one simulated trial with its trajectory.
    Trace {
        /// Grid cell index, n-major.
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli.config.ok_or_else(|| corescale_cli::CliError::Config("--config is required".into()))?;
    let mut cfg = Config::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.override_seed(s);
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| corescale_cli::CliError::Config(e.to_string()))?;
    }
    let out: Output = match cli.command {
        Command::Predict => cmd_predict(&cfg)?,
        Command::Simulate { dump_traces } => {
            cfg.output.dump_traces |= dump_traces;
            cmd_simulate(&cfg)?
        }
        Command::Waterfall => cmd_waterfall(&cfg)?,
        Command::Omega => cmd_omega(&cfg)?,
        Command::Trace { cell, trial } => cmd_trace(&cfg, cell, trial)?,
    };
    let dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.path));
    write_output(&out, &dir)?;
    match cfg.output.format {
        OutputFormat::Csv => print!("{}", out.csv.1),
        OutputFormat::Json => print!("{}", out.report.to_json()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
