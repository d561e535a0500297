use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qmon::config::RunConfig;
use qmon::report;

#[derive(Parser)]
#[command(name = "qmon", version, about = "Continuous position monitoring of oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the Δa scan and write CSV, manifest and optional plots.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write SVG plots.
        #[arg(long)]
        plots: bool,
        /// Worker threads (overrides the config).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Parse and validate a configuration, printing the resolved settings.
    Validate { config: PathBuf },
    /// Closed-form widths only; CSV to stdout or to DIR/analytic.csv.
    Analytic {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::from_path(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            plots,
            parallel,
        } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = out {
                cfg.output.directory = dir;
            }
            cfg.output.plots |= plots;
            if let Some(p) = parallel {
                if p == 0 {
                    eprintln!("error: --parallel must be at least 1");
                    return Err(ExitCode::from(1));
                }
                cfg.parallelism = p;
            }
            let summary = report::run_experiment(&cfg).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(1)
            })?;
            for (i, row) in summary.rows.iter().enumerate() {
                let status = report::row_status(row, cfg.numerics.tail_ratio);
                match &row.result {
                    Ok(r) => println!(
                        "row {i}: delta_a = {} width = {} ({status}, {:.1} s)",
                        report::fmt_value(row.delta_a),
                        report::fmt_value(r.width_equivalent),
                        row.seconds
                    ),
                    Err(_) => println!("row {i}: delta_a = {} {status}", report::fmt_value(row.delta_a)),
                }
            }
            println!("wrote {} files to {}", summary.files.len(), cfg.output.directory.display());
            Ok(ExitCode::from(summary.exit_code() as u8))
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            for (k, v) in cfg.echo() {
                println!("{k} = {v}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analytic { config, out } => {
            let cfg = load(&config)?;
            let text = report::analytic_csv(&cfg).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(1)
            })?;
            match out {
                None => print!("{text}"),
                Some(dir) => {
                    let path = dir.join("analytic.csv");
                    std::fs::create_dir_all(&dir)
                        .and_then(|_| std::fs::write(&path, text))
                        .map_err(|e| {
                            eprintln!("error: {}: {e}", path.display());
                            ExitCode::from(1)
                        })?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    run(Cli::parse()).unwrap_or_else(|code| code)
}
