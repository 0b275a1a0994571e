use std::io::{IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridsync_cli::commands::{check_spectra, render_analysis};
use hybridsync_cli::sweep::write_sweep_csv;
use hybridsync_cli::{cmd_analyze, cmd_simulate, cmd_sweep, load_scenario, load_sweep, CliError};

/// Droop-controlled series-parallel inverter networks: closed-loop
/// simulation, small-signal stability analysis and parameter sweeps.
///
/// Scenario defaults: omega_star = 2*pi*50 rad/s, m = 0.01, k_phi = 0.1,
/// v_ref = 1.0 p.u., dt = 1e-4 s, t_end = 2.0 s, delta0 = 0.05 rad,
/// seed = 0, sync_tol = 1e-6 rad, frame = rotating_at_omega_star.
///
/// Exit codes: 0 success, 1 I/O error, 2 usage error, 3 parse error,
/// 4 validation error, 5 numerical failure.
#[derive(Parser)]
#[command(name = "hybridsync", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the closed-loop phase dynamics; writes trajectory.csv and summary.json.
    Simulate {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Small-signal stability report (equal string lines only), as JSON.
    Analyze {
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate the stability predicate over a two-parameter grid, as CSV.
    Sweep {
        spec: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the grid here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn paint(text: &str, ansi: &str) -> String {
    let colour = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
    if colour {
        format!("\x1b[{ansi}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, out_dir, seed } => {
            let scenario = load_scenario(&scenario)?;
            let summary = cmd_simulate(&scenario, &out_dir, seed)?;
            match summary.sync_time.filter(|_| summary.synchronized) {
                Some(t) => println!("{} at t = {t} s", paint("synchronized", "32")),
                None => println!(
                    "{} (final spread {:e} rad)",
                    paint("not synchronized", "31"),
                    summary.final_sync_metric
                ),
            }
            println!("wrote {}", out_dir.display());
        }
        Command::Analyze { scenario, json } => {
            let scenario = load_scenario(&scenario)?;
            let output = cmd_analyze(&scenario)?;
            let text = render_analysis(&output);
            match &json {
                Some(path) => {
                    std::fs::write(path, &text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
                    let verdict = if output.report.stable {
                        paint("stable", "32")
                    } else {
                        paint("not stable", "31")
                    };
                    println!(
                        "{verdict}: lambda_p = {:e}, lambda_c = {:e}",
                        output.report.lambda_p, output.report.lambda_c
                    );
                }
                None => print!("{text}"),
            }
            check_spectra(&output)?;
        }
        Command::Sweep { spec, jobs, out } => {
            let spec = load_sweep(&spec)?;
            let rows = cmd_sweep(&spec, jobs)?;
            match &out {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
                    write_sweep_csv(std::io::BufWriter::new(file), &spec, &rows)?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    write_sweep_csv(&mut lock, &spec, &rows)?;
                    let _ = lock.flush();
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}: {err}", paint("error", "31"));
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
