//! `darboux run <scenario>`: executes a scenario file against the core
//! pipelines and writes a deterministic report plus optional CSV samples.

mod report;
mod runner;
mod scenario;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use darboux_core::grid::Grid;

#[derive(Parser)]
#[command(name = "darboux", version, about = "Darboux intertwining pipelines over scenario files")]
struct Cli {
    #[command(subcommand)]
    command: TopCommand,
}

#[derive(Subcommand)]
enum TopCommand {
    /// Run a scenario file; writes report.txt (and samples.csv when
    /// sampling is requested) into the output directory.
    Run {
        /// Scenario file path.
        scenario: PathBuf,
        /// Output directory for report.txt and samples.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the window as xmin,xmax,points.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        /// Override the residual acceptance tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn parse_window(spec: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("--window expects xmin,xmax,points, got '{spec}'"));
    }
    let xmin: f64 = parts[0].trim().parse().map_err(|_| format!("bad xmin '{}'", parts[0]))?;
    let xmax: f64 = parts[1].trim().parse().map_err(|_| format!("bad xmax '{}'", parts[1]))?;
    let points: usize = parts[2].trim().parse().map_err(|_| format!("bad points '{}'", parts[2]))?;
    if !(xmin < xmax) || points < 2 {
        return Err("--window requires xmin < xmax and points >= 2".to_string());
    }
    Ok(Grid::new(xmin, xmax, points))
}

fn run() -> u8 {
    let cli = Cli::parse();
    let TopCommand::Run { scenario, out, seed, window, tol } = cli.command;

    let text = match fs::read_to_string(&scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("scenario error: cannot read {}: {e}", scenario.display());
            return 2;
        }
    };
    let name = scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    let mut sc = match scenario::parse_scenario(&text, &name) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("scenario error: {e}");
            return 2;
        }
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(w) = &window {
        match parse_window(w) {
            Ok(g) => sc.window = g,
            Err(e) => {
                eprintln!("scenario error: {e}");
                return 2;
            }
        }
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            eprintln!("scenario error: --tol must be a positive number");
            return 2;
        }
        sc.tol.residual = t;
    }

    let output = runner::run_scenario(&sc);

    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("cannot create output directory {}: {e}", out.display());
        return 2;
    }
    if let Err(e) = fs::write(out.join("report.txt"), &output.report) {
        eprintln!("cannot write report: {e}");
        return 2;
    }
    if let Some(csv) = &output.samples {
        if let Err(e) = fs::write(out.join("samples.csv"), csv) {
            eprintln!("cannot write samples: {e}");
            return 2;
        }
    }
    print!("{}", output.report);
    output.exit_code as u8
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
