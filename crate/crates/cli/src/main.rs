use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use squeezelab::config::check_envelope;
use squeezelab::output::{render_gaps, render_report};
use squeezelab::scenario::oracle_table;
use squeezelab::{load, parse_threads, run_scenario, ConfigError, THREADS_ENV};
use squeezelab_core::{par, qcrb::reference_limits};

const OK: u8 = 0;
const VALIDATION_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;

/// Largest oracle gap `validate` accepts.
const GAP_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "squeezelab", version, about = "Phase sensitivity of squeezed-light interferometers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write the sensitivity table as CSV.
    Run {
        config: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic moments with the truncated Fock oracle.
    Validate { config: PathBuf },
    /// Print the shot-noise, squeezed and Heisenberg limits (standard deviations).
    Limits {
        #[arg(long = "n")]
        n: f64,
        #[arg(long = "r", default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    Ok(std::fs::read(path)?)
}

fn run(config: &Path, output: Option<&Path>) -> ExitCode {
    let bytes = match read(config) {
        Ok(b) => b,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let loaded = match load(&bytes).and_then(|l| {
        if l.config.oracle.enabled {
            check_envelope(&l)?;
        }
        Ok(l)
    }) {
        Ok(l) => l,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let report = match run_scenario(&loaded) {
        Ok(r) => r,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    for row in &report.rows {
        if let Some(flag) = &row.flag {
            eprintln!("warning: sweep value {}: readout undefined: {flag}", row.sweep_value);
        }
    }
    let text = render_report(&report, &bytes);
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                return fail(CONFIG_ERROR, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{text}"),
    }
    let violations: Vec<_> = report.rows.iter().filter(|r| r.violates_cramer_rao()).collect();
    if violations.is_empty() {
        ExitCode::from(OK)
    } else {
        for r in violations {
            eprintln!(
                "error: sweep value {}: realized variance {:e} is below the Cramer-Rao bound {:e}",
                r.sweep_value,
                r.realized_var.unwrap_or(f64::NAN),
                r.cr_floor.unwrap_or(f64::NAN)
            );
        }
        ExitCode::from(VALIDATION_FAILURE)
    }
}

fn validate(config: &Path) -> ExitCode {
    let bytes = match read(config) {
        Ok(b) => b,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    let loaded = match load(&bytes) {
        Ok(l) => l,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    if !loaded.config.oracle.enabled {
        return fail(CONFIG_ERROR, "validate needs oracle.enabled = true");
    }
    if let Err(e) = check_envelope(&loaded) {
        return fail(CONFIG_ERROR, e);
    }
    let rows = match oracle_table(&loaded) {
        Ok(r) => r,
        Err(e) => return fail(VALIDATION_FAILURE, e),
    };
    print!("{}", render_gaps(&rows, &bytes));
    let worst = rows.iter().map(|g| g.comparison.max_gap()).fold(0.0, f64::max);
    if worst > GAP_TOLERANCE {
        return fail(VALIDATION_FAILURE, format!("oracle gap {worst:e} exceeds {GAP_TOLERANCE:e}"));
    }
    ExitCode::from(OK)
}

fn limits(n: f64, r: f64) -> ExitCode {
    match reference_limits(n, r) {
        Ok(l) => {
            println!("snl,sqz,hl");
            println!("{:.16e},{:.16e},{:.16e}", l.snl, l.sqz, l.hl);
            ExitCode::from(OK)
        }
        Err(e) => fail(CONFIG_ERROR, e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match parse_threads(&v) {
            Ok(t) => t,
            Err(e) => return fail(CONFIG_ERROR, e),
        },
        Err(_) => None,
    };
    par::with_threads(threads, || match cli.command {
        Command::Run { config, output } => run(&config, output.as_deref()),
        Command::Validate { config } => validate(&config),
        Command::Limits { n, r } => limits(n, r),
    })
}
