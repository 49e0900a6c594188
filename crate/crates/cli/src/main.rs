mod config;
mod error;
mod generate;
mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conjspace_core::group_algebra::properties::run_suite;
use conjspace_core::group_algebra::{smooth_p_grid, write_p_grid_csv};
use conjspace_core::number_theory_data::{write_pi_table_csv, PrimePiTable};
use conjspace_core::simple_group_data::{build_catalog, write_catalog_csv};

use error::{io_error, CliError, CliResult, Outcome};

#[derive(Parser)]
#[command(
    name = "conjspace",
    version,
    about = "Search, verify and tabulate strict inequalities f < g"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle from a JSON config and write verified conjectures.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides `oracle.seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify one conjecture per line (text or JSON record).
    Verify {
        file: PathBuf,
        /// Grid such as `a=2..2000,b=2..2000`, or `groups` for the catalog.
        #[arg(long)]
        domain: Option<String>,
        /// Basis for text lines; otherwise the first basis that parses.
        #[arg(long)]
        basis: Option<String>,
        /// Extra bases, as written to `bases.json` by `generate`.
        #[arg(long)]
        bases: Option<PathBuf>,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized checks of the 2×2 group identities.
    GroupCheck {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a dataset as CSV.
    Data {
        #[command(subcommand)]
        kind: DataKind,
        /// Output file; stdout when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DataKind {
    /// `n,pi` for every n up to the limit.
    Primes {
        #[arg(long, default_value_t = 100)]
        limit: u64,
    },
    /// One row per catalog generator pair.
    Groups,
    /// `a,b,p` samples of the smooth parameter indicator.
    Figure1Grid {
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long, default_value_t = 4.0)]
        sharpness: f64,
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Generate { config, out, seed } => generate::run(&generate::GenerateArgs {
            config,
            out,
            seed,
            threads: cli.threads,
        }),
        Command::Verify {
            file,
            domain,
            basis,
            bases,
            out,
        } => verify::run(&verify::VerifyArgs {
            file,
            domain,
            basis,
            bases,
            out,
        }),
        Command::GroupCheck { trials, seed } => group_check(trials, seed),
        Command::Data { kind, out } => data(kind, out),
    }
}

fn group_check(trials: usize, seed: u64) -> CliResult<Outcome> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let outcomes = run_suite(trials, seed);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(8);
    println!(
        "{:width$}  {:>7}  {:>10}  result",
        "property", "trials", "max_error"
    );
    for o in &outcomes {
        let verdict = if o.passed { "pass" } else { "FAIL" };
        println!(
            "{:width$}  {:>7}  {:>10.3e}  {verdict}",
            o.name, o.trials, o.max_error
        );
        if !o.passed {
            println!("  {}", o.detail);
        }
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        Outcome::Success
    } else {
        Outcome::Negative
    })
}

fn data(kind: DataKind, out: Option<PathBuf>) -> CliResult<Outcome> {
    let mut sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let label = out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    match kind {
        DataKind::Primes { limit } => {
            let table = PrimePiTable::build(limit)?;
            write_pi_table_csv(&mut sink, &table)
        }
        DataKind::Groups => {
            let catalog = build_catalog()?;
            write_catalog_csv(&mut sink, &catalog)
        }
        DataKind::Figure1Grid {
            resolution,
            sharpness,
            extent,
        } => {
            if !(extent.is_finite() && extent > 0.0) {
                return Err(CliError::Usage(format!(
                    "--extent must be positive, got {extent}"
                )));
            }
            let grid = smooth_p_grid((-extent, extent), (-extent, extent), resolution, sharpness)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            write_p_grid_csv(&mut sink, &grid)
        }
    }
    .and_then(|_| sink.flush())
    .map_err(|e| io_error(&label, e))?;
    Ok(Outcome::Success)
}
