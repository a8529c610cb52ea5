use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfl_core::experiments::{self, catalog_table, fit_rate, load_config, CheckLevel, CheckOptions};
use rfl_core::Error;

#[derive(Parser)]
#[command(
    name = "rfl",
    version,
    about = "Anisotropic-kernel discrepancy experiments for flows of BV fields on the torus"
)]
struct Cli {
    /// Worker threads for data-parallel loops (falls back to RFL_THREADS, then all cores).
    #[arg(long, global = true, env = "RFL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the field catalog.
    Catalog,
    /// Run a scenario: writes report.csv, sweep.csv and meta.
    Run { config: PathBuf },
    /// Run a scenario and write only sweep.csv and meta.
    Sweep { config: PathBuf },
    /// Run every invariant and print one status line each.
    Check(CheckArgs),
    /// Log-log least-squares slope of one CSV column against another.
    Fit { csv: PathBuf, ycol: String, xcol: String },
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale the kernel normalization constant (mutation testing).
    #[arg(long, hide = true, default_value_t = 1.0)]
    perturb_normalization: f64,
}

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return EXIT_NUMERICAL;
    }
    match e {
        Error::Config(_)
        | Error::InvalidInput(_)
        | Error::Fit(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::UnsupportedMethod { .. } => EXIT_INPUT,
        _ => EXIT_NUMERICAL,
    }
}

fn scenario(path: &Path, report: bool) -> Result<(), Error> {
    let config = load_config(path)?;
    let out = if report {
        experiments::run(&config)?
    } else {
        experiments::sweep(&config)?
    };
    for (g, fit) in out.sweep.fits.iter().enumerate() {
        if let Some(f) = fit {
            println!(
                "group {g}: {} vs {} slope {:.4} ± {:.1e}",
                out.sweep.quantity, out.sweep.axis, f.slope, f.stderr
            );
        }
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!("wall time {:.2}s", out.wall_time);
    Ok(())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, Error> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("no column `{name}`")))
}

fn fit(path: &Path, ycol: &str, xcol: &str) -> Result<(), Error> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = r.headers()?.clone();
    let (yi, xi) = (column(&headers, ycol)?, column(&headers, xcol)?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("row {}, column `{}`: {e}", row + 1, &headers[i])))
        };
        x.push(parse(xi)?);
        y.push(parse(yi)?.abs());
    }
    let f = fit_rate(&x, &y)?;
    println!(
        "slope {:.6} ± {:.3e} (intercept {:.6}, {} points)",
        f.slope, f.stderr, f.intercept, f.points
    );
    Ok(())
}

fn check(args: &CheckArgs) -> ExitCode {
    let options = CheckOptions {
        level: if args.full { CheckLevel::Full } else { CheckLevel::Fast },
        seed: args.seed,
        normalization_scale: args.perturb_normalization,
    };
    let summary = experiments::check(&options, |r| println!("{r}"));
    if summary.passed() {
        println!("all {} invariants pass", summary.results.len());
        ExitCode::SUCCESS
    } else {
        let failing = summary.failing();
        eprintln!("{} failing: {}", failing.len(), failing.join(", "));
        ExitCode::from(EXIT_CHECK)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let result = match &cli.command {
        Command::Catalog => {
            print!("{}", catalog_table());
            Ok(())
        }
        Command::Run { config } => scenario(config, true),
        Command::Sweep { config } => scenario(config, false),
        Command::Check(args) => return check(args),
        Command::Fit { csv, ycol, xcol } => fit(csv, ycol, xcol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
