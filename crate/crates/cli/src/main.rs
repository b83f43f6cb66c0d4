//! `corner-gl`: runs effective-energy studies described by TOML or JSON files.

mod config;
mod plot;
mod run;

use clap::{Parser, Subcommand, ValueEnum};
use corner_gl::effective::store::read_records;
use corner_gl::effective::{EnergyRecord, RecordKind};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: malformed or unknown keys, parameters outside their ranges.
    Validation(String),
    /// A solver, fit or extrapolation failed.
    Numerical(String),
    Io(String),
    NoRecords(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) | Self::NoRecords(_) => 1,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::Numerical(_) => "numerical",
            Self::Io(_) => "io",
            Self::NoRecords(_) => "no_records",
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Validation(m) | Self::Numerical(m) | Self::Io(m) | Self::NoRecords(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "corner-gl", version, about = "Effective Ginzburg-Landau energies of corners, wedges and sectors")]
struct Cli {
    /// Print the default descriptor of every study kind and exit.
    #[arg(long)]
    print_defaults: bool,
    /// Worker threads for the parallel loops (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Continuity,
    Convergence,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its records, report and plot.
    Run {
        config: PathBuf,
        #[command(flatten)]
        outputs: run::Outputs,
    },
    /// Check a descriptor and print it fully resolved, without computing.
    Validate { config: PathBuf },
    /// Tabulate records, optionally filtered by `key=value`
    /// (kind, mu, beta, length, depth, radius, h, config_hash).
    Show { records: PathBuf, filters: Vec<String> },
    /// Draw an SVG from a records file.
    Plot {
        records: PathBuf,
        #[arg(long, value_enum, default_value = "convergence")]
        kind: PlotKind,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Threshold for continuity plots.
        #[arg(long)]
        theta0: Option<f64>,
    },
}

fn load(path: &std::path::Path) -> Result<config::StudyConfig, CliError> {
    config::parse(path).and_then(config::RawConfig::resolve).map_err(CliError::Validation)
}

fn read(path: &std::path::Path) -> Result<Vec<EnergyRecord>, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{} does not exist", path.display())));
    }
    read_records(path).map_err(|e| CliError::Io(e.to_string()))
}

fn matches_filter(r: &EnergyRecord, key: &str, value: &str) -> Result<bool, CliError> {
    let num = |field: Option<f64>| -> Result<bool, CliError> {
        let v: f64 = value.parse().map_err(|_| CliError::Validation(format!("filter {key}={value}: not a number")))?;
        Ok(field.is_some_and(|f| (f - v).abs() <= 1e-9 * v.abs().max(1.0)))
    };
    match key {
        "kind" => {
            RecordKind::parse(value).ok_or_else(|| CliError::Validation(format!("unknown record kind {value:?}")))?;
            Ok(r.kind.as_str() == value)
        }
        "mu" => num(Some(r.mu)),
        "beta" => num(r.beta),
        "length" | "L" => num(r.length),
        "depth" | "ell" => num(r.depth),
        "radius" | "R" => num(r.radius),
        "h" => num(r.h),
        "config_hash" => Ok(r.config_hash.starts_with(value)),
        _ => Err(CliError::Validation(format!("unknown filter key {key:?}"))),
    }
}

fn show(path: &std::path::Path, filters: &[String]) -> Result<(), CliError> {
    let mut records = read(path)?;
    let mut parsed = Vec::new();
    for f in filters {
        let (k, v) = f.split_once('=').ok_or_else(|| CliError::Validation(format!("filter {f:?} is not key=value")))?;
        parsed.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut keep = Vec::new();
    for r in records.drain(..) {
        let mut ok = true;
        for (k, v) in &parsed {
            ok &= matches_filter(&r, k, v)?;
        }
        if ok {
            keep.push(r);
        }
    }
    if keep.is_empty() {
        return Err(CliError::NoRecords("no records".into()));
    }
    let trunc = |r: &EnergyRecord| (r.depth.unwrap_or(0.0), r.length.unwrap_or(0.0), r.radius.unwrap_or(0.0));
    keep.sort_by(|a, b| {
        a.mu.total_cmp(&b.mu).then(a.kind.cmp(&b.kind)).then_with(|| {
            let (x, y) = (trunc(a), trunc(b));
            x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2))
        })
    });
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!("{:<16} {:>13} {:>9} {:>9} {:>7} {:>7} {:>6} {:>16} {:>16} {:>5}", "kind", "mu", "beta", "L", "ell", "R", "h", "energy", "corrected", "conv");
    for r in &keep {
        println!(
            "{:<16} {:>13.10} {:>9} {:>9} {:>7} {:>7} {:>6} {:>16.9e} {:>16.9e} {:>5}",
            r.kind.as_str(),
            r.mu,
            f(r.beta),
            f(r.length),
            f(r.depth),
            f(r.radius),
            f(r.h),
            r.energy,
            r.corrected(),
            r.converged
        );
    }
    Ok(())
}

fn plot_cmd(path: &std::path::Path, kind: PlotKind, out: Option<PathBuf>, theta0: Option<f64>) -> Result<(), CliError> {
    let records = read(path)?;
    if records.is_empty() {
        return Err(CliError::NoRecords("no records".into()));
    }
    let svg = match kind {
        PlotKind::Convergence => plot::convergence(&records),
        PlotKind::Continuity => {
            let th = match theta0 {
                Some(t) => t,
                None => corner_gl::oned::compute_theta0(1e-8).map_err(|e| CliError::Numerical(e.to_string()))?.theta0,
            };
            plot::continuity(&records, th, None)
        }
    };
    let out = out.unwrap_or_else(|| path.with_extension("svg"));
    std::fs::write(&out, svg).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!("{}", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Io(e.to_string()))?;
    }
    if cli.print_defaults {
        print!("{}", config::print_defaults());
        return Ok(());
    }
    match cli.command {
        None => Err(CliError::Validation("no command given; see --help".into())),
        Some(Command::Validate { config }) => {
            let c = load(&config)?;
            println!("{}", json!({ "valid": true, "config_hash": c.hash(), "output_dir": run::output_dir(&c), "config": c }));
            Ok(())
        }
        Some(Command::Run { config, outputs }) => {
            let c = load(&config)?;
            let report = run::run(&c, &outputs)?;
            let mut summary = serde_json::Map::new();
            for k in ["study", "name", "config_hash", "num_records", "status", "verdict", "limit", "error", "theta0", "mu_beta"] {
                if let Some(v) = report.get(k) {
                    summary.insert(k.into(), v.clone());
                }
            }
            summary.insert("output_dir".into(), json!(run::output_dir(&c)));
            println!("{}", serde_json::Value::Object(summary));
            Ok(())
        }
        Some(Command::Show { records, filters }) => show(&records, &filters),
        Some(Command::Plot { records, kind, out, theta0 }) => plot_cmd(&records, kind, out, theta0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.name(), "message": e.message(), "exit_code": e.code() }));
            ExitCode::from(e.code())
        }
    }
}
