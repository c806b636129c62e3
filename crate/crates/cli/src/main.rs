//! `quasibell` command-line front end.

mod config;
mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasibell::sweep::{to_json_bytes, CONTOUR_OFFSET};
use quasibell::detection::{visibility_to_xi, xi_to_visibility};
use quasibell::{
    export_grid, find_eta_threshold, maximize_ch, pi_s, sweep_ch, CountDistribution, ExportFormat, OrderingParam,
    StateFamily,
};
use serde::Serialize;

use config::RunConfig;
use verify::Suite;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] quasibell::Error),
    #[error("{0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Library(quasibell::Error::Parse(_)) => 2,
            CliError::Library(_) | CliError::Io { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "quasibell", version, about = "Bell tests with on/off detectors and unbalanced homodyning")]
struct Cli {
    /// TOML run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "QUASIBELL_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct SetupArgs {
    /// single-photon or tmsv
    #[arg(long)]
    state: Option<StateFamily>,
    /// Overall efficiency in (0, 1].
    #[arg(long)]
    eta: Option<f64>,
    /// Mode-matching parameter in (0, 1].
    #[arg(long)]
    xi: Option<f64>,
    /// Probability of no dark count per detector window.
    #[arg(long)]
    pdark: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random restarts of the simplex search.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the CH combination at one parameter point.
    ChOptimize {
        #[command(flatten)]
        setup: SetupArgs,
    },
    /// Maximize on an efficiency x mode-matching grid and export it.
    Sweep {
        #[command(flatten)]
        setup: SetupArgs,
        /// Points per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// csv or json
        #[arg(long)]
        format: Option<ExportFormat>,
        /// Seed each cell from its lower-efficiency neighbour.
        #[arg(long)]
        warm_start: bool,
    },
    /// Locate the efficiency above which the CH inequality is violated.
    Threshold {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long)]
        tol: Option<f64>,
        /// Contour level the maximized CH value has to exceed.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Cross-check closed forms against independent computations.
    Verify {
        /// Run a single suite instead of all of them.
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        /// Fock truncation for the oracle suite.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Ordered count sum of a photon-count distribution read from `n,p` CSV.
    PiS {
        #[arg(long)]
        input: PathBuf,
        /// Ordering parameters, each at most 0.
        #[arg(long = "s", allow_negative_numbers = true, default_value = "-1")]
        s: Vec<f64>,
    },
    /// Convert between mode matching and interference visibility.
    Visibility {
        #[arg(long, conflicts_with = "visibility", required_unless_present = "visibility")]
        xi: Option<f64>,
        #[arg(long)]
        visibility: Option<f64>,
    },
}

#[derive(Serialize)]
struct Report<'a, T> {
    config: &'a RunConfig,
    result: T,
}

#[derive(Serialize)]
struct PiValue {
    s: f64,
    pi: f64,
}

#[derive(Serialize)]
struct PiReport {
    p0: f64,
    tail_mass: f64,
    values: Vec<PiValue>,
}

#[derive(Serialize)]
struct VisibilityReport {
    xi: f64,
    visibility: f64,
}

fn base_config(path: Option<&Path>, workers: Option<usize>) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn apply_setup(cfg: &mut RunConfig, a: SetupArgs) {
    if a.state.is_some() {
        cfg.state = a.state;
    }
    if let Some(v) = a.eta {
        cfg.setup.eta_tilde = v;
    }
    if let Some(v) = a.xi {
        cfg.setup.xi = v;
    }
    if let Some(v) = a.pdark {
        cfg.setup.p_dark = v;
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if let Some(v) = a.restarts {
        cfg.simplex.restarts = v;
    }
    if a.output.is_some() {
        cfg.output = a.output;
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// The effective configuration is stored next to every output file.
fn write_with_echo(path: &Path, bytes: &[u8], cfg: &RunConfig) -> Result<(), CliError> {
    write_file(path, bytes)?;
    let mut sidecar = OsString::from(path.as_os_str());
    sidecar.push(".run.json");
    write_file(Path::new(&sidecar), &to_json_bytes(cfg)?)
}

fn emit<T: Serialize>(cfg: &RunConfig, result: T) -> Result<(), CliError> {
    let bytes = to_json_bytes(&Report { config: cfg, result })?;
    if let Some(path) = &cfg.output {
        write_with_echo(path, &bytes, cfg)
    } else {
        print!("{}", String::from_utf8_lossy(&bytes));
        Ok(())
    }
}

fn init_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = base_config(cli.config.as_deref(), cli.workers)?;
    init_workers(cfg.workers)?;
    match cli.command {
        Command::ChOptimize { setup } => {
            apply_setup(&mut cfg, setup);
            let cfg = cfg.resolve()?;
            let result = maximize_ch(cfg.family()?, &cfg.setup, &cfg.simplex)?;
            emit(&cfg, result)
        }
        Command::Sweep { setup, resolution, format, warm_start } => {
            apply_setup(&mut cfg, setup);
            if let Some(n) = resolution {
                cfg.sweep.resolution = n;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            cfg.sweep.warm_start |= warm_start;
            if cfg.output.is_none() {
                let ext = match cfg.format {
                    ExportFormat::Csv => "csv",
                    ExportFormat::Json => "json",
                };
                cfg.output = Some(PathBuf::from(format!("sweep.{ext}")));
            }
            let cfg = cfg.resolve()?;
            let grid = sweep_ch(&cfg.sweep_spec()?, &cfg.simplex)?;
            let mut bytes = Vec::new();
            export_grid(&grid, cfg.format, CONTOUR_OFFSET, &mut bytes)?;
            let path = cfg.output.clone().unwrap_or_default();
            write_with_echo(&path, &bytes, &cfg)?;
            eprintln!("wrote {} ({} x {} cells)", path.display(), grid.eta_axis.len(), grid.xi_axis.len());
            Ok(())
        }
        Command::Threshold { setup, tol, level } => {
            apply_setup(&mut cfg, setup);
            if let Some(t) = tol {
                cfg.threshold.tol = t;
            }
            if let Some(l) = level {
                cfg.threshold.level = l;
            }
            let cfg = cfg.resolve()?;
            let result = find_eta_threshold(
                cfg.family()?,
                cfg.setup.xi,
                cfg.setup.p_dark,
                cfg.threshold.tol,
                cfg.threshold.level,
                &cfg.simplex,
            )?;
            emit(&cfg, result)
        }
        Command::Verify { suite, dim } => {
            if let Some(d) = dim {
                cfg.dim = d;
            }
            let cfg = cfg.resolve()?;
            let suites = suite.map_or(Suite::ALL.to_vec(), |s| vec![s]);
            let mut failed = Vec::new();
            for s in suites {
                let report = verify::run(s, cfg.dim)?;
                println!("{report}");
                if !report.passed {
                    failed.push(s.to_string());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(format!("failed suites: {}", failed.join(", "))))
            }
        }
        Command::PiS { input, s } => {
            let text = std::fs::read_to_string(&input).map_err(|source| CliError::Io { path: input.clone(), source })?;
            let counts = CountDistribution::from_csv(&text)?;
            let values = s
                .into_iter()
                .map(|s| Ok(PiValue { s, pi: pi_s(&counts, OrderingParam::new(s)?) }))
                .collect::<Result<Vec<_>, CliError>>()?;
            let report = PiReport { p0: counts.p0(), tail_mass: counts.tail_mass(), values };
            print!("{}", String::from_utf8_lossy(&to_json_bytes(&report)?));
            Ok(())
        }
        Command::Visibility { xi, visibility } => {
            let report = match (xi, visibility) {
                (Some(xi), _) => VisibilityReport { xi, visibility: xi_to_visibility(xi)? },
                (None, Some(v)) => VisibilityReport { xi: visibility_to_xi(v)?, visibility: v },
                (None, None) => return Err(CliError::Usage("pass --xi or --visibility".into())),
            };
            print!("{}", String::from_utf8_lossy(&to_json_bytes(&report)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
