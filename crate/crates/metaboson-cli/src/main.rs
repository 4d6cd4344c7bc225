//! `metaboson`: command-line driver for spectra, phase diagrams, edge modes,
//! correlations, cat-state parity, pseudospectra and ensemble transients.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure, 4 failed precondition.

mod config;
mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use metaboson::lattice::BulkModel;

use config::{ConfigError, Origin, RunConfig, Task};

#[derive(Parser, Debug)]
#[command(name = "metaboson", version, about = "Quadratic bosonic Lindbladian chains: spectra, phases, modes and correlations")]
struct Cli {
    /// spectrum, phase-diagram, modes, correlate, parity, pseudospec or transient.
    #[arg(long)]
    task: Option<String>,
    /// dbkc, pdmc, dbkc-pure-ss, dns, ddw, or custom:FILE.json for a bulk model file.
    #[arg(long)]
    model: Option<String>,
    /// Model parameters, e.g. j=2,delta=0.5,kappa=0.3.
    #[arg(long)]
    params: Option<String>,
    /// Boundary condition: obc or pbc.
    #[arg(long)]
    bc: Option<String>,
    /// Chain size, or a comma list of sizes.
    #[arg(long = "N", conflicts_with = "n_range")]
    n: Option<String>,
    /// Inclusive size range start:end[:step].
    #[arg(long = "N-range")]
    n_range: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized tasks.
    #[arg(long)]
    seed: Option<u64>,
    /// Task resolutions and options, e.g. nk=512 or x=kappa:0:1:21,y=gamma:0:0.3:16.
    #[arg(long)]
    grid: Vec<String>,
    /// Run configuration or metadata sidecar (JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Library(metaboson::Error),
    Io(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.0)
    }
}

impl From<metaboson::Error> for AppError {
    fn from(e: metaboson::Error) -> Self {
        AppError::Library(e)
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        use metaboson::Error as E;
        match self {
            AppError::Io(_) => 1,
            AppError::Config(_) | AppError::Library(E::Parameter(_) | E::Dimension(_)) => 2,
            AppError::Library(E::Numerical(_) | E::Validation(_)) => 3,
            AppError::Library(E::Precondition(_)) => 4,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Library(e) => write!(f, "{e}"),
            AppError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

fn read_custom(path: &Path) -> Result<BulkModel, ConfigError> {
    let name = path.display();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("--model: {name}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| config::json_error(&name.to_string(), e))
}

/// Merges the optional config file with the flags.
fn build_config(cli: &Cli) -> Result<(RunConfig, Origin), ConfigError> {
    let (mut cfg, origin) = match &cli.config {
        Some(p) => config::load_file(p)?,
        None => {
            let task = cli.task.as_deref().ok_or_else(|| ConfigError("--task is required without --config".into()))?;
            let model = cli.model.as_deref().ok_or_else(|| ConfigError("--model is required without --config".into()))?;
            let cfg = RunConfig {
                task: Task::parse(task).unwrap_or(Task::Spectrum),
                model: model.into(),
                params: Default::default(),
                custom_model: None,
                bc: "obc".into(),
                sizes: vec![25],
                out: PathBuf::from("."),
                seed: 0,
                grid: Default::default(),
            };
            (cfg, Origin::Flags)
        }
    };
    if let Some(t) = &cli.task {
        let names: Vec<&str> = Task::ALL.iter().map(|t| t.as_str()).collect();
        cfg.task = Task::parse(t).ok_or_else(|| ConfigError(format!("--task: unknown task '{t}' (expected {})", names.join(", "))))?;
    }
    if let Some(m) = &cli.model {
        if cfg.model != *m {
            cfg.params.clear();
            cfg.custom_model = None;
        }
        match m.split_once(':') {
            Some(("custom", path)) => {
                cfg.model = "custom".into();
                cfg.custom_model = Some(read_custom(Path::new(path))?);
            }
            _ => cfg.model = m.clone(),
        }
    }
    if let Some(p) = &cli.params {
        for (k, v) in config::parse_pairs("--params", p)? {
            let x = config::parse_f64("--params", &k, &v)?;
            cfg.params.insert(k, x);
        }
    }
    if let Some(bc) = &cli.bc {
        cfg.bc = bc.clone();
    }
    if let Some(n) = &cli.n {
        cfg.sizes = config::parse_sizes(n)?;
    }
    if let Some(n) = &cli.n_range {
        cfg.sizes = config::parse_size_range(n)?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    for g in &cli.grid {
        for (k, v) in config::parse_grid(g)? {
            cfg.grid.insert(k, v);
        }
    }
    // flags given on top of a file are reported against the flags
    let origin = if cli.config.is_some() && (cli.params.is_some() || !cli.grid.is_empty() || cli.model.is_some()) {
        Origin::Flags
    } else {
        origin
    };
    Ok((cfg, origin))
}

fn thread_pool() -> Result<rayon::ThreadPool, AppError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("METABOSON_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| AppError::Config(format!("METABOSON_THREADS must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| AppError::Io(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, AppError> {
    let (cfg, origin) = build_config(cli)?;
    let resolved = config::resolve(cfg, &origin)?;
    let pool = thread_pool()?;
    let files = pool.install(|| tasks::run(&resolved, &origin))?;
    output::write_all(&resolved.config.out, &files, &resolved.config).map_err(|e| AppError::Io(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("metaboson: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
