//! Command-line front end.
//!
//! Every output embeds the resolved [`RunConfig`]: JSON reports under the
//! `config` key, CSV files on a leading `# config: {…}` line. `replay`
//! reads it back and reruns it.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::diagnostics::default_steps;
use crate::error::Error;
use crate::spectral_model::Mode;
use crate::state_space::DEFAULT_TOL;
use crate::trajectories::{TimeGrid, TrajectoryKind};
use commands::{execute, Outcome};
use config::{parse_table, CommandConfig, ModelConfig, ModelName, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGENT: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "schrscale", version, about = "Hilbert-scale diagnostics for Schrödinger dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Box,
    Oscillator,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Bohmian,
    Nelson,
}

#[derive(Debug, Args)]
struct Common {
    /// Spectrum model.
    #[arg(long, value_enum, default_value = "box")]
    model: ModelArg,
    /// Box length.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    length: f64,
    /// Spectral shift σ added to every eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<f64>,
    /// Energies for the table model, `n=E,n=E,…`.
    #[arg(long)]
    table: Option<String>,
    /// State, e.g. `modes:1=0.7,2=0.7` or `powerlaw:s=2,n0=1,phase=zero`.
    #[arg(long)]
    state: String,
    /// Keep only modes with a < E ≤ b, given as `a:b`, and renormalize.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Plain `key=value` file of defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Width of certified brackets.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Place the state on the Hilbert scale.
    #[command(args_override_self = true)]
    Classify(Common),
    /// Scale norms ‖f‖_k² for k = −2…2.
    #[command(args_override_self = true)]
    Norms(Common),
    /// Sample ψ(x, t) on a uniform grid (CSV).
    #[command(args_override_self = true)]
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        /// Largest mode in the synthesis sum.
        #[arg(long)]
        truncation: Mode,
        #[arg(long, default_value_t = 1024)]
        points: usize,
    },
    /// Per-mode central-difference residuals of the weak equation.
    #[command(args_override_self = true)]
    WeakCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, default_value_t = 50)]
        max_mode: Mode,
        /// Comma-separated steps.
        #[arg(long, default_value = "1e-2,5e-3,2.5e-3")]
        steps: String,
    },
    /// Strong differentiability verdict from the quotient residual.
    #[command(args_override_self = true)]
    StrongCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        /// Comma-separated decreasing steps; 1e-1 … 1e-4 when absent.
        #[arg(long)]
        steps: Option<String>,
    },
    /// Apply the extension of Ĥ − i d/dt to a multiplier evolution.
    #[command(args_override_self = true)]
    Extension {
        #[command(flatten)]
        common: Common,
        /// `zero`, `sine:α`, `clamp:C` or `table:lo:hi:value;…`.
        #[arg(long)]
        multiplier: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
    },
    /// Bohmian or Nelson ensembles (CSV plus summary JSON).
    #[command(args_override_self = true)]
    Trajectories {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "nelson")]
        kind: KindArg,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0.3)]
        t_end: f64,
        /// Largest step; 1e-4 for Nelson, 1e-3 for Bohmian when absent.
        #[arg(long)]
        dt: Option<f64>,
        /// Record every this many steps; ten records when absent.
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Box-counting dimension of the graph of Re ψ(·, t).
    #[command(args_override_self = true)]
    Fractal {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        truncation: Mode,
        #[arg(long, default_value_t = 1 << 16)]
        points: usize,
        /// Dyadic box sizes 2^-1 … 2^-levels.
        #[arg(long, default_value_t = 12)]
        levels: u32,
    },
    /// Rerun the configuration embedded in an output file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DomainRequired(_) | Error::NotNormalizable(_) | Error::NotInExtensionFamily(_) => {
                Failure::Numeric(e)
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn parse_steps(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad step '{v}'")))).collect()
}

fn parse_window(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("window must be a:b with finite a < b, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

fn resolve(common: Common, command: CommandConfig) -> Result<RunConfig, Failure> {
    let kind = match common.model {
        ModelArg::Box => ModelName::Box,
        ModelArg::Oscillator => ModelName::Oscillator,
        ModelArg::Table => ModelName::Table,
    };
    let table = common.table.as_deref().map(parse_table).transpose()?;
    Ok(RunConfig {
        command,
        model: ModelConfig {
            kind,
            length: common.length,
            shift: common.shift,
            table,
            effective_shift: None,
            applied_shift: None,
        },
        state: common.state,
        window: common.window.as_deref().map(parse_window).transpose()?,
        seed: common.seed,
        tol: common.tol,
        output: common.output,
    })
}

fn to_config(cmd: Cmd) -> Result<RunConfig, Failure> {
    match cmd {
        Cmd::Classify(c) => resolve(c, CommandConfig::Classify),
        Cmd::Norms(c) => resolve(c, CommandConfig::Norms),
        Cmd::Evolve { common, t, truncation, points } => {
            resolve(common, CommandConfig::Evolve { t, truncation, points })
        }
        Cmd::WeakCheck { common, t, max_mode, steps } => {
            let steps = parse_steps(&steps)?;
            resolve(common, CommandConfig::WeakCheck { t, max_mode, steps })
        }
        Cmd::StrongCheck { common, t, steps } => {
            let steps = match steps {
                Some(s) => parse_steps(&s)?,
                None => default_steps(),
            };
            resolve(common, CommandConfig::StrongCheck { t, steps })
        }
        Cmd::Extension { common, multiplier, t } => resolve(common, CommandConfig::Extension { multiplier, t }),
        Cmd::Trajectories { common, kind, paths, t_end, dt, record_every } => {
            let kind = match kind {
                KindArg::Bohmian => TrajectoryKind::Bohmian,
                KindArg::Nelson => TrajectoryKind::Nelson,
            };
            let dt = dt.unwrap_or(match kind {
                TrajectoryKind::Bohmian => 1e-3,
                TrajectoryKind::Nelson => 1e-4,
            });
            let record_every = match record_every {
                Some(r) => r,
                None => TimeGrid::covering(0.0, t_end, dt, 1)?.steps.div_ceil(10),
            };
            resolve(common, CommandConfig::Trajectories { kind, paths, t_end, dt, record_every })
        }
        Cmd::Fractal { common, t, truncation, points, levels } => {
            resolve(common, CommandConfig::Fractal { t, truncation, points, levels })
        }
        Cmd::Replay { .. } => unreachable!("handled by the caller"),
    }
}

/// Splice `key=value` lines from `--config FILE` in front of the explicit
/// flags, so that flags given on the command line win.
fn expand_config_file(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(PathBuf::from(it.next().ok_or_else(|| Failure::Usage("--config needs a path".into()))?));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut injected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        injected.push(OsString::from(format!("--{}", k.trim().replace('_', "-"))));
        injected.push(OsString::from(v.trim()));
    }
    let at = rest.len().min(2);
    rest.splice(at..at, injected);
    Ok(rest)
}

/// Read the configuration embedded in a report or CSV file.
pub fn embedded_config(path: &Path) -> io::Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let invalid = |e: serde_json::Error| io::Error::new(io::ErrorKind::InvalidData, e);
    if let Some(first) = text.lines().next().and_then(|l| l.strip_prefix("# config: ")) {
        return serde_json::from_str(first).map_err(invalid);
    }
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(invalid)?;
    serde_json::from_value(doc["config"].take()).map_err(invalid)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(outcome: &Outcome, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            for (suffix, bytes) in &outcome.artifacts {
                let target = suffix.map_or_else(|| path.to_path_buf(), |s| sidecar(path, s));
                output::write_atomic(&target, bytes).map_err(|e| Failure::Io(format!("{}: {e}", target.display())))?;
            }
            println!("{}", outcome.summary);
        }
        None => {
            let (_, bytes) = &outcome.artifacts[0];
            io::stdout().write_all(bytes).map_err(|e| Failure::Io(e.to_string()))?;
            eprintln!("{}", outcome.summary);
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("SCHRSCALE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // a pool already built by an embedding program is kept
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run_inner(args: Vec<OsString>) -> Result<(), Failure> {
    let args = expand_config_file(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Failure::Usage(e.render().to_string()));
        }
    };
    configure_threads();
    let mut config = match cli.command {
        Cmd::Replay { file, output } => {
            let mut c = embedded_config(&file).map_err(|e| Failure::Io(format!("{}: {e}", file.display())))?;
            c.output = output;
            c
        }
        other => to_config(other)?,
    };
    let outcome = execute(&mut config)?;
    emit(&outcome, config.output.as_deref())
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match run_inner(args.into_iter().map(Into::into).collect()) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("schrscale: {}", msg.trim_end());
            EXIT_USAGE
        }
        Err(Failure::Io(msg)) => {
            eprintln!("schrscale: {msg}");
            EXIT_IO
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("{e}");
            EXIT_DIVERGENT
        }
    }
}
