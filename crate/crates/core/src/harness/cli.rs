use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{ExperimentConfig, OutputFormat};
use super::experiments::{run_csi_experiment, run_flops_experiment, run_sumrate_experiment};
use super::output::{write_flops, write_meta, write_records, Meta};
use crate::channel::{generate_channel, normalize_channel, write_channel, SceneConfig};
use crate::error::{Error, Result};
use crate::topology::{build_toroid_with, read_topology, validate};

/// Directory for outputs given as bare file names.
pub const OUT_DIR_ENV: &str = "RPN_MIMO_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "rpn-mimo",
    version,
    about = "Distributed transmit-antenna selection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sum rate against selected-antenna count.
    Sumrate(RunArgs),
    /// Robustness to CSI error and subcarrier subsets.
    Csi(RunArgs),
    /// Flop counts and their scaling with array size.
    Flops(RunArgs),
    /// Check a topology file, or the toroid of the configuration.
    ValidateTopology(TopologyArgs),
    /// Write a synthetic channel in the text format.
    GenChannel(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the seed list (repeatable).
    #[arg(long)]
    seed: Vec<u64>,
    /// Replace the user-count grid (repeatable).
    #[arg(long)]
    users: Vec<usize>,
    /// Replace the selected-count grid (repeatable).
    #[arg(long)]
    tokens: Vec<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct TopologyArgs {
    /// Topology file; the configured toroid when absent.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// TOML configuration file supplying the toroid shape.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> std::result::Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) if !p.exists() => Err(Failure::Usage(format!("config file not found: {}", p.display()))),
        Some(p) => ExperimentConfig::load(p).map_err(Failure::from),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) {
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    if !args.users.is_empty() {
        cfg.users = args.users.clone();
    }
    if !args.tokens.is_empty() {
        cfg.tokens = args.tokens.clone();
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
}

/// Bare file names go under `$RPN_MIMO_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    let bare = path.parent().is_none_or(|p| p.as_os_str().is_empty());
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if bare && !path.is_absolute() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Sends `body` to the configured output, with a meta sidecar for CSV files.
fn emit(
    cfg: &ExperimentConfig,
    meta: &Meta<'_>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match &cfg.output {
        None => body(stdout),
        Some(path) => {
            let path = resolve_out(path);
            let mut file = create(&path)?;
            body(&mut file)?;
            file.flush()?;
            if cfg.format == OutputFormat::Csv {
                let mut side = path.into_os_string();
                side.push(".meta.json");
                let mut sidecar = create(Path::new(&side))?;
                write_meta(&mut sidecar, meta)?;
                sidecar.flush()?;
            }
            Ok(())
        }
    }
}

fn run(command: Command, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Sumrate(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_overrides(&mut cfg, &args);
            cfg.validate()?;
            let records = run_sumrate_experiment(&cfg)?;
            let meta = Meta::new("sumrate", &cfg);
            emit(&cfg, &meta, stdout, |w| write_records(w, &records, cfg.format, &meta))?;
        }
        Command::Csi(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_overrides(&mut cfg, &args);
            cfg.validate()?;
            let records = run_csi_experiment(&cfg)?;
            let meta = Meta::new("csi", &cfg);
            emit(&cfg, &meta, stdout, |w| write_records(w, &records, cfg.format, &meta))?;
        }
        Command::Flops(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_overrides(&mut cfg, &args);
            cfg.validate()?;
            let report = run_flops_experiment(&cfg)?;
            let meta = Meta::new("flops", &cfg);
            emit(&cfg, &meta, stdout, |w| write_flops(w, &report, cfg.format, &meta))?;
        }
        Command::GenChannel(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_overrides(&mut cfg, &args);
            let scene = SceneConfig {
                seed: cfg.seeds.first().copied().unwrap_or(0),
                n_users: cfg.users.first().copied().unwrap_or(cfg.scene.n_users),
                ..cfg.scene.clone()
            };
            let h = normalize_channel(&generate_channel(&scene)?)?;
            match &cfg.output {
                None => write_channel(stdout, &h)?,
                Some(path) => {
                    let mut file = create(&resolve_out(path))?;
                    write_channel(&mut file, &h)?;
                    file.flush().map_err(Error::from)?;
                }
            }
        }
        Command::ValidateTopology(args) => {
            let topology = match &args.topology {
                Some(path) => {
                    let file = File::open(path)
                        .map_err(|e| Failure::Usage(format!("cannot open topology file {}: {e}", path.display())))?;
                    read_topology(BufReader::new(file))?
                }
                None => {
                    let cfg = load_config(args.config.as_deref())?;
                    build_toroid_with(cfg.toroid_rows, cfg.toroid_cols, cfg.edge_rule)?
                }
            };
            let problems = validate(&topology);
            if !problems.is_empty() {
                return Err(Failure::Runtime(problems.join("\n")));
            }
            writeln!(stdout, "OK").map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage or configuration errors,
/// 1 for runtime failures.
pub fn cli_main<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            1
        }
    }
}
