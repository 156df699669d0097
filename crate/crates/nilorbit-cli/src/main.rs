mod commands;
mod output;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use commands::*;

#[derive(Parser, Debug)]
#[command(name = "nilorbit", version, about = "Polynomial orbits on nilmanifolds, Walsh complexity and uniformity norms")]
struct Cli {
    /// Worker threads (falls back to NILORBIT_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a bound on the complexity of a Walsh system
    Complexity(ComplexityArgs),
    /// Orbit points {g(a·m + b)} in second-kind coordinates
    Orbit(OrbitArgs),
    /// Exact obstruction verdict checked against discrepancy ladders
    Equidist(EquidistArgs),
    /// Gowers norm of a sequence on Z_N, computed two ways
    Gowers(GowersArgs),
    /// Finite-window van der Corput inequality
    Vdc(VdcArgs),
    /// Metastability window for a rotation on an atomic measure
    Vn(VnArgs),
    /// Uniform Wiener–Wintner sup over a character net on a skew product
    Ww(WwArgs),
    /// Density of the set of lags with small correlations
    Bfko(BfkoArgs),
    /// Check a JSON output document against its schema
    Validate(ValidateArgs),
    /// Run a subcommand described by a JSON config file
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

/// {"command": "gowers", "args": {"n": 64}, "seed": 7, ...}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default = "one")]
    schema_version: u32,
    command: String,
    #[serde(default)]
    args: BTreeMap<String, Value>,
    seed: Option<u64>,
    threads: Option<usize>,
    format: Option<String>,
    out: Option<PathBuf>,
}

fn one() -> u32 {
    1
}

fn flag_value(key: &str, v: &Value) -> Result<Option<String>> {
    Ok(match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => bail!("config arg {key:?} must be a string, number or boolean"),
    })
}

fn config_argv(path: &PathBuf) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if cfg.schema_version != output::SCHEMA_VERSION {
        bail!("config schema_version {} is not {}", cfg.schema_version, output::SCHEMA_VERSION);
    }
    if cfg.command == "run" {
        bail!("a config file cannot run another config file");
    }
    let mut argv = vec!["nilorbit".to_string(), cfg.command.clone()];
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            argv.push(format!("--{k}"));
            argv.push(v);
        }
    };
    push("seed", cfg.seed.map(|s| s.to_string()));
    push("threads", cfg.threads.map(|t| t.to_string()));
    push("format", cfg.format);
    push("out", cfg.out.map(|p| p.display().to_string()));
    for (k, v) in &cfg.args {
        match v {
            Value::Bool(true) => argv.push(format!("--{k}")),
            Value::Bool(false) => {}
            _ if k == "file" => argv.extend(flag_value(k, v)?),
            _ => {
                if let Some(x) = flag_value(k, v)? {
                    argv.push(format!("--{k}"));
                    argv.push(x);
                }
            }
        }
    }
    Ok(argv)
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("NILORBIT_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(s.trim().parse().context("NILORBIT_THREADS must be a positive integer")?),
            _ => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be positive");
        }
        // a second initialisation (run --config) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let s = cli.seed;
    match &cli.command {
        Command::Complexity(a) => complexity(a, s),
        Command::Orbit(a) => orbit(a, s),
        Command::Equidist(a) => equidist(a, s),
        Command::Gowers(a) => gowers(a, s),
        Command::Vdc(a) => vdc(a, s),
        Command::Vn(a) => vn(a, s),
        Command::Ww(a) => ww(a, s),
        Command::Bfko(a) => bfko(a, s),
        Command::Validate(a) => validate(a, s),
        Command::Run { .. } => unreachable!(),
    }
}

fn emit(cli: &Cli, o: &Outcome) -> Result<()> {
    let text = match cli.format {
        Format::Json => o.json.clone(),
        Format::Csv => output::to_csv(&o.value, o.table)?,
    };
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// 0 on success, 2 when a computed check is inconsistent, 1 on usage errors.
fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    if let Command::Run { config } = &cli.command {
        return match config_argv(config) {
            Ok(argv) => run(argv),
            Err(e) => {
                eprintln!("error: {e:#}");
                1
            }
        };
    }
    let res = init_threads(cli.threads).and_then(|_| execute(&cli)).and_then(|o| emit(&cli, &o).map(|_| o));
    match res {
        Ok(o) if o.inconsistent => 2,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().collect()))
}
