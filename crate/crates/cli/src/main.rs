//! `sixvertex`: verification suites, spectra, maximal-state counts, the Wronskian solver and the
//! N = 3 closed forms from the command line.
//!
//! Exit codes: 0 all checks pass, 1 a check failed (or the computation errored),
//! 2 usage error, 3 refused for exceeding the resource budget.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{CmdError, CmdResult};
use config::{read_config_file, RunConfig};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "sixvertex", version, about = "Six-vertex fusion hierarchy and Q operators at roots of unity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Operator and eigenvalue identities over an (M, N) grid.
    Verify {
        /// Negative control: add a TQ check with a deliberately corrupted Q operator.
        #[arg(long, hide = true)]
        inject_corrupt_operator: bool,
    },
    /// Full spectral records per S^z sector.
    Spectrum,
    /// Maximal-state counts in the S^z = 1/2 sector for odd N and odd M.
    Table1,
    /// Solve the Wronskian sum rules and cross-check against diagonalization.
    Wronskian,
    /// N = 3 closed forms of the maximal singlet and groundstate checks.
    Stroganov,
    /// Remove invalid or stale cache entries.
    CacheGc {
        /// Remove every entry, valid or not.
        #[arg(long)]
        all: bool,
    },
}

/// Every flag except --config and --human can also be given as a key in the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Chain lengths: a list or inclusive range such as `3,5,7` or `2..8`.
    #[arg(long = "M", global = true)]
    sites: Option<String>,
    /// Root-of-unity orders, same syntax as --M.
    #[arg(long = "N", global = true)]
    orders: Option<String>,
    /// q = exp(2πi m/N) with m = root index.
    #[arg(long, global = true)]
    root_index: Option<String>,
    /// S^z values such as `1/2,-1/2`, or `all`.
    #[arg(long, global = true)]
    sector: Option<String>,
    #[arg(long, global = true)]
    tol_root: Option<String>,
    #[arg(long, global = true)]
    tol_residual: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Write the structured report here; stdout then shows the human view.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    cache_dir: Option<String>,
    /// Refuse jobs whose densest S^z sector exceeds this dimension.
    #[arg(long, global = true)]
    max_sector_dim: Option<String>,
    /// verify only: one identity family, or `eigen` for the eigenvalue-level relations.
    #[arg(long, global = true)]
    identity: Option<String>,
    /// verify only: random argument tuples per cell.
    #[arg(long, global = true)]
    tuples: Option<String>,
    /// Print the aligned table view instead of the structured report.
    #[arg(long, global = true)]
    human: bool,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("M", &self.sites),
            ("N", &self.orders),
            ("root-index", &self.root_index),
            ("sector", &self.sector),
            ("tol-root", &self.tol_root),
            ("tol-residual", &self.tol_residual),
            ("seed", &self.seed),
            ("out", &self.out),
            ("cache-dir", &self.cache_dir),
            ("max-sector-dim", &self.max_sector_dim),
            ("identity", &self.identity),
            ("tuples", &self.tuples),
        ]
    }
}

fn defaults(command: &Command) -> BTreeMap<&'static str, &'static str> {
    let pairs: &[(&str, &str)] = match command {
        Command::Verify { .. } => &[("M", "2..8"), ("N", "3,4,5,6,8")],
        Command::Table1 => &[("M", "3,5,7"), ("N", "3,5,7")],
        Command::Wronskian => &[("M", "3,5,7"), ("N", "6,10"), ("sector", "1/2")],
        Command::Stroganov => &[("M", "3,5,7,9"), ("N", "3")],
        Command::Spectrum | Command::CacheGc { .. } => &[],
    };
    pairs.iter().copied().collect()
}

fn run(cli: &Cli) -> Result<(commands::CmdResult, Option<PathBuf>), CmdError> {
    let mut merged = match &cli.flags.config {
        Some(p) => read_config_file(p).map_err(CmdError::Usage)?,
        None => BTreeMap::new(),
    };
    for (k, v) in cli.flags.overrides() {
        if let Some(v) = v {
            merged.insert(k.to_string(), v.clone());
        }
    }
    if let Command::CacheGc { all } = cli.command {
        let dir = merged.get("cache-dir").map(PathBuf::from);
        let out = merged.get("out").map(PathBuf::from);
        return Ok((commands::cache_gc(dir.as_deref(), all), out));
    }
    let cfg = RunConfig::resolve(&merged, &defaults(&cli.command)).map_err(CmdError::Usage)?;
    let out = cfg.out.clone();
    let result: CmdResult = match cli.command {
        Command::Verify { inject_corrupt_operator } => commands::verify(&cfg, inject_corrupt_operator),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Table1 => commands::table1(&cfg),
        Command::Wronskian => commands::wronskian(&cfg),
        Command::Stroganov => commands::stroganov(&cfg),
        Command::CacheGc { .. } => unreachable!("handled above"),
    };
    Ok((result, out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = run(&cli).and_then(|(r, out)| r.map(|rep| (rep, out)));
    match outcome {
        Ok((report, out)) => {
            let text = report.render();
            if let Some(path) = &out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(1);
                }
                print!("{}", report.render_human());
            } else if cli.flags.human {
                print!("{}", report.render_human());
            } else {
                print!("{text}");
            }
            ExitCode::from(if report.passed() { 0 } else { 1 })
        }
        Err(CmdError::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(CmdError::Refused(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(3)
        }
        Err(CmdError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
