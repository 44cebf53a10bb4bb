//! `spt`: command-line driver for the SPT index, parent Hamiltonian, ED and
//! spectral-flow pipelines. Exit codes: 0 ok, 2 symmetry absent, 3 numerical,
//! 4 validation, 5 size cap.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spt_core::io::{parse_group, parse_mps, to_canonical_json};
use spt_core::MpsTensor;

use crate::config::{FlowFile, SweepFile};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "spt", version, about = "SPT indices and gapped-path diagnostics for spin chains")]
struct Cli {
    /// Numerical tolerance passed to the core routines.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-reversal index ζ of an MPS tensor file.
    IndexTr { tensor: PathBuf },
    /// Projective representation and cocycle of an on-site group symmetry.
    IndexGroup { tensor: PathBuf, group: PathBuf },
    /// Primitivity length of the tensor.
    Primitivity {
        tensor: PathBuf,
        #[arg(long)]
        l_max: Option<usize>,
    },
    /// Parent interaction on m sites, emitted as an interaction file.
    ParentHam {
        tensor: PathBuf,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Low-spectrum sweep along a linear path of interactions; CSV plus summary.
    GapSweep { config: PathBuf },
    /// Half-chain Schmidt spectrum and Kramers check.
    Entanglement {
        tensor: Option<PathBuf>,
        /// Check a random ζ = −1 ensemble of this many members instead.
        #[arg(long, conflicts_with = "tensor")]
        ensemble: Option<usize>,
        #[arg(long, default_value_t = 4)]
        bond_dim: usize,
    },
    /// Spectral-flow tracking, boundary generator and factorization check.
    Flow { config: PathBuf },
    /// Print a reference input: aklt, trivial, random, z2z2,
    /// aklt-interaction or trivial-interaction.
    Builtin { name: String },
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_tensor(path: &Path) -> Result<MpsTensor, CliError> {
    Ok(parse_mps(&read_file(path)?)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_file(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    Ok(to_canonical_json(value)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, with_newline(text))
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(with_newline(text).as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn with_newline(text: &str) -> String {
    if text.ends_with('\n') {
        text.to_owned()
    } else {
        format!("{text}\n")
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::IndexTr { tensor } => emit(out, &json(&commands::index_tr(&read_tensor(&tensor)?, cli.tol)?)?),
        Command::IndexGroup { tensor, group } => {
            let v = read_tensor(&tensor)?;
            let (g, rep) = parse_group(&read_file(&group)?)?;
            emit(out, &json(&commands::index_group(&v, &g, &rep, cli.tol)?)?)
        }
        Command::Primitivity { tensor, l_max } => {
            emit(out, &json(&commands::primitivity(&read_tensor(&tensor)?, l_max, cli.tol)?)?)
        }
        Command::ParentHam { tensor, m } => {
            emit(out, &json(&commands::parent_ham(&read_tensor(&tensor)?, m, cli.tol)?)?)
        }
        Command::GapSweep { config } => {
            let file: SweepFile = read_json(&config)?;
            let (csv, summary) = commands::gap_sweep_cmd(&file, base_dir(&config), cli.seed)?;
            let summary = json(&summary)?;
            match out {
                Some(_) => {
                    emit(out, &csv)?;
                    emit(None, &summary)
                }
                None => {
                    emit(None, &csv)?;
                    eprintln!("{summary}");
                    Ok(())
                }
            }
        }
        Command::Entanglement { tensor, ensemble, bond_dim } => match (tensor, ensemble) {
            (_, Some(count)) => {
                let report = commands::kramers_ensemble_cmd(count, bond_dim, cli.seed, cli.tol)?;
                emit(out, &json(&report)?)
            }
            (Some(tensor), None) => emit(out, &json(&commands::entanglement(&read_tensor(&tensor)?, cli.tol)?)?),
            (None, None) => Err(CliError::Config("entanglement needs a tensor file or --ensemble".into())),
        },
        Command::Flow { config } => {
            let file: FlowFile = read_json(&config)?;
            emit(out, &json(&commands::flow_cmd(&file, base_dir(&config))?)?)
        }
        Command::Builtin { name } => emit(out, &commands::builtin(&name, cli.seed)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
