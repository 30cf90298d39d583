//! Command-line front end: `qhuff analyze|storage|comm|scale`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::comm::{comm_run, run_schedule, CommSession, Schedule};
use crate::error::{Error, Result};
use crate::huffman::kraft_sum;
use crate::qmath::{Ensemble, Signal, C64};
use crate::report::{render_json, render_text, to_value};
use crate::scale::{comm_row, fit_log_power, fit_power, storage_row, ScaleRow};
use crate::source::Source;
use crate::storage::{default_delta, storage_run, FidelityMode, DEFAULT_MAX_BRANCHES};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const MAX_BRANCHES_VAR: &str = "QHUFF_MAX_BRANCHES";

#[derive(Debug, Parser)]
#[command(name = "qhuff", version, about = "Variable-length quantum source coding simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum, code and entropy of an ensemble.
    Analyze {
        #[arg(long)]
        ensemble: PathBuf,
    },
    /// Block storage: encode, truncate, decode.
    Storage(StorageArgs),
    /// Streamed transmission with optional early stop.
    Comm(CommArgs),
    /// Circuit cost sweep over block sizes (no simulation).
    Scale(ScaleArgs),
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Enumerate every input sequence (default).
    #[arg(long, conflicts_with = "trials")]
    pub exact: bool,
    /// Sample this many input sequences instead.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Sampling {
    fn mode(&self) -> FidelityMode {
        match self.trials {
            Some(trials) => FidelityMode::Sampled { trials, seed: self.seed },
            None => FidelityMode::Exact,
        }
    }
}

#[derive(Debug, Args)]
pub struct StorageArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Qubits of slack per signal; defaults to three standard deviations.
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub sampling: Sampling,
}

#[derive(Debug, Args)]
pub struct CommArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Keep only the first M signals.
    #[arg(long)]
    pub truncate_at: Option<usize>,
    /// Signals encoded before the stop request (default: all).
    #[arg(long)]
    pub truncate_after: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub flush_every: usize,
    /// Send up to r(L̄ - EPS) tape qubits per flush, beyond the safe prefix.
    #[arg(long)]
    pub early_send: Option<f64>,
    /// Write the protocol trace of a construction-only run here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleMode {
    Storage,
    Comm,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ScaleMode,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleFile {
    dim: usize,
    signals: Vec<SignalFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalFile {
    prob: f64,
    amplitudes: Vec<[f64; 2]>,
}

pub fn parse_ensemble(text: &str) -> Result<Ensemble> {
    let f: EnsembleFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let signals = f
        .signals
        .into_iter()
        .map(|s| Signal {
            prob: s.prob,
            amplitudes: s.amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        })
        .collect();
    Ensemble::new(f.dim, signals)
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_ensemble(&text)
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResourceLimit { .. } => EXIT_RESOURCE,
            _ => EXIT_USAGE,
        };
        CliError { code, message: e.to_string() }
    }
}

fn max_branches() -> Result<u128> {
    match std::env::var(MAX_BRANCHES_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{MAX_BRANCHES_VAR} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_BRANCHES),
    }
}

fn code_summary(src: &Source) -> Value {
    let code = src.code();
    json!({
        "codewords": code.codewords().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "avg_len": code.avg_len(),
        "l_max": code.l_max(),
        "l_min": code.l_min(),
        "len_reg_width": code.len_reg_width(),
    })
}

/// Runs one command and returns the rendered report.
pub fn run(cli: &Cli) -> std::result::Result<String, CliError> {
    let report = match &cli.command {
        Command::Analyze { ensemble } => analyze(ensemble)?,
        Command::Storage(a) => storage(a)?,
        Command::Comm(a) => comm(a)?,
        Command::Scale(a) => scale(a)?,
    };
    Ok(match cli.format {
        Format::Json => render_json(&report),
        Format::Text => render_text(&report),
    })
}

fn analyze(path: &Path) -> Result<Value> {
    let src = Source::new(load_ensemble(path)?)?;
    let entropy = src.entropy();
    Ok(json!({
        "command": {"name": "analyze", "ensemble": path.display().to_string()},
        "dim": src.ensemble().dim(),
        "signals": src.ensemble().len(),
        "spectrum": src.spectrum().eigenvalues.clone(),
        "code": code_summary(&src),
        "entropy": entropy,
        "schumacher_baseline_per_signal": entropy,
        "redundancy": src.code().avg_len() - entropy,
        "kraft_sum": kraft_sum(src.code()),
        "length_variance": src.length_variance(),
    }))
}

fn storage(a: &StorageArgs) -> Result<Value> {
    let src = Source::new(load_ensemble(&a.ensemble)?)?;
    let delta = a.delta.unwrap_or_else(|| default_delta(&src, a.n.max(1)));
    let r = storage_run(&src, a.n, delta, a.sampling.mode(), max_branches()?)?;
    Ok(json!({
        "command": {
            "name": "storage",
            "ensemble": a.ensemble.display().to_string(),
            "n": a.n,
            "delta": delta,
            "mode": mode_name(a.sampling.mode()),
            "seed": a.sampling.seed,
        },
        "code": code_summary(&src),
        "entropy": src.entropy(),
        "storage": to_value(&r)?,
    }))
}

fn comm(a: &CommArgs) -> Result<Value> {
    let src = Source::new(load_ensemble(&a.ensemble)?)?;
    let delta = a.delta.unwrap_or_else(|| default_delta(&src, a.n.max(1)));
    let sched = Schedule {
        flush_every: a.flush_every,
        truncate_at: a.truncate_at,
        truncate_after: a.truncate_after,
        early_send: a.early_send,
    };
    let r = comm_run(&src, a.n, delta, &sched, a.sampling.mode(), max_branches()?)?;
    if let Some(path) = &a.trace {
        let mut dry = CommSession::construction_only(&src, a.n, delta)?;
        run_schedule(&mut dry, &sched)?;
        std::fs::write(path, dry.trace_text()).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    Ok(json!({
        "command": {
            "name": "comm",
            "ensemble": a.ensemble.display().to_string(),
            "n": a.n,
            "delta": delta,
            "truncate_at": a.truncate_at,
            "truncate_after": a.truncate_after,
            "flush_every": a.flush_every,
            "early_send": a.early_send,
            "mode": mode_name(a.sampling.mode()),
            "seed": a.sampling.seed,
        },
        "code": code_summary(&src),
        "entropy": src.entropy(),
        "comm": to_value(&r)?,
    }))
}

fn scale(a: &ScaleArgs) -> Result<Value> {
    let src = Source::new(load_ensemble(&a.ensemble)?)?;
    let rows: Vec<ScaleRow> = a
        .n_list
        .iter()
        .map(|&n| match a.mode {
            ScaleMode::Storage => storage_row(&src, n),
            ScaleMode::Comm => comm_row(&src, n),
        })
        .collect::<Result<_>>()?;
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let col = |f: fn(&ScaleRow) -> usize| rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
    let fits = json!({
        "idealized_depth_vs_log_n": fit_log_power(&ns, &col(|r| r.idealized_depth)),
        "strict_depth_vs_log_n": fit_log_power(&ns, &col(|r| r.strict_depth)),
        "gate_count_vs_n": fit_power(&ns, &col(|r| r.gate_count)),
        "sequential_gates_vs_n": fit_power(&ns, &col(|r| r.sequential_gates)),
    });
    Ok(json!({
        "command": {
            "name": "scale",
            "ensemble": a.ensemble.display().to_string(),
            "mode": match a.mode { ScaleMode::Storage => "storage", ScaleMode::Comm => "comm" },
            "n_list": a.n_list,
        },
        "code": code_summary(&src),
        "rows": to_value(&rows)?,
        "fits": fits,
    }))
}

fn mode_name(m: FidelityMode) -> &'static str {
    match m {
        FidelityMode::Exact => "exact",
        FidelityMode::Sampled { .. } => "sampled",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ensemble_file() {
        let e = parse_ensemble(r#"{"dim": 2, "signals": [{"prob": 1.0, "amplitudes": [[0, 1], [0, 0]]}]}"#).unwrap();
        assert_eq!(e.signal(0).amplitudes[0], C64::new(0.0, 1.0));
        assert!(parse_ensemble(r#"{"dim": 2, "signals": [{"prob": 1.2, "amplitudes": [[1, 0], [0, 0]]}]}"#).is_err());
        assert!(parse_ensemble(r#"{"dim": 2}"#).is_err());
        assert!(parse_ensemble(r#"{"dim": 2, "signals": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let e: CliError = Error::ResourceLimit { needed: 2, limit: 1, hint: String::new() }.into();
        assert_eq!(e.code, EXIT_RESOURCE);
        let e: CliError = Error::Parse("x".into()).into();
        assert_eq!(e.code, EXIT_USAGE);
    }
}
