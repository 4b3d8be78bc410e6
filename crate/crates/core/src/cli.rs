//! Command-line front end: `run`, `verify-chain`, `inspect-block`, `metrics`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or usage
//! error. `DELIB_SEED` and `DELIB_OUT_DIR` override the scenario's seed and
//! output directory; command-line flags override both.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::domain::fraction_to_f64;
use crate::ledger::{Block, Chain, LedgerError};
use crate::metrics::{read_csv, summarize, MetricsRow};
use crate::scenario::{run_scenario, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const ENV_SEED: &str = "DELIB_SEED";
pub const ENV_OUT_DIR: &str = "DELIB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "delib",
    version,
    about = "Deliberative-consensus ledger simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario sweep and write metrics, chains and transcripts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay verification of a chain file from genesis.
    VerifyChain { file: PathBuf },
    /// Print one block of a chain file as JSON.
    InspectBlock { file: PathBuf, height: u64 },
    /// Summarize the metrics tables under a directory.
    Metrics { dir: PathBuf },
}

/// Output of a command: text for stdout or stderr and an exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Environment overrides, read once by the caller.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn from_env() -> Self {
        Overrides {
            seed: std::env::var(ENV_SEED).ok(),
            out_dir: std::env::var_os(ENV_OUT_DIR).map(PathBuf::from),
        }
    }
}

/// Parses `args` and runs the command. Never exits the process.
pub fn run<I, T>(args: I, env: &Overrides) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            return Outcome {
                code,
                stdout: if code == EXIT_OK {
                    e.to_string()
                } else {
                    String::new()
                },
                stderr: if code == EXIT_OK {
                    String::new()
                } else {
                    e.to_string()
                },
            };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
        } => run_cmd(&scenario, seed, out, env),
        Command::VerifyChain { file } => verify_chain_cmd(&file),
        Command::InspectBlock { file, height } => inspect_block_cmd(&file, height),
        Command::Metrics { dir } => metrics_cmd(&dir),
    }
}

fn run_cmd(path: &Path, seed: Option<u64>, out: Option<PathBuf>, env: &Overrides) -> Outcome {
    let mut scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_CONFIG, format!("{}: {e}\n", path.display())),
    };
    if let Some(s) = &env.seed {
        match s.trim().parse() {
            Ok(v) => scenario.seed = v,
            Err(_) => {
                return Outcome::fail(
                    EXIT_CONFIG,
                    format!("{ENV_SEED}={s:?} is not an unsigned integer\n"),
                )
            }
        }
    }
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let out_dir = out
        .or_else(|| env.out_dir.clone())
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let report = match run_scenario(&scenario, &out_dir) {
        Ok(r) => r,
        Err(e) if e.is_config_error() => return Outcome::fail(EXIT_CONFIG, format!("{e}\n")),
        Err(e) => return Outcome::fail(EXIT_VERIFICATION, format!("run failed: {e}\n")),
    };
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} deliberations in {} cells, seed {}",
        report.rows.len(),
        report.chain_paths.len(),
        scenario.seed
    );
    text.push_str(&summary_table(&report.rows));
    let _ = writeln!(text, "metrics: {}", report.metrics_path.display());
    for p in &report.chain_paths {
        let _ = writeln!(text, "chain:   {}", p.display());
    }
    if report.all_verified() {
        Outcome::ok(text)
    } else {
        let mut err = String::new();
        for (p, reason) in &report.failures {
            let _ = writeln!(err, "{}: {reason}", p.display());
        }
        Outcome {
            code: EXIT_VERIFICATION,
            stdout: text,
            stderr: err,
        }
    }
}

fn outcome_label(block: &Block) -> String {
    match block.header.outcome {
        crate::domain::RecordOutcome::Success => "success".into(),
        crate::domain::RecordOutcome::Hung(r) => {
            format!("hung ({})", format!("{r:?}").to_lowercase())
        }
    }
}

/// Replays the chain file and reports its height and block outcomes, or the
/// first failing block.
pub fn verify_chain_cmd(path: &Path) -> Outcome {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return Outcome::fail(EXIT_CONFIG, format!("{}: {e}\n", path.display())),
    };
    match Chain::from_bytes(&bytes) {
        Ok(chain) => {
            let mut text = format!("valid, height {}\n", chain.height());
            for b in chain.blocks() {
                let _ = writeln!(
                    text,
                    "  {:>4}  {}  {}",
                    b.height(),
                    b.hash().to_hex(),
                    outcome_label(b)
                );
            }
            Outcome::ok(text)
        }
        Err(LedgerError::VerificationFailed { height, reason }) => Outcome::fail(
            EXIT_VERIFICATION,
            format!("invalid at height {height}: {reason}\n"),
        ),
        Err(e) => Outcome::fail(EXIT_VERIFICATION, format!("invalid: {e}\n")),
    }
}

/// JSON view of a block: header, record and transcript.
pub fn block_json(block: &Block) -> Value {
    let h = &block.header;
    let transcript: Vec<Value> = block
        .transcript()
        .iter()
        .map(|u| {
            json!({
                "round": u.round,
                "turn": u.turn,
                "agent": u.agent,
                "digest": u.digest,
                "action": u.action,
                "body": u.body,
                "public_key": hex::encode(u.public_key),
                "signature": hex::encode(u.signature),
            })
        })
        .collect();
    let r = block.record();
    json!({
        "header": {
            "height": h.height,
            "prev_hash": h.prev_hash,
            "hash": block.hash(),
            "timestamp": h.timestamp,
            "body_digest": h.body_digest,
            "outcome": h.outcome,
        },
        "size_bytes": block.encoded_len(),
        "record": r,
        "confidence": fraction_to_f64(r.confidence()),
        "participation": fraction_to_f64(r.participation()),
        "transcript": transcript,
    })
}

pub fn inspect_block_cmd(path: &Path, height: u64) -> Outcome {
    let chain = match Chain::load(path) {
        Ok(c) => c,
        Err(LedgerError::Io(e)) => {
            return Outcome::fail(EXIT_CONFIG, format!("{}: {e}\n", path.display()))
        }
        Err(e) => return Outcome::fail(EXIT_VERIFICATION, format!("{e}\n")),
    };
    match chain.get(height) {
        Some(b) => Outcome::ok(format!(
            "{}\n",
            serde_json::to_string_pretty(&block_json(b)).expect("json")
        )),
        None => Outcome::fail(
            EXIT_CONFIG,
            format!(
                "no block at height {height}; chain height is {}\n",
                chain.height()
            ),
        ),
    }
}

fn summary_table(rows: &[MetricsRow]) -> String {
    let mut text = format!(
        "{:>6} {:>5} {:>6} {:>8} {:>10} {:>9} {:>11} {:>8} {:>9}\n",
        "agents", "turns", "runs", "success", "trc", "pgt", "block_bytes", "particip", "accuracy"
    );
    for c in summarize(rows) {
        let _ = writeln!(
            text,
            "{:>6} {:>5} {:>6} {:>8} {:>10.1} {:>9.1} {:>11.0} {:>8.3} {:>9}",
            c.agents,
            c.turns,
            c.deliberations,
            c.successes,
            c.mean_trc_ticks,
            c.mean_prompt_generation_ticks,
            c.mean_block_bytes,
            c.mean_participation,
            c.mean_final_accuracy
                .map_or("-".into(), |a| format!("{a:.3}")),
        );
    }
    text
}

/// Summarizes every `*.csv` metrics table directly under `dir`.
pub fn metrics_cmd(dir: &Path) -> Outcome {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => return Outcome::fail(EXIT_CONFIG, format!("{}: {e}\n", dir.display())),
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Outcome::fail(
            EXIT_CONFIG,
            format!("no metrics tables in {}\n", dir.display()),
        );
    }
    let mut text = String::new();
    for f in files {
        let rows = match std::fs::File::open(&f)
            .map_err(csv::Error::from)
            .and_then(read_csv)
        {
            Ok(r) => r,
            Err(e) => return Outcome::fail(EXIT_CONFIG, format!("{}: {e}\n", f.display())),
        };
        let _ = writeln!(text, "{} ({} rows)", f.display(), rows.len());
        text.push_str(&summary_table(&rows));
    }
    Outcome::ok(text)
}
