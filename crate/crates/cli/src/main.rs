//! `aisbound` runs instance files and writes CSV/JSON artifacts with a run manifest.
//!
//! Exit status: 0 success, 1 verification failure, 2 input error.

mod commands;
mod instance;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;
use instance::{Body, Kind};
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<aisbound::Error> for CliError {
    fn from(e: aisbound::Error) -> Self {
        use aisbound::Error as E;
        CliError::Input(match &e {
            E::MonotoneIndex { k, a, b } => format!("invalid instance: {e}; violated (k, a, b) = ({k}, {a}, {b})"),
            E::SupportCap { .. } => format!("support cap exceeded: {e}"),
            E::Instance(_) | E::CountMismatch { .. } | E::IndexOutOfBounds { .. } => format!("invalid instance: {e}"),
            _ => e.to_string(),
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "aisbound", version, about = "Sum-set entropy inequality, aligned image set and GDoF checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Sampler seed; overrides the seed in the instance file.
    #[arg(long, global = true, env = "AISBOUND_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 lets the pool decide).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Coefficient draws per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Support cap for exact enumeration.
    #[arg(long, global = true)]
    cap: Option<u64>,
    /// Treat a failed sweep point as an input error instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Band table for signals under a level layout.
    Partition { file: PathBuf },
    /// Entropy gap sweep for a sum-set instance.
    Verify { file: PathBuf },
    /// Aligned image set oracle.
    Ais { file: PathBuf },
    /// Vertices of a rational polygon; the built-in region when no file is given.
    Region { file: Option<PathBuf> },
    /// Check a linear certificate; the built-in sum-rate chain when no file is given.
    Certificate { file: Option<PathBuf> },
    /// Numeric check of the key lemma on the reduced MIMO instance.
    Lemma1 { file: PathBuf },
}

fn load(path: &PathBuf, expected: Kind) -> Result<(Vec<u8>, Body), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Input(format!("instance file is not UTF-8: {e}")))?;
    let file = instance::parse(text)?;
    if file.kind != expected {
        return Err(CliError::Input(format!(
            "schema violation: file kind {} does not match subcommand (expected {})",
            file.kind.name(),
            expected.name()
        )));
    }
    Ok((bytes, file.body))
}

fn builtin(kind: Kind) -> (Vec<u8>, Body) {
    let text = match kind {
        Kind::Region => r#"{"schema_version":1,"kind":"region","body":{"region":{"builtin":"mimo-ic"}}}"#,
        _ => r#"{"schema_version":1,"kind":"certificate","body":{"certificate":{"builtin":"sum-rate"}}}"#,
    };
    let body = instance::parse(text).expect("built-in instance parses").body;
    (text.as_bytes().to_vec(), body)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let c = cli.common;
    if c.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(c.threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))?;
    }
    let (kind, (bytes, body)) = match &cli.command {
        Command::Partition { file } => (Kind::PartitionDemo, load(file, Kind::PartitionDemo)?),
        Command::Verify { file } => (Kind::TheoremVerify, load(file, Kind::TheoremVerify)?),
        Command::Ais { file } => (Kind::AisOracle, load(file, Kind::AisOracle)?),
        Command::Region { file: Some(f) } => (Kind::Region, load(f, Kind::Region)?),
        Command::Region { file: None } => (Kind::Region, builtin(Kind::Region)),
        Command::Certificate { file: Some(f) } => (Kind::Certificate, load(f, Kind::Certificate)?),
        Command::Certificate { file: None } => (Kind::Certificate, builtin(Kind::Certificate)),
        Command::Lemma1 { file } => (Kind::Lemma1, load(file, Kind::Lemma1)?),
    };
    let o = Overrides { seed: c.seed, trials: c.trials, cap: c.cap, out: c.out, strict: c.strict };
    let mut m = RunManifest::new(kind.name(), &bytes, rayon::current_num_threads(), c.strict);
    match body {
        Body::Partition(b) => commands::partition(b, &o, &mut m)?,
        Body::Verify(b) => commands::verify(b, &o, &mut m)?,
        Body::Ais(b) => commands::ais(b, &o, &mut m)?,
        Body::Region(b) => commands::region(b, &o, &mut m)?,
        Body::Certificate(b) => commands::certificate(b, &o, &mut m)?,
        Body::Lemma1(b) => commands::lemma1(b, &o, &mut m)?,
    }
    for t in m.tasks.iter().filter(|t| t.status == "failed") {
        eprintln!("failed: {}: {}", t.task, t.detail.as_deref().unwrap_or(""));
    }
    Ok(!m.failed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
