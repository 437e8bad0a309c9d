//! Command-line front-end: inference, sequence generation, evaluation,
//! parameter sweeps, and a history-length advisor.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 inference failure.  Every failure prints one line to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cssr_core::alphabet::{ingest, render};
use cssr_core::engine::EngineError;
use cssr_core::process::named;
use cssr_core::sweep::{to_csv, SweepError};
use cssr_core::{
    infer, run_sweep, suggest_lmax, Alphabet, CausalStateMachine, Corpus, InferenceConfig,
    IngestMode, ProcessSpec, SweepConfig, TestKind, WordDistribution,
};

#[derive(Parser)]
#[command(
    name = "cssr",
    version,
    about = "Reconstruct causal-state machines from symbol sequences",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Infer a causal-state machine from a symbol sequence file
    Infer(InferArgs),
    /// Sample a symbol sequence from a reference process
    Generate(GenerateArgs),
    /// Compare an inferred machine against a reference process
    Eval(EvalArgs),
    /// Run inference over a grid of data sizes and history lengths
    Sweep(SweepArgs),
    /// Print a history length suited to a data budget
    SuggestLmax(SuggestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    /// Kolmogorov-Smirnov two-sample test
    Ks,
    /// Chi-squared two-sample test
    Chisq,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> TestKind {
        match t {
            TestArg::Ks => TestKind::Ks,
            TestArg::Chisq => TestKind::ChiSquared,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// The whole file is one sequence; newlines are ignored
    Whole,
    /// Each non-empty line is a separate sequence
    Lines,
}

#[derive(Args)]
struct InferArgs {
    /// Input sequence file
    #[arg(long)]
    data: PathBuf,
    /// Alphabet: one character per symbol, or comma-separated tokens
    #[arg(long)]
    alphabet: String,
    /// Longest history length examined
    #[arg(long)]
    lmax: usize,
    /// Size of the split test
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    /// Two-sample test used to compare predictive distributions
    #[arg(long, value_enum, default_value_t = TestArg::Ks)]
    test: TestArg,
    /// Histories with fewer observed continuations are never tested
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// How the input file is segmented into sequences
    #[arg(long, value_enum, default_value_t = ModeArg::Whole)]
    mode: ModeArg,
    /// Output machine file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Also write the machine in Graphviz DOT form
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Process name (even, seven-default) or a process JSON file
    #[arg(long)]
    spec: String,
    /// Number of symbols to sample
    #[arg(long)]
    n: usize,
    /// Random seed
    #[arg(long)]
    seed: u64,
    /// Output sequence file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Process name (even, seven-default) or a process JSON file
    #[arg(long)]
    spec: String,
    /// Machine file produced by `infer`
    #[arg(long)]
    machine: PathBuf,
    /// Word length for the distribution comparison
    #[arg(long, default_value_t = 10)]
    word_length: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Process name (even, seven-default) or a process JSON file
    #[arg(long)]
    spec: String,
    /// Comma-separated data sizes, e.g. 1000,10000
    #[arg(long)]
    n: String,
    /// Comma-separated history lengths, e.g. 2,4
    #[arg(long)]
    lmax: String,
    /// Trials per grid cell
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Size of the split test
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    /// Word length for the error measure
    #[arg(long, default_value_t = 10)]
    word_length: usize,
    /// Base seed; trial seeds derive from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses one per CPU
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output CSV file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SuggestArgs {
    /// Data size in symbols
    #[arg(long)]
    n: usize,
    /// Alphabet size
    #[arg(long)]
    k: usize,
    /// Entropy rate in bits per symbol; defaults to log2(k)
    #[arg(long)]
    entropy: Option<f64>,
}

enum CliError {
    Usage(String),
    Data(String),
    Inference(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Inference(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Inference(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("error: bad arguments");
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::SuggestLmax(a) => {
            println!("{}", suggest_lmax(a.n, a.k, a.entropy));
            Ok(())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// A process argument is a known name or a path to a process JSON file.
fn load_spec(arg: &str) -> Result<ProcessSpec, CliError> {
    if let Some(spec) = named(arg) {
        return Ok(spec);
    }
    let text = fs::read_to_string(arg).map_err(|e| {
        CliError::Data(format!("spec {arg}: {e} (known names: even, seven-default)"))
    })?;
    ProcessSpec::from_json(&text).map_err(|e| CliError::Data(format!("spec {arg}: {e}")))
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        EngineError::DegenerateAlphabet | EngineError::InsufficientData(_) => {
            CliError::Data(e.to_string())
        }
        other => CliError::Inference(other.to_string()),
    }
}

fn cmd_infer(a: InferArgs) -> Result<(), CliError> {
    let alphabet = Alphabet::parse(&a.alphabet).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut config = InferenceConfig::new(a.lmax);
    config.alpha = a.alpha;
    config.test = a.test.into();
    config.min_count = a.min_count;
    config.validate().map_err(engine_error)?;

    let text = read_file(&a.data)?;
    let mode = match a.mode {
        ModeArg::Whole => IngestMode::WholeFile,
        ModeArg::Lines => IngestMode::PerLine,
    };
    let corpus = ingest(&text, &alphabet, mode).map_err(|e| CliError::Data(e.to_string()))?;

    let machine = infer(&corpus, &alphabet, &config).map_err(engine_error)?;
    for w in &machine.meta.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&a.out, &machine.to_json())?;
    if let Some(dot) = &a.dot {
        write_file(dot, &machine.to_dot())?;
    }
    println!("n_states={}", machine.n_states());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let spec = load_spec(&a.spec)?;
    let seq = spec.generate(a.n, a.seed);
    let text = render(&Corpus::single(seq.0), &spec.alphabet);
    write_file(&a.out, &text)
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let spec = load_spec(&a.spec)?;
    let text = read_file(&a.machine)?;
    let machine =
        CausalStateMachine::from_json(&text).map_err(|e| CliError::Data(e.to_string()))?;
    if machine.alphabet != spec.alphabet {
        return Err(CliError::Data(format!(
            "machine alphabet [{}] does not match process alphabet [{}]",
            machine.alphabet, spec.alphabet
        )));
    }
    let truth = WordDistribution::from_spec(&spec, a.word_length)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let inferred = WordDistribution::from_machine(&machine, a.word_length)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let tv = inferred.tv(&truth).map_err(|e| CliError::Data(e.to_string()))?;
    println!("n_states={} tv_error={:.6}", machine.n_states(), tv);
    Ok(())
}

fn parse_list(arg: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in arg.split(',') {
        let v: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--{flag}: {part:?} is not a positive integer")))?;
        out.push(v);
    }
    Ok(out)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let spec = load_spec(&a.spec)?;
    let mut config = SweepConfig::new(spec);
    config.ns = parse_list(&a.n, "n")?;
    config.lmaxes = parse_list(&a.lmax, "lmax")?;
    config.trials = a.trials;
    config.alpha = a.alpha;
    config.word_len = a.word_length;
    config.base_seed = a.seed;
    config.jobs = a.jobs;
    let records = run_sweep(&config).map_err(|e| match e {
        SweepError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    write_file(&a.out, &to_csv(&records))?;
    println!("rows={}", records.len());
    Ok(())
}
