use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use possible_worlds::io::Format;
use possible_worlds::report::Method;

mod commands;
mod error;
mod manifest;

use error::CliError;

/// Judgment aggregation with the possible worlds model and its comparison
/// methods. Set PWM_LOG (e.g. `PWM_LOG=debug`) for log output.
#[derive(Parser, Debug)]
#[command(name = "pwm", version)]
struct Cli {
    /// Worker threads for chains and question blocks (default: all cores).
    /// With 1 thread every output is bit-for-bit reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic study from the generative model.
    Simulate(SimulateArgs),
    /// Reverse question polarity or lesion predictions.
    Transform(TransformArgs),
    /// Run one aggregation method and write its report.
    Infer(InferArgs),
    /// Score reports against the dataset's answer key.
    Evaluate(EvaluateArgs),
    /// Convergence tables for a report and the agreement eigenvalue check.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Dataset file (canonical JSON) or directory (CSV triple).
    #[arg(long, short = 'd')]
    dataset: PathBuf,
    #[arg(long, default_value = "canonical-json", value_parser = parse_format)]
    format: Format,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, short = 'q')]
    questions: usize,
    #[arg(long, short = 'n')]
    respondents: usize,
    #[arg(long)]
    seed: u64,
    /// Also elicit confidences.
    #[arg(long)]
    confidences: bool,
    /// Draw per-respondent expertise from U(0, 1) instead of 0.
    #[arg(long)]
    expertise: bool,
    /// Respondents account for their own expertise when forming beliefs.
    #[arg(long)]
    expertise_aware: bool,
    /// Output file (canonical JSON) or directory (CSV triple). The ground
    /// truth goes next to it as `<stem>.truth.json`.
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long, default_value = "canonical-json", value_parser = parse_format)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReverseWhich {
    FirstHalf,
    SecondHalf,
    All,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long, value_enum)]
    reverse: Option<ReverseWhich>,
    #[arg(long)]
    lesion_predictions: bool,
    #[arg(long, value_parser = parse_format)]
    out_format: Option<Format>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    input: InputArgs,
    /// pwm-single, pwm-multi, majority, sp, pool-linear, pool-log, bcc or ch.
    #[arg(long, short = 'm', value_parser = parse_method)]
    method: Method,
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Required for the stochastic methods.
    #[arg(long)]
    seed: Option<u64>,
    /// Drop every prediction before inference.
    #[arg(long)]
    lesion_predictions: bool,
    #[arg(long)]
    chains: Option<usize>,
    /// Steps per chain (pwm-single) or retained iterations (bcc, ch).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    /// pwm-multi: outer loops, of which `--burnin-loops` are discarded.
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long)]
    burnin_loops: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// pwm: include the confidence channel when the data has confidences.
    #[arg(long)]
    use_confidences: bool,
    /// pwm: expertise-aware respondent model.
    #[arg(long)]
    expertise_aware: bool,
    /// pwm: write the raw chains as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Method reports to compare.
    #[arg(long, short = 'r', num_args = 1.., required = true)]
    report: Vec<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    /// Also write the table as JSON.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = possible_worlds::metrics::BOOTSTRAP_ITERATIONS)]
    bootstrap: usize,
    /// Seed of the Brier bootstrap.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Report whose R-hat and Geweke tables to print.
    #[arg(long, short = 'r')]
    report: Option<PathBuf>,
    #[arg(long, short = 'd')]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "canonical-json", value_parser = parse_format)]
    format: Format,
    /// Eigenvalue ratio of the respondent agreement matrix (needs --dataset).
    #[arg(long)]
    eigenratio: bool,
    /// Correct agreement for two-option guessing (2M - 1).
    #[arg(long)]
    guessing_correction: bool,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PWM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version also come through here, with exit code 0.
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Transform(a) => commands::transform(a),
        Command::Infer(a) => commands::infer(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Diagnose(a) => commands::diagnose(a),
    }
}
