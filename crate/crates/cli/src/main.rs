//! `strokeauth` command-line front end.
//!
//! Exit status: 0 success, 2 usage error, 3 data error, 4 numerical failure.
//! Failures are reported on stderr as a single JSON object.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strokeauth::enrollment::EnrollConfig;
use strokeauth::evaluation::Scenario;
use strokeauth::scoring::{FusionMode, LikelihoodMode};
use strokeauth::strokes::StrokeType;
use strokeauth::{ErrorClass, Exec};

#[derive(Parser)]
#[command(
    name = "strokeauth",
    version,
    about = "Touch-stroke continuous authentication with left-right HMMs"
)]
struct Cli {
    /// Directory for default output paths.
    #[arg(long, global = true, env = "STROKEAUTH_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a template for one user and stroke type.
    Enroll(EnrollArgs),
    /// Score strokes against a template.
    Score(ScoreArgs),
    /// Run a full genuine / impostor experiment.
    Evaluate(EvaluateArgs),
    /// Write a synthetic touch log.
    Synth(SynthArgs),
    /// Pretty-print a template.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Candidate state counts.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,8")]
    states: Vec<usize>,
    /// Candidate mixture counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    mixtures: Vec<usize>,
    /// Configurations need states * mixtures <= median stroke length / divisor.
    #[arg(long, default_value_t = 3)]
    evidence_divisor: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Baum-Welch stops once the relative log-likelihood gain drops below this.
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
    /// Minimum net displacement, in pixels, for a stroke to get a direction.
    #[arg(long, default_value_t = 25.0)]
    direction_threshold: f64,
    /// Log-likelihood used for the likelihood score.
    #[arg(long, default_value = "forward")]
    likelihood: LikelihoodMode,
    /// Disable data-parallel execution.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> Result<EnrollConfig, CliError> {
        let positive = |v: &[usize]| !v.is_empty() && v.iter().all(|&x| x > 0);
        if !positive(&self.states) || !positive(&self.mixtures) {
            return Err(CliError::usage(
                "state and mixture grids need positive entries",
            ));
        }
        if self.evidence_divisor == 0 || self.folds < 2 || self.max_iters == 0 {
            return Err(CliError::usage(
                "evidence divisor and max iterations must be positive, folds at least 2",
            ));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(CliError::usage("rel-tol must be finite and positive"));
        }
        if !(self.direction_threshold.is_finite() && self.direction_threshold >= 0.0) {
            return Err(CliError::usage(
                "direction threshold must be finite and non-negative",
            ));
        }
        Ok(EnrollConfig {
            state_grid: self.states.clone(),
            mixture_grid: self.mixtures.clone(),
            evidence_divisor: self.evidence_divisor,
            folds: self.folds,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            direction_threshold: self.direction_threshold,
            likelihood: self.likelihood,
            exec: if self.sequential {
                Exec::Sequential
            } else {
                Exec::Parallel
            },
        })
    }
}

#[derive(Args)]
struct EnrollArgs {
    /// Touch-log CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    user: u32,
    #[arg(long, default_value = "horizontal")]
    stroke_type: StrokeType,
    /// Template path [default: <out-dir>/template_user<U>_<type>.json]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    template: PathBuf,
    /// Touch-log CSV with the strokes to score.
    #[arg(long)]
    input: PathBuf,
    /// Only score strokes of this user.
    #[arg(long)]
    user: Option<u32>,
    /// Strokes fused per decision.
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value = "sliding")]
    fusion: FusionMode,
    #[arg(long, default_value_t = 25.0)]
    direction_threshold: f64,
    /// Per-stroke scores [default: <out-dir>/scores.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fused scores [default: <out-dir>/fused_scores.csv]
    #[arg(long)]
    fused_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "short_term")]
    scenario: Scenario,
    /// Fusion window sizes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,3,5,7,9,11,13,15,17,19"
    )]
    windows: Vec<usize>,
    #[arg(long, default_value = "sliding")]
    fusion: FusionMode,
    /// Evaluate only this stroke type.
    #[arg(long)]
    stroke_type: Option<StrokeType>,
    /// Skip the per-user curve files.
    #[arg(long)]
    no_curves: bool,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    users: usize,
    /// 0 gives identical users, 1 well-separated ones.
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Recording days, as offsets from the first.
    #[arg(long, value_delimiter = ',', default_value = "0,7")]
    days: Vec<u32>,
    #[arg(long, default_value_t = 3)]
    sessions_per_day: usize,
    /// Strokes per session and stroke type.
    #[arg(long, default_value_t = 20)]
    strokes_per_session: usize,
    /// Emit only this stroke type.
    #[arg(long)]
    stroke_type: Option<StrokeType>,
    /// Mean drift per day, in emission standard deviations.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// Per-session mean jitter, in emission standard deviations.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// [default: <out-dir>/synthetic.csv]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    template: PathBuf,
}

pub struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn usage(message: &str) -> Self {
        Self {
            code: 2,
            kind: "Usage",
            message: message.into(),
        }
    }
}

impl From<strokeauth::Error> for CliError {
    fn from(e: strokeauth::Error) -> Self {
        Self {
            code: match e.class() {
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        strokeauth::Error::Io(e).into()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Enroll(a) => commands::enroll(&out_dir, a),
        Command::Score(a) => commands::score(&out_dir, a),
        Command::Evaluate(a) => commands::evaluate(&out_dir, a),
        Command::Synth(a) => commands::synth(&out_dir, a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = serde_json::json!({
                "error": e.kind,
                "message": e.message,
                "exit_code": e.code,
            });
            eprintln!("{doc}");
            ExitCode::from(e.code)
        }
    }
}
