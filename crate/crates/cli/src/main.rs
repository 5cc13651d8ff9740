mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regionwise::oracle::ORACLE_URL_ENV;
use regionwise::{default_colors, Color, Error, Objective, Preset, Result};
use serde_json::json;

/// Exit status for a completed run whose attack did not succeed.
pub const EXIT_ATTACK_FAILED: u8 = 2;
pub const EXIT_ORACLE: u8 = 3;
pub const EXIT_BAD_INPUT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "regionwise", version, about = "Black-box region-wise adversarial patch search")]
pub struct Cli {
    /// Oracle endpoint; takes precedence over any oracle named in the config.
    #[arg(long, global = true, env = ORACLE_URL_ENV)]
    pub oracle_url: Option<String>,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every stochastic transform.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a patch: top-down when untargeted, bottom-up when targeted.
    Attack(AttackArgs),
    /// Shift a patch to the position that best survives misplacement.
    Finetune(FinetuneArgs),
    /// Write the transformed copies of an image for a sweep preset.
    GenEnsemble(GenEnsembleArgs),
    /// Attack success rate over result files, or physical robustness.
    Evaluate(EvaluateArgs),
    /// Convert a patch into millimetre placements on the physical object.
    Map(MapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveKind {
    Untargeted,
    Targeted,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    #[arg(long, value_enum)]
    pub objective: ObjectiveKind,
    #[arg(long)]
    pub true_label: Option<usize>,
    #[arg(long)]
    pub target_label: Option<usize>,
}

impl ObjectiveArgs {
    pub fn resolve(&self) -> Result<Objective> {
        match self.objective {
            ObjectiveKind::Untargeted => self
                .true_label
                .map(Objective::Untargeted)
                .ok_or_else(|| Error::InvalidConfig("--objective untargeted needs --true-label".into())),
            ObjectiveKind::Targeted => self
                .target_label
                .map(Objective::Targeted)
                .ok_or_else(|| Error::InvalidConfig("--objective targeted needs --target-label".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FineTuneModeArg {
    Literal,
    Jittered,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Patch budget as a fraction of the image's pixels.
    #[arg(long)]
    pub max_area: Option<f64>,
    /// `websafe:N` (black first) or `black`.
    #[arg(long, value_parser = parse_colors)]
    pub colors: Option<ColorList>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed_size: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub seed_count: Option<usize>,
    /// Fraction of ensemble members that must be fooled.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Score against the base image plus this sweep.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Try circles, triangles and octagons around a rectangular result.
    #[arg(long)]
    pub shapes: bool,
    #[arg(long)]
    pub shape_steps: Option<usize>,
    #[arg(long, default_value = "regionwise-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Result JSON from `attack`, or a bare perturbation record.
    #[arg(long)]
    pub perturbation: PathBuf,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long, value_delimiter = ',')]
    pub moves: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub mode: Option<FineTuneModeArg>,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long, default_value = "regionwise-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenEnsembleArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Falls back to the config's transform list when absent.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long, default_value = "regionwise-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Attack success rate over the given result files.
    #[arg(long, conflicts_with = "pr")]
    pub asr: bool,
    /// Physical robustness of a perturbation under a transform sweep.
    #[arg(long)]
    pub pr: bool,
    pub results: Vec<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub perturbation: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveKind>,
    #[arg(long)]
    pub true_label: Option<usize>,
    #[arg(long)]
    pub target_label: Option<usize>,
    #[arg(long, default_value = "regionwise-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub perturbation: PathBuf,
    /// Object bounding box in image pixels: `x,y,w,h`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub bbox: Vec<usize>,
    /// Physical object size: `width,height` in millimetres.
    #[arg(long, value_delimiter = ',', required = true)]
    pub object_mm: Vec<f64>,
    /// Image the patch was found on; enables the stencil output.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value = "regionwise-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ColorList(pub Vec<Color>);

fn parse_colors(s: &str) -> std::result::Result<ColorList, String> {
    if s == "black" {
        return Ok(ColorList(vec![Color::BLACK]));
    }
    let n = s
        .strip_prefix("websafe:")
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| format!("expected `websafe:N` or `black`, got {s:?}"))?;
    default_colors(n).map(ColorList).map_err(|e| e.to_string())
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_oracle_failure() {
        EXIT_ORACLE
    } else {
        EXIT_BAD_INPUT
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Aborted { source, .. } => error_kind(source),
        Error::Transport { .. } => "transport",
        Error::Rejected { .. } => "rejected",
        Error::InvalidProbabilities(_) => "invalid_probabilities",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::OutOfBounds { .. } => "out_of_bounds",
        Error::Infeasible => "infeasible",
        Error::UndefinedMetric(_) => "undefined_metric",
        Error::Io(_) | Error::Codec(_) => "io",
        Error::Json(_) => "json",
        _ => "invalid_input",
    }
}

fn report_error(err: &Error) -> u8 {
    let code = exit_code(err);
    let mut record = json!({
        "error": {
            "kind": error_kind(err),
            "message": err.to_string(),
            "exit_code": code,
        }
    });
    if let Error::Aborted { partial, .. } = err {
        record["partial"] = serde_json::to_value(partial).unwrap_or_default();
    }
    eprintln!("{record}");
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(report_error(&e)),
    }
}
