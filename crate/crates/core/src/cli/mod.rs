//! `motionseg` command line: `segment`, `eval`, `synth` and `viz`.
//!
//! Exit codes: 0 success, 2 malformed input, 3 configuration error.

mod commands;
mod config;

pub use commands::{cmd_eval, cmd_segment, cmd_synth, cmd_viz, segment_video, EvalMode};
pub use config::{RunConfig, CONFIG_KEYS, DEFAULT_WORKING_SIZE};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "motionseg", version, about = "Motion segmentation of optical-flow volumes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a directory of .flo frames (or a directory of such directories).
    Segment(SegmentArgs),
    /// Score predicted label PNGs against ground truth.
    Eval(EvalArgs),
    /// Render a synthetic scene from a scene file.
    Synth(SynthArgs),
    /// Render flows as HSV images or labels with the fixed palette.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// key=value settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of segments.
    #[arg(long)]
    pub k: Option<String>,
    /// Frames per spline control point.
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub degree: Option<String>,
    /// Weight of the temporal-consistency term.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Occlusion quantile.
    #[arg(long)]
    pub eta: Option<String>,
    /// Outer iterations.
    #[arg(long)]
    pub iters: Option<String>,
    #[arg(long = "g-steps")]
    pub g_steps: Option<String>,
    #[arg(long = "g-step")]
    pub g_step: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// random | kmeans
    #[arg(long)]
    pub init: Option<String>,
    /// main | no_consistency | alternate[:g1:g2]
    #[arg(long = "loss-variant")]
    pub loss_variant: Option<String>,
    /// spline | polytime
    #[arg(long = "model-family")]
    pub model_family: Option<String>,
    /// Working width.
    #[arg(long)]
    pub width: Option<String>,
    /// Working height.
    #[arg(long)]
    pub height: Option<String>,
    /// Videos processed concurrently.
    #[arg(long)]
    pub jobs: Option<String>,
    /// Sequential reductions (always the case; recorded in the manifest).
    #[arg(long)]
    pub deterministic: bool,
    /// Also write HSV flow and coloured label images under viz/.
    #[arg(long)]
    pub viz: bool,
}

impl SegmentArgs {
    /// Config file first, then flags.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        let flags = [
            ("k", &self.k),
            ("nu", &self.nu),
            ("degree", &self.degree),
            ("gamma", &self.gamma),
            ("eta", &self.eta),
            ("iters", &self.iters),
            ("g-steps", &self.g_steps),
            ("g-step", &self.g_step),
            ("seed", &self.seed),
            ("init", &self.init),
            ("loss-variant", &self.loss_variant),
            ("model-family", &self.model_family),
            ("width", &self.width),
            ("height", &self.height),
            ("jobs", &self.jobs),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.deterministic {
            config.deterministic = true;
        }
        if self.viz {
            config.viz = true;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Label PNGs, a segment output directory, or a directory of videos.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth PNGs (0 = background), a synth output directory, or a directory of videos.
    #[arg(long)]
    pub gt: PathBuf,
    /// binary | binary-select | multi-hungarian | biou | linear
    #[arg(long, default_value = "binary")]
    pub mode: String,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Directory of .flo files or label PNGs.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write all frames side by side as montage.png.
    #[arg(long)]
    pub montage: bool,
    /// Flow saturation scale: frame | volume | <pixels>.
    #[arg(long, default_value = "frame")]
    pub scale: String,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let result = match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Viz(a) => cmd_viz(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("motionseg: {e}");
            e.exit_code()
        }
    }
}
