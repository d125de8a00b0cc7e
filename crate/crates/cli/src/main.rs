//! `pixalign` command-line tool.
//!
//! Exit codes: 0 on success, 2 for invalid arguments, 3 when input data or
//! processing fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pixalign::eval::Mode;
use pixalign::geom::Point2;

#[derive(Debug, Parser)]
#[command(name = "pixalign", version, about = "Pixel-level face alignment and patch-ensemble face verification")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average the eye-registered landmarks of neutral faces into a reference contour.
    Reference(ReferenceArgs),
    /// Pixel-align one image onto a reference contour.
    Warp(WarpArgs),
    /// Train a patch-ensemble discriminative model.
    Train(TrainArgs),
    /// Score every gallery face against every probe face.
    Score(ScoreArgs),
    /// Run a cross-validated verification experiment.
    Eval(EvalArgs),
    /// Write a synthetic face corpus with landmarks and a manifest.
    Synth(SynthArgs),
}

/// Canvas size and eye placement shared by commands that align faces.
#[derive(Debug, Clone, Args)]
struct CanvasArgs {
    /// Aligned-face grid as WIDTHxHEIGHT.
    #[arg(long, default_value = "140x120", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Eye-center targets on the grid as X1,Y1,X2,Y2.
    #[arg(long, default_value = "35,55,85,55", value_parser = parse_eyes)]
    eyes: (Point2, Point2),
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    /// Manifest CSV (subject_id,image_path,landmark_path,expression_tag).
    #[arg(long)]
    manifest: PathBuf,
    /// Use only records with this expression tag; all records when omitted.
    #[arg(long)]
    neutral_tag: Option<String>,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Output reference file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct WarpArgs {
    #[arg(long)]
    image: PathBuf,
    /// 68-point landmark file for the image.
    #[arg(long)]
    landmarks: PathBuf,
    /// Reference contour file; its grid sets the output size.
    #[arg(long)]
    reference: PathBuf,
    /// Eye-center targets on the grid as X1,Y1,X2,Y2.
    #[arg(long, default_value = "35,55,85,55", value_parser = parse_eyes)]
    eyes: (Point2, Point2),
    /// Writes PREFIX.pxf plus PREFIX_intensity.png, PREFIX_dx.png and PREFIX_dy.png.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Reference contour file (required unless --mode eye_aligned).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// pixel_aligned, eye_aligned or whole_face.
    #[arg(long, default_value = "pixel_aligned")]
    mode: Mode,
    /// Number of random square patches.
    #[arg(long, default_value_t = 80)]
    patches: usize,
    /// Patch side length in pixels.
    #[arg(long, default_value_t = 30)]
    patch_size: usize,
    /// Seed for the patch layout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Eye-center targets on the grid as X1,Y1,X2,Y2.
    #[arg(long, default_value = "35,55,85,55", value_parser = parse_eyes)]
    eyes: (Point2, Point2),
    /// Grid for eye_aligned models as WIDTHxHEIGHT (pixel modes use the reference grid).
    #[arg(long, default_value = "140x120", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gallery_manifest: PathBuf,
    #[arg(long)]
    probe_manifest: PathBuf,
    /// Weight of the geometry channels in the fused score.
    #[arg(long, default_value_t = 0.2)]
    w: f64,
    /// Score matrix CSV.
    #[arg(long)]
    out: PathBuf,
    /// Genuine-pair indicator CSV (defaults to <out stem>.genuine.csv).
    #[arg(long)]
    genuine_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// pixel_aligned, eye_aligned or whole_face.
    #[arg(long, default_value = "pixel_aligned")]
    mode: Mode,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// FAR operating point to report (repeatable).
    #[arg(long = "far", default_values_t = [0.001, 0.01, 0.1])]
    far: Vec<f64>,
    /// Seed for fold assignment and patch layout.
    #[arg(long)]
    seed: u64,
    /// Number of random square patches.
    #[arg(long, default_value_t = 80)]
    patches: usize,
    /// Patch side length in pixels.
    #[arg(long, default_value_t = 30)]
    patch_size: usize,
    /// Weight of the geometry channels in the fused score.
    #[arg(long, default_value_t = 0.2)]
    w: f64,
    /// Reference contour file; computed from the manifest when omitted.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Expression tag of the records averaged into the reference.
    #[arg(long)]
    neutral_tag: Option<String>,
    #[command(flatten)]
    canvas: CanvasArgs,
    /// Output directory for ROC CSVs and reports.
    #[arg(long)]
    out: PathBuf,
    /// Also write roc.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; receives manifest.csv and one folder per subject.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    /// Expressions per subject (at most 8).
    #[arg(long, default_value_t = 8)]
    expressions: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((w, h))
}

fn parse_eyes(s: &str) -> Result<(Point2, Point2), String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match v.as_slice() {
        [x1, y1, x2, y2] if v.iter().all(|x| x.is_finite()) => Ok((Point2::new(*x1, *y1), Point2::new(*x2, *y2))),
        _ => Err("expected four finite numbers X1,Y1,X2,Y2".into()),
    }
}

/// Invalid arguments detected after parsing; exits with status 2. Every
/// other error exits with status 3.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("PIXALIGN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("PIXALIGN_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("PIXALIGN_LOG").init();

    let result = init_threads().and_then(|()| match cli.command {
        Command::Reference(a) => commands::reference(a),
        Command::Warp(a) => commands::warp(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
