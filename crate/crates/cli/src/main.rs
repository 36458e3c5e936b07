use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use objmot::baselines::{color_tracker, oracle_tracker, BackgroundModel, ColorTrackerConfig};
use objmot::datasets::{default_config, generate_sequence, DatasetConfig, Family, Split, Variant};
use objmot::evaluate::{build_report, evaluate_stored_sequence, EvalConfig};
use objmot::matcher::MatchConfig;
use objmot::metrics::SequenceStats;
use objmot::storage::{self, Manifest, ManifestEntry, ReportFormat};
use objmot::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_GENERATION: u8 = 4;

/// Synthetic multi-object tracking benchmark: dataset generation, baseline
/// trackers and mask-based CLEAR-MOT evaluation.
#[derive(Parser)]
#[command(name = "objmot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset split.
    Generate(GenerateArgs),
    /// Run a baseline tracker over a dataset.
    Track(TrackArgs),
    /// Score predictions against a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_with::<Family>, default_value = "vmds")]
    family: Family,
    #[arg(long, value_parser = parse_with::<Variant>, default_value = "standard")]
    variant: Variant,
    #[arg(long, value_parser = parse_with::<Split>, default_value = "test")]
    split: Split,
    /// Number of sequences (default: the split's size).
    #[arg(long)]
    num: Option<usize>,
    /// Frames per sequence (default: the split's length).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, env = "OBJMOT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Render on a black background.
    #[arg(long)]
    black_background: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Oracle,
    Color,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long, value_enum)]
    baseline: Baseline,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Background estimate for the color tracker: mode, median or black.
    #[arg(long, value_parser = parse_with::<BackgroundModel>, default_value = "mode")]
    background: BackgroundModel,
    /// Color distance threshold for the color tracker.
    #[arg(long, default_value_t = 0.15, value_parser = parse_unit)]
    color_threshold: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

#[derive(Clone, Copy, ValueEnum)]
enum Breakdown {
    ObjectCount,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Markdown,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Minimum IoU for a match.
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit)]
    iou: f64,
    /// Predictions overlapping the background by more than this are dropped.
    #[arg(long, default_value_t = 0.2, value_parser = parse_unit)]
    bg_iou: f64,
    /// First frame whose events are counted.
    #[arg(long, default_value_t = 0)]
    eval_start: usize,
    /// Forget correspondences when entering the evaluation window.
    #[arg(long)]
    reset_state_at_window_start: bool,
    #[arg(long, value_enum)]
    breakdown: Option<Breakdown>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; the report goes to stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => EXIT_USAGE,
        e if e.is_generation() => EXIT_GENERATION,
        e if e.is_validation() => EXIT_VALIDATION,
        Error::Sequence { source, .. } => exit_code(source),
        _ => EXIT_FAILURE,
    }
}

fn pool(workers: u16) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(workers))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

/// Runs `f` on every item in parallel and returns the results in input
/// order, or the error of the lowest failing item.
fn ordered<T: Sync, R: Send>(
    workers: u16,
    items: &[T],
    f: impl Fn(&T) -> Result<R, Error> + Sync,
) -> Result<Vec<R>, Error> {
    let results: Vec<Result<R, Error>> = pool(workers)?.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let defaults = default_config(args.family, args.variant, args.split)?;
    let config = DatasetConfig {
        num_sequences: args.num.unwrap_or(defaults.num_sequences),
        length: args.length.unwrap_or(defaults.length),
        seed: args.seed,
        black_background: args.black_background,
        ..defaults
    };
    config.validate()?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let hash = config.hash();
    let indices: Vec<usize> = (0..config.num_sequences).collect();
    let entries = ordered(args.workers, &indices, |&i| {
        let sample = generate_sequence(&config, i)?;
        storage::write_sequence(&args.out, i, &sample, &hash)
    })?;
    let manifest = Manifest::new(Some(&config), entries);
    storage::write_manifest(&args.out, &manifest)?;
    eprintln!(
        "wrote {} sequences to {} (digest {})",
        manifest.num_sequences,
        args.out.display(),
        manifest.digest()
    );
    Ok(())
}

fn track(args: TrackArgs) -> Result<(), Error> {
    let manifest = storage::read_manifest(&args.data)?;
    let config = ColorTrackerConfig {
        color_threshold: args.color_threshold,
        background: args.background,
        ..Default::default()
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    ordered(args.workers, &manifest.sequences, |e: &ManifestEntry| {
        let sample = storage::read_sequence(&args.data, e)?;
        let set = match args.baseline {
            Baseline::Oracle => oracle_tracker(e.index, &sample),
            Baseline::Color => color_tracker(e.index, &sample.frames, &config),
        };
        storage::write_predictions(&args.out, &set)
    })?;
    eprintln!("wrote predictions for {} sequences to {}", manifest.num_sequences, args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let config = EvalConfig {
        matching: MatchConfig {
            iou_threshold: args.iou,
            background_iou_threshold: args.bg_iou,
        },
        eval_start: args.eval_start,
        reset_state_at_window_start: args.reset_state_at_window_start,
        ..Default::default()
    };
    config.validate()?;
    let manifest = storage::read_manifest(&args.gt)?;
    let per_sequence: Vec<SequenceStats> = ordered(args.workers, &manifest.sequences, |e| {
        evaluate_stored_sequence(&args.gt, &args.pred, e, &config)
    })?;
    let report = build_report(&per_sequence, &config, args.breakdown.is_some());
    let text = storage::write_report(&report, args.format.into());
    match &args.out {
        Some(path) => {
            write_text(path, &text)?;
            print!("{}", storage::write_report(&report, ReportFormat::Markdown));
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Track(a) => track(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
