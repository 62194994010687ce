//! Command-line front end.
//!
//! Precedence for every tunable: explicit flag, then the config file
//! (`--config`, else `$SYMKIT_CONFIG`), then the built-in default shown in
//! `--help`. Exit codes: 0 success, 1 I/O failure, 2 invalid input data.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::bbox::boxes_from_text;
use crate::config::ToolkitConfig;
use crate::convert::{self, PredictionFile};
use crate::curation::{self, LinkMode, SotSample, DEFAULT_MIN_LENGTH};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalMode, EvalPair, EvalReport};
use crate::simulator::{self, SweepGrid};

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CURVES_CSV: &str = "curves.csv";

const DEFAULT_SEED: u64 = 0;
const DEFAULT_SWEEP_SEEDS: u64 = 10;

#[derive(Debug, Parser)]
#[command(name = "symkit", version, about = "Scene-text single-object tracking toolkit")]
pub struct Cli {
    /// Config file; falls back to $SYMKIT_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn video-text-spotting annotations into single-object tracking samples.
    Curate(CurateArgs),
    /// Turn video-text-spotting results into per-object prediction files.
    Convert(ConvertArgs),
    /// Score predictions against curated ground truth.
    Evaluate(EvaluateArgs),
    /// Track one synthetic sequence and write per-frame diagnostics.
    Simulate(SimulateArgs),
    /// Run the adaptive-inference hyperparameter grid on synthetic sequences.
    Sweep(SweepArgs),
    /// Print a table from an evaluation report.
    Report(ReportArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Annotation file, one JSON record per line.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output root for the sample directories.
    #[arg(long, value_name = "PATH", default_value = "sot")]
    pub out: PathBuf,
    /// Shortest tracklet kept, in frames.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_MIN_LENGTH)]
    pub min_length: usize,
    /// Replace existing sample directories.
    #[arg(long)]
    pub force: bool,
    /// Copy frames from this root instead of writing a relative frame map only.
    #[arg(long, value_name = "DIR")]
    pub copy_from: Option<PathBuf>,
    /// Frame image extension.
    #[arg(long, value_name = "EXT", default_value = "jpg")]
    pub image_ext: String,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Spotting results, JSON lines (a video header followed by detections).
    #[arg(long, value_name = "PATH")]
    pub vts: PathBuf,
    /// Output root; files land in `<out>/<video>/<object>.txt`.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    StrictId,
    IdAgnostic,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::StrictId => EvalMode::StrictId,
            ModeArg::IdAgnostic => EvalMode::IdAgnostic,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: `<sample>.txt` per sample, or `<video>/<object>.txt` from convert.
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Curated ground-truth root.
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::StrictId)]
    pub mode: ModeArg,
    /// Directory receiving report.csv, summary.txt and curves.csv.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sequence seed.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Track with or without the adaptive inference layer.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub aie: Switch,
    /// Diagnostics CSV; written to stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// First sequence seed of each cell.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of consecutive seeds averaged per cell.
    #[arg(long, value_name = "K", default_value_t = DEFAULT_SWEEP_SEEDS)]
    pub seeds: u64,
    /// Sweep table CSV; written to stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// An evaluation report directory or its report.csv.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    let mut stdout = std::io::stdout().lock();
    match run(&cli, sub, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn run(cli: &Cli, sub: &ArgMatches, out: &mut dyn std::io::Write) -> Result<()> {
    let cfg = ToolkitConfig::resolve(cli.config.as_deref())?;
    match &cli.command {
        Command::Curate(a) => cmd_curate(a, sub, cfg, out),
        Command::Convert(a) => cmd_convert(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg, out),
        Command::Simulate(a) => cmd_simulate(a, sub, cfg, out),
        Command::Sweep(a) => cmd_sweep(a, sub, cfg, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Config => emit(out, &cfg.to_text()),
    }
}

fn cmd_curate(a: &CurateArgs, m: &ArgMatches, cfg: ToolkitConfig, out: &mut dyn std::io::Write) -> Result<()> {
    let mut c = cfg.curation;
    if explicit(m, "out") {
        c.output_root = a.out.clone();
    }
    if explicit(m, "min_length") {
        c.min_length = a.min_length;
    }
    if explicit(m, "image_ext") {
        c.image_ext = a.image_ext.clone();
    }
    c.force |= a.force;
    if let Some(root) = &a.copy_from {
        c.image_root = Some(root.clone());
        c.link_mode = LinkMode::Copy;
    }
    let report = curation::curate_file(&a.input, &c)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(out, &report.summary.to_kv())
}

fn cmd_convert(a: &ConvertArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let written = convert::convert_file(&a.vts, &a.out)?;
    let videos: std::collections::BTreeSet<_> = written.iter().filter_map(|p| p.parent()).collect();
    emit(out, &format!("videos={}\nfiles={}\n", videos.len(), written.len()))
}

/// Builds evaluation pairs, preferring `<pred>/<sample>.txt` and falling back
/// to the per-video layout produced by `convert`.
pub fn collect_pairs(pred: &Path, gts: &[SotSample]) -> Result<Vec<EvalPair>> {
    if !pred.is_dir() {
        return Err(Error::io(
            pred,
            std::io::Error::new(std::io::ErrorKind::NotFound, "prediction directory not found"),
        ));
    }
    let mut video_cache: BTreeMap<&str, Vec<PredictionFile>> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(gts.len());
    for gt in gts {
        let direct = pred.join(format!("{}.txt", gt.name));
        if direct.is_file() {
            let text = fs::read_to_string(&direct).map_err(|e| Error::io(&direct, e))?;
            let boxes = boxes_from_text(&text)?;
            if boxes.len() != gt.boxes.len() {
                return Err(Error::LengthMismatch {
                    name: gt.name.clone(),
                    left: boxes.len(),
                    right: gt.boxes.len(),
                });
            }
            pairs.push(EvalPair {
                name: gt.name.clone(),
                gt: gt.boxes.clone(),
                prediction: boxes,
                pool: None,
            });
            continue;
        }
        if !video_cache.contains_key(gt.video.as_str()) {
            let dir = pred.join(&gt.video);
            let files = if dir.is_dir() {
                convert::load_prediction_dir(&dir)?
            } else {
                Vec::new()
            };
            video_cache.insert(gt.video.as_str(), files);
        }
        let files = &video_cache[gt.video.as_str()];
        pairs.extend(convert::eval_pairs(files, std::slice::from_ref(gt)));
    }
    Ok(pairs)
}

fn cmd_evaluate(a: &EvaluateArgs, cfg: &ToolkitConfig, out: &mut dyn std::io::Write) -> Result<()> {
    let gts = curation::load_sot_tree(&a.gt)?;
    if gts.is_empty() {
        return Err(Error::Empty("ground-truth tree"));
    }
    let pairs = collect_pairs(&a.pred, &gts)?;
    let report = metrics::evaluate(&pairs, &cfg.metrics, a.mode.into())?;
    write_file(&a.report.join(REPORT_CSV), &report.to_csv())?;
    write_file(&a.report.join(SUMMARY_FILE), &report.summary())?;
    write_file(&a.report.join(CURVES_CSV), &report.curves_csv())?;
    emit(out, &report.summary())
}

fn cmd_simulate(a: &SimulateArgs, m: &ArgMatches, cfg: ToolkitConfig, out: &mut dyn std::io::Write) -> Result<()> {
    let mut spec = cfg.sequence;
    if explicit(m, "seed") {
        spec.seed = a.seed;
    }
    let run = simulator::simulate_track(&spec, &cfg.tracker, &cfg.aie, a.aie == Switch::On)?;
    let csv = run.to_csv();
    match &a.csv {
        Some(path) => {
            write_file(path, &csv)?;
            emit(out, &run.summary().to_kv())
        }
        None => {
            eprint!("{}", run.summary().to_kv());
            emit(out, &csv)
        }
    }
}

fn cmd_sweep(a: &SweepArgs, m: &ArgMatches, cfg: ToolkitConfig, out: &mut dyn std::io::Write) -> Result<()> {
    let mut grid: SweepGrid = cfg.sweep;
    if explicit(m, "seed") || explicit(m, "seeds") {
        grid.seeds = (a.seed..a.seed.saturating_add(a.seeds)).collect();
    }
    let rows = simulator::sweep_aie(&grid, &cfg.sequence, &cfg.tracker, &cfg.aie)?;
    let csv = simulator::sweep_to_csv(&rows);
    match &a.csv {
        Some(path) => {
            write_file(path, &csv)?;
            emit(out, &format!("cells={}\nseeds={}\n", rows.len(), grid.seeds.len()))
        }
        None => emit(out, &csv),
    }
}

/// Fixed-width table of per-tracklet rows plus their mean, in percent.
pub fn format_report(rows: &[metrics::TrackletMetrics]) -> String {
    let width = rows.iter().map(|r| r.name.len()).chain([8]).max().unwrap_or(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$} {:>7} {:>7} {:>7} {:>7} {:>7}", "tracklet", "frames", "AUC", "P_Norm", "P", "OP75");
    let pct = |v: f64| format!("{:.2}", 100.0 * v);
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$} {:>7} {:>7} {:>7} {:>7} {:>7}",
            r.name,
            r.frames,
            pct(r.auc),
            pct(r.p_norm),
            pct(r.p),
            pct(r.op75)
        );
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = |f: fn(&metrics::TrackletMetrics) -> f64| pct(rows.iter().map(f).sum::<f64>() / n);
        let frames: usize = rows.iter().map(|r| r.frames).sum();
        let _ = writeln!(
            s,
            "{:<width$} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "mean",
            frames,
            mean(|r| r.auc),
            mean(|r| r.p_norm),
            mean(|r| r.p),
            mean(|r| r.op75)
        );
    }
    s
}

fn cmd_report(a: &ReportArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let path = if a.input.is_dir() { a.input.join(REPORT_CSV) } else { a.input.clone() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rows = EvalReport::rows_from_csv(&text)?;
    emit(out, &format_report(&rows))
}
