use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ivca_core::eval::{calibrate_weights, correlate, read_bitrates, WeightGrid, DEFAULT_GRID_AXIS};
use ivca_core::gop::{GopStructure, LayerWeights};
use ivca_core::heatmap::emit_heatmap;
use ivca_core::motion::MeParams;
use ivca_core::pipeline::{Analysis, Analyzer, AnalyzerConfig, ComplexityReport, Mode, DEFAULT_BLOCK_SIZE};
use ivca_core::video_io::{open_raw_yuv, open_y4m, ChromaFormat, LumaPlane, VideoSpec};
use serde::Serialize;

/// Video complexity analysis from DCT texture energy.
#[derive(Parser)]
#[command(name = "ivca", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute complexity reports for one or more clips.
    Analyze(AnalyzeArgs),
    /// Correlate report complexities with measured bitrates.
    Evaluate(EvaluateArgs),
    /// Grid-search layer weights against measured bitrates.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input clips (.y4m, or raw planar YUV with --width and --height).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Width of raw YUV input.
    #[arg(long)]
    width: Option<usize>,
    /// Height of raw YUV input.
    #[arg(long)]
    height: Option<usize>,
    /// Chroma format of raw YUV input (420, 422, 444).
    #[arg(long, default_value = "420")]
    chroma: ChromaFormat,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    /// vca, vca+me, vca+weights or ivca.
    #[arg(long, default_value = "ivca")]
    mode: Mode,
    #[arg(long, default_value_t = MeParams::default().window)]
    me_window: usize,
    #[arg(long, default_value_t = MeParams::default().search_range)]
    me_range: usize,
    /// Use the 16-bit quantized similarity search.
    #[arg(long)]
    me_quantize: bool,
    #[arg(long, default_value_t = GopStructure::default().gop_size)]
    gop_size: u64,
    /// Intra period in frames; 0 means only the first frame is intra.
    #[arg(long, default_value_t = GopStructure::default().intra_period)]
    intra_period: u64,
    #[arg(long, default_value_t = GopStructure::default().layer_count)]
    layers: u32,
    /// Layer weights as wI,wL0,wL1,wL2.
    #[arg(long, default_value_t = LayerWeights::default())]
    weights: LayerWeights,
    /// Clip identifier (single input only); defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    /// JSON report path (single input only).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Per-frame CSV path (single input only).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory receiving <id>.json and <id>.csv for every input.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Directory receiving PGM heatmaps of SAD and attenuation maps.
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
    /// Write heatmaps for every K-th frame.
    #[arg(long, default_value_t = 1, requires = "heatmap_dir")]
    heatmap_every: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Report JSON files produced by `analyze`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// CSV with `clip,bitrate` columns.
    #[arg(long)]
    bitrates: PathBuf,
    /// Output JSON path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    bitrates: PathBuf,
    /// Candidate values for all four weights, comma separated.
    #[arg(long)]
    axis: Option<String>,
    /// Candidate values for the intra weight (overrides --axis).
    #[arg(long)]
    axis_i: Option<String>,
    #[arg(long)]
    axis_l0: Option<String>,
    #[arg(long)]
    axis_l1: Option<String>,
    #[arg(long)]
    axis_l2: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure classes mapped to distinct exit codes.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<ivca_core::Error> for Failure {
    fn from(e: ivca_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Calibrate(args) => calibrate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn clip_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn is_y4m(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("y4m"))
}

struct Outputs {
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
}

fn analyze(args: AnalyzeArgs) -> CliResult<()> {
    let single = args.inputs.len() == 1;
    if !single && (args.id.is_some() || args.json.is_some() || args.csv.is_some()) {
        return usage("--id, --json and --csv take a single input; use --out-dir for several");
    }
    if args.heatmap_every == 0 {
        return usage("--heatmap-every must be at least 1");
    }
    let raw_spec = match (args.width, args.height) {
        (Some(w), Some(h)) => Some(VideoSpec::new(w, h, args.chroma).map_err(|e| Failure::Usage(e.to_string()))?),
        (None, None) => None,
        _ => return usage("--width and --height go together"),
    };
    if raw_spec.is_none() {
        if let Some(p) = args.inputs.iter().find(|p| !is_y4m(p)) {
            return usage(format!("{} is not .y4m; raw input needs --width and --height", p.display()));
        }
    }

    let config = AnalyzerConfig {
        block_size: args.block_size,
        mode: args.mode,
        me: MeParams {
            window: args.me_window,
            search_range: args.me_range,
            quantize: args.me_quantize,
        },
        gop: GopStructure {
            gop_size: args.gop_size,
            intra_period: args.intra_period,
            layer_count: args.layers,
            weights: args.weights,
        },
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Analyzer::new("", config).map_err(|e| Failure::Usage(e.to_string()))?;

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    if let Some(dir) = &args.heatmap_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    for input in &args.inputs {
        let id = args.id.clone().unwrap_or_else(|| clip_id(input));
        let outputs = match &args.out_dir {
            Some(dir) => Outputs {
                json: Some(args.json.clone().unwrap_or_else(|| dir.join(format!("{id}.json")))),
                csv: Some(args.csv.clone().unwrap_or_else(|| dir.join(format!("{id}.csv")))),
            },
            None => Outputs {
                json: args.json.clone(),
                csv: args.csv.clone(),
            },
        };
        let heatmaps = args.heatmap_dir.as_ref().map(|d| (d.as_path(), args.heatmap_every));
        let mut written = Vec::new();
        let result = analyze_clip(input, &id, raw_spec, config, &outputs, heatmaps, &mut written);
        if result.is_err() {
            for path in &written {
                let _ = std::fs::remove_file(path);
            }
        }
        let report = result.with_context(|| format!("analyzing {}", input.display()))?;
        println!(
            "{}\t{}\tC={:.6}\tfps={:.2}",
            report.clip, report.mode, report.complexity, report.timing.fps
        );
    }
    Ok(())
}

fn run_analyzer<I>(id: &str, frames: I, config: AnalyzerConfig, every: Option<u64>) -> anyhow::Result<Analysis>
where
    I: Iterator<Item = ivca_core::Result<LumaPlane>>,
{
    let mut analyzer = Analyzer::new(id, config)?;
    if let Some(k) = every {
        analyzer = analyzer.keep_diagnostics(k);
    }
    for plane in frames {
        analyzer.push(&plane?)?;
    }
    Ok(analyzer.finish()?)
}

fn analyze_clip(
    input: &Path,
    id: &str,
    raw_spec: Option<VideoSpec>,
    config: AnalyzerConfig,
    outputs: &Outputs,
    heatmaps: Option<(&Path, u64)>,
    written: &mut Vec<PathBuf>,
) -> anyhow::Result<ComplexityReport> {
    let every = heatmaps.map(|h| h.1);
    let analysis = if is_y4m(input) {
        let (_, reader) = open_y4m(input)?;
        run_analyzer(id, reader, config, every)?
    } else {
        let spec = raw_spec.context("raw input needs --width and --height")?;
        run_analyzer(id, open_raw_yuv(input, spec)?, config, every)?
    };

    if let Some((dir, _)) = heatmaps {
        for d in &analysis.diagnostics {
            let path = dir.join(format!("{id}_sad_{:05}.pgm", d.poc));
            written.push(path.clone());
            emit_heatmap(&d.sad.values, &d.sad.grid, &path)?;
            if let Some(mu) = &d.attenuation {
                let path = dir.join(format!("{id}_mu_{:05}.pgm", d.poc));
                written.push(path.clone());
                emit_heatmap(&mu.values, &d.sad.grid, &path)?;
            }
        }
    }
    let report = analysis.report;
    if let Some(path) = &outputs.json {
        written.push(path.clone());
        report.write_json(path)?;
    }
    if let Some(path) = &outputs.csv {
        written.push(path.clone());
        report.write_csv(path)?;
    }
    Ok(report)
}

/// Loads reports and pairs each with its measured bitrate.
fn join_reports(reports: &[PathBuf], bitrates: &Path) -> CliResult<(Vec<ComplexityReport>, Vec<f64>)> {
    let records = read_bitrates(bitrates).with_context(|| format!("reading {}", bitrates.display()))?;
    let mut by_clip = HashMap::new();
    for r in records {
        if by_clip.insert(r.clip.clone(), r.bitrate).is_some() {
            return Err(Failure::Data(anyhow::anyhow!("duplicate clip `{}` in {}", r.clip, bitrates.display())));
        }
    }
    let mut loaded = Vec::with_capacity(reports.len());
    let mut seen = HashMap::new();
    for path in reports {
        let report = ComplexityReport::read_json(path).with_context(|| format!("reading {}", path.display()))?;
        if let Some(prev) = seen.insert(report.clip.clone(), path.clone()) {
            return Err(Failure::Data(anyhow::anyhow!(
                "clip `{}` appears in both {} and {}",
                report.clip,
                prev.display(),
                path.display()
            )));
        }
        loaded.push(report);
    }
    let unmatched: Vec<String> = loaded
        .iter()
        .filter(|r| !by_clip.contains_key(&r.clip))
        .map(|r| r.clip.clone())
        .collect();
    if !unmatched.is_empty() {
        return Err(ivca_core::Error::UnmatchedClips(unmatched).into());
    }
    let rates = loaded.iter().map(|r| by_clip[&r.clip]).collect();
    Ok((loaded, rates))
}

fn write_output<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    match output {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ClipPoint {
    clip: String,
    complexity: f64,
    bitrate: f64,
}

#[derive(Serialize)]
struct EvaluationOutput {
    pcc: f64,
    slope: f64,
    intercept: f64,
    n: usize,
    per_clip: Vec<ClipPoint>,
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let (reports, rates) = join_reports(&args.reports, &args.bitrates)?;
    let complexities: Vec<f64> = reports.iter().map(|r| r.complexity).collect();
    let fit = correlate(&complexities, &rates)?;
    let output = EvaluationOutput {
        pcc: fit.pcc,
        slope: fit.slope,
        intercept: fit.intercept,
        n: fit.n,
        per_clip: reports
            .into_iter()
            .zip(rates)
            .map(|(r, bitrate)| ClipPoint {
                clip: r.clip,
                complexity: r.complexity,
                bitrate,
            })
            .collect(),
    };
    write_output(&output, args.output.as_deref())
}

fn parse_axis(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Failure::Usage(format!("{flag}: `{s}` is not a number"))))
        .collect::<CliResult<_>>()?;
    if values.is_empty() {
        return usage(format!("{flag} is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return usage(format!("{flag}: weight {v} must be finite and non-negative"));
    }
    Ok(values)
}

#[derive(Serialize)]
struct CalibrationOutput {
    weights: [f64; 4],
    pcc: f64,
    grid_size: usize,
    degenerate: usize,
    runtime_seconds: f64,
}

fn calibrate(args: CalibrateArgs) -> CliResult<()> {
    let shared = match &args.axis {
        Some(text) => parse_axis("--axis", text)?,
        None => DEFAULT_GRID_AXIS.to_vec(),
    };
    let pick = |flag: &str, value: &Option<String>| match value {
        Some(text) => parse_axis(flag, text),
        None => Ok(shared.clone()),
    };
    let axes = [
        pick("--axis-i", &args.axis_i)?,
        pick("--axis-l0", &args.axis_l0)?,
        pick("--axis-l1", &args.axis_l1)?,
        pick("--axis-l2", &args.axis_l2)?,
    ];
    let grid = WeightGrid::new(axes).map_err(|e| Failure::Usage(e.to_string()))?;

    let (reports, rates) = join_reports(&args.reports, &args.bitrates)?;
    let components: Vec<_> = reports.iter().map(|r| r.layer_sums).collect();
    let start = Instant::now();
    let cal = calibrate_weights(&components, &rates, &grid)?;
    let output = CalibrationOutput {
        weights: cal.weights.to_array(),
        pcc: cal.pcc,
        grid_size: cal.evaluated,
        degenerate: cal.degenerate,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    if cal.degenerate > 0 {
        eprintln!("note: {} grid tuples gave constant complexity and were skipped", cal.degenerate);
    }
    write_output(&output, args.output.as_deref())
}

