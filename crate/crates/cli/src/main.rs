use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use partprompt::distance::{distance, MeasureSpec, DEFAULT_CAP};
use partprompt::eval::{generate_scene, run_benchmark, SceneSpec};
use partprompt::io::{read_feature_map, read_mask, write_feature_map, write_mask};
use partprompt::segmenter::sidecar::{SidecarSegmenter, DEFAULT_TIMEOUT};
use partprompt::segmenter::DEFAULT_THRESHOLD;
use partprompt::{
    masked_select, retrieve_optimal, synthesize_prompts, Error, FeatureMap, MockSegmenter, NegMode,
    Polarity, PromptSet, RetrievalConfig, RngSeed, Segmenter,
};

#[derive(Parser)]
#[command(
    name = "partprompt",
    version,
    about = "Part-aware point prompts with distribution-guided retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize prompts for a fixed number of parts.
    Prompt(PromptArgs),
    /// Retrieve the prompt configuration whose mask best matches the reference.
    Retrieve(RetrieveArgs),
    /// Segment a target with the prototype-matching mock segmenter.
    SegmentMock(SegmentArgs),
    /// Distance between two masked feature sets.
    Distance(DistanceArgs),
    /// Write a synthetic reference/target scene.
    GenScene(GenSceneArgs),
    /// Run a benchmark described by a TOML config.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Inputs {
    /// Reference feature map (NPY, H x W x D float32).
    #[arg(long)]
    ref_feat: PathBuf,
    /// Reference mask (PGM P5 or NPY uint8).
    #[arg(long)]
    ref_mask: PathBuf,
    /// Target feature map.
    #[arg(long)]
    target: PathBuf,
    /// Image pixels per grid cell, used for prompt coordinates.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Number of positive parts.
    #[arg(long)]
    pos: usize,
    /// Number of negatives (natural mode: 0 or 1).
    #[arg(long, default_value_t = 1)]
    neg: usize,
    #[arg(long, default_value = "natural")]
    mode: NegMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmenterArgs {
    /// Mock segmenter similarity threshold.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// External segmenter command; repeat for each argument.
    #[arg(long = "sidecar", value_name = "ARG", allow_hyphen_values = true)]
    sidecar: Vec<String>,
    /// Sidecar timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Inclusive positive range, `LOW-HIGH` or a single count.
    #[arg(long, default_value = "1-5", value_parser = parse_range)]
    pos_range: [usize; 2],
    /// Inclusive negative range.
    #[arg(long, default_value = "1", value_parser = parse_range)]
    neg_range: [usize; 2],
    #[arg(long, default_value = "natural")]
    mode: NegMode,
    /// wasserstein, sinkhorn, js or hungarian.
    #[arg(long, default_value = "wasserstein")]
    measure: String,
    #[command(flatten)]
    measure_params: MeasureParams,
    /// Subsample cap for transport measures.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Concurrent candidate evaluations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    segmenter: SegmenterArgs,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Winner mask file (`.npy` for NPY, PGM otherwise).
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    target: PathBuf,
    /// PromptSet JSON.
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Mask output (`.npy` for NPY, PGM otherwise).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureParams {
    /// Sinkhorn regularization.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sinkhorn iteration limit.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Histogram bins per axis for js.
    #[arg(long)]
    bins: Option<usize>,
    /// Part count for hungarian.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long, default_value = "wasserstein")]
    measure: String,
    #[command(flatten)]
    measure_params: MeasureParams,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    a_mask: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    b_mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenSceneArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    parts: usize,
    #[arg(long, default_value_t = 24)]
    height: usize,
    #[arg(long, default_value_t = 24)]
    width: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Reference object size, `ROWSxCOLS`.
    #[arg(long, default_value = "10x10", value_parser = parse_size)]
    object: [usize; 2],
    #[arg(long, default_value_t = 0.08)]
    noise: f64,
    #[arg(long, default_value_t = 3)]
    textures: usize,
    /// Keep both objects centred and the target unscaled.
    #[arg(long)]
    no_shift: bool,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's concurrency.
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-scene rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<[usize; 2], String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad count {t:?}"))
    };
    match s.split_once('-') {
        Some((lo, hi)) => Ok([num(lo)?, num(hi)?]),
        None => {
            let v = num(s)?;
            Ok([v, v])
        }
    }
}

fn parse_size(s: &str) -> Result<[usize; 2], String> {
    let (r, c) = s
        .split_once('x')
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("bad size {t:?}"));
    Ok([num(r)?, num(c)?])
}

type CliResult<T = ()> = Result<T, Error>;

fn measure_spec(name: &str, p: &MeasureParams) -> CliResult<MeasureSpec> {
    let mut spec = MeasureSpec::from_name(name)?;
    match &mut spec {
        MeasureSpec::Sinkhorn {
            epsilon, max_iter, ..
        } => {
            if let Some(e) = p.epsilon {
                *epsilon = e;
            }
            if let Some(m) = p.max_iter {
                *max_iter = m;
            }
        }
        MeasureSpec::Js { bins } => {
            if let Some(b) = p.bins {
                *bins = b;
            }
        }
        MeasureSpec::Hungarian { k } => {
            if let Some(v) = p.k {
                *k = v;
            }
        }
        MeasureSpec::Wasserstein => {}
    }
    Ok(spec)
}

fn load_map(path: &Path, stride: usize) -> CliResult<FeatureMap> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be positive".into()));
    }
    let map = read_feature_map(path)?;
    let (h, w) = (map.height() * stride, map.width() * stride);
    map.with_image_size(h, w)
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn prompt(args: PromptArgs) -> CliResult {
    let reference = load_map(&args.inputs.ref_feat, args.inputs.stride)?;
    let mask = read_mask(&args.inputs.ref_mask)?;
    let target = load_map(&args.inputs.target, args.inputs.stride)?;
    let prompts = synthesize_prompts(
        &reference,
        &mask,
        &target,
        args.pos,
        args.mode,
        args.neg,
        RngSeed(args.seed),
    )?;
    emit(&prompts.to_json(), args.out.as_deref())
}

fn segmenter(args: &SegmenterArgs) -> CliResult<Box<dyn Segmenter>> {
    if args.sidecar.is_empty() {
        return Ok(Box::new(MockSegmenter::new(args.threshold)));
    }
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err(Error::InvalidInput(format!(
            "timeout {} must be positive",
            args.timeout
        )));
    }
    let mut s = SidecarSegmenter::new(args.sidecar.clone());
    s.timeout = Duration::from_secs_f64(args.timeout);
    Ok(Box::new(s))
}

fn retrieve(args: RetrieveArgs) -> CliResult {
    let cfg = RetrievalConfig {
        pos_range: args.pos_range,
        neg_mode: args.mode,
        neg_range: args.neg_range,
        measure: measure_spec(&args.measure, &args.measure_params)?,
        cap: args.cap,
        seed: RngSeed(args.seed),
        jobs: args.jobs,
    };
    cfg.validate()?;
    let reference = load_map(&args.inputs.ref_feat, args.inputs.stride)?;
    let mask = read_mask(&args.inputs.ref_mask)?;
    let target = load_map(&args.inputs.target, args.inputs.stride)?;
    let seg = segmenter(&args.segmenter)?;
    let outcome = retrieve_optimal(&reference, &mask, &target, &cfg, seg.as_ref())?;
    if let Some(path) = &args.mask_out {
        write_mask(outcome.winner_mask(), path)?;
    }
    emit(&outcome.to_json(), args.out.as_deref())
}

fn segment_mock(args: SegmentArgs) -> CliResult {
    let target = load_map(&args.target, args.stride)?;
    let text = std::fs::read_to_string(&args.prompts).map_err(|e| Error::Io {
        context: format!("reading {}", args.prompts.display()),
        source: e,
    })?;
    let prompts = PromptSet::from_json(&text)?;
    let mask = MockSegmenter::new(args.threshold).segment(&target, &prompts)?;
    write_mask(&mask, &args.out)
}

fn distance_cmd(args: DistanceArgs) -> CliResult {
    let spec = measure_spec(&args.measure, &args.measure_params)?;
    let a = masked_select(
        &read_feature_map(&args.a)?,
        &read_mask(&args.a_mask)?,
        Polarity::Foreground,
    )?;
    let b = masked_select(
        &read_feature_map(&args.b)?,
        &read_mask(&args.b_mask)?,
        Polarity::Foreground,
    )?;
    let result = distance(&a, &b, &spec, args.cap, RngSeed(args.seed))?;
    emit(&json_line(&result)?, None)
}

fn gen_scene(args: GenSceneArgs) -> CliResult {
    let spec = SceneSpec {
        height: args.height,
        width: args.width,
        dim: args.dim,
        parts: args.parts,
        object: args.object,
        noise: args.noise,
        background_textures: args.textures,
        layout_shift: !args.no_shift,
        stride: args.stride,
        seed: RngSeed(args.seed),
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        context: format!("creating {}", dir.display()),
        source: e,
    })?;
    write_feature_map(&scene.reference, dir.join("reference.npy"))?;
    write_mask(&scene.reference_mask, dir.join("reference_mask.pgm"))?;
    write_feature_map(&scene.target, dir.join("target.npy"))?;
    write_mask(&scene.target_mask, dir.join("target_mask.pgm"))?;
    emit(&json_line(&spec)?, Some(&dir.join("scene.json")))
}

fn bench(args: BenchArgs) -> CliResult {
    let report = match args.jobs {
        None => run_benchmark(&args.config)?,
        Some(jobs) => {
            let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Io {
                context: format!("reading {}", args.config.display()),
                source: e,
            })?;
            let mut cfg = partprompt::eval::BenchConfig::from_toml(&text, &args.config)?;
            cfg.jobs = jobs;
            partprompt::eval::run_benchmark_config(&cfg)?
        }
    };
    if let Some(path) = &args.csv {
        emit(&report.to_csv()?, Some(path))?;
    }
    emit(&report.to_json(), args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Prompt(a) => prompt(a),
        Command::Retrieve(a) => retrieve(a),
        Command::SegmentMock(a) => segment_mock(a),
        Command::Distance(a) => distance_cmd(a),
        Command::GenScene(a) => gen_scene(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
