//! Command line entry point: `generate` builds datasets, `run`
//! executes one experiment, `noise-model` evaluates the propagation
//! analysis and `sweep` runs a parameter grid.
//!
//! Exit code 0 on success; otherwise a machine-readable error JSON is
//! printed on stderr (`{"error":{"kind":...,"message":...}}`) with a
//! nonzero exit code.

use clap::{Args, Parser, Subcommand};
use htm_core::dataset::{
    generate_dataset, read_manifest, DatasetError, GenerateConfig, GeometryPreset,
};
use htm_core::encoder::EncoderConfig;
use htm_core::noise_model::{NoiseModelError, PropagationParams};
use htm_core::params::SpParams;
use htm_core::pipeline::{
    run_experiment, run_noise_model, write_outputs, ExperimentConfig, PipelineError,
};
use htm_core::report::Mode;
use htm_core::svm::SvmConfig;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug)]
enum CliError {
    Usage(clap::Error),
    Config(String),
    Dataset(DatasetError),
    Pipeline(PipelineError),
    NoiseModel(NoiseModelError),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Dataset(_) => "dataset",
            CliError::Pipeline(_) => "pipeline",
            CliError::NoiseModel(_) => "noise_model",
            CliError::Io(..) => "io",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(e) => e.to_string(),
            CliError::Config(msg) => msg.clone(),
            CliError::Dataset(e) => e.to_string(),
            CliError::Pipeline(e) => e.to_string(),
            CliError::NoiseModel(e) => e.to_string(),
            CliError::Io(path, e) => format!("{}: {e}", path.display()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Dataset(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<NoiseModelError> for CliError {
    fn from(e: NoiseModelError) -> Self {
        CliError::NoiseModel(e)
    }
}

#[derive(Parser)]
#[command(
    name = "htm",
    about = "Spatial-pooler video classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled shape-video dataset with noisy test copies.
    Generate(GenerateArgs),
    /// Run one classification experiment from a manifest.
    Run(RunArgs),
    /// Evaluate the noise-propagation model against Monte Carlo.
    NoiseModel(NoiseModelArgs),
    /// Run an experiment grid over pooler/encoder parameters.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    videos_per_class: usize,
    #[arg(long, default_value_t = 32)]
    frames: usize,
    /// R16, R8, R4, or WIDTHxHEIGHT.
    #[arg(long, default_value = "R16")]
    geometry: String,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Noise sigmas for the test-split copies.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sigmas: Vec<f64>,
    /// Shape radius as a fraction of the smaller frame dimension.
    #[arg(long)]
    shape_scale: Option<f64>,
    /// Anti-aliased edge ramp width in pixels.
    #[arg(long)]
    edge_softness: Option<f64>,
    /// Full rotations over one video.
    #[arg(long)]
    rotation_turns: Option<f64>,
    #[arg(long)]
    zoom_min: Option<f64>,
    #[arg(long)]
    zoom_max: Option<f64>,
    #[arg(long)]
    scale_min: Option<f64>,
    #[arg(long)]
    scale_max: Option<f64>,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file carrying a full experiment configuration; flags
    /// override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// single | multiple | pass-through
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    columns: Option<usize>,
    #[arg(long)]
    synapses: Option<usize>,
    #[arg(long)]
    min_overlap: Option<usize>,
    #[arg(long)]
    winners: Option<usize>,
    #[arg(long)]
    perm_inc: Option<f64>,
    #[arg(long)]
    perm_dec: Option<f64>,
    #[arg(long)]
    connected_perm: Option<f64>,
    #[arg(long)]
    boost: Option<f64>,
    /// Enable Numenta-style duty-cycle boosting during learning.
    #[arg(long)]
    boosting: bool,
    #[arg(long)]
    max_boost: Option<f64>,
    #[arg(long)]
    ratio: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    threshold_c: Option<f64>,
    #[arg(long)]
    gaussian_sigma: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sigmas: Vec<f64>,
    #[arg(long)]
    svm_lambda: Option<f64>,
    #[arg(long)]
    svm_epochs: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct NoiseModelArgs {
    /// Input vector size; a comma list sweeps a grid.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Signal ones.
    #[arg(long, value_delimiter = ',', required = true)]
    nb: Vec<usize>,
    /// Synapses per column.
    #[arg(long, value_delimiter = ',', required = true)]
    s: Vec<usize>,
    #[arg(long, default_value = "2048")]
    c: usize,
    /// Permanence survival ratio.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    m: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    min_overlap: Vec<usize>,
    /// Rewritten noise bits.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    w: Vec<usize>,
    /// Ones among the rewritten bits; defaults to w/2 per point.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    wb: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of the aligned table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// single | multiple | pass-through
    #[arg(long, default_value = "multiple")]
    mode: String,
    #[arg(long, value_delimiter = ',', default_value = "512")]
    columns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    synapses: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    min_overlap: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "40")]
    winners: Vec<usize>,
    /// Reduction ratios to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    ratios: Vec<usize>,
    /// Independent replicate seeds.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sigmas: Vec<f64>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    threshold_c: Option<f64>,
    #[arg(long)]
    gaussian_sigma: Option<f64>,
    #[arg(long)]
    svm_lambda: Option<f64>,
    #[arg(long)]
    svm_epochs: Option<usize>,
    /// Enable Numenta-style duty-cycle boosting during learning.
    #[arg(long)]
    boosting: bool,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() {
    match try_main() {
        Ok(()) => {}
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.message() }
            });
            eprintln!("{payload}");
            std::process::exit(err.exit_code());
        }
    }
}

fn try_main() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(CliError::Usage)?;
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args),
        Command::NoiseModel(args) => noise_model(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn parse_geometry(s: &str) -> Result<(usize, usize), CliError> {
    if let Some(preset) = GeometryPreset::parse(s) {
        return Ok(preset.dimensions());
    }
    let (w, h) = s.split_once('x').ok_or_else(|| {
        CliError::Config(format!("bad geometry '{s}': expected R16/R8/R4 or WxH"))
    })?;
    let parse = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| CliError::Config(format!("bad geometry dimension '{v}'")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "single" => Ok(Mode::Single),
        "multiple" => Ok(Mode::Multiple),
        "pass_through" | "passthrough" => Ok(Mode::PassThrough),
        other => Err(CliError::Config(format!(
            "unknown mode '{other}': expected single, multiple or pass-through"
        ))),
    }
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let (width, height) = parse_geometry(&args.geometry)?;
    let mut orbit = htm_core::dataset::OrbitConfig::default();
    let mut customized = false;
    let mut set = |slot: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            *slot = v;
            customized = true;
        }
    };
    set(&mut orbit.shape_scale, args.shape_scale);
    set(&mut orbit.edge_softness, args.edge_softness);
    set(&mut orbit.rotation_turns, args.rotation_turns);
    set(&mut orbit.zoom_min, args.zoom_min);
    set(&mut orbit.zoom_max, args.zoom_max);
    set(&mut orbit.scale_min, args.scale_min);
    set(&mut orbit.scale_max, args.scale_max);
    let orbit = customized.then_some(orbit);
    let manifest = generate_dataset(&GenerateConfig {
        out_dir: args.out_dir.clone(),
        videos_per_class: args.videos_per_class,
        frames: args.frames,
        width,
        height,
        train_fraction: args.train_fraction,
        noise_sigmas: args.sigmas,
        seed: args.seed,
        orbit,
    })?;
    println!(
        "wrote {} videos ({} files) to {}",
        6 * manifest.videos_per_class,
        manifest.entries.len(),
        args.out_dir.display()
    );
    println!("manifest: {}", args.out_dir.join("manifest.json").display());
    Ok(())
}

/// Builds the experiment configuration: config-file values first,
/// explicit flags on top, pooler input size derived from the manifest.
fn build_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let manifest_path = args.manifest.clone().ok_or_else(|| {
                CliError::Config("either --config or --manifest is required".into())
            })?;
            ExperimentConfig {
                mode: Mode::Multiple,
                manifest: manifest_path,
                sp: SpParams::reference(1),
                encoder: EncoderConfig::default(),
                svm: SvmConfig::default(),
                sigmas: vec![],
                seed: args.seed,
                threads: 0,
                max_epochs: 1,
            }
        }
    };
    if let Some(manifest) = &args.manifest {
        config.manifest = manifest.clone();
    }
    if let Some(mode) = &args.mode {
        config.mode = parse_mode(mode)?;
    }
    config.seed = args.seed;
    if let Some(v) = args.columns {
        config.sp.columns = v;
    }
    if let Some(v) = args.synapses {
        config.sp.synapses_per_column = v;
    }
    if let Some(v) = args.min_overlap {
        config.sp.min_overlap = v;
    }
    if let Some(v) = args.winners {
        config.sp.winners_set_size = v;
    }
    if let Some(v) = args.perm_inc {
        config.sp.perm_increment = v;
    }
    if let Some(v) = args.perm_dec {
        config.sp.perm_decrement = v;
    }
    if let Some(v) = args.connected_perm {
        config.sp.connected_perm = v;
    }
    if let Some(v) = args.boost {
        config.sp.boost = v;
    }
    if args.boosting {
        config.sp.duty_boosting = true;
    }
    if let Some(v) = args.max_boost {
        config.sp.max_boost = v;
    }
    if let Some(v) = args.ratio {
        config.encoder.reduction_ratio = v;
    }
    if let Some(v) = args.block_size {
        config.encoder.block_size = v;
        config.encoder.gaussian_sigma = (v.saturating_sub(1)) as f64 / 6.0;
    }
    if let Some(v) = args.threshold_c {
        config.encoder.threshold_c = v;
    }
    if let Some(v) = args.gaussian_sigma {
        config.encoder.gaussian_sigma = v;
    }
    if !args.sigmas.is_empty() {
        config.sigmas = args.sigmas.clone();
    }
    if let Some(v) = args.svm_lambda {
        config.svm.lambda = v;
    }
    if let Some(v) = args.svm_epochs {
        config.svm.epochs = v;
    }
    if let Some(v) = args.threads {
        config.threads = v;
    }
    if let Some(v) = args.max_epochs {
        config.max_epochs = v;
    }

    // The pooler input size follows the dataset geometry.
    let manifest = read_manifest(&config.manifest)?;
    let r = config.encoder.reduction_ratio.max(1);
    config.sp.input_size = (manifest.width / r) * (manifest.height / r);
    Ok(config)
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let config = build_config(&args)?;
    let (report, trace) = run_experiment(&config)?;
    write_outputs(&report, &trace, &args.out_dir)?;
    print!("{}", report.to_text());
    println!("report: {}", args.out_dir.join("report.json").display());
    Ok(())
}

fn noise_model(args: NoiseModelArgs) -> Result<(), CliError> {
    let mut points = Vec::new();
    for &n in &args.n {
        for &nb in &args.nb {
            for &s in &args.s {
                for &m in &args.m {
                    for &o_m in &args.min_overlap {
                        for (wi, &w) in args.w.iter().enumerate() {
                            let w_b = args.wb.get(wi).copied().unwrap_or(w / 2);
                            points.push(PropagationParams {
                                n,
                                n_b: nb,
                                s,
                                c: args.c,
                                m,
                                o_m,
                                w,
                                w_b,
                            });
                        }
                    }
                }
            }
        }
    }

    let reports = points
        .iter()
        .map(|p| run_noise_model(p, args.trials, args.seed))
        .collect::<Result<Vec<_>, _>>()?;

    if args.json {
        let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
        println!("{json}");
        return Ok(());
    }
    if reports.len() == 1 {
        print!("{}", reports[0].to_text());
        return Ok(());
    }
    // One row per grid point.
    println!(
        "{:<6} {:<6} {:<4} {:<5} {:<4} {:<5} {:<5} {:>12} {:>12} {:>12}",
        "n", "n_b", "s", "m", "o_m", "w", "w_b", "P_signal", "P_noise", "ratio"
    );
    for r in &reports {
        let p = r.params;
        println!(
            "{:<6} {:<6} {:<4} {:<5} {:<4} {:<5} {:<5} {:>12.6e} {:>12.6e} {:>12.6}",
            p.n,
            p.n_b,
            p.s,
            p.m,
            p.o_m,
            p.w,
            p.w_b,
            r.p_signal.value,
            r.p_noise.value,
            r.impact_ratio
        );
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let mode = parse_mode(&args.mode)?;
    let manifest = read_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Io(args.out_dir.clone(), e))?;

    let mut rows: Vec<serde_json::Value> = Vec::new();
    let mut csv = String::from(
        "columns,synapses,min_overlap,winners,ratio,seed,sigma,f1,similarity_ratio,feature_dim\n",
    );
    for &ratio in &args.ratios {
        for &columns in &args.columns {
            for &synapses in &args.synapses {
                for &min_overlap in &args.min_overlap {
                    for &winners in &args.winners {
                        for &seed in &args.seeds {
                            let mut encoder = EncoderConfig {
                                reduction_ratio: ratio,
                                ..EncoderConfig::default()
                            };
                            if let Some(v) = args.block_size {
                                encoder.block_size = v;
                                encoder.gaussian_sigma = (v.saturating_sub(1)) as f64 / 6.0;
                            }
                            if let Some(v) = args.threshold_c {
                                encoder.threshold_c = v;
                            }
                            if let Some(v) = args.gaussian_sigma {
                                encoder.gaussian_sigma = v;
                            }
                            let input_size = (manifest.width / ratio) * (manifest.height / ratio);
                            let mut svm = SvmConfig::default();
                            if let Some(v) = args.svm_lambda {
                                svm.lambda = v;
                            }
                            if let Some(v) = args.svm_epochs {
                                svm.epochs = v;
                            }
                            let config = ExperimentConfig {
                                mode,
                                manifest: args.manifest.clone(),
                                sp: SpParams {
                                    columns,
                                    synapses_per_column: synapses,
                                    min_overlap,
                                    winners_set_size: winners,
                                    duty_boosting: args.boosting,
                                    ..SpParams::reference(input_size)
                                },
                                encoder,
                                svm,
                                sigmas: args.sigmas.clone(),
                                seed,
                                threads: args.threads,
                                max_epochs: args.max_epochs.unwrap_or(1),
                            };
                            let (report, _) = run_experiment(&config)?;
                            for result in &report.results {
                                let ratio_txt = result
                                    .similarity
                                    .overall
                                    .map(|v| v.to_string())
                                    .unwrap_or_else(|| "nan".into());
                                let _ = writeln!(
                                    csv,
                                    "{columns},{synapses},{min_overlap},{winners},{ratio},{seed},{},{},{},{}",
                                    result.sigma,
                                    result.eval.weighted_f1,
                                    ratio_txt,
                                    report.feature_dim,
                                );
                                rows.push(serde_json::json!({
                                    "columns": columns,
                                    "synapses": synapses,
                                    "min_overlap": min_overlap,
                                    "winners": winners,
                                    "ratio": ratio,
                                    "seed": seed,
                                    "sigma": result.sigma,
                                    "f1": result.eval.weighted_f1,
                                    "similarity_ratio": result.similarity.overall,
                                    "feature_dim": report.feature_dim,
                                }));
                            }
                        }
                    }
                }
            }
        }
    }

    let csv_path = args.out_dir.join("sweep.csv");
    std::fs::write(&csv_path, csv).map_err(|e| CliError::Io(csv_path.clone(), e))?;
    let json_path = args.out_dir.join("sweep.json");
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    std::fs::write(&json_path, json).map_err(|e| CliError::Io(json_path.clone(), e))?;
    println!("sweep rows: {}", rows.len());
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}
