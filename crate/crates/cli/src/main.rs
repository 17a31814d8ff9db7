//! Command-line front end: dataset generation, training, evaluation,
//! benchmarking, gradient checking, and system inspection.

use std::fs;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use nsls::augment::AugmentationConfig;
use nsls::dataset::{
    build_manifest, draw_grid_dims, generate_grid_system, generate_grid_system_wide,
    generate_random_spd, make_splits, sample_seed, save_sample, DatasetManifest,
    LinearSystemSample,
};
use nsls::dense::DenseVector;
use nsls::eval::{
    ablation_csv, ablation_run, evaluate, hybrid_bench, hybrid_csv, timing_bench, timing_csv,
    AblationConfig, TimingConfig, TIMING_DISCLAIMER,
};
use nsls::graph::SystemGraph;
use nsls::mm::{read_matrix_file, read_vector_file, write_vector_file};
use nsls::model::{ModelConfig, Predictor, TrainedModel};
use nsls::train::{
    gradient_check, prepare_sample, train, LossMode, PreparedSample, TrainConfig,
    EPOCH_CSV_HEADER,
};
use nsls::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "nsls", version, about = "Neural direction prediction for sparse symmetric linear systems")]
struct Cli {
    /// Base seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for evaluation; 1 keeps runs deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Optional TOML file with model/augment/train settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of linear systems with manifests for each split.
    GenDataset(GenDatasetArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Score a trained model on a held-out split.
    Eval(EvalArgs),
    /// Predict a solution for one system and report its residual.
    Solve(SolveArgs),
    /// Time inference against conjugate gradients at matched accuracy.
    Bench(BenchArgs),
    /// Count CG iterations saved by warm starting from the prediction.
    HybridBench(HybridBenchArgs),
    /// Compare input feature presets by training one model per preset.
    Ablate(AblateArgs),
    /// Verify analytic gradients against central differences.
    GradCheck(GradCheckArgs),
    /// Print structural and spectral facts about one system.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenDatasetArgs {
    /// Output directory for samples and manifests.
    #[arg(long)]
    out: PathBuf,
    /// Number of systems to generate.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Smallest admissible number of unknowns.
    #[arg(long, default_value_t = 50)]
    min_n: usize,
    /// Largest admissible number of unknowns.
    #[arg(long, default_value_t = 200)]
    max_n: usize,
    /// Generator family: grid, grid-wide, or random-spd.
    #[arg(long, default_value = "grid")]
    generator: String,
    /// Off-diagonal fill probability for random-spd.
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    /// Lower bound of the grid conductivity range.
    #[arg(long, default_value_t = 0.1)]
    coeff_lo: f64,
    /// Upper bound of the grid conductivity range.
    #[arg(long, default_value_t = 10.0)]
    coeff_hi: f64,
    /// Fraction of samples assigned to the training split.
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Fraction of samples assigned to the validation split.
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    /// Fraction of samples assigned to the test split.
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory holding train.manifest and val.manifest.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-epoch CSV log (default: <out>.log.csv).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Loss mode: cos or cos+res.
    #[arg(long)]
    loss: Option<String>,
    /// Feature preset overriding the config file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct DataSource {
    /// Dataset directory; the split manifest inside it is used.
    #[arg(long, group = "source")]
    data: Option<PathBuf>,
    /// Explicit manifest file to load samples from.
    #[arg(long, group = "source")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Trained checkpoint to score.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    source: DataSource,
    /// Optional CSV output path; stdout gets the summary either way.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Trained checkpoint to predict with.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Coefficient matrix in Matrix Market format.
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side in Matrix Market format.
    #[arg(long)]
    rhs: PathBuf,
    /// Optional path to write the predicted solution.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print digests of every pipeline stage.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Relative error the CG reference column must reach.
    #[arg(long, default_value_t = 1e-6)]
    delta_target: f64,
    /// Untimed runs before measurement.
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Timed runs whose median is reported.
    #[arg(long, default_value_t = 10)]
    measured: usize,
    /// CG iteration cap as a multiple of the system size.
    #[arg(long, default_value_t = 20)]
    max_iter_factor: usize,
}

#[derive(Debug, Args)]
struct HybridBenchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Decreasing relative error targets.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3])]
    targets: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    max_iter_factor: usize,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Dataset directory holding train.manifest and test.manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Presets to compare (default: every built-in preset).
    #[arg(long, value_delimiter = ',')]
    presets: Option<Vec<String>>,
    /// Skip the extra cosine-only training run.
    #[arg(long)]
    no_loss_ablation: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    /// Central difference step size.
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Coefficient matrix in Matrix Market format.
    #[arg(long)]
    matrix: PathBuf,
    /// Optional right-hand side for the graph dump.
    #[arg(long)]
    rhs: Option<PathBuf>,
    /// Print the full node/edge listing when n is at most this.
    #[arg(long, default_value_t = 8)]
    dump_cap: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    augment: AugmentSection,
    #[serde(default)]
    train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    hidden: Option<usize>,
    num_blocks: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentSection {
    preset: Option<String>,
    include_diagonal: Option<bool>,
    jacobi_steps: Option<usize>,
    cg_steps: Option<usize>,
    arnoldi_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    base_lr: Option<f64>,
    loss: Option<String>,
}

/// Fully resolved settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
struct Settings {
    hidden: usize,
    num_blocks: usize,
    model_seed: u64,
    augment: AugmentationConfig,
    train: TrainConfig,
}

fn parse_loss(name: &str) -> Result<LossMode> {
    match name {
        "cos" => Ok(LossMode::Cosine),
        "cos+res" => Ok(LossMode::CosinePlusResidual),
        other => Err(Error::InvalidConfig(format!(
            "unknown loss mode '{other}' (expected cos or cos+res)"
        ))),
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn resolve_settings(file: &FileConfig, global_seed: u64) -> Result<Settings> {
    let mut augment = match &file.augment.preset {
        Some(name) => AugmentationConfig::preset(name)?,
        None => AugmentationConfig::default(),
    };
    if let Some(v) = file.augment.include_diagonal {
        augment.include_diagonal = v;
    }
    if let Some(v) = file.augment.jacobi_steps {
        augment.jacobi_steps = v;
    }
    if let Some(v) = file.augment.cg_steps {
        augment.cg_steps = v;
    }
    if let Some(v) = file.augment.arnoldi_steps {
        augment.arnoldi_steps = v;
    }
    let mut train = TrainConfig::default();
    if let Some(v) = file.train.epochs {
        train.epochs = v;
    }
    if let Some(v) = file.train.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = file.train.base_lr {
        train.base_lr = v;
    }
    if let Some(name) = &file.train.loss {
        train.loss_mode = parse_loss(name)?;
    }
    train.shuffle_seed = global_seed;
    Ok(Settings {
        hidden: file.model.hidden.unwrap_or(32),
        num_blocks: file.model.num_blocks.unwrap_or(4),
        model_seed: file.model.seed.unwrap_or(global_seed),
        augment,
        train,
    })
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::MalformedInput { .. }
        | Error::ChecksumMismatch { .. }
        | Error::InconsistentSample { .. } => 3,
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            std::process::exit(exit_code_for(&e));
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let file = load_file_config(&cli.config)?;
    let settings = resolve_settings(&file, cli.seed)?;
    match cli.command {
        Command::GenDataset(args) => cmd_gen_dataset(&args, cli.seed),
        Command::Train(args) => cmd_train(&args, settings),
        Command::Eval(args) => cmd_eval(&args, cli.threads),
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::HybridBench(args) => cmd_hybrid_bench(&args, cli.threads),
        Command::Ablate(args) => cmd_ablate(&args, settings),
        Command::GradCheck(args) => cmd_grad_check(&args, cli.seed),
        Command::Inspect(args) => cmd_inspect(&args),
    }
}

fn path_display(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_gen_dataset(args: &GenDatasetArgs, seed: u64) -> Result<i32> {
    if args.count == 0 {
        return Err(Error::InvalidConfig("--count must be positive".into()));
    }
    if !(args.coeff_lo > 0.0 && args.coeff_hi > args.coeff_lo) {
        return Err(Error::InvalidConfig(
            "conductivity range must satisfy 0 < lo < hi".into(),
        ));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(path_display(&args.out), e))?;
    let coeff = (args.coeff_lo, args.coeff_hi);
    let mut stems = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let sseed = sample_seed(seed, i as u64);
        let sample = match args.generator.as_str() {
            "grid" => {
                let (rows, cols) = draw_grid_dims(args.min_n, args.max_n, sseed)?;
                generate_grid_system(rows, cols, coeff, sseed)?
            }
            "grid-wide" => {
                let (rows, cols) = draw_grid_dims(args.min_n, args.max_n, sseed)?;
                generate_grid_system_wide(rows, cols, coeff, sseed)?
            }
            "random-spd" => {
                if args.min_n > args.max_n {
                    return Err(Error::InvalidConfig(
                        "--min-n must not exceed --max-n".into(),
                    ));
                }
                let span = (args.max_n - args.min_n + 1) as u64;
                let n = args.min_n + (sample_seed(sseed, 0x5eed) % span) as usize;
                generate_random_spd(n, args.density, sseed)?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown generator '{other}' (expected grid, grid-wide, or random-spd)"
                )))
            }
        };
        let stem = format!("sample_{i:05}");
        save_sample(args.out.join(&stem), &sample)?;
        stems.push(stem);
    }
    let splits = make_splits(
        args.count,
        (args.train_frac, args.val_frac, args.test_frac),
        seed,
    )?;
    let descr = format!("{} n={}..{}", args.generator, args.min_n, args.max_n);
    for (name, indices) in ["train", "val", "test"].into_iter().zip(splits.iter()) {
        let chosen: Vec<String> = indices.iter().map(|&i| stems[i].clone()).collect();
        let manifest = build_manifest(name, &descr, &chosen, &args.out)?;
        manifest.save(args.out.join(format!("{name}.manifest")))?;
        println!("{name}: {} samples", chosen.len());
    }
    println!("dataset written to {}", args.out.display());
    Ok(0)
}

fn load_split(dir: &Path, split: &str) -> Result<Vec<LinearSystemSample>> {
    let manifest = DatasetManifest::load(dir.join(format!("{split}.manifest")))?;
    manifest.load_samples(dir)
}

/// Loads samples from either a dataset directory (named split) or a manifest file.
fn load_source(source: &DataSource, split: &str) -> Result<(Vec<LinearSystemSample>, String)> {
    if let Some(dir) = &source.data {
        let samples = load_split(dir, split)?;
        return Ok((samples, path_display(&dir.join(format!("{split}.manifest")))));
    }
    let path = source.manifest.as_ref().expect("clap enforces the group");
    let manifest = DatasetManifest::load(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok((manifest.load_samples(base)?, path_display(path)))
}

fn prepare_all(samples: &[LinearSystemSample], augment: &AugmentationConfig) -> Result<Vec<PreparedSample>> {
    samples
        .iter()
        .map(|s| {
            let label = format!("{}-{}", s.meta.generator, s.meta.seed);
            prepare_sample(label, &s.a, &s.b, &s.x, augment)
        })
        .collect()
}

fn cmd_train(args: &TrainArgs, mut settings: Settings) -> Result<i32> {
    if let Some(name) = &args.preset {
        settings.augment = AugmentationConfig::preset(name)?;
    }
    if let Some(v) = args.hidden {
        settings.hidden = v;
    }
    if let Some(v) = args.blocks {
        settings.num_blocks = v;
    }
    if let Some(v) = args.epochs {
        settings.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        settings.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        settings.train.base_lr = v;
    }
    if let Some(name) = &args.loss {
        settings.train.loss_mode = parse_loss(name)?;
    }

    let train_raw = load_split(&args.data, "train")?;
    let val_manifest = args.data.join("val.manifest");
    let val_raw = if val_manifest.exists() {
        load_split(&args.data, "val")?
    } else {
        log::warn!("no val.manifest found; training without validation rows");
        Vec::new()
    };
    log::info!(
        "training on {} samples ({} validation), features: {}",
        train_raw.len(),
        val_raw.len(),
        settings.augment.describe()
    );
    let train_set = prepare_all(&train_raw, &settings.augment)?;
    let val_set = prepare_all(&val_raw, &settings.augment)?;

    let config = ModelConfig::new(
        settings.augment.d_in(),
        settings.hidden,
        settings.num_blocks,
        settings.model_seed,
    );
    let mut model = TrainedModel::init(config, settings.augment.clone())?;

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("log.csv"));
    let mut log_file =
        File::create(&log_path).map_err(|e| Error::io(path_display(&log_path), e))?;
    writeln!(log_file, "{EPOCH_CSV_HEADER}")
        .map_err(|e| Error::io(path_display(&log_path), e))?;

    let mut write_err = None;
    train(&mut model, &train_set, &val_set, &settings.train, |stats| {
        if stats.split == "train" {
            log::info!(
                "epoch {:>3} loss={:.6} delta={:.4} lr={:.1e}",
                stats.epoch,
                stats.loss_total,
                stats.delta,
                stats.lr
            );
        }
        if write_err.is_none() {
            let row = stats.csv_row();
            if let Err(e) = writeln!(log_file, "{row}").and_then(|_| log_file.flush()) {
                write_err = Some(Error::io(path_display(&log_path), e));
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }

    model.save(&args.out)?;
    println!("checkpoint written to {}", args.out.display());
    println!("epoch log written to {}", log_path.display());
    Ok(0)
}

fn cmd_eval(args: &EvalArgs, threads: usize) -> Result<i32> {
    let model = TrainedModel::load(&args.checkpoint)?;
    let (samples, dataset_id) = load_source(&args.source, "test")?;
    let report = evaluate(
        &model,
        &samples,
        dataset_id,
        path_display(&args.checkpoint),
        threads,
    )?;
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()).map_err(|e| Error::io(path_display(path), e))?;
        println!("per-sample results written to {}", path.display());
    }
    println!("samples = {}", report.rows.len());
    println!("mean_eps = {:.6e}", report.mean_eps);
    println!("mean_delta = {:.6e}", report.mean_delta);
    println!("mean_seconds = {:.6e}", report.mean_seconds);
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let model = TrainedModel::load(&args.checkpoint)?;
    let a = read_matrix_file(&args.matrix)?;
    let b = read_vector_file(&args.rhs)?;
    if args.trace {
        let t = model.trace(&a, &b)?;
        println!("matrix_scale = {:.17e}", t.matrix_scale);
        println!("rhs_scale = {:.17e}", t.rhs_scale);
        println!("scaled_matrix_digest = {}", t.scaled_matrix_digest);
        println!("scaled_rhs_digest = {}", t.scaled_rhs_digest);
        println!("feature_digest = {}", t.feature_digest);
        println!("direction_digest = {}", t.direction_digest);
        println!("mu = {:.17e}", t.mu);
        println!("degenerate = {}", t.degenerate);
        println!("solution_digest = {}", t.solution_digest);
    }
    let pred = model.predict(&a, &b)?;
    if pred.degenerate {
        log::warn!("prediction is degenerate; falling back to the zero vector");
    }
    let residual = a.spmv(&pred.x_hat)?.sub(&b).norm2();
    let b_norm = b.norm2();
    if b_norm > 0.0 {
        println!("relative_residual = {:.6e}", residual / b_norm);
    } else {
        println!("absolute_residual = {:.6e}", residual);
    }
    println!("mu = {:.17e}", pred.mu);
    println!("x_hat:");
    for v in pred.x_hat.iter() {
        println!("{v:.17e}");
    }
    if let Some(path) = &args.out {
        write_vector_file(path, &pred.x_hat)?;
        println!("solution written to {}", path.display());
    }
    Ok(0)
}

fn write_or_print(csv: &str, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, csv).map_err(|e| Error::io(path_display(p), e))?;
            println!("results written to {}", p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let model = TrainedModel::load(&args.checkpoint)?;
    let (samples, _) = load_source(&args.source, "test")?;
    let cfg = TimingConfig {
        warmup: args.warmup,
        measured: args.measured,
        delta_target: args.delta_target,
        max_iter_factor: args.max_iter_factor,
    };
    let rows = timing_bench(&model, &samples, &cfg)?;
    eprintln!("note: {TIMING_DISCLAIMER}");
    write_or_print(&timing_csv(&rows), &args.csv)?;
    Ok(0)
}

fn cmd_hybrid_bench(args: &HybridBenchArgs, threads: usize) -> Result<i32> {
    let model = TrainedModel::load(&args.checkpoint)?;
    let (samples, _) = load_source(&args.source, "test")?;
    let rows = hybrid_bench(&model, &samples, &args.targets, args.max_iter_factor, threads)?;
    write_or_print(&hybrid_csv(&rows), &args.csv)?;
    Ok(0)
}

fn cmd_ablate(args: &AblateArgs, settings: Settings) -> Result<i32> {
    let train_raw = load_split(&args.data, "train")?;
    let eval_raw = load_split(&args.data, "test")?;
    let mut cfg = AblationConfig {
        hidden: settings.hidden,
        num_blocks: settings.num_blocks,
        model_seed: settings.model_seed,
        train: settings.train,
        with_loss_ablation: !args.no_loss_ablation,
        ..AblationConfig::default()
    };
    if let Some(presets) = &args.presets {
        cfg.presets = presets.clone();
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.train.base_lr = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = args.blocks {
        cfg.num_blocks = v;
    }
    let rows = ablation_run(&cfg, &train_raw, &eval_raw, &mut |label| {
        log::info!("ablating: {label}");
    })?;
    write_or_print(&ablation_csv(&rows), &args.csv)?;
    Ok(0)
}

fn cmd_grad_check(args: &GradCheckArgs, seed: u64) -> Result<i32> {
    let augment = AugmentationConfig {
        include_diagonal: true,
        jacobi_steps: 0,
        cg_steps: 2,
        arnoldi_steps: 0,
    };
    let samples = [
        generate_grid_system(3, 4, (0.1, 10.0), seed)?,
        generate_grid_system(2, 5, (0.1, 10.0), seed.wrapping_add(1))?,
    ];
    let prepared = prepare_all(&samples, &augment)?;
    let config = ModelConfig::new(augment.d_in(), args.hidden, args.blocks, seed);
    let model = TrainedModel::init(config, augment)?;
    let report = gradient_check(&model, &prepared, args.step)?;
    println!("{:<24} {:>14}", "group", "max_rel_err");
    for g in &report.groups {
        println!("{:<24} {:>14.6e}", g.name, g.max_rel_err);
    }
    println!(
        "gradient check {} (max_rel_err = {:.6e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.max_rel_err
    );
    Ok(if report.passed { 0 } else { 2 })
}

fn cmd_inspect(args: &InspectArgs) -> Result<i32> {
    let a = read_matrix_file(&args.matrix)?;
    let rhs = match &args.rhs {
        Some(path) => read_vector_file(path)?,
        None => DenseVector::zeros(a.n()),
    };
    println!("n = {}", a.n());
    println!("stored_nnz = {}", a.stored_nnz());
    println!("symmetric_nnz = {}", a.sym_nnz());
    let diameter = a.graph_diameter();
    println!(
        "graph_diameter = {}{}",
        diameter.hops,
        if diameter.exact { "" } else { " (lower bound)" }
    );
    let cond = a.condition_estimate(1e-8, 10_000.max(20 * a.n()));
    println!(
        "condition_estimate = {:.6e}{}",
        cond.kappa,
        if cond.converged { "" } else { " (not converged)" }
    );
    println!("lambda_max = {:.6e}", cond.lambda_max);
    println!("lambda_min = {:.6e}", cond.lambda_min);
    if a.n() <= args.dump_cap {
        let graph = SystemGraph::from_system(a, rhs)?;
        println!("{}", graph.dump());
    }
    Ok(0)
}
