use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmkge::config::{self, Settings};
use mmkge::core::synth::{planted, random_graph, PlantedConfig};
use mmkge::core::{EvalConfig, FeatureTable, ModelParams, ProjectionMode, Strategy};
use mmkge::eval::{bench_inference, evaluate_triples};
use mmkge::run::{self, FeatureMode};
use mmkge::{checkpoint, dataset, mmkf, Error, Result};

#[derive(Parser)]
#[command(name = "mmkge", version, about = "Multimodal knowledge graph embedding with twins negative sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the filtered protocol.
    Eval(EvalArgs),
    /// Dump negatives for one training batch as TSV.
    Sample(SampleArgs),
    /// Time repeated full evaluations.
    Bench(BenchArgs),
    /// Write a synthetic MMKF feature file for a dataset.
    GenFeatures(GenFeaturesArgs),
    /// Validation MRR for each (k, strategy) pair, as CSV.
    SweepK(SweepArgs),
    /// Check an MMKF file against a dataset.
    ValidateFeatures(ValidateArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
}

/// Flags mirroring the config keys.
#[derive(Args, Default)]
struct ConfigFlags {
    /// TOML config, or a manifest.json to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    feature_seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    n_batches: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    d_e: Option<usize>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    twins_draw: Option<String>,
    #[arg(long)]
    normalize_entities: Option<bool>,
    #[arg(long)]
    freeze_projection: Option<bool>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    filter_splits: Option<String>,
}

impl ConfigFlags {
    fn settings(&self) -> Settings {
        Settings {
            preset: self.preset.clone(),
            dataset: self.dataset.clone(),
            features: self.features.clone(),
            feature_dim: self.feature_dim,
            feature_seed: self.feature_seed,
            out_dir: self.out_dir.clone(),
            threads: self.threads,
            margin: self.margin,
            learning_rate: self.learning_rate,
            n_batches: self.n_batches,
            k: self.k,
            epochs: self.epochs,
            seed: self.seed,
            strategy: self.strategy.clone(),
            mask: self.mask.clone(),
            p: self.p,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            d_e: self.d_e,
            loss: self.loss.clone(),
            side: self.side.clone(),
            twins_draw: self.twins_draw.clone(),
            normalize_entities: self.normalize_entities,
            freeze_projection: self.freeze_projection,
            eval_every: self.eval_every,
            patience: self.patience,
            filter_splits: self.filter_splits.clone(),
        }
    }

    fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        Settings::resolve(&file, &self.settings())
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Print one line per epoch to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Valid,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Cached,
    Recompute,
}

impl From<ProjectionArg> for ProjectionMode {
    fn from(p: ProjectionArg) -> Self {
        match p {
            ProjectionArg::Cached => ProjectionMode::Cached,
            ProjectionArg::Recompute => ProjectionMode::Recompute,
        }
    }
}

#[derive(Args)]
struct EvalFlags {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// MMKF file; without it, synthetic Xavier features of the checkpoint's d_m.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    feature_seed: u64,
    #[arg(long, default_value = "full")]
    mask: String,
    #[arg(long, default_value_t = 1)]
    p: u32,
    #[arg(long, default_value = "train,valid,test")]
    filter_splits: String,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    ks: Vec<u32>,
    #[arg(long, value_enum, default_value = "cached")]
    projection: ProjectionArg,
    #[arg(long)]
    threads: Option<usize>,
}

impl EvalFlags {
    fn eval_config(&self) -> Result<EvalConfig> {
        let cfg = EvalConfig {
            ks: self.ks.clone(),
            filter_splits: config::parse_splits(&self.filter_splits)?,
            mask: config::parse_mask(&self.mask)?,
            p: config::parse_p(self.p)?,
            projection: self.projection.into(),
            ..EvalConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(&self) -> Result<(mmkge::core::KnowledgeGraph, FeatureTable, ModelParams<f32>)> {
        let graph = dataset::load_graph(&self.dataset)?;
        let params = checkpoint::load(&self.checkpoint)?;
        let features = match &self.features {
            Some(path) => mmkf::load_features(path, graph.entity_count(), self.feature_seed)?,
            None => FeatureTable::xavier(graph.entity_count(), params.d_m(), self.feature_seed)?,
        };
        Ok((graph, features, params))
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    eval: EvalFlags,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, default_value_t = 0)]
    epoch: usize,
    #[arg(long, default_value_t = 0)]
    batch: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    eval: EvalFlags,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Also time both projection modes on this many leading test triples.
    #[arg(long)]
    compare_projection: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureModeArg {
    Xavier,
    Zeros,
}

#[derive(Args)]
struct GenFeaturesArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 768)]
    dim: usize,
    #[arg(long, value_enum, default_value = "xavier")]
    mode: FeatureModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "twins,normal")]
    strategies: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Entities on a line, relations as fixed shifts.
    Planted,
    /// Uniformly random triples.
    Random,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "planted")]
    kind: SynthKind,
    #[arg(long, default_value_t = 20)]
    entities: usize,
    #[arg(long, default_value_t = 3)]
    relations: usize,
    /// Train/valid/test sizes for random graphs.
    #[arg(long, value_delimiter = ',', default_value = "1000,100,100")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn train(args: &TrainArgs) -> Result<()> {
    let settings = args.flags.resolve()?;
    let verbose = args.verbose;
    let run = run::train_run(&settings, &command_line(), |r| {
        if verbose {
            eprintln!("epoch {} loss {:.6} active {}", r.epoch, r.loss, r.active_positives);
        }
    })?;
    if let Some(report) = &run.eval {
        print!("{}", report.table());
    }
    println!("{}", run.dir.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.eval.eval_config()?;
    let (graph, features, params) = args.eval.load()?;
    let triples = match args.split {
        SplitArg::Test => graph.test(),
        SplitArg::Valid => graph.valid(),
    };
    let report = evaluate_triples(&params, &features, &graph, triples, &cfg, args.eval.threads)?;
    print!("{}", report.table());
    if let Some(out) = &args.out {
        run::write_json(out, &report)?;
    }
    Ok(())
}

fn sample(args: &SampleArgs) -> Result<()> {
    let settings = args.flags.resolve()?;
    let cfg = settings.train_config()?;
    let graph =
        dataset::load_graph(settings.dataset.as_deref().ok_or_else(|| Error::Config("missing key `dataset`".into()))?)?;
    let (batch, negatives) = run::sample_batch(&graph, &cfg, args.epoch, args.batch)?;
    write_out(args.out.as_deref(), &run::negatives_tsv(&batch, &negatives))
}

fn bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.eval.eval_config()?;
    let (graph, features, params) = args.eval.load()?;
    let report = bench_inference(&params, &features, &graph, graph.test(), &cfg, args.repeats, args.eval.threads)?;
    let mut json = serde_json::json!({ "full": report });
    eprintln!(
        "full pass: {} triples, median {:.3}s min {:.3}s max {:.3}s",
        report.report.triples, report.median, report.min, report.max
    );
    if let Some(n) = args.compare_projection {
        let subset = &graph.test()[..n.min(graph.test().len())];
        let mut modes = serde_json::Map::new();
        for mode in [ProjectionMode::Cached, ProjectionMode::Recompute] {
            let c = EvalConfig { projection: mode, ..cfg.clone() };
            let r = bench_inference(&params, &features, &graph, subset, &c, args.repeats, args.eval.threads)?;
            eprintln!("{:<10} {} triples, median {:.3}s", r.report.projection, subset.len(), r.median);
            modes.insert(r.report.projection.clone(), serde_json::to_value(&r)?);
        }
        json["projection"] = modes.into();
    }
    write_out(args.out.as_deref(), &(serde_json::to_string_pretty(&json)? + "\n"))
}

fn gen_features(args: &GenFeaturesArgs) -> Result<()> {
    let graph = dataset::load_graph(&args.dataset)?;
    let mode = match args.mode {
        FeatureModeArg::Xavier => FeatureMode::Xavier,
        FeatureModeArg::Zeros => FeatureMode::Zeros,
    };
    let table = run::gen_features(graph.entity_count(), args.dim, mode, args.seed)?;
    mmkf::write_features(&args.out, &table)
}

fn sweep_k(args: &SweepArgs) -> Result<()> {
    let settings = args.flags.resolve()?;
    let cfg = settings.train_config()?;
    let strategies = args.strategies.iter().map(|s| config::parse_strategy(s)).collect::<Result<Vec<Strategy>>>()?;
    let inputs = run::load_inputs(&settings)?;
    let rows = run::sweep_k(&inputs, &cfg, &args.ks, &strategies, settings.threads)?;
    match &args.out {
        Some(path) => run::write_sweep(path, &rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn validate_features(args: &ValidateArgs) -> Result<()> {
    let graph = dataset::load_graph(&args.dataset)?;
    let v = mmkf::validate(&args.file, graph.entity_count())?;
    println!("{}", serde_json::to_string(&v)?);
    if v.is_clean() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} entities without a record, {} with non-finite values",
            v.missing.len(),
            v.non_finite.len()
        )))
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let (graph, features) = match args.kind {
        SynthKind::Planted => {
            let p = planted(&PlantedConfig {
                entities: args.entities,
                relations: args.relations,
                feature_dim: args.feature_dim,
                seed: args.seed,
                ..PlantedConfig::default()
            })?;
            (p.graph, p.features)
        }
        SynthKind::Random => {
            let [tr, va, te] = <[usize; 3]>::try_from(args.sizes.as_slice())
                .map_err(|_| Error::Config("--sizes takes train,valid,test".into()))?;
            let g = random_graph(args.entities, args.relations, [tr, va, te], args.seed)?;
            let f = FeatureTable::xavier(args.entities, args.feature_dim, args.seed)?;
            (g, f)
        }
    };
    run::write_dataset(&args.out, &graph, &features)
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                e.exit();
            }
            let text = e.render().to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a),
        Command::Bench(a) => bench(a),
        Command::GenFeatures(a) => gen_features(a),
        Command::SweepK(a) => sweep_k(a),
        Command::ValidateFeatures(a) => validate_features(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
