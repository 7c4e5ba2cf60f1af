//! Subcommand implementations, callable without the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mmkge_core::sampler::{self, NegativeSample};
use mmkge_core::train::{train_from, EpochReport};
use mmkge_core::{
    Dims, FeatureTable, KnowledgeGraph, ModelParams, Negatives, SamplerConfig, Strategy, TrainConfig, Triple,
};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_triples, EvalReport};
use crate::manifest::{fingerprint, versions, Fingerprint, RunManifest};
use crate::{checkpoint, dataset, mmkf};

pub struct Inputs {
    pub graph: KnowledgeGraph,
    pub features: FeatureTable,
    pub fingerprints: Vec<Fingerprint>,
}

fn required<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

/// Loads the dataset and features named by `settings`. Without a feature
/// file, every entity gets a synthetic Xavier vector.
pub fn load_inputs(settings: &Settings) -> Result<Inputs> {
    let dir = required(&settings.dataset, "dataset")?;
    let graph = dataset::load_graph(dir)?;
    let mut fingerprints = dataset::dataset_files(dir).iter().map(|p| fingerprint(p)).collect::<Result<Vec<_>>>()?;
    let seed = settings.feature_seed.unwrap_or(0);
    let features = match &settings.features {
        Some(path) => {
            fingerprints.push(fingerprint(path)?);
            mmkf::load_features(path, graph.entity_count(), seed)?
        }
        None => FeatureTable::xavier(
            graph.entity_count(),
            settings.feature_dim.unwrap_or(crate::config::DEFAULT_FEATURE_DIM),
            seed,
        )?,
    };
    Ok(Inputs { graph, features, fingerprints })
}

/// `<out_dir>/<UTC timestamp>`, suffixed when the name is taken.
pub fn fresh_run_dir(out_dir: &Path) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for i in 0.. {
        let name = if i == 0 { stamp.clone() } else { format!("{stamp}-{i}") };
        let dir = out_dir.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

#[derive(Serialize)]
struct LogRow {
    epoch: usize,
    loss: f64,
    active_positives: usize,
    valid_mrr: Option<f64>,
}

pub fn write_train_log(path: &Path, log: &[EpochReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in log {
        w.serialize(LogRow {
            epoch: r.epoch,
            loss: r.loss,
            active_positives: r.active_positives,
            valid_mrr: r.valid_mrr,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub struct TrainRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub params: ModelParams<f32>,
    pub log: Vec<EpochReport>,
    pub eval: Option<EvalReport>,
}

/// Trains with fully resolved settings and writes `manifest.json`,
/// `checkpoint.mmkc`, `train.csv` and (when the test split is non-empty)
/// `eval.json` into a fresh run directory.
pub fn train_run(settings: &Settings, command: &str, mut on_epoch: impl FnMut(&EpochReport)) -> Result<TrainRun> {
    let cfg = settings.train_config()?;
    let inputs = load_inputs(settings)?;
    let (graph, features) = (&inputs.graph, &inputs.features);
    let dims = Dims::new(graph.entity_count(), graph.relation_count(), cfg.d_e, features.dim());
    let init = ModelParams::<f32>::init(dims, cfg.seed)?;
    let outcome = train_from(graph, features, &cfg, init, &mut on_epoch)?;

    let out_dir = required(&settings.out_dir, "out_dir")?;
    let dir = fresh_run_dir(out_dir)?;
    let mut artifacts = BTreeMap::new();
    let ckpt = dir.join("checkpoint.mmkc");
    checkpoint::save(&ckpt, &outcome.params)?;
    artifacts.insert("checkpoint".to_string(), ckpt);
    let log_path = dir.join("train.csv");
    write_train_log(&log_path, &outcome.log)?;
    artifacts.insert("train_log".to_string(), log_path);

    let eval = if graph.test().is_empty() {
        None
    } else {
        let report = evaluate(&outcome.params, features, graph, &cfg.eval_config(), settings.threads)?;
        let path = dir.join("eval.json");
        write_json(&path, &report)?;
        artifacts.insert("eval".to_string(), path);
        Some(report)
    };

    let manifest = RunManifest {
        command: command.to_string(),
        created: chrono::Utc::now().to_rfc3339(),
        seed: cfg.seed,
        config: settings.clone(),
        inputs: inputs.fingerprints,
        artifacts,
        versions: versions(),
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(TrainRun { dir, manifest, params: outcome.params, log: outcome.log, eval })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub strategy: String,
    pub valid_mrr: f64,
    pub final_loss: f64,
}

/// Trains one model per `(k, strategy)` and scores it on the validation split.
pub fn sweep_k(
    inputs: &Inputs,
    base: &TrainConfig,
    ks: &[usize],
    strategies: &[Strategy],
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let graph = &inputs.graph;
    if graph.valid().is_empty() {
        return Err(Error::Config("sweep-k needs a non-empty validation split".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        for &strategy in strategies {
            let cfg = TrainConfig { k, strategy, ..base.clone() };
            let dims = Dims::new(graph.entity_count(), graph.relation_count(), cfg.d_e, inputs.features.dim());
            let init = ModelParams::<f32>::init(dims, cfg.seed)?;
            let out = train_from(graph, &inputs.features, &cfg, init, |_| {})?;
            let report =
                evaluate_triples(&out.params, &inputs.features, graph, graph.valid(), &cfg.eval_config(), threads)?;
            rows.push(SweepRow {
                k,
                strategy: strategy.name().to_string(),
                valid_mrr: report.mrr,
                final_loss: out.log.last().map_or(0.0, |r| r.loss),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line per negative: `pos_h pos_r pos_t slot replacement mode`.
pub fn negatives_tsv(batch: &[Triple], negatives: &Negatives) -> String {
    let mut out = String::from("pos_h\tpos_r\tpos_t\tslot\treplacement\tmode\n");
    let mut row = |t: &Triple, s: &NegativeSample| {
        writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", t.head, t.relation, t.tail, s.slot, s.replacement, s.mode).unwrap();
    };
    let k = negatives.k();
    for (i, t) in batch.iter().enumerate() {
        match negatives {
            Negatives::Normal(b) => b.for_positive(i).iter().for_each(|s| row(t, s)),
            Negatives::Twins { .. } => {
                for j in 0..k {
                    row(t, negatives.unimodal(i, j));
                    row(t, negatives.multimodal(i, j));
                }
            }
        }
    }
    out
}

/// Draws negatives for batch `index` of the training split, batched exactly
/// as the trainer does in `epoch`.
pub fn sample_batch(
    graph: &KnowledgeGraph,
    cfg: &TrainConfig,
    epoch: usize,
    index: usize,
) -> Result<(Vec<Triple>, Negatives)> {
    let batches = mmkge_core::batch::make_batches(
        graph.train(),
        cfg.n_batches,
        mmkge_core::rng::derive_seed(cfg.seed, &[epoch as u64, 0xB]),
    )?;
    let batch = batches
        .get(index)
        .ok_or_else(|| Error::Config(format!("batch index {index} out of range (n_batches {})", batches.len())))?
        .clone();
    let seed = mmkge_core::rng::derive_seed(cfg.seed, &[epoch as u64, index as u64, 0x5]);
    let sc: SamplerConfig = cfg.sampler();
    let negatives = sampler::sample(cfg.strategy, graph, &batch, &sc, seed)?;
    Ok((batch, negatives))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Xavier,
    Zeros,
}

pub fn gen_features(entity_count: usize, dim: usize, mode: FeatureMode, seed: u64) -> Result<FeatureTable> {
    Ok(match mode {
        FeatureMode::Xavier => FeatureTable::xavier(entity_count, dim, seed)?,
        FeatureMode::Zeros => FeatureTable::zeros(entity_count, dim)?,
    })
}

/// Writes a generated graph plus `features.mmkf` into `dir`.
pub fn write_dataset(dir: &Path, graph: &KnowledgeGraph, features: &FeatureTable) -> Result<()> {
    dataset::write_graph(dir, graph)?;
    mmkf::write_features(&dir.join("features.mmkf"), features)
}
