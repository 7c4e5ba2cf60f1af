//! Parallel filtered evaluation, JSON reports and inference timing.

use std::collections::BTreeMap;
use std::time::Instant;

use mmkge_core::eval::{aggregate, Metrics, Ranker};
use mmkge_core::{EvalConfig, FeatureTable, KnowledgeGraph, ModelParams, RankPair, Real, Triple};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mrr: f64,
    /// Keyed `hit@K`.
    pub hits: BTreeMap<String, f64>,
}

impl From<&Metrics> for MetricsReport {
    fn from(m: &Metrics) -> Self {
        Self { mrr: m.mrr, hits: m.hits.iter().map(|(k, v)| (format!("hit@{k}"), *v)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub hits: BTreeMap<String, f64>,
    pub head: MetricsReport,
    pub tail: MetricsReport,
    pub triples: usize,
    pub tie_rule: String,
    pub filter_splits: String,
    pub mask: String,
    pub p: u32,
    pub projection: String,
    pub threads: usize,
    /// Wall-clock seconds for the whole pass, projection cache included.
    pub seconds: f64,
}

impl EvalReport {
    pub fn hit(&self, k: u32) -> Option<f64> {
        self.hits.get(&format!("hit@{k}")).copied()
    }

    /// Same metrics, ignoring timing and thread count.
    pub fn same_metrics(&self, other: &EvalReport) -> bool {
        self.mrr == other.mrr
            && self.hits == other.hits
            && self.head == other.head
            && self.tail == other.tail
            && self.triples == other.triples
    }

    /// `MRR  Hit@10  Hit@3  Hit@1` header plus one row.
    pub fn table(&self) -> String {
        let h = |k| self.hit(k).map_or("-".to_string(), |v| format!("{v:.4}"));
        format!(
            "{:<8}{:<8}{:<8}{:<8}\n{:<8}{:<8}{:<8}{:<8}\n",
            "MRR",
            "Hit@10",
            "Hit@3",
            "Hit@1",
            format!("{:.4}", self.mrr),
            h(10),
            h(3),
            h(1)
        )
    }
}

/// Ranks of `triples`, computed in parallel on the current rayon pool.
/// Order matches the input, so aggregation is deterministic.
pub fn rank_parallel<T: Real>(ranker: &Ranker<'_, T>, triples: &[Triple]) -> Vec<RankPair> {
    const CHUNK: usize = 64;
    triples
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut scratch = Vec::new();
            chunk.iter().map(|t| ranker.rank_pair(t, &mut scratch)).collect::<Vec<_>>()
        })
        .collect()
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<(R, usize)> {
    match threads {
        None => Ok((f(), rayon::current_num_threads())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok((pool.install(f), n))
        }
    }
}

/// Filtered evaluation of `triples`. `threads = None` uses the global pool.
pub fn evaluate_triples<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    triples: &[Triple],
    cfg: &EvalConfig,
    threads: Option<usize>,
) -> Result<EvalReport> {
    if triples.is_empty() {
        return Err(mmkge_core::Error::EmptyTestSplit.into());
    }
    for t in triples {
        graph.check_triple(t)?;
    }
    let start = Instant::now();
    let (ranks, threads) = with_pool(threads, || -> Result<Vec<RankPair>> {
        let ranker = Ranker::new(params, features, graph, cfg)?;
        Ok(rank_parallel(&ranker, triples))
    })?;
    let ranks = ranks?;
    let seconds = start.elapsed().as_secs_f64();
    let m = aggregate(&ranks, &cfg.ks)?;
    let both = MetricsReport::from(&m.both);
    Ok(EvalReport {
        mrr: both.mrr,
        hits: both.hits,
        head: (&m.head).into(),
        tail: (&m.tail).into(),
        triples: m.triples,
        tie_rule: cfg.tie_rule.to_string(),
        filter_splits: cfg.filter_splits.to_string(),
        mask: cfg.mask.to_string(),
        p: cfg.p.p(),
        projection: match cfg.projection {
            mmkge_core::ProjectionMode::Cached => "cached",
            mmkge_core::ProjectionMode::Recompute => "recompute",
        }
        .to_string(),
        threads,
        seconds,
    })
}

/// Filtered evaluation over the test split.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    cfg: &EvalConfig,
    threads: Option<usize>,
) -> Result<EvalReport> {
    evaluate_triples(params, features, graph, graph.test(), cfg, threads)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub timings: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub report: EvalReport,
}

fn summarize(timings: Vec<f64>, report: EvalReport) -> BenchReport {
    let mut sorted = timings.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    BenchReport { median, min: sorted[0], max: sorted[n - 1], timings, report }
}

/// Times `repeats` full evaluations of `triples`. Fails if any repeat
/// produces different metrics.
pub fn bench_inference<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    triples: &[Triple],
    cfg: &EvalConfig,
    repeats: usize,
    threads: Option<usize>,
) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let first = evaluate_triples(params, features, graph, triples, cfg, threads)?;
    let mut timings = vec![first.seconds];
    for _ in 1..repeats {
        let r = evaluate_triples(params, features, graph, triples, cfg, threads)?;
        if !r.same_metrics(&first) {
            return Err(Error::Config("evaluation is not deterministic across repeats".into()));
        }
        timings.push(r.seconds);
    }
    Ok(summarize(timings, first))
}
