//! Filtered link-prediction ranking and MRR / Hit@K aggregation.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::{KnowledgeGraph, KnownIndex, SplitSet, Triple};
use crate::params::ModelParams;
use crate::real::Real;
use crate::score::{full_score, masked_score, project_into, NormOrder, ScoreMask, TripleView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Predict the head of `(?, r, t)`.
    Head,
    /// Predict the tail of `(h, r, ?)`.
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieRule {
    /// `rank = 1 + #{candidates scoring strictly higher}`.
    #[default]
    Optimistic,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("optimistic")
    }
}

/// How candidate multimodal embeddings are obtained during ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ProjectionMode {
    /// Project every entity once before ranking.
    #[default]
    Cached,
    /// Project each candidate again for every query.
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    pub ks: Vec<u32>,
    pub filter_splits: SplitSet,
    pub tie_rule: TieRule,
    pub mask: ScoreMask,
    pub p: NormOrder,
    pub projection: ProjectionMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 3, 10],
            filter_splits: SplitSet::ALL,
            tie_rule: TieRule::Optimistic,
            mask: ScoreMask::FULL,
            p: NormOrder::L1,
            projection: ProjectionMode::Cached,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidConfig("Hit@K cutoffs must be non-empty and at least 1".into()));
        }
        Ok(())
    }
}

/// Head- and tail-prediction ranks of one test triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankPair {
    pub head: u64,
    pub tail: u64,
}

/// Counts candidates that outrank `target` under the optimistic tie rule,
/// skipping `target` itself and every id in `filtered` (sorted).
pub fn rank_from_scores<S: PartialOrd + Copy>(scores: &[S], target: usize, filtered: &[u32]) -> u64 {
    let t = scores[target];
    let mut skip = filtered.iter().peekable();
    let mut rank = 1;
    for (c, s) in scores.iter().enumerate() {
        while skip.next_if(|&&f| (f as usize) < c).is_some() {}
        if skip.next_if(|&&f| f as usize == c).is_some() || c == target {
            continue;
        }
        if *s > t {
            rank += 1;
        }
    }
    rank
}

/// Ranks candidates for frozen parameters. Builds the filter index and, in
/// [`ProjectionMode::Cached`], the projected multimodal embedding of every
/// entity once.
pub struct Ranker<'a, T> {
    params: &'a ModelParams<T>,
    features: &'a FeatureTable,
    filter: KnownIndex,
    mask: ScoreMask,
    p: NormOrder,
    mode: ProjectionMode,
    needs_modal: bool,
    modal: Vec<T>,
}

impl<'a, T: Real> Ranker<'a, T> {
    pub fn new(
        params: &'a ModelParams<T>,
        features: &'a FeatureTable,
        graph: &KnowledgeGraph,
        cfg: &EvalConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let dims = params.dims();
        if dims.entity_count != graph.entity_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter entity count",
                expected: graph.entity_count(),
                found: dims.entity_count,
            });
        }
        if dims.relation_count != graph.relation_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter relation count",
                expected: graph.relation_count(),
                found: dims.relation_count,
            });
        }
        if features.dim() != dims.d_m || features.entity_count() != dims.entity_count {
            return Err(Error::DimensionMismatch { what: "feature dim", expected: dims.d_m, found: features.dim() });
        }
        let needs_modal = cfg.mask.needs_multimodal();
        let mut modal = Vec::new();
        if needs_modal && cfg.projection == ProjectionMode::Cached {
            let d = dims.d_e;
            modal = vec![T::zero(); dims.entity_count * d];
            for (e, row) in modal.chunks_exact_mut(d).enumerate() {
                project_into(params, features.get(e as u32), row);
            }
        }
        Ok(Self {
            params,
            features,
            filter: graph.known_index(cfg.filter_splits),
            mask: cfg.mask,
            p: cfg.p,
            mode: cfg.projection,
            needs_modal,
            modal,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.params.dims().entity_count
    }

    fn cached(&self, e: u32) -> &[T] {
        let d = self.params.d_e();
        &self.modal[e as usize * d..(e as usize + 1) * d]
    }

    /// Composite scores of every candidate substitution in the slot.
    pub fn candidate_scores(&self, triple: &Triple, direction: Direction, out: &mut Vec<T>) {
        let d = self.params.d_e();
        let n = self.entity_count();
        out.clear();
        out.reserve(n);
        let zero = vec![T::zero(); d];
        let mut fixed_buf = vec![T::zero(); d];
        let mut cand_buf = vec![T::zero(); d];
        let fixed_id = match direction {
            Direction::Head => triple.tail,
            Direction::Tail => triple.head,
        };
        let fixed_m: &[T] = if !self.needs_modal {
            &zero
        } else if self.mode == ProjectionMode::Cached {
            self.cached(fixed_id)
        } else {
            project_into(self.params, self.features.get(fixed_id), &mut fixed_buf);
            &fixed_buf
        };
        let fixed_s = self.params.entity(fixed_id);
        let r = self.params.relation(triple.relation);
        for c in 0..n as u32 {
            let cand_m: &[T] = if !self.needs_modal {
                &zero
            } else if self.mode == ProjectionMode::Cached {
                self.cached(c)
            } else {
                project_into(self.params, self.features.get(c), &mut cand_buf);
                &cand_buf
            };
            let cand_s = self.params.entity(c);
            let view = match direction {
                Direction::Tail => TripleView { hs: fixed_s, hm: fixed_m, r, ts: cand_s, tm: cand_m },
                Direction::Head => TripleView { hs: cand_s, hm: cand_m, r, ts: fixed_s, tm: fixed_m },
            };
            out.push(if self.mask == ScoreMask::FULL {
                full_score(&view, self.p)
            } else {
                masked_score(&view, &view, self.mask, self.p)
            });
        }
    }

    /// Filtered rank of the true entity in the given slot.
    pub fn rank(&self, triple: &Triple, direction: Direction, scratch: &mut Vec<T>) -> u64 {
        self.candidate_scores(triple, direction, scratch);
        let (target, filtered) = match direction {
            Direction::Tail => (triple.tail, self.filter.tails_of(triple.head, triple.relation)),
            Direction::Head => (triple.head, self.filter.heads_of(triple.relation, triple.tail)),
        };
        rank_from_scores(scratch, target as usize, filtered)
    }

    pub fn rank_pair(&self, triple: &Triple, scratch: &mut Vec<T>) -> RankPair {
        RankPair {
            head: self.rank(triple, Direction::Head, scratch),
            tail: self.rank(triple, Direction::Tail, scratch),
        }
    }

    pub fn rank_all(&self, triples: &[Triple]) -> Vec<RankPair> {
        let mut scratch = Vec::new();
        triples.iter().map(|t| self.rank_pair(t, &mut scratch)).collect()
    }
}

/// MRR and Hit@K over a set of ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mrr: f64,
    /// `(K, Hit@K)` in the order the cutoffs were requested.
    pub hits: Vec<(u32, f64)>,
}

impl Metrics {
    pub fn hit(&self, k: u32) -> Option<f64> {
        self.hits.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    fn from_ranks(ranks: impl Iterator<Item = u64> + Clone, count: usize, ks: &[u32]) -> Self {
        let denom = count as f64;
        let mrr = ranks.clone().map(|r| 1.0 / r as f64).sum::<f64>() / denom;
        let hits =
            ks.iter().map(|&k| (k, ranks.clone().filter(|&r| r <= u64::from(k)).count() as f64 / denom)).collect();
        Self { mrr, hits }
    }
}

/// Metrics over both directions plus per-direction breakdowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalMetrics {
    pub both: Metrics,
    pub head: Metrics,
    pub tail: Metrics,
    pub triples: usize,
}

/// `MRR = (1 / 2n) Σ (1/rank_h + 1/rank_t)`, `Hit@K` likewise with the
/// indicator `rank ≤ K`.
pub fn aggregate(ranks: &[RankPair], ks: &[u32]) -> Result<DirectionalMetrics> {
    if ranks.is_empty() {
        return Err(Error::EmptyTestSplit);
    }
    let n = ranks.len();
    let mrr = ranks.iter().map(|r| 1.0 / r.head as f64 + 1.0 / r.tail as f64).sum::<f64>() / (2 * n) as f64;
    let hits = ks
        .iter()
        .map(|&k| {
            let k64 = u64::from(k);
            let c: usize = ranks.iter().map(|r| usize::from(r.head <= k64) + usize::from(r.tail <= k64)).sum();
            (k, c as f64 / (2 * n) as f64)
        })
        .collect();
    Ok(DirectionalMetrics {
        both: Metrics { mrr, hits },
        head: Metrics::from_ranks(ranks.iter().map(|r| r.head), n, ks),
        tail: Metrics::from_ranks(ranks.iter().map(|r| r.tail), n, ks),
        triples: n,
    })
}

/// Single-direction filtered rank of one triple. Builds a fresh [`Ranker`];
/// loop over [`Ranker::rank`] when ranking many triples.
pub fn rank_triple<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    triple: &Triple,
    direction: Direction,
    cfg: &EvalConfig,
) -> Result<u64> {
    graph.check_triple(triple)?;
    let ranker = Ranker::new(params, features, graph, cfg)?;
    Ok(ranker.rank(triple, direction, &mut Vec::new()))
}

pub fn evaluate_split<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    triples: &[Triple],
    cfg: &EvalConfig,
) -> Result<DirectionalMetrics> {
    if triples.is_empty() {
        return Err(Error::EmptyTestSplit);
    }
    let ranker = Ranker::new(params, features, graph, cfg)?;
    aggregate(&ranker.rank_all(triples), &cfg.ks)
}

/// Sequential evaluation over the test split.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    cfg: &EvalConfig,
) -> Result<DirectionalMetrics> {
    evaluate_split(params, features, graph, graph.test(), cfg)
}
