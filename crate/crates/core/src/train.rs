//! Margin-rank training.
//!
//! For each positive `(h, r, t)` with negatives `n_1 … n_k` the loss is
//!
//! ```text
//! max(γ - F(h, r, t) + (1/k) Σ_j F(n_j), 0)
//! ```
//!
//! summed over the batch (the hinge is taken over the mean of the negatives,
//! not per pair; [`LossVariant::PerPair`] gives the per-pair form).
//! Gradients are derived analytically through the TransE terms and the
//! projection, and accumulated sparsely over the rows a batch touches.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::adam::{Adam, AdamConfig};
use crate::batch::make_batches;
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig};
use crate::features::FeatureTable;
use crate::graph::{KnowledgeGraph, SplitSet, Triple};
use crate::params::{Dims, ModelParams};
use crate::real::Real;
use crate::rng::derive_seed;
use crate::sampler::{self, Assembly, CorruptionSide, Negatives, SamplerConfig, Strategy, TwinsDraw};
use crate::score::{masked_score, score_subgradient, Component, NormOrder, ScoreMask, TripleView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossVariant {
    /// One hinge per positive over the mean negative score.
    #[default]
    MeanNegative,
    /// `(1/k) Σ_j max(γ - F(pos) + F(n_j), 0)`.
    PerPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub n_batches: usize,
    pub k: usize,
    pub epochs: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub mask: ScoreMask,
    pub p: NormOrder,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub d_e: usize,
    pub loss: LossVariant,
    pub side: CorruptionSide,
    pub twins_draw: TwinsDraw,
    /// Rescale updated entity rows to unit L2 norm after each step.
    pub normalize_entities: bool,
    /// Keep the projection fixed at its initial value.
    pub freeze_projection: bool,
    /// Validation interval in epochs; 0 disables early stopping.
    pub eval_every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub filter_splits: SplitSet,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::wn9()
    }
}

impl TrainConfig {
    /// Tuned WN9 settings: margin 8, 100 batches.
    pub fn wn9() -> Self {
        Self {
            margin: 8.0,
            learning_rate: 2e-5,
            n_batches: 100,
            k: 16,
            epochs: 1000,
            seed: 0,
            strategy: Strategy::Twins,
            mask: ScoreMask::FULL,
            p: NormOrder::L1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            d_e: 128,
            loss: LossVariant::MeanNegative,
            side: CorruptionSide::Uniform,
            twins_draw: TwinsDraw::Shared,
            normalize_entities: false,
            freeze_projection: false,
            eval_every: 50,
            patience: 3,
            filter_splits: SplitSet::ALL,
        }
    }

    /// Tuned FB15K-237 settings: margin 6, 400 batches.
    pub fn fb15k237() -> Self {
        Self { margin: 6.0, n_batches: 400, ..Self::wn9() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.n_batches == 0 {
            return bad("n_batches must be at least 1");
        }
        if self.d_e == 0 {
            return bad("d_e must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig { k: self.k, side: self.side, twins_draw: self.twins_draw, ..SamplerConfig::default() }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig { mask: self.mask, p: self.p, filter_splits: self.filter_splits, ..EvalConfig::default() }
    }
}

/// Sparse gradient of a batch loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients<T> {
    pub entity: BTreeMap<u32, Vec<T>>,
    pub relation: BTreeMap<u32, Vec<T>>,
    /// Dense `d_e × d_m` gradient, `None` when no multimodal term was active.
    pub proj: Option<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn is_empty(&self) -> bool {
        self.entity.is_empty() && self.relation.is_empty() && self.proj.is_none()
    }

    /// True if every stored entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.entity
            .values()
            .chain(self.relation.values())
            .chain(self.proj.iter())
            .all(|v| v.iter().all(|x| *x == T::zero()))
    }

    pub fn norms(&self) -> [f64; 3] {
        let norm = |it: &mut dyn Iterator<Item = &T>| {
            libm::sqrt(
                it.map(|x| {
                    let v = x.to_f64().unwrap_or(f64::NAN);
                    v * v
                })
                .sum::<f64>(),
            )
        };
        [
            norm(&mut self.entity.values().flatten()),
            norm(&mut self.relation.values().flatten()),
            norm(&mut self.proj.iter().flatten()),
        ]
    }
}

/// Loss, active count and gradients of one batch.
#[derive(Debug, Clone)]
pub struct StepReport<T> {
    pub loss: T,
    /// Positives (or pairs, for the per-pair loss) with a positive hinge.
    pub active: usize,
    pub gradients: Gradients<T>,
}

/// Batch-local table of projected multimodal embeddings.
struct ModalCache<T> {
    rows: BTreeMap<u32, Vec<T>>,
    zero: Vec<T>,
}

impl<T: Real> ModalCache<T> {
    fn build(params: &ModelParams<T>, features: &FeatureTable, ids: impl Iterator<Item = u32>) -> Self {
        let mut rows = BTreeMap::new();
        for id in ids {
            rows.entry(id).or_insert_with(|| {
                let mut out = vec![T::zero(); params.d_e()];
                crate::score::project_into(params, features.get(id), &mut out);
                out
            });
        }
        Self { rows, zero: vec![T::zero(); params.d_e()] }
    }

    fn get(&self, id: u32) -> &[T] {
        self.rows.get(&id).map_or(&self.zero, |v| v.as_slice())
    }
}

struct BatchContext<'a, T> {
    params: &'a ModelParams<T>,
    modal: ModalCache<T>,
    mask: ScoreMask,
    p: NormOrder,
}

impl<'a, T: Real> BatchContext<'a, T> {
    fn view(&self, a: &Assembly) -> TripleView<'_, T> {
        TripleView {
            hs: self.params.entity(a.hs),
            hm: self.modal.get(a.hm),
            r: self.params.relation(a.relation),
            ts: self.params.entity(a.ts),
            tm: self.modal.get(a.tm),
        }
    }

    fn score(&self, uni: &Assembly, multi: &Assembly) -> T {
        masked_score(&self.view(uni), &self.view(multi), self.mask, self.p)
    }

    /// Adds `coef · ∂F/∂θ` for the masked score of the given assemblies.
    fn accumulate(&self, uni: &Assembly, multi: &Assembly, coef: T, acc: &mut Accumulator<T>) {
        let d_e = self.params.d_e();
        let mut g = vec![T::zero(); d_e];
        for c in self.mask.components() {
            let a = if c.is_unimodal() { uni } else { multi };
            self.view(a).diff(c, &mut g);
            score_subgradient(&mut g, self.p);
            for x in g.iter_mut() {
                *x = coef * *x;
            }
            let (head_s, head_m) = c.head_parts();
            let (tail_s, tail_m) = c.tail_parts();
            if head_s {
                add_row(&mut acc.entity, a.hs, &g, d_e, false);
            }
            if head_m {
                add_row(&mut acc.modal, a.hm, &g, d_e, false);
            }
            add_row(&mut acc.relation, a.relation, &g, d_e, false);
            if tail_s {
                add_row(&mut acc.entity, a.ts, &g, d_e, true);
            }
            if tail_m {
                add_row(&mut acc.modal, a.tm, &g, d_e, true);
            }
        }
    }
}

#[derive(Default)]
struct Accumulator<T> {
    entity: BTreeMap<u32, Vec<T>>,
    relation: BTreeMap<u32, Vec<T>>,
    /// Gradient with respect to each entity's multimodal embedding.
    modal: BTreeMap<u32, Vec<T>>,
}

fn add_row<T: Real>(map: &mut BTreeMap<u32, Vec<T>>, id: u32, g: &[T], d: usize, subtract: bool) {
    let row = map.entry(id).or_insert_with(|| vec![T::zero(); d]);
    if subtract {
        for (r, x) in row.iter_mut().zip(g) {
            *r -= *x;
        }
    } else {
        for (r, x) in row.iter_mut().zip(g) {
            *r += *x;
        }
    }
}

fn check_ids<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    positives: &[Triple],
    negatives: &Negatives,
) -> Result<()> {
    let dims = params.dims();
    if features.dim() != dims.d_m {
        return Err(Error::DimensionMismatch { what: "feature table", expected: dims.d_m, found: features.dim() });
    }
    if features.entity_count() != dims.entity_count {
        return Err(Error::DimensionMismatch {
            what: "feature table entities",
            expected: dims.entity_count,
            found: features.entity_count(),
        });
    }
    negatives.check_shape(positives.len())?;
    let n_e = dims.entity_count;
    let ent = |id: u32| {
        if id as usize >= n_e {
            Err(Error::EntityOutOfRange { id, count: n_e })
        } else {
            Ok(())
        }
    };
    for (i, t) in positives.iter().enumerate() {
        ent(t.head)?;
        ent(t.tail)?;
        if t.relation as usize >= dims.relation_count {
            return Err(Error::RelationOutOfRange { id: t.relation, count: dims.relation_count });
        }
        for j in 0..negatives.k() {
            ent(negatives.unimodal(i, j).replacement)?;
            ent(negatives.multimodal(i, j).replacement)?;
        }
    }
    Ok(())
}

fn run_batch<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    positives: &[Triple],
    negatives: &Negatives,
    cfg: &TrainConfig,
    with_gradients: bool,
) -> Result<StepReport<T>> {
    check_ids(params, features, positives, negatives)?;
    let k = negatives.k();
    let modal = if cfg.mask.needs_multimodal() {
        let ids = positives.iter().enumerate().flat_map(|(i, t)| {
            [t.head, t.tail].into_iter().chain(
                (0..k)
                    .flat_map(move |j| [negatives.unimodal(i, j).replacement, negatives.multimodal(i, j).replacement]),
            )
        });
        ModalCache::build(params, features, ids)
    } else {
        ModalCache::build(params, features, core::iter::empty())
    };
    let ctx = BatchContext { params, modal, mask: cfg.mask, p: cfg.p };
    let margin = T::from_f64(cfg.margin);
    let kt = T::from_f64(k as f64);
    let inv_k = T::one() / kt;
    let mut loss = T::zero();
    let mut active = 0;
    let mut acc = Accumulator::default();
    let mut neg_scores = Vec::with_capacity(k);

    for (i, pos) in positives.iter().enumerate() {
        let pa = Assembly::positive(pos);
        let pos_score = ctx.score(&pa, &pa);
        neg_scores.clear();
        for j in 0..k {
            let ua = Assembly::corrupted(pos, negatives.unimodal(i, j));
            let ma = Assembly::corrupted(pos, negatives.multimodal(i, j));
            neg_scores.push((ua, ma, ctx.score(&ua, &ma)));
        }
        match cfg.loss {
            LossVariant::MeanNegative => {
                let mean = neg_scores.iter().map(|(_, _, s)| *s).sum::<T>() / kt;
                let hinge = (margin - pos_score) + mean;
                if hinge > T::zero() {
                    loss += hinge;
                    active += 1;
                    if with_gradients {
                        ctx.accumulate(&pa, &pa, -T::one(), &mut acc);
                        for (ua, ma, _) in &neg_scores {
                            ctx.accumulate(ua, ma, inv_k, &mut acc);
                        }
                    }
                }
            }
            LossVariant::PerPair => {
                let mut pos_coef = T::zero();
                for (ua, ma, s) in &neg_scores {
                    let hinge = (margin - pos_score) + *s;
                    if hinge > T::zero() {
                        loss += hinge * inv_k;
                        active += 1;
                        if with_gradients {
                            pos_coef -= inv_k;
                            ctx.accumulate(ua, ma, inv_k, &mut acc);
                        }
                    }
                }
                if with_gradients && pos_coef != T::zero() {
                    ctx.accumulate(&pa, &pa, pos_coef, &mut acc);
                }
            }
        }
    }

    let proj = if acc.modal.is_empty() {
        None
    } else {
        let (d_e, d_m) = (params.d_e(), params.d_m());
        let mut w = vec![T::zero(); d_e * d_m];
        for (&id, g) in &acc.modal {
            let x = features.get(id);
            for (row, gi) in g.iter().enumerate() {
                if *gi == T::zero() {
                    continue;
                }
                for (wv, xv) in w[row * d_m..(row + 1) * d_m].iter_mut().zip(x) {
                    *wv += *gi * <T as From<f32>>::from(*xv);
                }
            }
        }
        Some(w)
    };
    Ok(StepReport { loss, active, gradients: Gradients { entity: acc.entity, relation: acc.relation, proj } })
}

/// Batch loss. Under twins the negative score combines unimodal terms of
/// the entity-level sample with multimodal terms of the modal-level sample.
pub fn batch_loss<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    positives: &[Triple],
    negatives: &Negatives,
    cfg: &TrainConfig,
) -> Result<T> {
    Ok(run_batch(params, features, positives, negatives, cfg, false)?.loss)
}

/// Batch loss together with its exact (sub)gradient.
pub fn batch_gradients<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    positives: &[Triple],
    negatives: &Negatives,
    cfg: &TrainConfig,
) -> Result<StepReport<T>> {
    run_batch(params, features, positives, negatives, cfg, true)
}

/// Per-epoch training log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub active_positives: usize,
    /// Mean per-step gradient norms of (struct_emb, rel_emb, proj).
    pub grad_norms: [f64; 3],
    pub valid_mrr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub log: Vec<EpochReport>,
    /// Epoch whose parameters were returned (early stopping keeps the best).
    pub best_epoch: Option<usize>,
}

pub fn train<T: Real>(graph: &KnowledgeGraph, features: &FeatureTable, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    let dims = Dims::new(graph.entity_count(), graph.relation_count(), cfg.d_e, features.dim());
    let init = ModelParams::init(dims, cfg.seed)?;
    train_from(graph, features, cfg, init, |_| {})
}

/// Trains starting from `params`, calling `on_epoch` after every epoch.
pub fn train_from<T: Real>(
    graph: &KnowledgeGraph,
    features: &FeatureTable,
    cfg: &TrainConfig,
    mut params: ModelParams<T>,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let dims = params.dims();
    if dims.entity_count != graph.entity_count() || dims.relation_count != graph.relation_count() {
        return Err(Error::DimensionMismatch {
            what: "parameter entity count",
            expected: graph.entity_count(),
            found: dims.entity_count,
        });
    }
    let mut log = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { params, log, best_epoch: None });
    }
    let sampler_cfg = cfg.sampler();
    let mut adam = Adam::new(&params, cfg.adam());
    let early_stop = cfg.eval_every > 0 && !graph.valid().is_empty();
    let eval_cfg = cfg.eval_config();
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        let batches = make_batches(graph.train(), cfg.n_batches, derive_seed(cfg.seed, &[epoch as u64, 0xB]))?;
        let mut report = EpochReport { epoch, loss: 0.0, active_positives: 0, grad_norms: [0.0; 3], valid_mrr: None };
        for (b, batch) in batches.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &[epoch as u64, b as u64, 0x5]);
            let negatives = sampler::sample(cfg.strategy, graph, batch, &sampler_cfg, seed)?;
            let step = batch_gradients(&params, features, batch, &negatives, cfg)?;
            let loss = step.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            report.loss += loss;
            report.active_positives += step.active;
            for (acc, n) in report.grad_norms.iter_mut().zip(step.gradients.norms()) {
                *acc += n;
            }
            adam.step(&mut params, &step.gradients, cfg.freeze_projection);
            if cfg.normalize_entities {
                for &id in step.gradients.entity.keys() {
                    normalize_row(params.entity_mut(id));
                }
            }
        }
        for n in report.grad_norms.iter_mut() {
            *n /= batches.len() as f64;
        }
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: batches.len() - 1 });
        }

        let mut stop = false;
        if early_stop && (epoch + 1) % cfg.eval_every == 0 {
            let mrr = eval::evaluate_split(&params, features, graph, graph.valid(), &eval_cfg)?.both.mrr;
            report.valid_mrr = Some(mrr);
            match &best {
                Some((b, _, _)) if mrr <= *b => {
                    stale += 1;
                    stop = stale >= cfg.patience;
                }
                _ => {
                    best = Some((mrr, epoch, params.clone()));
                    stale = 0;
                }
            }
        }
        on_epoch(&report);
        log.push(report);
        if stop {
            break;
        }
    }

    Ok(match best {
        Some((_, epoch, p)) => TrainOutcome { params: p, log, best_epoch: Some(epoch) },
        None => TrainOutcome { params, best_epoch: log.last().map(|r| r.epoch), log },
    })
}

fn normalize_row<T: Real>(row: &mut [T]) {
    let norm = row.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if norm > T::zero() {
        for x in row.iter_mut() {
            *x = *x / norm;
        }
    }
}

/// Score a single positive against hand-built negatives; used to expose
/// the five parts of a twins contrast for inspection.
pub fn contrast_parts<T: Real>(
    params: &ModelParams<T>,
    features: &FeatureTable,
    positive: &Triple,
    unimodal: &sampler::NegativeSample,
    multimodal: &sampler::NegativeSample,
    p: NormOrder,
) -> Result<[T; 5]> {
    let neg = Negatives::Twins {
        entity: sampler::NegativeBatch::new(1, vec![*unimodal])?,
        modal: sampler::NegativeBatch::new(1, vec![*multimodal])?,
    };
    check_ids(params, features, core::slice::from_ref(positive), &neg)?;
    let ids = [positive.head, positive.tail, unimodal.replacement, multimodal.replacement];
    let ctx =
        BatchContext { params, modal: ModalCache::build(params, features, ids.into_iter()), mask: ScoreMask::FULL, p };
    let pa = Assembly::positive(positive);
    let ua = Assembly::corrupted(positive, unimodal);
    let ma = Assembly::corrupted(positive, multimodal);
    Ok(Component::ALL.map(|c| {
        let neg_view = if c.is_unimodal() { ctx.view(&ua) } else { ctx.view(&ma) };
        ctx.view(&pa).component(c, p) - neg_view.component(c, p)
    }))
}
