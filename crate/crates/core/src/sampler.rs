//! Negative sampling.
//!
//! Normal sampling replaces the head or tail entity outright. Twins sampling
//! draws the same corruption twice: an entity-level copy (the replacement's
//! structural and multimodal embeddings) scored by the unimodal terms, and a
//! modal-level copy (original structural embedding, replacement multimodal
//! embedding) scored by the multimodal terms.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triple};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Head,
    Tail,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::Head => "head",
            Slot::Tail => "tail",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Both embeddings of the slot come from the replacement.
    Entity,
    /// Only the multimodal embedding comes from the replacement.
    Modal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Entity => "entity",
            Mode::Modal => "modal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NegativeSample {
    pub slot: Slot,
    pub replacement: u32,
    pub mode: Mode,
}

/// Entity ids feeding each embedding of a (possibly corrupted) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assembly {
    pub hs: u32,
    pub hm: u32,
    pub relation: u32,
    pub ts: u32,
    pub tm: u32,
}

impl Assembly {
    pub fn positive(t: &Triple) -> Self {
        Self { hs: t.head, hm: t.head, relation: t.relation, ts: t.tail, tm: t.tail }
    }

    pub fn corrupted(t: &Triple, s: &NegativeSample) -> Self {
        let mut a = Self::positive(t);
        match (s.slot, s.mode) {
            (Slot::Head, Mode::Entity) => {
                a.hs = s.replacement;
                a.hm = s.replacement;
            }
            (Slot::Head, Mode::Modal) => a.hm = s.replacement,
            (Slot::Tail, Mode::Entity) => {
                a.ts = s.replacement;
                a.tm = s.replacement;
            }
            (Slot::Tail, Mode::Modal) => a.tm = s.replacement,
        }
        a
    }
}

impl NegativeSample {
    /// The triple obtained by replacing the slot's entity outright.
    pub fn entity_triple(&self, positive: &Triple) -> Triple {
        match self.slot {
            Slot::Head => Triple::new(self.replacement, positive.relation, positive.tail),
            Slot::Tail => Triple::new(positive.head, positive.relation, self.replacement),
        }
    }
}

/// `k` samples per positive, stored positive-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeBatch {
    k: usize,
    samples: Vec<NegativeSample>,
}

impl NegativeBatch {
    pub fn new(k: usize, samples: Vec<NegativeSample>) -> Result<Self> {
        if k == 0 || !samples.len().is_multiple_of(k) {
            return Err(Error::InvalidConfig(alloc::format!("{} samples cannot be grouped by k = {k}", samples.len())));
        }
        Ok(Self { k, samples })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of positives covered.
    pub fn positives(&self) -> usize {
        self.samples.len() / self.k
    }

    pub fn samples(&self) -> &[NegativeSample] {
        &self.samples
    }

    pub fn for_positive(&self, i: usize) -> &[NegativeSample] {
        &self.samples[i * self.k..(i + 1) * self.k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    Normal,
    #[default]
    Twins,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Normal => "normal",
            Strategy::Twins => "twins",
        }
    }
}

/// Which slot gets corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CorruptionSide {
    #[default]
    Uniform,
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TwinsDraw {
    /// Both halves use the same (slot, replacement) draw.
    #[default]
    Shared,
    /// The modal-level half draws its own corruption.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamplerConfig {
    pub k: usize,
    pub side: CorruptionSide,
    pub twins_draw: TwinsDraw,
    /// Rejections of known training triples before a draw is accepted anyway.
    pub max_retries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { k: 16, side: CorruptionSide::Uniform, twins_draw: TwinsDraw::Shared, max_retries: 100 }
    }
}

impl SamplerConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }
}

/// Negatives for one batch under either strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Negatives {
    Normal(NegativeBatch),
    Twins { entity: NegativeBatch, modal: NegativeBatch },
}

impl Negatives {
    pub fn k(&self) -> usize {
        match self {
            Negatives::Normal(b) => b.k(),
            Negatives::Twins { entity, .. } => entity.k(),
        }
    }

    pub fn positives(&self) -> usize {
        match self {
            Negatives::Normal(b) => b.positives(),
            Negatives::Twins { entity, modal } => entity.positives().min(modal.positives()),
        }
    }

    /// Sample read by the unimodal score terms.
    pub fn unimodal(&self, i: usize, j: usize) -> &NegativeSample {
        match self {
            Negatives::Normal(b) => &b.for_positive(i)[j],
            Negatives::Twins { entity, .. } => &entity.for_positive(i)[j],
        }
    }

    /// Sample read by the multimodal score terms.
    pub fn multimodal(&self, i: usize, j: usize) -> &NegativeSample {
        match self {
            Negatives::Normal(b) => &b.for_positive(i)[j],
            Negatives::Twins { modal, .. } => &modal.for_positive(i)[j],
        }
    }

    pub(crate) fn check_shape(&self, positives: usize) -> Result<()> {
        let consistent = match self {
            Negatives::Normal(_) => true,
            Negatives::Twins { entity, modal } => entity.k() == modal.k() && entity.positives() == modal.positives(),
        };
        let covered = match self {
            Negatives::Normal(b) => b.positives(),
            Negatives::Twins { entity, .. } => entity.positives(),
        };
        if !consistent || covered != positives {
            return Err(Error::NegativeCountMismatch { positives, negatives: covered });
        }
        Ok(())
    }
}

struct Drawer<'a> {
    graph: &'a KnowledgeGraph,
    cfg: &'a SamplerConfig,
    rng: ChaCha8Rng,
}

impl Drawer<'_> {
    fn draw(&mut self, positive: &Triple) -> (Slot, u32) {
        let slot = match self.cfg.side {
            CorruptionSide::Head => Slot::Head,
            CorruptionSide::Tail => Slot::Tail,
            CorruptionSide::Uniform => {
                if self.rng.gen_bool(0.5) {
                    Slot::Head
                } else {
                    Slot::Tail
                }
            }
        };
        let original = match slot {
            Slot::Head => positive.head,
            Slot::Tail => positive.tail,
        };
        let n = self.graph.entity_count() as u32;
        let mut replacement = 0;
        for _ in 0..=self.cfg.max_retries {
            // Uniform over every entity except the original.
            let mut e = self.rng.gen_range(0..n - 1);
            if e >= original {
                e += 1;
            }
            replacement = e;
            let sample = NegativeSample { slot, replacement, mode: Mode::Entity };
            if !self.graph.train_index().contains(&sample.entity_triple(positive)) {
                break;
            }
        }
        (slot, replacement)
    }
}

fn drawer<'a>(graph: &'a KnowledgeGraph, cfg: &'a SamplerConfig, seed: u64, tag: u64) -> Result<Drawer<'a>> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if graph.entity_count() < 2 {
        return Err(Error::NotEnoughEntities(graph.entity_count()));
    }
    Ok(Drawer { graph, cfg, rng: rng::stream(seed, &[tag]) })
}

/// Entity-level corruption of every positive, `k` times each. Replacements
/// forming a training triple are redrawn up to `max_retries` times.
pub fn sample_normal(
    graph: &KnowledgeGraph,
    batch: &[Triple],
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<NegativeBatch> {
    let mut d = drawer(graph, cfg, seed, 0x5A31)?;
    let mut samples = Vec::with_capacity(batch.len() * cfg.k);
    for pos in batch {
        for _ in 0..cfg.k {
            let (slot, replacement) = d.draw(pos);
            samples.push(NegativeSample { slot, replacement, mode: Mode::Entity });
        }
    }
    NegativeBatch::new(cfg.k, samples)
}

/// Paired entity-level and modal-level batches. With
/// [`TwinsDraw::Shared`] the pairs differ only in `mode`.
pub fn sample_twins(
    graph: &KnowledgeGraph,
    batch: &[Triple],
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<(NegativeBatch, NegativeBatch)> {
    let entity = sample_normal(graph, batch, cfg, seed)?;
    let modal = match cfg.twins_draw {
        TwinsDraw::Shared => entity.samples().iter().map(|s| NegativeSample { mode: Mode::Modal, ..*s }).collect(),
        TwinsDraw::Independent => {
            let mut d = drawer(graph, cfg, seed, 0x5A32)?;
            let mut samples = Vec::with_capacity(batch.len() * cfg.k);
            for pos in batch {
                for _ in 0..cfg.k {
                    let (slot, replacement) = d.draw(pos);
                    samples.push(NegativeSample { slot, replacement, mode: Mode::Modal });
                }
            }
            samples
        }
    };
    Ok((entity, NegativeBatch::new(cfg.k, modal)?))
}

pub fn sample(
    strategy: Strategy,
    graph: &KnowledgeGraph,
    batch: &[Triple],
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<Negatives> {
    Ok(match strategy {
        Strategy::Normal => Negatives::Normal(sample_normal(graph, batch, cfg, seed)?),
        Strategy::Twins => {
            let (entity, modal) = sample_twins(graph, batch, cfg, seed)?;
            Negatives::Twins { entity, modal }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line_graph(n: usize) -> KnowledgeGraph {
        let train = (0..n as u32 - 1).map(|i| Triple::new(i, 0, i + 1)).collect();
        KnowledgeGraph::unnamed(n, 1, train, vec![], vec![]).unwrap()
    }

    #[test]
    fn two_entities_leave_one_choice() {
        let g = KnowledgeGraph::unnamed(2, 1, vec![Triple::new(0, 0, 1)], vec![], vec![]).unwrap();
        let cfg = SamplerConfig { k: 4, side: CorruptionSide::Tail, ..SamplerConfig::default() };
        let b = sample_normal(&g, &[Triple::new(0, 0, 1)], &cfg, 1).unwrap();
        assert!(b.samples().iter().all(|s| s.replacement == 0 && s.slot == Slot::Tail));
    }

    #[test]
    fn sample_count_is_batch_times_k() {
        let g = line_graph(50);
        let batch: Vec<Triple> = (0..118).map(|i| Triple::new(i % 49, 0, i % 49 + 1)).collect();
        let b = sample_normal(&g, &batch, &SamplerConfig::with_k(16), 3).unwrap();
        assert_eq!(b.samples().len(), 1888);
        assert_eq!(b.positives(), 118);
        assert!(b.samples().iter().all(|s| s.mode == Mode::Entity));
    }

    #[test]
    fn never_reproduces_the_positive() {
        let g = line_graph(3);
        let batch = g.train().to_vec();
        let b = sample_normal(&g, &batch, &SamplerConfig::with_k(64), 8).unwrap();
        for (i, pos) in batch.iter().enumerate() {
            for s in b.for_positive(i) {
                assert_ne!(s.entity_triple(pos), *pos);
            }
        }
    }

    #[test]
    fn known_training_triples_are_rejected() {
        // Every head except 0 forms a training triple with (r0, 5).
        let n = 6;
        let train: Vec<Triple> = (1..5).map(|h| Triple::new(h, 0, 5)).collect();
        let g = KnowledgeGraph::unnamed(n, 1, train, vec![], vec![]).unwrap();
        let cfg = SamplerConfig { k: 200, side: CorruptionSide::Head, ..SamplerConfig::default() };
        let b = sample_normal(&g, &[Triple::new(1, 0, 5)], &cfg, 2).unwrap();
        assert!(b.samples().iter().all(|s| s.replacement == 0 || s.replacement == 5));
    }

    #[test]
    fn twins_pairs_share_draws() {
        let g = line_graph(30);
        let batch = g.train().to_vec();
        let (e, m) = sample_twins(&g, &batch, &SamplerConfig::with_k(5), 4).unwrap();
        for (a, b) in e.samples().iter().zip(m.samples()) {
            assert_eq!((a.slot, a.replacement), (b.slot, b.replacement));
            assert_eq!((a.mode, b.mode), (Mode::Entity, Mode::Modal));
        }
        let cfg = SamplerConfig { twins_draw: TwinsDraw::Independent, ..SamplerConfig::with_k(5) };
        let (e2, m2) = sample_twins(&g, &batch, &cfg, 4).unwrap();
        assert_eq!(e2, e);
        assert!(e2.samples().iter().zip(m2.samples()).any(|(a, b)| a.replacement != b.replacement));
        assert!(m2.samples().iter().all(|s| s.mode == Mode::Modal));
    }

    #[test]
    fn twins_embedding_assembly() {
        let pos = Triple::new(1, 0, 2);
        let s = NegativeSample { slot: Slot::Tail, replacement: 7, mode: Mode::Modal };
        let modal = Assembly::corrupted(&pos, &s);
        assert_eq!((modal.ts, modal.tm), (2, 7));
        let entity = Assembly::corrupted(&pos, &NegativeSample { mode: Mode::Entity, ..s });
        assert_eq!((entity.ts, entity.tm), (7, 7));
        assert_eq!((entity.hs, entity.hm), (1, 1));
    }

    #[test]
    fn seeded_determinism() {
        let g = line_graph(40);
        let batch = g.train().to_vec();
        let cfg = SamplerConfig::with_k(1);
        assert_eq!(sample_twins(&g, &batch, &cfg, 9).unwrap(), sample_twins(&g, &batch, &cfg, 9).unwrap());
        assert_ne!(sample_normal(&g, &batch, &cfg, 9).unwrap(), sample_normal(&g, &batch, &cfg, 10).unwrap());
    }

    #[test]
    fn errors() {
        let g = KnowledgeGraph::unnamed(1, 1, vec![Triple::new(0, 0, 0)], vec![], vec![]).unwrap();
        assert_eq!(
            sample_normal(&g, g.train(), &SamplerConfig::with_k(1), 0).unwrap_err(),
            Error::NotEnoughEntities(1)
        );
        let g = line_graph(3);
        assert!(sample_normal(&g, g.train(), &SamplerConfig::with_k(0), 0).is_err());
    }

    #[test]
    fn replacement_frequencies_are_uniform() {
        let n = 100usize;
        let g = KnowledgeGraph::unnamed(n, 1, vec![Triple::new(0, 0, 1)], vec![], vec![]).unwrap();
        let cfg = SamplerConfig { k: 100_000, side: CorruptionSide::Tail, ..SamplerConfig::default() };
        let b = sample_normal(&g, &[Triple::new(0, 0, 1)], &cfg, 2024).unwrap();
        let mut counts = vec![0u64; n];
        for s in b.samples() {
            counts[s.replacement as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        let draws = 100_000.0;
        let p = 1.0 / (n - 1) as f64;
        let mean = draws * p;
        let sd = libm::sqrt(draws * p * (1.0 - p));
        let mut chi2 = 0.0;
        for (e, &c) in counts.iter().enumerate() {
            if e == 1 {
                continue;
            }
            assert!((c as f64 - mean).abs() < 3.0 * sd, "entity {e}: {c} vs {mean}±{sd}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        // 98 degrees of freedom; the 0.999 quantile is about 149.
        assert!(chi2 < 149.0, "chi2 = {chi2}");
    }
}
