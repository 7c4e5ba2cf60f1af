//! Synthetic graphs and features for tests, benchmarks and smoke runs.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::features::FeatureTable;
use crate::graph::{KnowledgeGraph, Triple};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub entities: usize,
    /// Relation `k` translates by `k + 1` steps along the line.
    pub relations: usize,
    /// Latent dimension of the planted positions.
    pub latent_dim: usize,
    pub noise: f64,
    pub feature_dim: usize,
    /// Standard deviation-like scale of the noise added to features.
    pub feature_noise: f64,
    /// Fraction of triples held out, split evenly between valid and test.
    pub holdout: f64,
    pub min_train_degree: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            entities: 20,
            relations: 3,
            latent_dim: 4,
            noise: 0.05,
            feature_dim: 16,
            feature_noise: 0.05,
            holdout: 0.2,
            min_train_degree: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub graph: KnowledgeGraph,
    pub features: FeatureTable,
    /// Row-major `entities × latent_dim` planted positions.
    pub positions: Vec<f64>,
}

/// Entities on a noisy line: entity `i` sits at `i·u + noise` for a random
/// unit direction `u`, relation `k` is the translation `(k + 1)·u` and the
/// graph holds every `(i, k, i + k + 1)` inside the entity range. Features
/// are a fixed random linear map of the positions plus noise.
pub fn planted(cfg: &PlantedConfig) -> Result<Planted> {
    let mut rng = stream(cfg.seed, &[0x5E7D]);
    let d = cfg.latent_dim.max(1);
    let mut u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = libm::sqrt(u.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
    u.iter_mut().for_each(|x| *x /= norm);

    let mut positions = Vec::with_capacity(cfg.entities * d);
    for i in 0..cfg.entities {
        for &ux in &u {
            positions.push(i as f64 * ux + rng.gen_range(-cfg.noise..=cfg.noise));
        }
    }

    let mut triples = Vec::new();
    for k in 0..cfg.relations {
        for h in 0..cfg.entities {
            let t = h + k + 1;
            if t < cfg.entities {
                triples.push(Triple::new(h as u32, k as u32, t as u32));
            }
        }
    }
    triples.shuffle(&mut rng);
    // Hold out triples only while both endpoints keep `min_train_degree`
    // training occurrences, so every held-out fact stays inferable.
    let target = libm::round(triples.len() as f64 * cfg.holdout) as usize;
    let mut degree = alloc::vec![0usize; cfg.entities];
    for t in &triples {
        degree[t.head as usize] += 1;
        degree[t.tail as usize] += 1;
    }
    let mut train = Vec::with_capacity(triples.len());
    let mut held = Vec::with_capacity(target);
    for t in triples {
        let (h, tl) = (t.head as usize, t.tail as usize);
        if held.len() < target && degree[h] > cfg.min_train_degree && degree[tl] > cfg.min_train_degree {
            degree[h] -= 1;
            degree[tl] -= 1;
            held.push(t);
        } else {
            train.push(t);
        }
    }
    let test = held.split_off(held.len() / 2);
    let valid = held;
    let triples = train;
    let graph = KnowledgeGraph::unnamed(cfg.entities, cfg.relations, triples, valid, test)?;

    let map: Vec<f64> = (0..cfg.feature_dim * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(cfg.entities * cfg.feature_dim);
    for i in 0..cfg.entities {
        let pos = &positions[i * d..(i + 1) * d];
        for row in map.chunks_exact(d) {
            let v: f64 = row.iter().zip(pos).map(|(a, b)| a * b).sum();
            let v = v / cfg.entities as f64 + rng.gen_range(-cfg.feature_noise..=cfg.feature_noise);
            data.push(v as f32);
        }
    }
    let features = FeatureTable::from_dense(cfg.entities, cfg.feature_dim, data)?;
    Ok(Planted { graph, features, positions })
}

/// Uniformly random graph with split sizes as given, no triple repeated
/// across splits.
pub fn random_graph(entities: usize, relations: usize, sizes: [usize; 3], seed: u64) -> Result<KnowledgeGraph> {
    let mut rng = stream(seed, &[0x5E7E]);
    let total = sizes.iter().sum::<usize>();
    let total = total.min(entities * entities * relations);
    let mut all: Vec<Triple> = Vec::with_capacity(total);
    let mut fresh = alloc::collections::BTreeSet::new();
    while all.len() < total {
        let t = Triple::new(
            rng.gen_range(0..entities as u32),
            rng.gen_range(0..relations as u32),
            rng.gen_range(0..entities as u32),
        );
        if fresh.insert(t) {
            all.push(t);
        }
    }
    let test = all.split_off(all.len().saturating_sub(sizes[2]));
    let valid = all.split_off(all.len().saturating_sub(sizes[1]));
    KnowledgeGraph::unnamed(entities, relations, all, valid, test)
}
