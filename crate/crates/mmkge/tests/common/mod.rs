#![allow(dead_code)]

use std::fs;
use std::path::Path;

use mmkge::core::score::composite_score;
use mmkge::core::{FeatureTable, KnowledgeGraph, ModelParams, NormOrder, ScoreMask, SplitSet, Triple};

/// Four entities, two relations, five train triples.
pub fn write_toy(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("entities.dict"), "0\tcat\n1\tdog\n2\tfish\n3\tbird\n").unwrap();
    fs::write(dir.join("relations.dict"), "0\tchases\n1\teats\n").unwrap();
    fs::write(dir.join("train.txt"), "0\t0\t1\n1\t0\t2\n0\t1\t2\n3\t1\t2\n1\t0\t3\n").unwrap();
    fs::write(dir.join("valid.txt"), "3\t0\t0\n").unwrap();
    fs::write(dir.join("test.txt"), "2\t1\t0\n0\t0\t3\n").unwrap();
}

/// Rank by sorting surviving candidates, first position of the target score.
pub fn brute_rank(
    params: &ModelParams<f32>,
    features: &FeatureTable,
    known: &[Triple],
    triple: &Triple,
    head: bool,
    mask: ScoreMask,
    p: NormOrder,
) -> u64 {
    let n = params.dims().entity_count as u32;
    let mut scored: Vec<(f32, bool)> = (0..n)
        .map(|e| {
            if head {
                Triple::new(e, triple.relation, triple.tail)
            } else {
                Triple::new(triple.head, triple.relation, e)
            }
        })
        .filter(|c| c == triple || !known.contains(c))
        .map(|c| (composite_score(params, features, &c, mask, p).unwrap(), c == *triple))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let target = scored.iter().find(|s| s.1).unwrap().0;
    scored.iter().position(|s| s.0 == target).unwrap() as u64 + 1
}

/// `(mrr, [hit@1, hit@3, hit@10])` over the test split by brute force.
pub fn brute_metrics(
    params: &ModelParams<f32>,
    features: &FeatureTable,
    graph: &KnowledgeGraph,
    splits: SplitSet,
    mask: ScoreMask,
    p: NormOrder,
) -> (f64, [f64; 3]) {
    let known: Vec<Triple> = splits.iter().flat_map(|s| graph.split(s).to_vec()).collect();
    let ranks: Vec<[u64; 2]> = graph
        .test()
        .iter()
        .map(|t| [true, false].map(|head| brute_rank(params, features, &known, t, head, mask, p)))
        .collect();
    let n = 2.0 * ranks.len() as f64;
    let mrr = ranks.iter().map(|[h, t]| 1.0 / *h as f64 + 1.0 / *t as f64).sum::<f64>() / n;
    let hit = |k: u64| ranks.iter().flatten().filter(|&&r| r <= k).count() as f64 / n;
    (mrr, [hit(1), hit(3), hit(10)])
}
