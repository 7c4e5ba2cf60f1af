#![allow(dead_code)]

use mmkge_core::train::Gradients;
use mmkge_core::{Dims, FeatureTable, KnowledgeGraph, ModelParams, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub graph: KnowledgeGraph,
    pub features: FeatureTable,
    pub params: ModelParams<f64>,
}

/// Random graph with `n_e` entities, uniformly random params in [-1, 1] and
/// random features.
pub fn random_instance(seed: u64, n_e: usize, n_r: usize, n_train: usize, d_e: usize, d_m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut guard = 0;
    while train.len() < n_train && guard < 10_000 {
        guard += 1;
        let t = Triple::new(rng.gen_range(0..n_e as u32), rng.gen_range(0..n_r as u32), rng.gen_range(0..n_e as u32));
        if !train.contains(&t) {
            train.push(t);
        }
    }
    let graph = KnowledgeGraph::unnamed(n_e, n_r, train, vec![], vec![]).unwrap();
    let feats: Vec<f32> = (0..n_e * d_m).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let features = FeatureTable::from_dense(n_e, d_m, feats).unwrap();
    let dims = Dims::new(n_e, n_r, d_e, d_m);
    let mut u = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let params = ModelParams::from_parts(dims, u(n_e * d_e), u(n_r * d_e), u(d_e * d_m)).unwrap();
    Instance { graph, features, params }
}

/// Flattened (struct_emb, rel_emb, proj) view of a sparse gradient.
pub fn densify(g: &Gradients<f64>, dims: Dims) -> Vec<f64> {
    let mut out = vec![0.0; (dims.entity_count + dims.relation_count) * dims.d_e + dims.d_e * dims.d_m];
    for (&id, row) in &g.entity {
        out[id as usize * dims.d_e..(id as usize + 1) * dims.d_e].copy_from_slice(row);
    }
    let off = dims.entity_count * dims.d_e;
    for (&id, row) in &g.relation {
        out[off + id as usize * dims.d_e..off + (id as usize + 1) * dims.d_e].copy_from_slice(row);
    }
    if let Some(p) = &g.proj {
        let off = off + dims.relation_count * dims.d_e;
        out[off..].copy_from_slice(p);
    }
    out
}

/// Reads or writes parameter `i` in the same flattened order as [`densify`].
pub fn param_mut(p: &mut ModelParams<f64>, i: usize) -> &mut f64 {
    let a = p.struct_emb.len();
    let b = p.rel_emb.len();
    if i < a {
        &mut p.struct_emb[i]
    } else if i < a + b {
        &mut p.rel_emb[i - a]
    } else {
        &mut p.proj[i - a - b]
    }
}

/// Central finite differences of `loss` over every parameter.
pub fn numeric_gradient(params: &ModelParams<f64>, step: f64, loss: impl Fn(&ModelParams<f64>) -> f64) -> Vec<f64> {
    let n = params.struct_emb.len() + params.rel_emb.len() + params.proj.len();
    let mut work = params.clone();
    (0..n)
        .map(|i| {
            let orig = *param_mut(&mut work, i);
            *param_mut(&mut work, i) = orig + step;
            let up = loss(&work);
            *param_mut(&mut work, i) = orig - step;
            let down = loss(&work);
            *param_mut(&mut work, i) = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - n).abs() / scale.max(1e-9)
            }
        })
        .fold(0.0, f64::max)
}
