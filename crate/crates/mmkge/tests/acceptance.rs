//! Acceptance checks. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits non-zero if any check fails.
//!
//! `MMKGE_WN9_DIR` points at a WN9 dataset directory (dictionaries, splits and
//! optionally `features.mmkf`); without it the WN9 check is skipped.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use mmkge::core::sampler::{self, NegativeBatch};
use mmkge::core::synth::{self, PlantedConfig};
use mmkge::core::train::{self, batch_gradients, batch_loss, contrast_parts};
use mmkge::core::{
    Component, CorruptionSide, Dims, EvalConfig, FeatureTable, KnowledgeGraph, LossVariant, Mode, ModelParams,
    NegativeSample, Negatives, NormOrder, ProjectionMode, SamplerConfig, ScoreMask, Slot, SplitSet, Strategy,
    TrainConfig, Triple,
};
use mmkge::{checkpoint, dataset, eval, mmkf, Error};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
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

fn flat(p: &ModelParams<f64>) -> Vec<f64> {
    [&p.struct_emb[..], &p.rel_emb[..], &p.proj[..]].concat()
}

fn flat_gradient(g: &train::Gradients<f64>, dims: Dims) -> Vec<f64> {
    let d = dims.d_e;
    let mut out = vec![0.0; (dims.entity_count + dims.relation_count) * d + d * dims.d_m];
    for (&id, row) in &g.entity {
        out[id as usize * d..][..d].copy_from_slice(row);
    }
    let off = dims.entity_count * d;
    for (&id, row) in &g.relation {
        out[off + id as usize * d..][..d].copy_from_slice(row);
    }
    if let Some(p) = &g.proj {
        out[off + dims.relation_count * d..].copy_from_slice(p);
    }
    out
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let dims = Dims::new(5, 2, 4, 6);
        let graph = synth::random_graph(5, 2, [4, 0, 0], seed).unwrap();
        let features = FeatureTable::xavier(5, 6, seed).unwrap();
        let params = ModelParams::<f64>::init(dims, seed).unwrap();
        let pos = graph.train().to_vec();
        for strategy in [Strategy::Normal, Strategy::Twins] {
            let neg = sampler::sample(strategy, &graph, &pos, &SamplerConfig::with_k(3), seed).unwrap();
            // A wide margin keeps every hinge active.
            let cfg = TrainConfig { margin: 50.0, mask: ScoreMask::FULL, p: NormOrder::L2, ..TrainConfig::default() };
            let step = batch_gradients(&params, &features, &pos, &neg, &cfg).unwrap();
            let analytic = flat_gradient(&step.gradients, dims);
            let base = flat(&params);
            let numeric: Vec<f64> = (0..base.len())
                .map(|i| {
                    let at = |x: f64| {
                        let mut v = base.clone();
                        v[i] = x;
                        let ne = dims.entity_count * dims.d_e;
                        let nr = dims.relation_count * dims.d_e;
                        let p = ModelParams::from_parts(
                            dims,
                            v[..ne].to_vec(),
                            v[ne..ne + nr].to_vec(),
                            v[ne + nr..].to_vec(),
                        )
                        .unwrap();
                        batch_loss(&p, &features, &pos, &neg, &cfg).unwrap()
                    };
                    let h = 1e-4;
                    (at(base[i] + h) - at(base[i] - h)) / (2.0 * h)
                })
                .collect();
            worst = worst.max(max_relative_error(&analytic, &numeric));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-4 && secs < 10.0, format!("max relative error {worst:.2e}, {secs:.2} s"))
}

fn rank_oracle() -> Verdict {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..20u64 {
        let n_e = 10 + (seed as usize * 7) % 41;
        let graph = synth::random_graph(n_e, 3, [140, 20, 40], seed).unwrap();
        let features = FeatureTable::xavier(n_e, 8, seed).unwrap();
        let params = ModelParams::<f32>::init(Dims::new(n_e, 3, 6, 8), seed).unwrap();
        for splits in [SplitSet::NONE, SplitSet::ALL] {
            let cfg = EvalConfig { filter_splits: splits, ..EvalConfig::default() };
            let report = eval::evaluate(&params, &features, &graph, &cfg, None).unwrap();
            let (mrr, hits) = common::brute_metrics(&params, &features, &graph, splits, cfg.mask, cfg.p);
            let got = [report.hit(1), report.hit(3), report.hit(10)].map(Option::unwrap);
            if report.mrr != mrr || got != hits {
                mismatches.push(format!("seed {seed} filter {splits}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches.is_empty() && secs < 30.0,
        format!("20 graphs x 2 filter settings, {} mismatches {mismatches:?}, {secs:.2} s", mismatches.len()),
    )
}

fn twins_cancellation() -> Verdict {
    let mut bad = 0;
    for case in 0..1000u64 {
        let n_e = 6;
        let graph = synth::random_graph(n_e, 2, [3, 0, 0], case).unwrap();
        let features = FeatureTable::xavier(n_e, 6, case).unwrap();
        let params = ModelParams::<f64>::init(Dims::new(n_e, 2, 4, 6), case).unwrap();
        let (side, cancels) =
            if case % 2 == 0 { (CorruptionSide::Tail, Component::Ms) } else { (CorruptionSide::Head, Component::Sm) };
        let p = if case % 4 < 2 { NormOrder::L1 } else { NormOrder::L2 };
        let pos = graph.train().to_vec();
        let cfg = SamplerConfig { side, ..SamplerConfig::with_k(2) };
        let neg = sampler::sample(Strategy::Twins, &graph, &pos, &cfg, case).unwrap();
        for (i, t) in pos.iter().enumerate() {
            for j in 0..neg.k() {
                let parts = contrast_parts(&params, &features, t, neg.unimodal(i, j), neg.multimodal(i, j), p).unwrap();
                if parts[cancels as usize] != 0.0 {
                    bad += 1;
                }
            }
        }
    }
    verdict(bad == 0, format!("1000 cases, {bad} non-zero cancelling terms"))
}

fn loss_arithmetic() -> Verdict {
    // One-dimensional line: entities at 0, 1, 3, 5; zero relation and features.
    let line = |coords: &[f64]| {
        let n = coords.len();
        let params = ModelParams::from_parts(Dims::new(n, 1, 1, 1), coords.to_vec(), vec![0.0], vec![0.0]).unwrap();
        (params, FeatureTable::zeros(n, 1).unwrap())
    };
    let negatives = |tails: &[u32]| {
        let s =
            tails.iter().map(|&e| NegativeSample { slot: Slot::Tail, replacement: e, mode: Mode::Entity }).collect();
        Negatives::Normal(NegativeBatch::new(tails.len(), s).unwrap())
    };
    let cfg = TrainConfig {
        margin: 4.0,
        mask: ScoreMask::only(Component::Ss),
        p: NormOrder::L1,
        loss: LossVariant::MeanNegative,
        ..TrainConfig::default()
    };
    let pos = [Triple::new(0, 0, 1)];
    let (params, feats) = line(&[0.0, 1.0, 3.0, 5.0]);
    let loss = batch_loss(&params, &feats, &pos, &negatives(&[2, 3]), &cfg).unwrap();
    let (params, feats) = line(&[0.0, 1.0, 5.0, -5.0]);
    let step = batch_gradients(&params, &feats, &pos, &negatives(&[2, 3]), &cfg).unwrap();
    let zero = step.loss == 0.0 && step.gradients.is_zero();
    verdict(loss == 1.0 && zero, format!("loss {loss}, zero-hinge gradient zero: {zero}"))
}

fn learning_sanity() -> Verdict {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut worst = f64::INFINITY;
    for seed in 0..3u64 {
        let planted = synth::planted(&PlantedConfig { relations: 5, seed, ..PlantedConfig::default() }).unwrap();
        let held_out: Vec<Triple> = planted.graph.valid().iter().chain(planted.graph.test()).copied().collect();
        for strategy in [Strategy::Twins, Strategy::Normal] {
            let cfg = TrainConfig {
                strategy,
                seed,
                margin: 8.0,
                learning_rate: 0.01,
                n_batches: 4,
                k: 16,
                epochs: 500,
                d_e: 16,
                p: NormOrder::L2,
                mask: ScoreMask::FULL,
                loss: LossVariant::PerPair,
                normalize_entities: true,
                eval_every: 0,
                ..TrainConfig::default()
            };
            let out = train::train::<f32>(&planted.graph, &planted.features, &cfg).unwrap();
            let report = eval::evaluate_triples(
                &out.params,
                &planted.features,
                &planted.graph,
                &held_out,
                &cfg.eval_config(),
                None,
            )
            .unwrap();
            worst = worst.min(report.mrr);
            lines.push(format!("seed {seed} {} {:.3}", strategy.name(), report.mrr));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst >= 0.9 && secs < 300.0, format!("held-out MRR [{}], {secs:.1} s", lines.join(", ")))
}

fn wn9() -> Verdict {
    let Some(dir) = std::env::var_os("MMKGE_WN9_DIR").map(PathBuf::from) else {
        return Verdict::Skip("MMKGE_WN9_DIR not set, dataset absent".into());
    };
    let start = Instant::now();
    let graph = match dataset::load_graph(&dir) {
        Ok(g) => g,
        Err(e) => return Verdict::Fail(format!("cannot load {}: {e}", dir.display())),
    };
    let feature_path = dir.join("features.mmkf");
    let features = if feature_path.exists() {
        Some(mmkf::load_features(&feature_path, graph.entity_count(), 0).unwrap())
    } else {
        None
    };
    let zeros = FeatureTable::zeros(graph.entity_count(), 1).unwrap();
    let run = |mask: ScoreMask, strategy: Strategy, features: &FeatureTable| {
        let cfg = TrainConfig { mask, strategy, ..TrainConfig::wn9() };
        let out = train::train::<f32>(&graph, features, &cfg).unwrap();
        eval::evaluate(&out.params, features, &graph, &cfg.eval_config(), None).unwrap()
    };
    let transe = run(ScoreMask::only(Component::Ss), Strategy::Normal, features.as_ref().unwrap_or(&zeros));
    let secs = start.elapsed().as_secs_f64();
    let mut ok = (transe.mrr - 0.766).abs() <= 0.06 && secs <= 3600.0;
    let mut detail = format!("train {} triples, ss-only MRR {:.3}, {secs:.0} s", graph.train().len(), transe.mrr);
    if let Some(f) = &features {
        let twins = run(ScoreMask::FULL, Strategy::Twins, f);
        let normal = run(ScoreMask::FULL, Strategy::Normal, f);
        ok &= twins.mrr >= normal.mrr;
        detail += &format!(
            "; full model MRR twins {:.3} / normal {:.3}, Hit@1 twins {:.3}",
            twins.mrr,
            normal.mrr,
            twins.hit(1).unwrap()
        );
    }
    verdict(ok, detail)
}

fn inference_speed() -> Verdict {
    let (n_e, n_r, d_e, d_m) = (14541, 237, 128, 768);
    let graph: KnowledgeGraph = synth::random_graph(n_e, n_r, [272115, 17535, 20466], 0).unwrap();
    let features = FeatureTable::xavier(n_e, d_m, 0).unwrap();
    let params = ModelParams::<f32>::init(Dims::new(n_e, n_r, d_e, d_m), 0).unwrap();
    let cached = EvalConfig::default();
    let recompute = EvalConfig { projection: ProjectionMode::Recompute, ..EvalConfig::default() };

    // Per-candidate recompute is far too slow for a full pass, so compare on
    // a subset; each timing includes building the ranker.
    let subset = &graph.test()[..4];
    let a = eval::evaluate_triples(&params, &features, &graph, subset, &cached, Some(1)).unwrap();
    let b = eval::evaluate_triples(&params, &features, &graph, subset, &recompute, Some(1)).unwrap();
    let same = a.same_metrics(&b);

    let full = eval::evaluate(&params, &features, &graph, &cached, None).unwrap();
    let ranked = 2 * full.triples;
    verdict(
        a.seconds <= b.seconds && same && full.seconds < 1800.0,
        format!(
            "{} test triples: cached {:.2} s vs recompute {:.2} s, metrics equal: {same}; full pass {} triples ({} rankings) \
             on {} thread(s) in {:.1} s, {:.0} rankings/s",
            subset.len(),
            a.seconds,
            b.seconds,
            full.triples,
            ranked,
            full.threads,
            full.seconds,
            ranked as f64 / full.seconds
        ),
    )
}

fn format_round_trips() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let table = FeatureTable::xavier(7, 5, 3).unwrap();
    let bytes = mmkf::encode_table(&table);
    let back = mmkf::from_bytes(&bytes, 7, 0).unwrap();
    let bits = |s: &[f32]| s.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    check(bits(back.as_slice()) == bits(table.as_slice()), "mmkf values");
    check(mmkf::encode_table(&back) == bytes, "mmkf bytes");
    check(matches!(mmkf::decode(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })), "mmkf truncated");
    let mut bad = bytes.clone();
    bad[0] ^= 0xFF;
    check(matches!(mmkf::decode(&bad), Err(Error::BadMagic { .. })), "mmkf bad magic");

    let mut params = ModelParams::<f32>::init(Dims::new(6, 2, 3, 5), 9).unwrap();
    params.struct_emb[0] = f32::from_bits(0x7FC0_1234);
    params.proj[1] = -0.0;
    let bytes = checkpoint::encode(&params);
    let back = checkpoint::decode(&bytes).unwrap();
    check(bits(&back.struct_emb) == bits(&params.struct_emb), "mmkc entity rows");
    check(bits(&back.rel_emb) == bits(&params.rel_emb), "mmkc relation rows");
    check(bits(&back.proj) == bits(&params.proj), "mmkc projection");
    check(checkpoint::encode(&back) == bytes, "mmkc bytes");
    check(matches!(checkpoint::decode(&bytes[..bytes.len() - 4]), Err(Error::Truncated { .. })), "mmkc truncated");
    let mut bad = bytes.clone();
    bad[1] ^= 0xFF;
    check(matches!(checkpoint::decode(&bad), Err(Error::BadMagic { .. })), "mmkc bad magic");

    verdict(
        failures.is_empty(),
        if failures.is_empty() { "MMKF and MMKC".into() } else { format!("failed: {failures:?}") },
    )
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("gradient-correctness", gradient_check),
        ("rank-metric-oracle", rank_oracle),
        ("twins-cancellation", twins_cancellation),
        ("loss-arithmetic", loss_arithmetic),
        ("learning-sanity", learning_sanity),
        ("wn9-transe-reproduction", wn9),
        ("inference-speed", inference_speed),
        ("format-round-trips", format_round_trips),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name}: {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
