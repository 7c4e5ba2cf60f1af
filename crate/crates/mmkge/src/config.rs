//! Flat `key = value` run configuration. Resolution order: preset defaults,
//! then the config file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use mmkge_core::{CorruptionSide, LossVariant, NormOrder, ScoreMask, SplitSet, Strategy, TrainConfig, TwinsDraw};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEATURE_DIM: usize = 768;

/// Every configurable key. `None` means "not set at this layer".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub preset: Option<String>,
    pub dataset: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Feature dimension used when no feature file is given.
    pub feature_dim: Option<usize>,
    pub feature_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,

    pub margin: Option<f64>,
    pub learning_rate: Option<f64>,
    pub n_batches: Option<usize>,
    pub k: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub mask: Option<String>,
    pub p: Option<u32>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub d_e: Option<usize>,
    pub loss: Option<String>,
    pub side: Option<String>,
    pub twins_draw: Option<String>,
    pub normalize_entities: Option<bool>,
    pub freeze_projection: Option<bool>,
    pub eval_every: Option<usize>,
    pub patience: Option<usize>,
    pub filter_splits: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    /// Values set in `top` win over values in `self`.
    pub fn overlay(&self, top: &Settings) -> Settings {
        let mut out = self.clone();
        overlay!(out, top; preset, dataset, features, feature_dim, feature_seed, out_dir, threads,
            margin, learning_rate, n_batches, k, epochs, seed, strategy, mask, p, beta1, beta2,
            epsilon, d_e, loss, side, twins_draw, normalize_entities, freeze_projection,
            eval_every, patience, filter_splits);
        out
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a TOML config, or the `config` object of a run manifest when the
    /// file ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let config = manifest
                .get("config")
                .ok_or_else(|| Error::Config(format!("{} has no `config` object", path.display())))?;
            return serde_json::from_value(config.clone()).map_err(|e| Error::Config(e.to_string()));
        }
        Settings::from_toml(&text)
    }

    /// Preset defaults for every training key.
    pub fn preset(name: &str) -> Result<Settings> {
        let cfg = match name {
            "wn9" => TrainConfig::wn9(),
            "fb15k-237" => TrainConfig::fb15k237(),
            other => return Err(Error::Config(format!("unknown preset `{other}` (expected wn9 or fb15k-237)"))),
        };
        Ok(Settings {
            preset: Some(name.to_string()),
            feature_dim: Some(DEFAULT_FEATURE_DIM),
            feature_seed: Some(0),
            out_dir: Some(PathBuf::from("run")),
            ..Settings::from_train_config(&cfg)
        })
    }

    pub fn from_train_config(cfg: &TrainConfig) -> Settings {
        Settings {
            margin: Some(cfg.margin),
            learning_rate: Some(cfg.learning_rate),
            n_batches: Some(cfg.n_batches),
            k: Some(cfg.k),
            epochs: Some(cfg.epochs),
            seed: Some(cfg.seed),
            strategy: Some(cfg.strategy.name().to_string()),
            mask: Some(cfg.mask.to_string()),
            p: Some(cfg.p.p()),
            beta1: Some(cfg.beta1),
            beta2: Some(cfg.beta2),
            epsilon: Some(cfg.epsilon),
            d_e: Some(cfg.d_e),
            loss: Some(loss_name(cfg.loss).to_string()),
            side: Some(side_name(cfg.side).to_string()),
            twins_draw: Some(twins_draw_name(cfg.twins_draw).to_string()),
            normalize_entities: Some(cfg.normalize_entities),
            freeze_projection: Some(cfg.freeze_projection),
            eval_every: Some(cfg.eval_every),
            patience: Some(cfg.patience),
            filter_splits: Some(cfg.filter_splits.to_string()),
            ..Settings::default()
        }
    }

    /// Preset (from `preset`, default wn9) < `file` < `flags`.
    pub fn resolve(file: &Settings, flags: &Settings) -> Result<Settings> {
        let name = flags.preset.as_deref().or(file.preset.as_deref()).unwrap_or("wn9");
        let resolved = Settings::preset(name)?.overlay(file).overlay(flags);
        resolved.train_config()?;
        Ok(resolved)
    }

    /// Training configuration; every training key must be set.
    pub fn train_config(&self) -> Result<TrainConfig> {
        fn req<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
            v.clone().ok_or_else(|| Error::Config(format!("missing key `{key}`")))
        }
        let cfg = TrainConfig {
            margin: req(&self.margin, "margin")?,
            learning_rate: req(&self.learning_rate, "learning_rate")?,
            n_batches: req(&self.n_batches, "n_batches")?,
            k: req(&self.k, "k")?,
            epochs: req(&self.epochs, "epochs")?,
            seed: req(&self.seed, "seed")?,
            strategy: parse_strategy(&req(&self.strategy, "strategy")?)?,
            mask: parse_mask(&req(&self.mask, "mask")?)?,
            p: parse_p(req(&self.p, "p")?)?,
            beta1: req(&self.beta1, "beta1")?,
            beta2: req(&self.beta2, "beta2")?,
            epsilon: req(&self.epsilon, "epsilon")?,
            d_e: req(&self.d_e, "d_e")?,
            loss: parse_loss(&req(&self.loss, "loss")?)?,
            side: parse_side(&req(&self.side, "side")?)?,
            twins_draw: parse_twins_draw(&req(&self.twins_draw, "twins_draw")?)?,
            normalize_entities: req(&self.normalize_entities, "normalize_entities")?,
            freeze_projection: req(&self.freeze_projection, "freeze_projection")?,
            eval_every: req(&self.eval_every, "eval_every")?,
            patience: req(&self.patience, "patience")?,
            filter_splits: parse_splits(&req(&self.filter_splits, "filter_splits")?)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}` (expected {expected})"))
}

pub fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "twins" => Ok(Strategy::Twins),
        "normal" => Ok(Strategy::Normal),
        _ => Err(bad("strategy", s, "twins or normal")),
    }
}

pub fn parse_mask(s: &str) -> Result<ScoreMask> {
    ScoreMask::parse(s).map_err(|_| bad("mask", s, "full or a list of ss, mm, sm, ms, all"))
}

pub fn parse_p(p: u32) -> Result<NormOrder> {
    NormOrder::from_p(p).map_err(|_| bad("p", &p.to_string(), "1 or 2"))
}

pub fn loss_name(l: LossVariant) -> &'static str {
    match l {
        LossVariant::MeanNegative => "mean-negative",
        LossVariant::PerPair => "per-pair",
    }
}

pub fn parse_loss(s: &str) -> Result<LossVariant> {
    match s {
        "mean-negative" => Ok(LossVariant::MeanNegative),
        "per-pair" => Ok(LossVariant::PerPair),
        _ => Err(bad("loss", s, "mean-negative or per-pair")),
    }
}

pub fn side_name(s: CorruptionSide) -> &'static str {
    match s {
        CorruptionSide::Uniform => "uniform",
        CorruptionSide::Head => "head",
        CorruptionSide::Tail => "tail",
    }
}

pub fn parse_side(s: &str) -> Result<CorruptionSide> {
    match s {
        "uniform" => Ok(CorruptionSide::Uniform),
        "head" => Ok(CorruptionSide::Head),
        "tail" => Ok(CorruptionSide::Tail),
        _ => Err(bad("side", s, "uniform, head or tail")),
    }
}

pub fn twins_draw_name(d: TwinsDraw) -> &'static str {
    match d {
        TwinsDraw::Shared => "shared",
        TwinsDraw::Independent => "independent",
    }
}

pub fn parse_twins_draw(s: &str) -> Result<TwinsDraw> {
    match s {
        "shared" => Ok(TwinsDraw::Shared),
        "independent" => Ok(TwinsDraw::Independent),
        _ => Err(bad("twins_draw", s, "shared or independent")),
    }
}

pub fn parse_splits(s: &str) -> Result<SplitSet> {
    SplitSet::parse(s).map_err(|_| bad("filter_splits", s, "none, all or a list of train, valid, test"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_tuned_values() {
        let wn9 = Settings::preset("wn9").unwrap().train_config().unwrap();
        assert_eq!((wn9.margin, wn9.learning_rate, wn9.n_batches), (8.0, 2e-5, 100));
        let fb = Settings::preset("fb15k-237").unwrap().train_config().unwrap();
        assert_eq!((fb.margin, fb.learning_rate, fb.n_batches), (6.0, 2e-5, 400));
        assert!(Settings::preset("wn18").is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Settings::from_toml("margin = 4.0\nmargn = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("margn"), "{err}");
    }

    #[test]
    fn flags_override_file_override_preset() {
        let file = Settings::from_toml("preset = \"fb15k-237\"\nmargin = 5.0\nk = 4\n").unwrap();
        let flags = Settings { k: Some(2), ..Settings::default() };
        let cfg = Settings::resolve(&file, &flags).unwrap().train_config().unwrap();
        assert_eq!((cfg.margin, cfg.k, cfg.n_batches), (5.0, 2, 400));
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Settings::preset("wn9").unwrap();
        assert_eq!(Settings::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in ["strategy = \"bernoulli\"", "p = 3", "mask = \"xx\"", "margin = -1.0", "filter_splits = \"dev\""] {
            let file = Settings::from_toml(text).unwrap();
            assert!(Settings::resolve(&file, &Settings::default()).is_err(), "{text}");
        }
    }
}
