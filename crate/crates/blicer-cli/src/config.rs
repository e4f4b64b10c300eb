//! Run configuration: a flat `key=value` format with dotted keys, mode
//! defaults, flag overrides and byte-stable manifests.
//!
//! Resolution order: per-mode defaults, then the config file, then flags.
//! Seeds are special: when absent everywhere they are drawn once from OS
//! entropy and recorded, so every manifest re-derives its run exactly.

use anyhow::{anyhow, bail, Context, Result};
use blicer::clwe::Scaling;
use blicer::lexicon::NegCap;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Supervised,
    SemiSupervised,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Mode::Supervised),
            "semi-supervised" => Ok(Mode::SemiSupervised),
            other => bail!("invalid mode: `{other}` (supervised | semi-supervised)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Supervised => "supervised",
            Mode::SemiSupervised => "semi-supervised",
        }
    }
}

/// Every tunable of the pipeline, fully resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub embed_max_vocab: usize,
    pub csls_k: usize,
    pub csls_scaling: Scaling,
    pub mining_delta: f64,
    pub mining_n_aug: usize,
    pub mining_n_freq: usize,
    pub mining_n_neg: usize,
    pub mining_neg_cap: NegCap,
    pub polarise_alpha: f64,
    pub train_epochs: usize,
    pub train_n_rep: usize,
    pub train_batch_size: usize,
    pub train_learning_rate: f64,
    pub train_weight_decay: f64,
    pub model_layers: usize,
    pub model_width: usize,
    pub model_heads: usize,
    pub model_ff: usize,
    pub model_max_len: usize,
    pub model_template: u8,
    pub rerank_lambda: f64,
    pub rerank_n_cand: usize,
    pub seed_params: u64,
    pub seed_shuffle: u64,
    pub seed_synth: u64,
    pub synth_vocab: usize,
    pub synth_dim: usize,
    pub synth_noise: f64,
    pub synth_train: usize,
    pub synth_dev: usize,
    pub synth_test: usize,
}

const SEED_KEYS: [&str; 3] = ["seed.params", "seed.shuffle", "seed.synth"];

/// Mode-dependent defaults. Seeds are intentionally absent: they are drawn
/// at resolution time when not supplied.
fn defaults(mode: Mode) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("mode", mode.as_str().to_string());
    put("embed.max_vocab", "200000".into());
    put("csls.k", "10".into());
    put("csls.scaling", "minmax_global".into());
    put("mining.n_freq", "20000".into());
    put("mining.n_neg", "28".into());
    put("mining.neg_cap", "per_side".into());
    put("train.batch_size", "256".into());
    // Toy-scorer default; fine-tuning an external pretrained cross-encoder
    // instead would use 1.2e-5.
    put("train.learning_rate", "0.0003".into());
    put("train.weight_decay", "0.01".into());
    put("model.layers", "2".into());
    put("model.width", "64".into());
    put("model.heads", "4".into());
    put("model.ff", "128".into());
    put("model.max_len", "64".into());
    put("model.template", "15".into());
    put("rerank.n_cand", "28".into());
    put("synth.vocab", "500".into());
    put("synth.dim", "32".into());
    put("synth.noise", "0.3".into());
    put("synth.train", "150".into());
    put("synth.dev", "50".into());
    put("synth.test", "200".into());
    match mode {
        Mode::Supervised => {
            put("train.epochs", "3".into());
            put("mining.n_aug", "0".into());
            put("train.n_rep", "8".into());
            put("mining.delta", "0.1".into());
            put("polarise.alpha", "0.7".into());
            put("rerank.lambda", "0.31".into());
        }
        Mode::SemiSupervised => {
            put("train.epochs", "5".into());
            put("mining.n_aug", "4000".into());
            put("train.n_rep", "4".into());
            put("mining.delta", "0.2".into());
            put("polarise.alpha", "1".into());
            put("rerank.lambda", "0.5".into());
        }
    }
    m
}

pub const KNOWN_KEYS: [&str; 32] = [
    "mode",
    "embed.max_vocab",
    "csls.k",
    "csls.scaling",
    "mining.delta",
    "mining.n_aug",
    "mining.n_freq",
    "mining.n_neg",
    "mining.neg_cap",
    "polarise.alpha",
    "train.epochs",
    "train.n_rep",
    "train.batch_size",
    "train.learning_rate",
    "train.weight_decay",
    "model.layers",
    "model.width",
    "model.heads",
    "model.ff",
    "model.max_len",
    "model.template",
    "rerank.lambda",
    "rerank.n_cand",
    "seed.params",
    "seed.shuffle",
    "seed.synth",
    "synth.vocab",
    "synth.dim",
    "synth.noise",
    "synth.train",
    "synth.dev",
    "synth.test",
];

/// Parse a flat config file: `key=value` per line, `#` comments, blank
/// lines ignored.
pub fn parse_flat(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{origin}:{}: expected key=value, got `{line}`", i + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Resolve the final configuration from (optional) file entries and flag
/// overrides. Returns the typed config plus the canonical manifest map.
pub fn resolve(
    file: &BTreeMap<String, String>,
    overrides: &[(String, String)],
) -> Result<(RunConfig, BTreeMap<String, String>)> {
    // Mode first: flags beat file beats the supervised default.
    let mode_str = overrides
        .iter()
        .rev()
        .find(|(k, _)| k == "mode")
        .map(|(_, v)| v.clone())
        .or_else(|| file.get("mode").cloned())
        .unwrap_or_else(|| "supervised".to_string());
    let mode = Mode::parse(&mode_str)?;

    let mut map = defaults(mode);
    for (k, v) in file {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            bail!("unknown config key `{k}`");
        }
        map.insert(k.clone(), v.clone());
    }
    for (k, v) in overrides {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            bail!("unknown config key `{k}`");
        }
        map.insert(k.clone(), v.clone());
    }
    map.insert("mode".to_string(), mode.as_str().to_string());
    for seed_key in SEED_KEYS {
        if !map.contains_key(seed_key) {
            map.insert(seed_key.to_string(), rand::random::<u64>().to_string());
        }
    }

    let cfg = typed(&map)?;
    let manifest = canonical_map(&cfg);
    Ok((cfg, manifest))
}

fn get<'m>(map: &'m BTreeMap<String, String>, key: &str) -> Result<&'m str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| anyhow!("missing config key `{key}`"))
}

fn parse_field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = get(map, key)?;
    raw.parse()
        .map_err(|_| anyhow!("invalid {key}: `{raw}`"))
}

fn typed(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let cfg = RunConfig {
        mode: Mode::parse(get(map, "mode")?)?,
        embed_max_vocab: parse_field(map, "embed.max_vocab")?,
        csls_k: parse_field(map, "csls.k")?,
        csls_scaling: Scaling::parse(get(map, "csls.scaling")?)
            .map_err(|e| anyhow!("invalid csls.scaling: {e}"))?,
        mining_delta: parse_field(map, "mining.delta")?,
        mining_n_aug: parse_field(map, "mining.n_aug")?,
        mining_n_freq: parse_field(map, "mining.n_freq")?,
        mining_n_neg: parse_field(map, "mining.n_neg")?,
        mining_neg_cap: NegCap::parse(get(map, "mining.neg_cap")?)
            .map_err(|e| anyhow!("invalid mining.neg_cap: {e}"))?,
        polarise_alpha: parse_field(map, "polarise.alpha")?,
        train_epochs: parse_field(map, "train.epochs")?,
        train_n_rep: parse_field(map, "train.n_rep")?,
        train_batch_size: parse_field(map, "train.batch_size")?,
        train_learning_rate: parse_field(map, "train.learning_rate")?,
        train_weight_decay: parse_field(map, "train.weight_decay")?,
        model_layers: parse_field(map, "model.layers")?,
        model_width: parse_field(map, "model.width")?,
        model_heads: parse_field(map, "model.heads")?,
        model_ff: parse_field(map, "model.ff")?,
        model_max_len: parse_field(map, "model.max_len")?,
        model_template: parse_field(map, "model.template")?,
        rerank_lambda: parse_field(map, "rerank.lambda")?,
        rerank_n_cand: parse_field(map, "rerank.n_cand")?,
        seed_params: parse_field(map, "seed.params")?,
        seed_shuffle: parse_field(map, "seed.shuffle")?,
        seed_synth: parse_field(map, "seed.synth")?,
        synth_vocab: parse_field(map, "synth.vocab")?,
        synth_dim: parse_field(map, "synth.dim")?,
        synth_noise: parse_field(map, "synth.noise")?,
        synth_train: parse_field(map, "synth.train")?,
        synth_dev: parse_field(map, "synth.dev")?,
        synth_test: parse_field(map, "synth.test")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Validate every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, why: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(anyhow!("invalid {key}: {why}"))
            }
        };
        check(self.embed_max_vocab >= 1, "embed.max_vocab", "must be >= 1")?;
        check(self.csls_k >= 1, "csls.k", "must be >= 1")?;
        check(
            (0.0..=2.0).contains(&self.mining_delta),
            "mining.delta",
            "must be in [0, 2]",
        )?;
        check(self.mining_n_freq >= 1, "mining.n_freq", "must be >= 1")?;
        check(self.mining_n_neg >= 1, "mining.n_neg", "must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.polarise_alpha),
            "polarise.alpha",
            "must be in [0, 1]",
        )?;
        check(self.train_n_rep >= 1, "train.n_rep", "must be >= 1")?;
        check(self.train_batch_size >= 1, "train.batch_size", "must be >= 1")?;
        check(
            self.train_learning_rate > 0.0,
            "train.learning_rate",
            "must be > 0",
        )?;
        check(
            self.train_weight_decay >= 0.0,
            "train.weight_decay",
            "must be >= 0",
        )?;
        check(self.model_layers >= 1, "model.layers", "must be >= 1")?;
        check(self.model_width >= 1, "model.width", "must be >= 1")?;
        check(
            self.model_heads >= 1 && self.model_width % self.model_heads == 0,
            "model.heads",
            "must divide model.width",
        )?;
        check(self.model_ff >= 1, "model.ff", "must be >= 1")?;
        check(self.model_max_len >= 8, "model.max_len", "must be >= 8")?;
        check(
            (1..=16).contains(&self.model_template),
            "model.template",
            "must be in 1..=16",
        )?;
        check(
            (0.0..=1.0).contains(&self.rerank_lambda),
            "rerank.lambda",
            "must be in [0, 1]",
        )?;
        check(self.rerank_n_cand >= 1, "rerank.n_cand", "must be >= 1")?;
        check(self.synth_vocab >= 1, "synth.vocab", "must be >= 1")?;
        check(self.synth_dim >= 1, "synth.dim", "must be >= 1")?;
        check(self.synth_noise >= 0.0, "synth.noise", "must be >= 0")?;
        check(
            self.synth_train + self.synth_dev + self.synth_test <= self.synth_vocab,
            "synth.train",
            "splits must fit in synth.vocab",
        )?;
        Ok(())
    }
}

/// The canonical (re-emittable) key/value view of a resolved config.
fn canonical_map(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("mode", cfg.mode.as_str().to_string());
    put("embed.max_vocab", cfg.embed_max_vocab.to_string());
    put("csls.k", cfg.csls_k.to_string());
    put("csls.scaling", cfg.csls_scaling.as_str().to_string());
    put("mining.delta", cfg.mining_delta.to_string());
    put("mining.n_aug", cfg.mining_n_aug.to_string());
    put("mining.n_freq", cfg.mining_n_freq.to_string());
    put("mining.n_neg", cfg.mining_n_neg.to_string());
    put("mining.neg_cap", cfg.mining_neg_cap.as_str().to_string());
    put("polarise.alpha", cfg.polarise_alpha.to_string());
    put("train.epochs", cfg.train_epochs.to_string());
    put("train.n_rep", cfg.train_n_rep.to_string());
    put("train.batch_size", cfg.train_batch_size.to_string());
    put("train.learning_rate", cfg.train_learning_rate.to_string());
    put("train.weight_decay", cfg.train_weight_decay.to_string());
    put("model.layers", cfg.model_layers.to_string());
    put("model.width", cfg.model_width.to_string());
    put("model.heads", cfg.model_heads.to_string());
    put("model.ff", cfg.model_ff.to_string());
    put("model.max_len", cfg.model_max_len.to_string());
    put("model.template", cfg.model_template.to_string());
    put("rerank.lambda", cfg.rerank_lambda.to_string());
    put("rerank.n_cand", cfg.rerank_n_cand.to_string());
    put("seed.params", cfg.seed_params.to_string());
    put("seed.shuffle", cfg.seed_shuffle.to_string());
    put("seed.synth", cfg.seed_synth.to_string());
    put("synth.vocab", cfg.synth_vocab.to_string());
    put("synth.dim", cfg.synth_dim.to_string());
    put("synth.noise", cfg.synth_noise.to_string());
    put("synth.train", cfg.synth_train.to_string());
    put("synth.dev", cfg.synth_dev.to_string());
    put("synth.test", cfg.synth_test.to_string());
    m
}

/// Serialize a manifest map: sorted `key=value` lines, LF endings.
pub fn emit(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

pub fn write_manifest(path: &Path, map: &BTreeMap<String, String>) -> Result<()> {
    std::fs::write(path, emit(map))
        .with_context(|| format!("writing manifest {}", path.display()))
}
