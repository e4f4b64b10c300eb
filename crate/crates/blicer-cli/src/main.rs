//! Command-line front end for the bilingual-lexicon-induction pipeline.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or config invariants),
//! 2 data error (missing or malformed inputs, runtime failures).

mod commands;
mod config;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_flat, resolve, write_manifest, RunConfig};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Marker for errors that should exit with code 1.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Config keys exposed one-to-one as flags; any flag beats the config file.
#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// Flat key=value config file with dotted keys.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Where to write the resolved run manifest (defaults next to the
    /// command's main output).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// supervised | semi-supervised (selects hyperparameter defaults).
    #[arg(long)]
    mode: Option<String>,

    #[arg(long = "embed.max_vocab", value_name = "N")]
    embed_max_vocab: Option<String>,
    #[arg(long = "csls.k", value_name = "N")]
    csls_k: Option<String>,
    #[arg(long = "csls.scaling", value_name = "MODE")]
    csls_scaling: Option<String>,
    #[arg(long = "mining.delta", value_name = "X")]
    mining_delta: Option<String>,
    #[arg(long = "mining.n_aug", value_name = "N")]
    mining_n_aug: Option<String>,
    #[arg(long = "mining.n_freq", value_name = "N")]
    mining_n_freq: Option<String>,
    #[arg(long = "mining.n_neg", value_name = "N")]
    mining_n_neg: Option<String>,
    #[arg(long = "mining.neg_cap", value_name = "MODE")]
    mining_neg_cap: Option<String>,
    #[arg(long = "polarise.alpha", value_name = "X")]
    polarise_alpha: Option<String>,
    #[arg(long = "train.epochs", value_name = "N")]
    train_epochs: Option<String>,
    #[arg(long = "train.n_rep", value_name = "N")]
    train_n_rep: Option<String>,
    #[arg(long = "train.batch_size", value_name = "N")]
    train_batch_size: Option<String>,
    #[arg(long = "train.learning_rate", value_name = "X")]
    train_learning_rate: Option<String>,
    #[arg(long = "train.weight_decay", value_name = "X")]
    train_weight_decay: Option<String>,
    #[arg(long = "model.layers", value_name = "N")]
    model_layers: Option<String>,
    #[arg(long = "model.width", value_name = "N")]
    model_width: Option<String>,
    #[arg(long = "model.heads", value_name = "N")]
    model_heads: Option<String>,
    #[arg(long = "model.ff", value_name = "N")]
    model_ff: Option<String>,
    #[arg(long = "model.max_len", value_name = "N")]
    model_max_len: Option<String>,
    #[arg(long = "model.template", value_name = "ID")]
    model_template: Option<String>,
    #[arg(long = "rerank.lambda", value_name = "X")]
    rerank_lambda: Option<String>,
    #[arg(long = "rerank.n_cand", value_name = "N")]
    rerank_n_cand: Option<String>,
    #[arg(long = "seed.params", value_name = "SEED")]
    seed_params: Option<String>,
    #[arg(long = "seed.shuffle", value_name = "SEED")]
    seed_shuffle: Option<String>,
    #[arg(long = "seed.synth", value_name = "SEED")]
    seed_synth: Option<String>,
    #[arg(long = "synth.vocab", value_name = "N")]
    synth_vocab: Option<String>,
    #[arg(long = "synth.dim", value_name = "N")]
    synth_dim: Option<String>,
    #[arg(long = "synth.noise", value_name = "X")]
    synth_noise: Option<String>,
    #[arg(long = "synth.train", value_name = "N")]
    synth_train: Option<String>,
    #[arg(long = "synth.dev", value_name = "N")]
    synth_dev: Option<String>,
    #[arg(long = "synth.test", value_name = "N")]
    synth_test: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        };
        put("mode", &self.mode);
        put("embed.max_vocab", &self.embed_max_vocab);
        put("csls.k", &self.csls_k);
        put("csls.scaling", &self.csls_scaling);
        put("mining.delta", &self.mining_delta);
        put("mining.n_aug", &self.mining_n_aug);
        put("mining.n_freq", &self.mining_n_freq);
        put("mining.n_neg", &self.mining_n_neg);
        put("mining.neg_cap", &self.mining_neg_cap);
        put("polarise.alpha", &self.polarise_alpha);
        put("train.epochs", &self.train_epochs);
        put("train.n_rep", &self.train_n_rep);
        put("train.batch_size", &self.train_batch_size);
        put("train.learning_rate", &self.train_learning_rate);
        put("train.weight_decay", &self.train_weight_decay);
        put("model.layers", &self.model_layers);
        put("model.width", &self.model_width);
        put("model.heads", &self.model_heads);
        put("model.ff", &self.model_ff);
        put("model.max_len", &self.model_max_len);
        put("model.template", &self.model_template);
        put("rerank.lambda", &self.rerank_lambda);
        put("rerank.n_cand", &self.rerank_n_cand);
        put("seed.params", &self.seed_params);
        put("seed.shuffle", &self.seed_shuffle);
        put("seed.synth", &self.seed_synth);
        put("synth.vocab", &self.synth_vocab);
        put("synth.dim", &self.synth_dim);
        put("synth.noise", &self.synth_noise);
        put("synth.train", &self.synth_train);
        put("synth.dev", &self.synth_dev);
        put("synth.test", &self.synth_test);
        out
    }
}

#[derive(Args, Debug, Clone)]
struct TagArgs {
    /// Language tag of the source space.
    #[arg(long, default_value = "xx")]
    src_tag: String,
    /// Language tag of the target space.
    #[arg(long, default_value = "yy")]
    tgt_tag: String,
}

#[derive(Parser, Debug)]
#[command(
    name = "blicer",
    version,
    about = "Bilingual lexicon induction with cross-encoder reranking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the seeded synthetic bilingual benchmark.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for src.vec, tgt.vec and the three dictionaries.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Fit the orthogonal map on a seed dictionary and write aligned spaces.
    Map {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        #[arg(long, value_name = "TSV")]
        seed_dict: PathBuf,
        /// Mapped, re-normalized source space.
        #[arg(long, value_name = "VEC")]
        out_src: PathBuf,
        /// Normalized target space.
        #[arg(long, value_name = "VEC")]
        out_tgt: PathBuf,
    },
    /// Mine high-confidence silver pairs from aligned spaces.
    Augment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        /// Gold seed dictionary silver pairs must not contradict.
        #[arg(long, value_name = "TSV")]
        seed_dict: Option<PathBuf>,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
    },
    /// Mine margin-based hard negatives for a positive dictionary.
    Mine {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        #[arg(long, value_name = "TSV")]
        positives: PathBuf,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
    },
    /// Assemble the polarised training set and train the toy cross-encoder.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        #[arg(long, value_name = "TSV")]
        positives: PathBuf,
        #[arg(long, value_name = "TSV")]
        negatives: PathBuf,
        #[arg(long, value_name = "FILE")]
        out_model: PathBuf,
        /// Optional TSV dump of the assembled training set.
        #[arg(long, value_name = "TSV")]
        dump_training_set: Option<PathBuf>,
        /// Optional per-epoch mean-loss TSV.
        #[arg(long, value_name = "TSV")]
        loss_out: Option<PathBuf>,
    },
    /// Retrieve, rescore and mix translation candidates.
    Rerank {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        /// Query words, one per line.
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Alternatively, take the queries from a test dictionary's sources.
        #[arg(long, value_name = "TSV")]
        test_dict: Option<PathBuf>,
        /// Trained cross-encoder checkpoint.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// External scorer command (reads `src<TAB>tgt` lines on stdin,
        /// writes one score in [0,1] per line).
        #[arg(long, value_name = "CMD")]
        scorer_cmd: Option<String>,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
        /// Also dump the raw first-stage retrieval as
        /// `query<TAB>target<TAB>score` lines.
        #[arg(long, value_name = "TSV")]
        dump_retrieval: Option<PathBuf>,
    },
    /// Score a prediction TSV against a gold dictionary.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "TSV")]
        predictions: PathBuf,
        #[arg(long, value_name = "TSV")]
        gold: PathBuf,
        #[arg(long, value_name = "TSV")]
        out: PathBuf,
    },
    /// map -> augment -> mine -> train -> rerank -> eval, end to end.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        tags: TagArgs,
        #[arg(long, value_name = "VEC")]
        src: PathBuf,
        #[arg(long, value_name = "VEC")]
        tgt: PathBuf,
        /// Gold seed dictionary; omit it to run silver-only (the spaces are
        /// then taken as already aligned).
        #[arg(long, value_name = "TSV")]
        train_dict: Option<PathBuf>,
        /// Held-out dictionary for --tune-lambda.
        #[arg(long, value_name = "TSV")]
        dev_dict: Option<PathBuf>,
        #[arg(long, value_name = "TSV")]
        test_dict: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Use an external scorer process instead of training the toy model.
        #[arg(long, value_name = "CMD")]
        scorer_cmd: Option<String>,
        /// Sweep lambda over {0, 0.05, ..., 1} on the dev dictionary.
        #[arg(long)]
        tune_lambda: bool,
    },
}

fn load_config_file(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            parse_flat(&text, &p.display().to_string()).map_err(|e| UsageError::new(e.to_string()).into())
        }
    }
}

/// Resolve the run config and write its manifest before the command runs.
fn prepare(args: &ConfigArgs, default_manifest: PathBuf) -> Result<RunConfig> {
    let file = load_config_file(args.config.as_deref())?;
    let (cfg, manifest) =
        resolve(&file, &args.overrides()).map_err(|e| UsageError::new(e.to_string()))?;
    let manifest_path = args.manifest.clone().unwrap_or(default_manifest);
    if let Some(dir) = manifest_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    write_manifest(&manifest_path, &manifest)?;
    log::info!("manifest written to {}", manifest_path.display());
    Ok(cfg)
}

fn manifest_next_to(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out
        .file_name()
        .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().to_string());
    name.push_str(suffix);
    out.with_file_name(name)
}

fn run() -> Result<()> {
    let cli = Cli::try_parse().map_err(ClapFailure)?;
    match cli.command {
        Command::Synth { cfg, out_dir } => {
            let cfg = prepare(&cfg, out_dir.join("synth.manifest"))?;
            commands::cmd_synth(&cfg, &out_dir)
        }
        Command::Map {
            cfg,
            tags,
            src,
            tgt,
            seed_dict,
            out_src,
            out_tgt,
        } => {
            let cfg = prepare(&cfg, manifest_next_to(&out_src, ".manifest"))?;
            commands::cmd_map(
                &cfg, &src, &tgt, &seed_dict, &out_src, &out_tgt, &tags.src_tag, &tags.tgt_tag,
            )
        }
        Command::Augment {
            cfg,
            tags,
            src,
            tgt,
            seed_dict,
            out,
        } => {
            let cfg = prepare(&cfg, manifest_next_to(&out, ".manifest"))?;
            commands::cmd_augment(
                &cfg,
                &src,
                &tgt,
                seed_dict.as_deref(),
                &out,
                &tags.src_tag,
                &tags.tgt_tag,
            )
        }
        Command::Mine {
            cfg,
            tags,
            src,
            tgt,
            positives,
            out,
        } => {
            let cfg = prepare(&cfg, manifest_next_to(&out, ".manifest"))?;
            commands::cmd_mine(&cfg, &src, &tgt, &positives, &out, &tags.src_tag, &tags.tgt_tag)
        }
        Command::Train {
            cfg,
            tags,
            src,
            tgt,
            positives,
            negatives,
            out_model,
            dump_training_set,
            loss_out,
        } => {
            let cfg = prepare(&cfg, manifest_next_to(&out_model, ".manifest"))?;
            commands::cmd_train(
                &cfg,
                &src,
                &tgt,
                &positives,
                &negatives,
                &out_model,
                dump_training_set.as_deref(),
                loss_out.as_deref(),
                &tags.src_tag,
                &tags.tgt_tag,
            )
        }
        Command::Rerank {
            cfg,
            tags,
            src,
            tgt,
            queries,
            test_dict,
            model,
            scorer_cmd,
            out,
            dump_retrieval,
        } => {
            let cfg = prepare(&cfg, manifest_next_to(&out, ".manifest"))?;
            commands::cmd_rerank(
                &cfg,
                &src,
                &tgt,
                queries.as_deref(),
                test_dict.as_deref(),
                model.as_deref(),
                scorer_cmd.as_deref(),
                &out,
                dump_retrieval.as_deref(),
                &tags.src_tag,
                &tags.tgt_tag,
            )
        }
        Command::Eval {
            cfg,
            tags,
            predictions,
            gold,
            out,
        } => {
            let _cfg = prepare(&cfg, manifest_next_to(&out, ".manifest"))?;
            commands::cmd_eval(&predictions, &gold, &out, &tags.src_tag, &tags.tgt_tag)
        }
        Command::Pipeline {
            cfg,
            tags,
            src,
            tgt,
            train_dict,
            dev_dict,
            test_dict,
            out_dir,
            scorer_cmd,
            tune_lambda,
        } => {
            let cfg = prepare(&cfg, out_dir.join("pipeline.manifest"))?;
            commands::cmd_pipeline(
                &cfg,
                &src,
                &tgt,
                train_dict.as_deref(),
                dev_dict.as_deref(),
                &test_dict,
                &out_dir,
                scorer_cmd.as_deref(),
                tune_lambda,
                &tags.src_tag,
                &tags.tgt_tag,
            )
        }
    }
}

/// Wrapper so clap errors flow through anyhow with their kind intact.
#[derive(Debug)]
struct ClapFailure(clap::Error);

impl fmt::Display for ClapFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ClapFailure {}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => {}
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<ClapFailure>() {
                // --help/--version are successes; real parse errors are
                // usage errors.
                let kind = clap_err.0.kind();
                let _ = clap_err.0.print();
                if matches!(
                    kind,
                    clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
                ) {
                    std::process::exit(0);
                }
                std::process::exit(1);
            }
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                std::process::exit(1);
            }
            std::process::exit(2);
        }
    }
}
