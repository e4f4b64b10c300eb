//! Subcommand implementations on top of the library crate.

use crate::config::RunConfig;
use crate::UsageError;
use anyhow::{anyhow, bail, Context, Result};
use blicer::clwe::{fit_procrustes, map_space, CslsConfig, CslsScorer};
use blicer::crossenc::external::ExternalScorer;
use blicer::crossenc::model::{CrossEncoder, EncoderConfig};
use blicer::crossenc::tokenizer::{CharTokenizer, TokenizerConfig};
use blicer::crossenc::train::{train, TrainConfig};
use blicer::crossenc::{
    render_template, CrossEncoderScorer, DirectedPair, LanguageNameTable, PairScorer, Template,
};
use blicer::embed::{load_word_vectors, EmbeddingSpace};
use blicer::eval::{evaluate, generate_synthetic, EvalResult, SynthSpec};
use blicer::lexicon::{
    assemble_training_set, augment_silver, mine_negatives, score_pairs_scaled, Lexicon,
    MiningConfig, PolarisationParams, TrainingSet,
};
use blicer::rerank::{
    remix, translate, tune_lambda, write_predictions_tsv, RankedCandidate, RankedPrediction,
    RerankConfig,
};
use blicer::Scalar;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// The pipeline's working precision.
type F = f64;

pub struct SpacePair {
    pub src: EmbeddingSpace<F>,
    pub tgt: EmbeddingSpace<F>,
}

pub fn load_space(path: &Path, tag: &str, max_vocab: usize) -> Result<EmbeddingSpace<F>> {
    let space = load_word_vectors(path, tag, max_vocab)
        .with_context(|| format!("loading word vectors from {}", path.display()))?;
    Ok(space.unit_normalize()?)
}

pub fn load_spaces(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<SpacePair> {
    Ok(SpacePair {
        src: load_space(src, src_tag, cfg.embed_max_vocab)?,
        tgt: load_space(tgt, tgt_tag, cfg.embed_max_vocab)?,
    })
}

fn load_lexicon(path: &Path, src_tag: &str, tgt_tag: &str) -> Result<Lexicon> {
    let (lex, dups) = Lexicon::parse(path, src_tag, tgt_tag)
        .with_context(|| format!("parsing dictionary {}", path.display()))?;
    if dups > 0 {
        log::warn!("{}: dropped {dups} duplicate pair(s)", path.display());
    }
    Ok(lex)
}

fn csls_config(cfg: &RunConfig) -> CslsConfig {
    CslsConfig {
        k: cfg.csls_k,
        scaling: cfg.csls_scaling,
    }
}

fn mining_config(cfg: &RunConfig) -> MiningConfig {
    MiningConfig {
        delta: cfg.mining_delta,
        n_neg: cfg.mining_n_neg,
        n_freq: cfg.mining_n_freq,
        n_aug: cfg.mining_n_aug,
        neg_cap: cfg.mining_neg_cap,
    }
}

/// Builtin native language names, with any unknown tag displayed as itself.
fn language_table_for(tags: &[&str]) -> LanguageNameTable {
    let mut table = LanguageNameTable::builtin();
    for tag in tags {
        if table.get(tag).is_none() {
            log::info!("no native name for language tag `{tag}`; using the tag itself");
            table.insert(*tag, *tag);
        }
    }
    table
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let spec = SynthSpec {
        vocab_size: cfg.synth_vocab,
        dim: cfg.synth_dim,
        seed: cfg.seed_synth,
        noise: cfg.synth_noise,
        n_train: cfg.synth_train,
        n_dev: cfg.synth_dev,
        n_test: cfg.synth_test,
        ..SynthSpec::default()
    };
    let bench = generate_synthetic::<F>(&spec)?;
    bench.src.save(&out_dir.join("src.vec"))?;
    bench.tgt.save(&out_dir.join("tgt.vec"))?;
    bench.train.save(&out_dir.join("train.tsv"))?;
    bench.dev.save(&out_dir.join("dev.tsv"))?;
    bench.test.save(&out_dir.join("test.tsv"))?;
    println!(
        "synth: |V|={} d={} noise={} -> {} train / {} dev / {} test pairs in {}",
        cfg.synth_vocab,
        cfg.synth_dim,
        cfg.synth_noise,
        bench.train.len(),
        bench.dev.len(),
        bench.test.len(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// map
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_map(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    seed_dict: &Path,
    out_src: &Path,
    out_tgt: &Path,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let seed = load_lexicon(seed_dict, src_tag, tgt_tag)?;
    let map = fit_procrustes(&spaces.src, &spaces.tgt, &seed)?;
    let mapped = map_space(&spaces.src, &map)?.unit_normalize()?;
    mapped.save(out_src)?;
    spaces.tgt.save(out_tgt)?;
    println!(
        "map: fitted orthogonal {}x{} map from {} seed pairs (orthogonal: {})",
        mapped.dim(),
        mapped.dim(),
        seed.len(),
        map.is_orthogonal()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_augment(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    seed_dict: Option<&Path>,
    out: &Path,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let seed = match seed_dict {
        Some(p) => load_lexicon(p, src_tag, tgt_tag)?,
        None => Lexicon::new(src_tag, tgt_tag),
    };
    let mining = adapt_n_freq(cfg, &spaces);
    let silver = augment_silver(&spaces.src, &spaces.tgt, &seed, &mining, &csls_config(cfg))?;
    silver.save(out)?;
    println!("augment: {} silver pairs -> {}", silver.len(), out.display());
    Ok(())
}

/// n_freq is only meaningful up to the trimmed vocabulary sizes; the CLI
/// clamps it so the 20k default works on small spaces.
fn adapt_n_freq(cfg: &RunConfig, spaces: &SpacePair) -> MiningConfig {
    let mut mining = mining_config(cfg);
    let bound = spaces.src.len().min(spaces.tgt.len());
    if mining.n_freq > bound {
        log::info!("clamping mining.n_freq from {} to {bound}", mining.n_freq);
        mining.n_freq = bound;
    }
    mining
}

// ---------------------------------------------------------------------------
// mine
// ---------------------------------------------------------------------------

pub fn cmd_mine(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    positives: &Path,
    out: &Path,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let positives = load_lexicon(positives, src_tag, tgt_tag)?;
    let mining = adapt_n_freq(cfg, &spaces);
    let negatives = mine_negatives(
        &positives,
        &spaces.src,
        &spaces.tgt,
        &mining,
        &csls_config(cfg),
    )?;
    negatives.save(out)?;
    println!(
        "mine: {} hard negatives for {} positives -> {}",
        negatives.len(),
        positives.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn assemble(
    cfg: &RunConfig,
    spaces: &SpacePair,
    positives: &Lexicon,
    negatives: &Lexicon,
) -> Result<TrainingSet<F>> {
    let scorer = CslsScorer::new(&spaces.src, &spaces.tgt, &csls_config(cfg))?;
    let scores = score_pairs_scaled(&scorer, positives, negatives, cfg.csls_scaling)?;
    let params = PolarisationParams::new(cfg.polarise_alpha)?;
    Ok(assemble_training_set(
        positives,
        negatives,
        &scores,
        &params,
        cfg.train_n_rep,
    )?)
}

fn build_toy_scorer(cfg: &RunConfig, data: &TrainingSet<F>) -> Result<CrossEncoderScorer<F>> {
    let template = Template::builtin(cfg.model_template)?;
    let tags: Vec<&str> = data
        .examples
        .iter()
        .flat_map(|e| [e.src_tag.as_str(), e.tgt_tag.as_str()])
        .collect();
    let table = language_table_for(&tags);
    let mut texts = Vec::with_capacity(data.len() * 2);
    for e in &data.examples {
        texts.push(render_template(&e.src, &e.src_tag, &template, &table)?);
        texts.push(render_template(&e.tgt, &e.tgt_tag, &template, &table)?);
    }
    let tokenizer = CharTokenizer::build(
        texts.iter().map(String::as_str),
        TokenizerConfig {
            max_len: cfg.model_max_len,
        },
    )?;
    let encoder = EncoderConfig {
        layers: cfg.model_layers,
        width: cfg.model_width,
        heads: cfg.model_heads,
        ff: cfg.model_ff,
        max_len: cfg.model_max_len,
        vocab_size: tokenizer.vocab_size(),
        param_seed: cfg.seed_params,
    };
    Ok(CrossEncoderScorer::new(
        CrossEncoder::init(encoder)?,
        tokenizer,
        template,
        table,
    )?)
}

fn train_toy_scorer(
    cfg: &RunConfig,
    data: &TrainingSet<F>,
) -> Result<(CrossEncoderScorer<F>, Vec<F>)> {
    let mut scorer = build_toy_scorer(cfg, data)?;
    let train_cfg = TrainConfig {
        epochs: cfg.train_epochs,
        batch_size: cfg.train_batch_size,
        learning_rate: cfg.train_learning_rate,
        weight_decay: cfg.train_weight_decay,
        shuffle_seed: cfg.seed_shuffle,
    };
    let trace = train(&mut scorer, data, &train_cfg)?;
    Ok((scorer, trace))
}

fn write_loss_trace(path: &Path, trace: &[F]) -> Result<()> {
    let mut out = create(path)?;
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(out, "{epoch}\t{loss:.6}")?;
    }
    Ok(out.flush()?)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    positives: &Path,
    negatives: &Path,
    out_model: &Path,
    dump_training_set: Option<&Path>,
    loss_out: Option<&Path>,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let positives = load_lexicon(positives, src_tag, tgt_tag)?;
    let negatives = load_lexicon(negatives, src_tag, tgt_tag)?;
    let data = assemble(cfg, &spaces, &positives, &negatives)?;
    if let Some(path) = dump_training_set {
        let mut out = create(path)?;
        data.write_tsv(&mut out)?;
        out.flush()?;
    }
    let (scorer, trace) = train_toy_scorer(cfg, &data)?;
    if let Some(path) = loss_out {
        write_loss_trace(path, &trace)?;
    }
    scorer.save(out_model)?;
    println!(
        "train: {} examples, {} epochs, final mean loss {} -> {}",
        data.len(),
        trace.len(),
        trace.last().map_or("n/a".to_string(), |l| format!("{l:.6}")),
        out_model.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// rerank
// ---------------------------------------------------------------------------

/// The scorer behind Eq.-style mixing: the built-in model, an external
/// process, or the neutral 0.5 stand-in used when lambda = 0 makes the
/// second stage irrelevant.
pub enum AnyScorer {
    Toy(Box<CrossEncoderScorer<F>>),
    External(ExternalScorer),
    Neutral,
}

impl PairScorer<F> for AnyScorer {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> blicer::Result<Vec<F>> {
        match self {
            AnyScorer::Toy(s) => s.score_pairs(pairs),
            AnyScorer::External(s) => s.score_pairs(pairs),
            AnyScorer::Neutral => Ok(vec![F::half(); pairs.len()]),
        }
    }
}

pub fn make_scorer(
    model: Option<&Path>,
    scorer_cmd: Option<&str>,
    lambda: f64,
) -> Result<AnyScorer> {
    match (model, scorer_cmd) {
        (Some(_), Some(_)) => Err(UsageError::new(
            "--model and --scorer-cmd are mutually exclusive",
        )
        .into()),
        (Some(path), None) => Ok(AnyScorer::Toy(Box::new(CrossEncoderScorer::load(path)?))),
        (None, Some(cmd)) => Ok(AnyScorer::External(ExternalScorer::from_command_line(cmd)?)),
        (None, None) if lambda == 0.0 => Ok(AnyScorer::Neutral),
        (None, None) => Err(UsageError::new(
            "rerank needs --model or --scorer-cmd unless rerank.lambda is 0",
        )
        .into()),
    }
}

fn read_queries(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut queries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() {
            queries.push(word.to_string());
        }
    }
    if queries.is_empty() {
        bail!("query file {} is empty", path.display());
    }
    Ok(queries)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_rerank(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    queries: Option<&Path>,
    test_dict: Option<&Path>,
    model: Option<&Path>,
    scorer_cmd: Option<&str>,
    out: &Path,
    dump_retrieval: Option<&Path>,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let query_list = match (queries, test_dict) {
        (Some(q), _) => read_queries(q)?,
        (None, Some(d)) => load_lexicon(d, src_tag, tgt_tag)?
            .sources()
            .into_iter()
            .map(str::to_string)
            .collect(),
        (None, None) => return Err(UsageError::new("rerank needs --queries or --test-dict").into()),
    };
    let pair_scorer = make_scorer(model, scorer_cmd, cfg.rerank_lambda)?;
    let csls = CslsScorer::new(&spaces.src, &spaces.tgt, &csls_config(cfg))?;
    if let Some(path) = dump_retrieval {
        let rows = csls.topk_many(&query_list, cfg.rerank_n_cand)?;
        let mut w = create(path)?;
        blicer::clwe::write_topk_tsv(&mut w, &query_list, &rows)?;
        w.flush()?;
    }
    let predictions = translate(
        &query_list,
        &csls,
        &pair_scorer,
        &RerankConfig {
            lambda: cfg.rerank_lambda,
            n_cand: cfg.rerank_n_cand,
        },
        cfg.csls_scaling,
    )?;
    let mut w = create(out)?;
    write_predictions_tsv(&mut w, &predictions)?;
    w.flush()?;
    println!(
        "rerank: {} queries x {} candidates at lambda {} -> {}",
        query_list.len(),
        cfg.rerank_n_cand,
        cfg.rerank_lambda,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Reload a prediction TSV (`query rank candidate f_c f_tilde f_mix`).
pub fn read_predictions(path: &Path) -> Result<Vec<RankedPrediction<F>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut predictions: Vec<RankedPrediction<F>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            bail!(
                "{}:{}: expected 6 tab-separated fields, found {}",
                path.display(),
                i + 1,
                fields.len()
            );
        }
        let rank: usize = fields[1]
            .parse()
            .map_err(|_| anyhow!("{}:{}: bad rank `{}`", path.display(), i + 1, fields[1]))?;
        let parse_score = |s: &str| -> Result<F> {
            s.parse()
                .map_err(|_| anyhow!("{}:{}: bad score `{s}`", path.display(), i + 1))
        };
        let candidate = RankedCandidate {
            word: fields[2].to_string(),
            fc_scaled: parse_score(fields[3])?,
            f_tilde: parse_score(fields[4])?,
            f_mix: parse_score(fields[5])?,
        };
        let query = fields[0];
        let start_new = predictions.last().map_or(true, |p| p.query != query);
        if start_new {
            if rank != 1 {
                bail!("{}:{}: query `{query}` does not start at rank 1", path.display(), i + 1);
            }
            predictions.push(RankedPrediction {
                query: query.to_string(),
                candidates: vec![candidate],
            });
        } else {
            let pred = predictions.last_mut().expect("non-empty");
            if rank != pred.candidates.len() + 1 {
                bail!("{}:{}: rank {rank} out of sequence", path.display(), i + 1);
            }
            pred.candidates.push(candidate);
        }
    }
    if predictions.is_empty() {
        bail!("prediction file {} is empty", path.display());
    }
    Ok(predictions)
}

fn write_eval(out: &Path, result: &EvalResult) -> Result<()> {
    let mut w = create(out)?;
    result.write_tsv(&mut w)?;
    w.flush()?;
    println!("{}", result.pretty());
    Ok(())
}

pub fn cmd_eval(
    predictions: &Path,
    gold: &Path,
    out: &Path,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    let preds = read_predictions(predictions)?;
    let gold = load_lexicon(gold, src_tag, tgt_tag)?;
    let result = evaluate(&preds, &gold)?;
    write_eval(out, &result)
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_pipeline(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    train_dict: Option<&Path>,
    dev_dict: Option<&Path>,
    test_dict: &Path,
    out_dir: &Path,
    scorer_cmd: Option<&str>,
    tune: bool,
    src_tag: &str,
    tgt_tag: &str,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let spaces = load_spaces(cfg, src, tgt, src_tag, tgt_tag)?;
    let test = load_lexicon(test_dict, src_tag, tgt_tag)?;

    // Stage 1: align. Without a training dictionary the spaces are taken as
    // already aligned (silver-only, fully unsupervised assembly).
    let seed = match train_dict {
        Some(p) => Some(load_lexicon(p, src_tag, tgt_tag)?),
        None => None,
    };
    let (mapped_src, seed_lex) = match &seed {
        Some(seed_lex) => {
            let map = fit_procrustes(&spaces.src, &spaces.tgt, seed_lex)?;
            log::info!("procrustes map fitted from {} pairs", seed_lex.len());
            (
                map_space(&spaces.src, &map)?.unit_normalize()?,
                seed_lex.clone(),
            )
        }
        None => {
            log::info!("no training dictionary: treating the input spaces as pre-aligned");
            (spaces.src.clone(), Lexicon::new(src_tag, tgt_tag))
        }
    };
    mapped_src.save(&out_dir.join("src.mapped.vec"))?;
    spaces.tgt.save(&out_dir.join("tgt.norm.vec"))?;
    let aligned = SpacePair {
        src: mapped_src,
        tgt: spaces.tgt,
    };

    // Stage 2: positives = seed + silver augmentation.
    let mining = adapt_n_freq(cfg, &aligned);
    let silver = if cfg.mining_n_aug > 0 {
        augment_silver(&aligned.src, &aligned.tgt, &seed_lex, &mining, &csls_config(cfg))?
    } else {
        Lexicon::new(src_tag, tgt_tag)
    };
    silver.save(&out_dir.join("silver.tsv"))?;
    let positives = seed_lex.union(&silver)?;
    positives.save(&out_dir.join("positives.tsv"))?;
    log::info!(
        "positives: {} gold + {} silver = {}",
        seed_lex.len(),
        silver.len(),
        positives.len()
    );

    // Stage 3: hard negatives and the polarised training set.
    let negatives = mine_negatives(&positives, &aligned.src, &aligned.tgt, &mining, &csls_config(cfg))?;
    negatives.save(&out_dir.join("negatives.tsv"))?;
    let data = assemble(cfg, &aligned, &positives, &negatives)?;
    {
        let mut w = create(&out_dir.join("training_set.tsv"))?;
        data.write_tsv(&mut w)?;
        w.flush()?;
    }
    log::info!(
        "training set: {} examples ({} positives, {} negatives)",
        data.len(),
        positives.len(),
        negatives.len()
    );

    // Stage 4: the pair scorer (trained toy model, or an external process).
    let pair_scorer = match scorer_cmd {
        Some(cmd) => AnyScorer::External(ExternalScorer::from_command_line(cmd)?),
        None => {
            let (scorer, trace) = train_toy_scorer(cfg, &data)?;
            write_loss_trace(&out_dir.join("loss.tsv"), &trace)?;
            scorer.save(&out_dir.join("model.blce"))?;
            AnyScorer::Toy(Box::new(scorer))
        }
    };

    // Stage 5: rerank (lambda optionally tuned on the dev dictionary).
    let csls = CslsScorer::new(&aligned.src, &aligned.tgt, &csls_config(cfg))?;
    let lambda = match (tune, dev_dict) {
        (true, Some(dev_path)) => {
            let dev = load_lexicon(dev_path, src_tag, tgt_tag)?;
            let grid: Vec<f64> = (0..=20).map(|i| f64::from(i) * 0.05).collect();
            let (best, dev_p1) = tune_lambda(
                &dev,
                &csls,
                &pair_scorer,
                cfg.rerank_n_cand,
                cfg.csls_scaling,
                &grid,
            )?;
            println!("pipeline: tuned lambda {best:.2} (dev P@1 {dev_p1:.4})");
            best
        }
        (true, None) => {
            return Err(UsageError::new("--tune-lambda needs --dev-dict").into());
        }
        (false, _) => cfg.rerank_lambda,
    };

    let queries: Vec<String> = test.sources().into_iter().map(str::to_string).collect();
    let base = translate(
        &queries,
        &csls,
        &pair_scorer,
        &RerankConfig {
            lambda: 0.0,
            n_cand: cfg.rerank_n_cand,
        },
        cfg.csls_scaling,
    )?;
    let baseline = evaluate(&base, &test)?;
    let predictions = remix(&base, lambda)?;
    {
        let mut w = create(&out_dir.join("predictions.tsv"))?;
        write_predictions_tsv(&mut w, &predictions)?;
        w.flush()?;
    }

    // Stage 6: evaluate both the CSLS baseline and the reranked output.
    let reranked = evaluate(&predictions, &test)?;
    {
        let mut w = create(&out_dir.join("eval.tsv"))?;
        write!(w, "baseline\t")?;
        baseline.write_tsv(&mut w)?;
        write!(w, "reranked\t")?;
        reranked.write_tsv(&mut w)?;
        w.flush()?;
    }
    println!("baseline {}", baseline.pretty());
    println!("reranked {} (lambda {lambda})", reranked.pretty());
    Ok(())
}
