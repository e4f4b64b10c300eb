//! Dictionaries and training-set construction: seed/test parsing, silver
//! augmentation, margin-based hard-negative mining, pair reversal, target
//! polarisation and assembly of the cross-encoder training set.

use crate::clwe::{scale_scores, CslsConfig, CslsScorer, Scaling};
use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result, Side};
use crate::scalar::Scalar;
use indexmap::IndexSet;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// A directed word pair (source word, target word).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordPair {
    pub src: String,
    pub tgt: String,
}

impl WordPair {
    pub fn new(src: impl Into<String>, tgt: impl Into<String>) -> Self {
        WordPair {
            src: src.into(),
            tgt: tgt.into(),
        }
    }

    /// The reversed pair (target word, source word).
    pub fn reverse(&self) -> WordPair {
        WordPair {
            src: self.tgt.clone(),
            tgt: self.src.clone(),
        }
    }
}

/// An ordered, duplicate-free set of directed word pairs with its language
/// direction.
#[derive(Debug, Clone)]
pub struct Lexicon {
    src_tag: String,
    tgt_tag: String,
    pairs: IndexSet<WordPair>,
}

impl Lexicon {
    pub fn new(src_tag: impl Into<String>, tgt_tag: impl Into<String>) -> Self {
        Lexicon {
            src_tag: src_tag.into(),
            tgt_tag: tgt_tag.into(),
            pairs: IndexSet::new(),
        }
    }

    pub fn src_tag(&self) -> &str {
        &self.src_tag
    }

    pub fn tgt_tag(&self) -> &str {
        &self.tgt_tag
    }

    /// Insert a pair, returning false if it was already present.
    pub fn insert(&mut self, src: impl Into<String>, tgt: impl Into<String>) -> bool {
        self.pairs.insert(WordPair::new(src, tgt))
    }

    pub fn contains(&self, src: &str, tgt: &str) -> bool {
        // Cheap containment probe without allocating a WordPair would need a
        // borrowed key pair; lookups here are not on hot paths.
        self.pairs
            .contains(&WordPair::new(src.to_string(), tgt.to_string()))
    }

    pub fn contains_pair(&self, pair: &WordPair) -> bool {
        self.pairs.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordPair> {
        self.pairs.iter()
    }

    pub fn get(&self, i: usize) -> Option<&WordPair> {
        self.pairs.get_index(i)
    }

    /// Distinct source words, in first-appearance order.
    pub fn sources(&self) -> IndexSet<&str> {
        self.pairs.iter().map(|p| p.src.as_str()).collect()
    }

    /// Distinct target words, in first-appearance order.
    pub fn targets(&self) -> IndexSet<&str> {
        self.pairs.iter().map(|p| p.tgt.as_str()).collect()
    }

    /// Every pair swapped, direction tags swapped. An involution:
    /// `lex.reverse().reverse()` equals `lex`.
    pub fn reverse(&self) -> Lexicon {
        Lexicon {
            src_tag: self.tgt_tag.clone(),
            tgt_tag: self.src_tag.clone(),
            pairs: self.pairs.iter().map(WordPair::reverse).collect(),
        }
    }

    /// Union preserving self's order first; tags must agree.
    pub fn union(&self, other: &Lexicon) -> Result<Lexicon> {
        if self.src_tag != other.src_tag || self.tgt_tag != other.tgt_tag {
            return Err(Error::invalid(
                "lexicon union",
                format!(
                    "direction mismatch: ({}, {}) vs ({}, {})",
                    self.src_tag, self.tgt_tag, other.src_tag, other.tgt_tag
                ),
            ));
        }
        let mut out = self.clone();
        for p in other.iter() {
            out.pairs.insert(p.clone());
        }
        Ok(out)
    }

    /// Parse a dictionary file: one `src<TAB or whitespace>tgt` pair per
    /// non-empty line. Duplicates are dropped; the count of dropped lines is
    /// returned alongside (and logged).
    pub fn parse(path: &Path, src_tag: &str, tgt_tag: &str) -> Result<(Lexicon, usize)> {
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut lex = Lexicon::new(src_tag, tgt_tag);
        let mut duplicates = 0usize;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&display, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    &display,
                    i + 1,
                    format!("expected 2 fields, found {}", fields.len()),
                ));
            }
            if !lex.insert(fields[0], fields[1]) {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!("{display}: dropped {duplicates} duplicate pair(s)");
        }
        Ok((lex, duplicates))
    }

    /// Write as TSV, one `src<TAB>tgt` line per pair in order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let display = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&display, e))?;
        let mut out = BufWriter::new(file);
        for p in self.iter() {
            writeln!(out, "{}\t{}", p.src, p.tgt).map_err(|e| Error::io(&display, e))?;
        }
        out.flush().map_err(|e| Error::io(&display, e))
    }
}

/// How the per-positive negative cap is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegCap {
    /// Up to n_neg target-side plus n_neg source-side words per positive.
    #[default]
    PerSide,
    /// Up to n_neg negative words per positive across both sides.
    Total,
}

impl NegCap {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "per_side" => Ok(NegCap::PerSide),
            "total" => Ok(NegCap::Total),
            other => Err(Error::invalid("mining.neg_cap", format!("unknown mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NegCap::PerSide => "per_side",
            NegCap::Total => "total",
        }
    }
}

/// Knobs for silver augmentation and hard-negative mining.
#[derive(Debug, Clone, Copy)]
pub struct MiningConfig {
    /// Margin below the positive's score that still admits a negative.
    pub delta: f64,
    /// Per-positive negative cap (see `neg_cap`).
    pub n_neg: usize,
    /// How many most-frequent words per side are queried for silver pairs.
    pub n_freq: usize,
    /// How many silver pairs are kept.
    pub n_aug: usize,
    pub neg_cap: NegCap,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            delta: 0.1,
            n_neg: 28,
            n_freq: 20_000,
            n_aug: 0,
            neg_cap: NegCap::PerSide,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.delta) {
            return Err(Error::invalid(
                "mining.delta",
                format!("{} outside [0, 2]", self.delta),
            ));
        }
        if self.n_neg == 0 {
            return Err(Error::invalid("mining.n_neg", "must be >= 1"));
        }
        if self.n_freq == 0 {
            return Err(Error::invalid("mining.n_freq", "must be >= 1"));
        }
        Ok(())
    }
}

/// The polarisation strength: alpha = 1 leaves scores unchanged, alpha = 0
/// collapses them to binary labels.
#[derive(Debug, Clone, Copy)]
pub struct PolarisationParams {
    pub alpha: f64,
}

impl PolarisationParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(
                "polarise.alpha",
                format!("{alpha} outside [0, 1]"),
            ));
        }
        Ok(PolarisationParams { alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reversed,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reversed => "reversed",
        }
    }
}

/// Push a scaled similarity score towards its polarity's label:
/// positives via g+(z) = alpha * z + (1 - alpha), negatives via
/// g-(z) = alpha * z. Both map [0, 1] into [0, 1]; alpha = 1 is the exact
/// identity and alpha = 0 collapses to the binary labels 1 and 0. This
/// evaluation order keeps g+(z) - g-(z) exactly 1 - alpha.
pub fn polarise<F: Scalar>(z: F, params: &PolarisationParams, polarity: Polarity) -> Result<F> {
    if !(z >= F::zero() && z <= F::one()) {
        return Err(Error::invalid("z", format!("{z} outside [0, 1]")));
    }
    let alpha = F::from_f64(params.alpha);
    Ok(match polarity {
        Polarity::Positive => alpha * z + (F::one() - alpha),
        Polarity::Negative => alpha * z,
    })
}

/// One cross-encoder training example: a directed, language-tagged word pair
/// with its polarised target.
#[derive(Debug, Clone)]
pub struct TrainingExample<F> {
    pub src: String,
    pub src_tag: String,
    pub tgt: String,
    pub tgt_tag: String,
    pub target: F,
    pub polarity: Polarity,
    pub direction: Direction,
}

/// An ordered list of training examples; positive repetition encodes the
/// sampling distribution through multiplicities. Shuffling is the trainer's
/// seeded job, not done here.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet<F> {
    pub examples: Vec<TrainingExample<F>>,
}

impl<F: Scalar> TrainingSet<F> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Dump as `src<TAB>tgt<TAB>target<TAB>polarity<TAB>direction` lines.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for e in &self.examples {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{}\t{}",
                e.src,
                e.tgt,
                e.target.as_f64(),
                e.polarity.as_str(),
                e.direction.as_str()
            )?;
        }
        Ok(())
    }
}

fn check_tags<F: Scalar>(
    lex: &Lexicon,
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
) -> Result<()> {
    if lex.src_tag() != src.vocab().language_tag() || lex.tgt_tag() != tgt.vocab().language_tag()
    {
        return Err(Error::invalid(
            "lexicon",
            format!(
                "direction ({}, {}) does not match spaces ({}, {})",
                lex.src_tag(),
                lex.tgt_tag(),
                src.vocab().language_tag(),
                tgt.vocab().language_tag()
            ),
        ));
    }
    Ok(())
}

/// Mine up to n_aug high-confidence silver pairs from the aligned spaces.
///
/// Forward pass: CSLS argmax target for each of the n_freq most frequent
/// source words; backward pass: CSLS argmax source for each of the n_freq
/// most frequent target words. The pool is deduplicated, pairs contradicting
/// the seed are dropped (source already paired in the seed, or target already
/// used in the seed), and the top n_aug by raw CSLS survive.
pub fn augment_silver<F: Scalar>(
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
    seed: &Lexicon,
    cfg: &MiningConfig,
    csls: &CslsConfig,
) -> Result<Lexicon> {
    cfg.validate()?;
    check_tags(seed, src, tgt)?;
    let mut out = Lexicon::new(src.vocab().language_tag(), tgt.vocab().language_tag());
    if cfg.n_aug == 0 {
        return Ok(out);
    }
    if cfg.n_freq > src.len() || cfg.n_freq > tgt.len() {
        return Err(Error::invalid(
            "mining.n_freq",
            format!(
                "{} exceeds vocabulary sizes ({}, {})",
                cfg.n_freq,
                src.len(),
                tgt.len()
            ),
        ));
    }

    let scorer = CslsScorer::new(src, tgt, csls)?;
    let mut pool: IndexSet<(usize, usize)> = IndexSet::new();
    let mut scores: HashMap<(usize, usize), F> = HashMap::new();

    for i in 0..cfg.n_freq {
        let (j, s) = scorer.topk_indices(i, 1)[0];
        if pool.insert((i, j)) {
            scores.insert((i, j), s);
        }
    }
    for j in 0..cfg.n_freq {
        let col = scorer.score_col(j);
        let mut best = 0usize;
        for (i, s) in col.iter().enumerate().skip(1) {
            if *s > col[best] {
                best = i;
            }
        }
        if pool.insert((best, j)) {
            scores.insert((best, j), col[best]);
        }
    }

    let seed_sources: HashSet<&str> = seed.iter().map(|p| p.src.as_str()).collect();
    let seed_targets: HashSet<&str> = seed.iter().map(|p| p.tgt.as_str()).collect();

    let mut ranked: Vec<(usize, usize, F)> = pool
        .into_iter()
        .filter(|(i, j)| {
            !seed_sources.contains(src.vocab().word(*i))
                && !seed_targets.contains(tgt.vocab().word(*j))
        })
        .map(|(i, j)| (i, j, scores[&(i, j)]))
        .collect();
    ranked.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite scores")
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    ranked.truncate(cfg.n_aug);

    for (i, j, _) in ranked {
        out.insert(src.vocab().word(i), tgt.vocab().word(j));
    }
    Ok(out)
}

/// Mine hard negatives for every positive pair.
///
/// For a positive (x+, y+) with score b, target-side candidates are the
/// words y- != y+ with f_C(x+, y-) >= b - delta and source-side candidates
/// the words x- != x+ with f_C(x-, y+) >= b - delta. Candidates are capped
/// at the n_neg highest-scoring per side (or overall, see [`NegCap`]), then
/// any pair already in the positive set is dropped, so the result is always
/// disjoint from `positives`.
pub fn mine_negatives<F: Scalar>(
    positives: &Lexicon,
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
    cfg: &MiningConfig,
    csls: &CslsConfig,
) -> Result<Lexicon> {
    cfg.validate()?;
    check_tags(positives, src, tgt)?;
    let scorer = CslsScorer::new(src, tgt, csls)?;
    let delta = F::from_f64(cfg.delta);
    let mut out = Lexicon::new(src.vocab().language_tag(), tgt.vocab().language_tag());

    for pair in positives.iter() {
        let i = src.vocab().rank(&pair.src).ok_or_else(|| Error::UnknownWord {
            word: pair.src.clone(),
            side: Side::Source,
        })?;
        let j = tgt.vocab().rank(&pair.tgt).ok_or_else(|| Error::UnknownWord {
            word: pair.tgt.clone(),
            side: Side::Target,
        })?;
        let positive_score = scorer.score_indices(i, j);
        let floor = positive_score - delta;

        let row = scorer.score_row(i);
        let mut tgt_side: Vec<(usize, F)> = row
            .into_iter()
            .enumerate()
            .filter(|(cand, s)| *cand != j && *s >= floor)
            .collect();
        let col = scorer.score_col(j);
        let mut src_side: Vec<(usize, F)> = col
            .into_iter()
            .enumerate()
            .filter(|(cand, s)| *cand != i && *s >= floor)
            .collect();
        let by_score = |a: &(usize, F), b: &(usize, F)| {
            b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0))
        };
        tgt_side.sort_by(by_score);
        src_side.sort_by(by_score);

        match cfg.neg_cap {
            NegCap::PerSide => {
                tgt_side.truncate(cfg.n_neg);
                src_side.truncate(cfg.n_neg);
            }
            NegCap::Total => {
                // Merge both sides by score (target side wins exact ties,
                // mirroring the emission order below), keep n_neg overall.
                let mut merged: Vec<(Side, usize, F)> = tgt_side
                    .iter()
                    .map(|&(c, s)| (Side::Target, c, s))
                    .chain(src_side.iter().map(|&(c, s)| (Side::Source, c, s)))
                    .collect();
                merged.sort_by(|a, b| {
                    b.2.partial_cmp(&a.2)
                        .expect("finite scores")
                        .then_with(|| match (a.0, b.0) {
                            (Side::Target, Side::Source) => std::cmp::Ordering::Less,
                            (Side::Source, Side::Target) => std::cmp::Ordering::Greater,
                            _ => std::cmp::Ordering::Equal,
                        })
                        .then(a.1.cmp(&b.1))
                });
                merged.truncate(cfg.n_neg);
                tgt_side = merged
                    .iter()
                    .filter(|(side, ..)| *side == Side::Target)
                    .map(|&(_, c, s)| (c, s))
                    .collect();
                src_side = merged
                    .iter()
                    .filter(|(side, ..)| *side == Side::Source)
                    .map(|&(_, c, s)| (c, s))
                    .collect();
            }
        }

        for (cand, _) in &tgt_side {
            let s = &pair.src;
            let t = tgt.vocab().word(*cand);
            if !positives.contains(s, t) {
                out.insert(s.clone(), t);
            }
        }
        for (cand, _) in &src_side {
            let s = src.vocab().word(*cand);
            let t = &pair.tgt;
            if !positives.contains(s, t) {
                out.insert(s, t.clone());
            }
        }
    }
    Ok(out)
}

/// Reverse every pair of a lexicon (free-function form of
/// [`Lexicon::reverse`]).
pub fn reverse_lexicon(lex: &Lexicon) -> Lexicon {
    lex.reverse()
}

/// Scaled-to-[0,1] CSLS scores for every pair of `positives` and
/// `negatives`, scaled jointly over their union (the population behind the
/// polarised training targets).
pub fn score_pairs_scaled<F: Scalar>(
    scorer: &CslsScorer<'_, F>,
    positives: &Lexicon,
    negatives: &Lexicon,
    scaling: Scaling,
) -> Result<HashMap<WordPair, F>> {
    let all: Vec<&WordPair> = positives.iter().chain(negatives.iter()).collect();
    let mut raw = Vec::with_capacity(all.len());
    for p in &all {
        raw.push(scorer.score_words(&p.src, &p.tgt)?);
    }
    let scaled = scale_scores(&raw, scaling)?;
    Ok(all
        .into_iter()
        .cloned()
        .zip(scaled)
        .collect())
}

/// Assemble the cross-encoder training set.
///
/// Every positive contributes n_rep forward and n_rep reversed copies with
/// target g+(score); every negative contributes one forward and one reversed
/// copy with target g-(score). Reversed copies keep the forward target. The
/// result has exactly `2 * n_rep * |D_P| + 2 * |D_N|` examples.
pub fn assemble_training_set<F: Scalar>(
    positives: &Lexicon,
    negatives: &Lexicon,
    scores: &HashMap<WordPair, F>,
    params: &PolarisationParams,
    n_rep: usize,
) -> Result<TrainingSet<F>> {
    if n_rep == 0 {
        return Err(Error::invalid("train.n_rep", "must be >= 1"));
    }
    for p in positives.iter() {
        if negatives.contains_pair(p) {
            return Err(Error::invalid(
                "training pairs",
                format!("pair ({}, {}) is both positive and negative", p.src, p.tgt),
            ));
        }
    }
    let score_of = |p: &WordPair| -> Result<F> {
        scores.get(p).copied().ok_or_else(|| {
            Error::invalid(
                "scores",
                format!("missing score for pair ({}, {})", p.src, p.tgt),
            )
        })
    };

    let mut examples =
        Vec::with_capacity(2 * n_rep * positives.len() + 2 * negatives.len());
    let push = |lex: &Lexicon,
                    pair: &WordPair,
                    target: F,
                    polarity: Polarity,
                    reps: usize,
                    examples: &mut Vec<TrainingExample<F>>| {
        for _ in 0..reps {
            examples.push(TrainingExample {
                src: pair.src.clone(),
                src_tag: lex.src_tag().to_string(),
                tgt: pair.tgt.clone(),
                tgt_tag: lex.tgt_tag().to_string(),
                target,
                polarity,
                direction: Direction::Forward,
            });
        }
        for _ in 0..reps {
            examples.push(TrainingExample {
                src: pair.tgt.clone(),
                src_tag: lex.tgt_tag().to_string(),
                tgt: pair.src.clone(),
                tgt_tag: lex.src_tag().to_string(),
                target,
                polarity,
                direction: Direction::Reversed,
            });
        }
    };

    for pair in positives.iter() {
        let target = polarise(score_of(pair)?, params, Polarity::Positive)?;
        push(positives, pair, target, Polarity::Positive, n_rep, &mut examples);
    }
    for pair in negatives.iter() {
        let target = polarise(score_of(pair)?, params, Polarity::Negative)?;
        push(negatives, pair, target, Polarity::Negative, 1, &mut examples);
    }
    Ok(TrainingSet { examples })
}

/// Assemble a zero-shot training set from two pivot dictionaries
/// (pivot -> L_x and pivot -> L_y) and their separately mined negatives.
///
/// The dictionaries must share the pivot language on the source side and
/// must not share any pivot word, otherwise pairs between L_x and L_y could
/// be derived trivially through the common pivot. No silver augmentation is
/// applied in this mode.
#[allow(clippy::too_many_arguments)]
pub fn assemble_zero_shot<F: Scalar>(
    dict_a: &Lexicon,
    negatives_a: &Lexicon,
    scores_a: &HashMap<WordPair, F>,
    dict_b: &Lexicon,
    negatives_b: &Lexicon,
    scores_b: &HashMap<WordPair, F>,
    params: &PolarisationParams,
    n_rep: usize,
) -> Result<TrainingSet<F>> {
    if dict_a.src_tag() != dict_b.src_tag() {
        return Err(Error::invalid(
            "zero-shot dictionaries",
            format!(
                "pivot language mismatch: `{}` vs `{}`",
                dict_a.src_tag(),
                dict_b.src_tag()
            ),
        ));
    }
    let pivots_a = dict_a.sources();
    for p in dict_b.sources() {
        if pivots_a.contains(p) {
            return Err(Error::invalid(
                "zero-shot dictionaries",
                format!("pivot word `{p}` appears in both dictionaries"),
            ));
        }
    }
    let mut set = assemble_training_set(dict_a, negatives_a, scores_a, params, n_rep)?;
    let set_b = assemble_training_set(dict_b, negatives_b, scores_b, params, n_rep)?;
    set.examples.extend(set_b.examples);
    Ok(set)
}
