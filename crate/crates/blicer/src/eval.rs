//! Evaluation: P@1 / P@5 / MRR against a (possibly multi-target) gold
//! lexicon, plus a seeded synthetic bilingual benchmark for end-to-end
//! desk-scale validation.

use crate::embed::{EmbeddingSpace, Vocabulary};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::rerank::RankedPrediction;
use crate::scalar::Scalar;
use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashSet;
use std::io::Write;

/// Retrieval quality for one translation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub src_tag: String,
    pub tgt_tag: String,
    pub p_at_1: f64,
    pub p_at_5: f64,
    pub mrr: f64,
    pub n_queries: usize,
}

impl EvalResult {
    pub fn direction(&self) -> String {
        format!("{}->{}", self.src_tag, self.tgt_tag)
    }

    /// `direction<TAB>P@1<TAB>P@5<TAB>MRR<TAB>n` line.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            self.direction(),
            self.p_at_1,
            self.p_at_5,
            self.mrr,
            self.n_queries
        )
    }

    pub fn pretty(&self) -> String {
        format!(
            "{:<10} P@1 {:>7.4}  P@5 {:>7.4}  MRR {:>7.4}  ({} queries)",
            self.direction(),
            self.p_at_1,
            self.p_at_5,
            self.mrr,
            self.n_queries
        )
    }
}

/// Gold targets per query, in gold-lexicon order. A source word may carry
/// several ground-truth translations; any of them counts as correct.
fn gold_by_query(gold: &Lexicon) -> IndexMap<&str, HashSet<&str>> {
    let mut map: IndexMap<&str, HashSet<&str>> = IndexMap::new();
    for pair in gold.iter() {
        map.entry(pair.src.as_str())
            .or_default()
            .insert(pair.tgt.as_str());
    }
    map
}

fn check_queries_covered<F: Scalar>(
    predictions: &[RankedPrediction<F>],
    gold: &IndexMap<&str, HashSet<&str>>,
) -> Result<()> {
    for p in predictions {
        if !gold.contains_key(p.query.as_str()) {
            return Err(Error::invalid(
                "gold lexicon",
                format!("no gold targets for queried word `{}`", p.query),
            ));
        }
    }
    Ok(())
}

/// Fraction of gold queries whose top-k list contains any gold target.
/// Queries without a prediction entry count as incorrect.
pub fn precision_at_k<F: Scalar>(
    predictions: &[RankedPrediction<F>],
    gold: &Lexicon,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    let gold_map = gold_by_query(gold);
    if gold_map.is_empty() {
        return Err(Error::invalid("gold lexicon", "empty"));
    }
    check_queries_covered(predictions, &gold_map)?;
    let by_query: IndexMap<&str, &RankedPrediction<F>> =
        predictions.iter().map(|p| (p.query.as_str(), p)).collect();
    let mut hits = 0usize;
    for (query, targets) in &gold_map {
        if let Some(pred) = by_query.get(query) {
            if pred
                .candidates
                .iter()
                .take(k)
                .any(|c| targets.contains(c.word.as_str()))
            {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / gold_map.len() as f64)
}

/// Mean reciprocal rank of the best-ranked gold target per query; queries
/// whose list misses every gold target (or that have no list) contribute 0.
pub fn mrr<F: Scalar>(predictions: &[RankedPrediction<F>], gold: &Lexicon) -> Result<f64> {
    let gold_map = gold_by_query(gold);
    if gold_map.is_empty() {
        return Err(Error::invalid("gold lexicon", "empty"));
    }
    check_queries_covered(predictions, &gold_map)?;
    let by_query: IndexMap<&str, &RankedPrediction<F>> =
        predictions.iter().map(|p| (p.query.as_str(), p)).collect();
    let mut total = 0.0;
    for (query, targets) in &gold_map {
        if let Some(pred) = by_query.get(query) {
            if let Some(rank) = pred
                .candidates
                .iter()
                .position(|c| targets.contains(c.word.as_str()))
            {
                total += 1.0 / (rank + 1) as f64;
            }
        }
    }
    Ok(total / gold_map.len() as f64)
}

/// All three metrics in one pass.
pub fn evaluate<F: Scalar>(
    predictions: &[RankedPrediction<F>],
    gold: &Lexicon,
) -> Result<EvalResult> {
    Ok(EvalResult {
        src_tag: gold.src_tag().to_string(),
        tgt_tag: gold.tgt_tag().to_string(),
        p_at_1: precision_at_k(predictions, gold, 1)?,
        p_at_5: precision_at_k(predictions, gold, 5)?,
        mrr: mrr(predictions, gold)?,
        n_queries: gold_by_query(gold).len(),
    })
}

/// Parameters of the synthetic bilingual benchmark.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub dim: usize,
    pub seed: u64,
    /// Gaussian noise added to rotated source vectors before normalization.
    pub noise: f64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub src_tag: String,
    pub tgt_tag: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 500,
            dim: 32,
            seed: 33,
            noise: 0.3,
            n_train: 150,
            n_dev: 50,
            n_test: 200,
            src_tag: "xx".to_string(),
            tgt_tag: "yy".to_string(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.dim == 0 {
            return Err(Error::invalid("synth", "vocab and dim must be >= 1"));
        }
        if self.noise < 0.0 {
            return Err(Error::invalid(
                "synth.noise",
                format!("{} is negative", self.noise),
            ));
        }
        let total = self.n_train + self.n_dev + self.n_test;
        if total > self.vocab_size {
            return Err(Error::invalid(
                "synth",
                format!(
                    "splits {}+{}+{} exceed vocab {}",
                    self.n_train, self.n_dev, self.n_test, self.vocab_size
                ),
            ));
        }
        Ok(())
    }
}

/// A generated benchmark: two unit-normalized spaces whose gold lexicon is
/// index-matched, split disjointly into train/dev/test dictionaries.
pub struct SynthBenchmark<F> {
    pub src: EmbeddingSpace<F>,
    pub tgt: EmbeddingSpace<F>,
    pub train: Lexicon,
    pub dev: Lexicon,
    pub test: Lexicon,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn unit_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    m
}

/// Random rotation from the QR factorization of a Gaussian matrix, with the
/// determinant flipped to +1 if needed.
fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> Array2<f64> {
    let g = gaussian_matrix(rng, dim, dim);
    let na = nalgebra::DMatrix::from_fn(dim, dim, |i, j| g[[i, j]]);
    let qr = na.qr();
    let mut q = qr.q();
    if q.determinant() < 0.0 {
        for i in 0..dim {
            q[(i, dim - 1)] = -q[(i, dim - 1)];
        }
    }
    Array2::from_shape_fn((dim, dim), |(i, j)| q[(i, j)])
}

/// Deterministically generate the benchmark. Draw order is fixed: source
/// matrix, rotation, noise matrix, then the split permutation; identical
/// specs produce identical benchmarks.
pub fn generate_synthetic<F: Scalar>(spec: &SynthSpec) -> Result<SynthBenchmark<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = spec.vocab_size;
    let d = spec.dim;

    let src64 = unit_rows(gaussian_matrix(&mut rng, v, d));
    let rotation = random_rotation(&mut rng, d);
    let noise = gaussian_matrix(&mut rng, v, d);
    let mut tgt64 = src64.dot(&rotation);
    tgt64.zip_mut_with(&noise, |t, &n| *t += spec.noise * n);
    let tgt64 = unit_rows(tgt64);

    let width = (v.max(1) as f64).log10().floor() as usize + 1;
    let width = width.max(4);
    let src_words: Vec<String> = (0..v).map(|i| format!("s{i:0width$}")).collect();
    let tgt_words: Vec<String> = (0..v).map(|i| format!("t{i:0width$}")).collect();

    let to_space = |tag: &str, words: Vec<String>, m: &Array2<f64>| -> Result<EmbeddingSpace<F>> {
        let vocab = Vocabulary::new(tag, words)?;
        let matrix = Array2::from_shape_fn((v, d), |(i, j)| F::from_f64(m[[i, j]]));
        EmbeddingSpace::new(vocab, matrix)?.unit_normalize()
    };
    let src = to_space(&spec.src_tag, src_words.clone(), &src64)?;
    let tgt = to_space(&spec.tgt_tag, tgt_words.clone(), &tgt64)?;

    let mut perm: Vec<usize> = (0..v).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut rng);

    let mut cursor = perm.into_iter();
    let mut take = |n: usize| -> Lexicon {
        let mut lex = Lexicon::new(&spec.src_tag, &spec.tgt_tag);
        for i in (&mut cursor).take(n) {
            lex.insert(src_words[i].clone(), tgt_words[i].clone());
        }
        lex
    };
    let train = take(spec.n_train);
    let dev = take(spec.n_dev);
    let test = take(spec.n_test);

    Ok(SynthBenchmark {
        src,
        tgt,
        train,
        dev,
        test,
    })
}
