//! Cross-lingual word embeddings: orthogonal Procrustes alignment, CSLS
//! similarity and top-k retrieval.
//!
//! CSLS (cross-domain similarity local scaling) penalizes the plain cosine
//! of a pair by each word's average cosine to its k nearest cross-lingual
//! neighbours, which counters hubness:
//!
//! ```text
//! f_C(x, y) = cos(x, y) - mean_topk(cos(y, X)) - mean_topk(cos(x, Y))
//! ```
//!
//! [`CslsScorer`] precomputes both neighbourhood penalty vectors once, after
//! which any pair score is O(d) and a retrieval row is O(|Y| d).

use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result, Side};
use crate::lexicon::Lexicon;
use crate::scalar::Scalar;
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

/// How raw CSLS scores are mapped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// No scaling; scores pass through unchanged.
    None,
    /// Affine min-max over one shared population (default; preserves
    /// cross-query comparability).
    #[default]
    MinmaxGlobal,
    /// Affine min-max applied per query over its own candidates.
    MinmaxPerQuery,
}

impl Scaling {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scaling::None),
            "minmax_global" => Ok(Scaling::MinmaxGlobal),
            "minmax_per_query" => Ok(Scaling::MinmaxPerQuery),
            other => Err(Error::invalid("csls.scaling", format!("unknown mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scaling::None => "none",
            Scaling::MinmaxGlobal => "minmax_global",
            Scaling::MinmaxPerQuery => "minmax_per_query",
        }
    }
}

/// CSLS neighbourhood size and score scaling mode.
#[derive(Debug, Clone, Copy)]
pub struct CslsConfig {
    pub k: usize,
    pub scaling: Scaling,
}

impl Default for CslsConfig {
    fn default() -> Self {
        CslsConfig {
            k: 10,
            scaling: Scaling::MinmaxGlobal,
        }
    }
}

impl CslsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("csls.k", "must be >= 1"));
        }
        Ok(())
    }
}

/// A d x d linear map between embedding spaces.
#[derive(Debug, Clone)]
pub struct LinearMap<F> {
    matrix: Array2<F>,
    orthogonal: bool,
}

impl<F: Scalar> LinearMap<F> {
    pub fn new(matrix: Array2<F>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(
                "linear map",
                format!("{}x{} matrix is not square", matrix.nrows(), matrix.ncols()),
            ));
        }
        let orthogonal = orthogonality_defect(&matrix) < 1e-5;
        Ok(LinearMap { matrix, orthogonal })
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }
}

/// Max-norm of M^T M - I.
pub fn orthogonality_defect<F: Scalar>(matrix: &Array2<F>) -> f64 {
    let d = matrix.ncols();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let mut dot = 0.0;
            for r in 0..matrix.nrows() {
                dot += matrix[[r, i]].as_f64() * matrix[[r, j]].as_f64();
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Fit the orthogonal map W minimizing ||X_seed W - Y_seed||_F.
///
/// Solved by the SVD of the seed cross-covariance (computed in f64):
/// with X_s^T Y_s = U S V^T, the minimizer is W = U V^T.
pub fn fit_procrustes<F: Scalar>(
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
    seed: &Lexicon,
) -> Result<LinearMap<F>> {
    check_spaces(src, tgt)?;
    if seed.is_empty() {
        return Err(Error::invalid("seed lexicon", "empty"));
    }
    let d = src.dim();
    if seed.len() < d {
        log::warn!(
            "procrustes seed has {} pairs for dimension {}; the map may be under-determined",
            seed.len(),
            d
        );
    }

    let mut cross = nalgebra::DMatrix::<f64>::zeros(d, d);
    for pair in seed.iter() {
        let x = src.vector(&pair.src).ok_or_else(|| Error::UnknownWord {
            word: pair.src.clone(),
            side: Side::Source,
        })?;
        let y = tgt.vector(&pair.tgt).ok_or_else(|| Error::UnknownWord {
            word: pair.tgt.clone(),
            side: Side::Target,
        })?;
        for i in 0..d {
            let xi = x[i].as_f64();
            for j in 0..d {
                cross[(i, j)] += xi * y[j].as_f64();
            }
        }
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let w = u * v_t;

    let matrix = Array2::from_shape_fn((d, d), |(i, j)| F::from_f64(w[(i, j)]));
    LinearMap::new(matrix)
}

/// Apply a map to every row of a space. The result is not unit-normalized;
/// callers re-normalize before CSLS.
pub fn map_space<F: Scalar>(
    space: &EmbeddingSpace<F>,
    map: &LinearMap<F>,
) -> Result<EmbeddingSpace<F>> {
    if space.dim() != map.dim() {
        return Err(Error::DimMismatch {
            left: space.dim(),
            right: map.dim(),
        });
    }
    space.with_matrix(space.matrix().dot(map.matrix()))
}

fn check_spaces<F: Scalar>(src: &EmbeddingSpace<F>, tgt: &EmbeddingSpace<F>) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    if !src.is_unit_normalized() || !tgt.is_unit_normalized() {
        return Err(Error::invalid(
            "embedding space",
            "CSLS requires unit-normalized spaces",
        ));
    }
    Ok(())
}

/// Mean of the k largest values of a row (values summed largest set first;
/// tie arrangement cannot change the sum).
fn mean_topk<F: Scalar>(row: &[F], k: usize) -> F {
    debug_assert!(k >= 1 && k <= row.len());
    let mut buf: Vec<F> = row.to_vec();
    let (top, _, _) =
        buf.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).expect("finite scores"));
    let mut sum = F::zero();
    for v in top.iter() {
        sum += *v;
    }
    sum += buf[k - 1];
    sum / F::from_f64(k as f64)
}

/// Cosines of one row against every row of a space, always through the same
/// 1-D dot kernel. Using a single kernel everywhere keeps repeated cosines
/// bit-identical across the penalty and scoring passes, so structurally tied
/// CSLS scores cancel exactly (with k=1, every target whose nearest source
/// is the query itself scores exactly -gamma(query)).
fn cosine_row<F: Scalar>(row: ArrayView1<'_, F>, space: &EmbeddingSpace<F>) -> Vec<F> {
    (0..space.len()).map(|j| row.dot(&space.row(j))).collect()
}

/// Neighbourhood penalty for every row of `of` against `against`:
/// penalty[i] = mean of the k largest cos(of[i], against[j]).
fn neighbourhood_penalties<F: Scalar>(
    of: &EmbeddingSpace<F>,
    against: &EmbeddingSpace<F>,
    k: usize,
) -> Vec<F> {
    (0..of.len())
        .into_par_iter()
        .map(|i| mean_topk(&cosine_row(of.row(i), against), k))
        .collect()
}

/// Precomputed CSLS state for one (source, target) space pair.
///
/// Construction costs two |X| x |Y| cosine passes (chunked, parallel over
/// chunks with a fixed reduction order, so results are deterministic).
pub struct CslsScorer<'a, F: Scalar> {
    src: &'a EmbeddingSpace<F>,
    tgt: &'a EmbeddingSpace<F>,
    k: usize,
    /// mean top-k cos(x_i, Y) per source row.
    src_penalty: Vec<F>,
    /// mean top-k cos(y_j, X) per target row.
    tgt_penalty: Vec<F>,
}

impl<'a, F: Scalar> CslsScorer<'a, F> {
    pub fn new(
        src: &'a EmbeddingSpace<F>,
        tgt: &'a EmbeddingSpace<F>,
        cfg: &CslsConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_spaces(src, tgt)?;
        if cfg.k > src.len() || cfg.k > tgt.len() {
            return Err(Error::invalid(
                "csls.k",
                format!(
                    "k={} exceeds vocabulary sizes ({}, {})",
                    cfg.k,
                    src.len(),
                    tgt.len()
                ),
            ));
        }
        let src_penalty = neighbourhood_penalties(src, tgt, cfg.k);
        let tgt_penalty = neighbourhood_penalties(tgt, src, cfg.k);
        Ok(CslsScorer {
            src,
            tgt,
            k: cfg.k,
            src_penalty,
            tgt_penalty,
        })
    }

    pub fn src_space(&self) -> &EmbeddingSpace<F> {
        self.src
    }

    pub fn tgt_space(&self) -> &EmbeddingSpace<F> {
        self.tgt
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Raw CSLS of the pair at (source rank, target rank).
    pub fn score_indices(&self, i: usize, j: usize) -> F {
        let cos = self.src.row(i).dot(&self.tgt.row(j));
        cos - self.tgt_penalty[j] - self.src_penalty[i]
    }

    /// Raw CSLS of a word pair.
    pub fn score_words(&self, src_word: &str, tgt_word: &str) -> Result<F> {
        let i = self.src.vocab().rank(src_word).ok_or_else(|| Error::UnknownWord {
            word: src_word.to_string(),
            side: Side::Source,
        })?;
        let j = self.tgt.vocab().rank(tgt_word).ok_or_else(|| Error::UnknownWord {
            word: tgt_word.to_string(),
            side: Side::Target,
        })?;
        Ok(self.score_indices(i, j))
    }

    /// All |Y| scores for source rank i.
    pub fn score_row(&self, i: usize) -> Vec<F> {
        cosine_row(self.src.row(i), self.tgt)
            .into_iter()
            .zip(&self.tgt_penalty)
            .map(|(c, p)| c - *p - self.src_penalty[i])
            .collect()
    }

    /// All |X| scores for target rank j (the reverse translation direction).
    pub fn score_col(&self, j: usize) -> Vec<F> {
        cosine_row(self.tgt.row(j), self.src)
            .into_iter()
            .zip(&self.src_penalty)
            .map(|(c, p)| c - *p - self.tgt_penalty[j])
            .collect()
    }

    /// Top n_top targets for source rank i, sorted by descending raw CSLS;
    /// ties broken by lower target rank.
    pub fn topk_indices(&self, i: usize, n_top: usize) -> Vec<(usize, F)> {
        let scores = self.score_row(i);
        let n = n_top.min(scores.len());
        let mut order: Vec<usize> = (0..scores.len()).collect();
        let cmp = |a: &usize, b: &usize| {
            scores[*b]
                .partial_cmp(&scores[*a])
                .expect("finite scores")
                .then(a.cmp(b))
        };
        if n < order.len() {
            order.select_nth_unstable_by(n - 1, cmp);
            order.truncate(n);
        }
        order.sort_unstable_by(cmp);
        order.into_iter().map(|j| (j, scores[j])).collect()
    }

    /// Top n_top targets for a query word.
    pub fn topk_words(&self, query: &str, n_top: usize) -> Result<Vec<(String, F)>> {
        if n_top == 0 {
            return Err(Error::invalid("n_top", "must be >= 1"));
        }
        let i = self.src.vocab().rank(query).ok_or_else(|| Error::UnknownWord {
            word: query.to_string(),
            side: Side::Source,
        })?;
        Ok(self
            .topk_indices(i, n_top)
            .into_iter()
            .map(|(j, s)| (self.tgt.vocab().word(j).to_string(), s))
            .collect())
    }

    /// Per-query retrieval, parallel across queries with order-stable output.
    pub fn topk_many(&self, queries: &[String], n_top: usize) -> Result<Vec<Vec<(String, F)>>> {
        queries
            .par_iter()
            .map(|q| self.topk_words(q, n_top))
            .collect()
    }
}

/// Raw CSLS of two explicit vectors against the given spaces.
pub fn csls_score<F: Scalar>(
    x: ArrayView1<'_, F>,
    y: ArrayView1<'_, F>,
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
    cfg: &CslsConfig,
) -> Result<F> {
    cfg.validate()?;
    check_spaces(src, tgt)?;
    if x.len() != src.dim() || y.len() != tgt.dim() {
        return Err(Error::DimMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if cfg.k > src.len() || cfg.k > tgt.len() {
        return Err(Error::invalid(
            "csls.k",
            format!("k={} exceeds a vocabulary size", cfg.k),
        ));
    }
    let cos = x.dot(&y);
    let gamma_x = mean_topk(&cosine_row(y, src), cfg.k);
    let gamma_y = mean_topk(&cosine_row(x, tgt), cfg.k);
    Ok(cos - gamma_x - gamma_y)
}

/// Per-query top-n CSLS retrieval over word lists (convenience wrapper; use
/// [`CslsScorer`] directly to amortize the penalty precomputation).
pub fn csls_topk<F: Scalar>(
    src: &EmbeddingSpace<F>,
    tgt: &EmbeddingSpace<F>,
    queries: &[String],
    n_top: usize,
    cfg: &CslsConfig,
) -> Result<Vec<Vec<(String, F)>>> {
    let scorer = CslsScorer::new(src, tgt, cfg)?;
    scorer.topk_many(queries, n_top)
}

/// Map scores into [0, 1] with the requested mode, over exactly the given
/// population. Min-max is affine (min -> 0, max -> 1); a degenerate
/// population (max == min) maps everything to 0.5.
pub fn scale_scores<F: Scalar>(scores: &[F], mode: Scaling) -> Result<Vec<F>> {
    if scores.is_empty() {
        return Err(Error::invalid("scores", "empty population"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores", "non-finite value"));
    }
    match mode {
        Scaling::None => Ok(scores.to_vec()),
        Scaling::MinmaxGlobal | Scaling::MinmaxPerQuery => {
            let mut min = scores[0];
            let mut max = scores[0];
            for &s in scores {
                if s < min {
                    min = s;
                }
                if s > max {
                    max = s;
                }
            }
            if min == max {
                return Ok(vec![F::half(); scores.len()]);
            }
            let range = max - min;
            Ok(scores.iter().map(|&s| (s - min) / range).collect())
        }
    }
}

/// Dump per-query retrieval as `query<TAB>target<TAB>score` lines, queries
/// grouped in input order.
pub fn write_topk_tsv<W: std::io::Write>(
    out: &mut W,
    queries: &[String],
    results: &[Vec<(String, f64)>],
) -> std::io::Result<()> {
    for (q, hits) in queries.iter().zip(results) {
        for (t, s) in hits {
            writeln!(out, "{q}\t{t}\t{s:.6}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Vocabulary;
    use ndarray::array;

    fn space(tag: &str, words: &[&str], rows: Array2<f64>) -> EmbeddingSpace<f64> {
        let vocab =
            Vocabulary::new(tag, words.iter().map(|w| w.to_string()).collect()).unwrap();
        EmbeddingSpace::new(vocab, rows).unwrap().unit_normalize().unwrap()
    }

    #[test]
    fn single_identical_pair_scores_minus_one() {
        let src = space("x", &["a"], array![[1.0, 0.0]]);
        let tgt = space("y", &["p"], array![[1.0, 0.0]]);
        let cfg = CslsConfig { k: 1, ..CslsConfig::default() };
        let s = csls_score(src.row(0), tgt.row(0), &src, &tgt, &cfg).unwrap();
        assert!((s - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_scores_zero() {
        let src = space("x", &["a"], array![[1.0, 0.0]]);
        let tgt = space("y", &["p"], array![[0.0, 1.0]]);
        let cfg = CslsConfig { k: 1, ..CslsConfig::default() };
        let s = csls_score(src.row(0), tgt.row(0), &src, &tgt, &cfg).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn identity_procrustes() {
        let rows = array![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.6, 0.8, 0.0]
        ];
        let src = space("x", &["a", "b", "c", "d"], rows.clone());
        let tgt = space("y", &["a", "b", "c", "d"], rows);
        let mut seed = Lexicon::new("x", "y");
        for w in ["a", "b", "c", "d"] {
            seed.insert(w, w);
        }
        let map = fit_procrustes(&src, &tgt, &seed).unwrap();
        assert!(map.is_orthogonal());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((map.matrix()[[i, j]] - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn procrustes_names_missing_seed_word() {
        let src = space("x", &["a"], array![[1.0, 0.0]]);
        let tgt = space("y", &["p"], array![[1.0, 0.0]]);
        let mut seed = Lexicon::new("x", "y");
        seed.insert("missing", "p");
        let err = fit_procrustes(&src, &tgt, &seed).unwrap_err();
        match err {
            Error::UnknownWord { word, side } => {
                assert_eq!(word, "missing");
                assert_eq!(side, Side::Source);
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = Lexicon::new("x", "y");
        assert!(fit_procrustes(&src, &tgt, &empty).is_err());
    }

    #[test]
    fn topk_ties_prefer_lower_rank() {
        // Two identical target rows: equal scores, rank 0 must come first.
        let src = space("x", &["q"], array![[1.0, 0.0]]);
        let tgt = space("y", &["t0", "t1", "t2"], array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let cfg = CslsConfig { k: 1, ..CslsConfig::default() };
        let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
        let hits = scorer.topk_words("q", 3).unwrap();
        assert_eq!(hits[0].0, "t0");
        assert_eq!(hits[1].0, "t1");
        assert_eq!(hits[0].1, hits[1].1);
    }

    #[test]
    fn topk_caps_at_vocab_size() {
        let src = space("x", &["q"], array![[1.0, 0.0]]);
        let tgt = space("y", &["t0", "t1"], array![[1.0, 0.0], [0.0, 1.0]]);
        let cfg = CslsConfig { k: 1, ..CslsConfig::default() };
        let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
        assert_eq!(scorer.topk_words("q", 99).unwrap().len(), 2);
        assert!(scorer.topk_words("absent", 1).is_err());
    }

    #[test]
    fn k_larger_than_vocab_rejected() {
        let src = space("x", &["q"], array![[1.0, 0.0]]);
        let tgt = space("y", &["t"], array![[1.0, 0.0]]);
        let cfg = CslsConfig { k: 2, ..CslsConfig::default() };
        assert!(CslsScorer::new(&src, &tgt, &cfg).is_err());
    }

    #[test]
    fn scale_scores_examples() {
        let scaled = scale_scores(&[-1.0, 0.0, 1.0], Scaling::MinmaxGlobal).unwrap();
        assert_eq!(scaled, vec![0.0, 0.5, 1.0]);
        let flat = scale_scores(&[0.3, 0.3], Scaling::MinmaxGlobal).unwrap();
        assert_eq!(flat, vec![0.5, 0.5]);
        let id = scale_scores(&[2.0, -7.0], Scaling::None).unwrap();
        assert_eq!(id, vec![2.0, -7.0]);
        assert!(scale_scores::<f64>(&[], Scaling::MinmaxGlobal).is_err());
    }

    #[test]
    fn map_space_requires_matching_dim() {
        let src = space("x", &["a"], array![[1.0, 0.0]]);
        let map = LinearMap::new(Array2::<f64>::eye(3)).unwrap();
        assert!(map_space(&src, &map).is_err());
    }
}
