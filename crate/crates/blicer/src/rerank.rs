//! Two-stage inference: retrieve CSLS candidates, rescore them with a pair
//! scorer, and rank by the linear interpolation of the two signals.

use crate::clwe::{scale_scores, CslsScorer, Scaling};
use crate::crossenc::{DirectedPair, PairScorer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone, Copy)]
pub struct RerankConfig {
    /// Interpolation weight of the cross-encoder score.
    pub lambda: f64,
    /// Candidates retrieved (and rescored) per query.
    pub n_cand: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            lambda: 0.31,
            n_cand: 28,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(
                "rerank.lambda",
                format!("{} outside [0, 1]", self.lambda),
            ));
        }
        if self.n_cand == 0 {
            return Err(Error::invalid("rerank.n_cand", "must be >= 1"));
        }
        Ok(())
    }
}

/// One rescored candidate: all three scores live in [0, 1].
#[derive(Debug, Clone)]
pub struct RankedCandidate<F> {
    pub word: String,
    pub fc_scaled: F,
    pub f_tilde: F,
    pub f_mix: F,
}

/// Per-query output, sorted by descending mixed score; ties keep the
/// first-stage CSLS order.
#[derive(Debug, Clone)]
pub struct RankedPrediction<F> {
    pub query: String,
    pub candidates: Vec<RankedCandidate<F>>,
}

impl<F: Scalar> RankedPrediction<F> {
    /// The predicted translation (rank-1 candidate).
    pub fn top1(&self) -> Option<&str> {
        self.candidates.first().map(|c| c.word.as_str())
    }
}

/// The top n_cand targets of a query by raw CSLS (capped at |Y|).
pub fn retrieve_candidates<F: Scalar>(
    scorer: &CslsScorer<'_, F>,
    query: &str,
    n_cand: usize,
) -> Result<Vec<(String, F)>> {
    scorer.topk_words(query, n_cand)
}

/// Linear interpolation of the scaled CSLS score and the symmetric
/// cross-encoder score: `(1 - lambda) * f_c + lambda * f_tilde`.
pub fn mix_scores<F: Scalar>(fc_scaled: F, f_tilde: F, lambda: f64) -> Result<F> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(
            "rerank.lambda",
            format!("{lambda} outside [0, 1]"),
        ));
    }
    let l = F::from_f64(lambda);
    Ok((F::one() - l) * fc_scaled + l * f_tilde)
}

/// Full retrieve-and-rerank over a query list.
///
/// CSLS scores are scaled over the population of every (query, candidate)
/// pair of this call (or per query, or not at all, per `scaling`); the pair
/// scorer's symmetric sigmoid scores are used as-is, and candidates are
/// re-ranked by the mixed score.
pub fn translate<F: Scalar, S: PairScorer<F>>(
    queries: &[String],
    csls: &CslsScorer<'_, F>,
    pair_scorer: &S,
    cfg: &RerankConfig,
    scaling: Scaling,
) -> Result<Vec<RankedPrediction<F>>> {
    cfg.validate()?;
    let retrieved: Vec<Vec<(String, F)>> = queries
        .par_iter()
        .map(|q| retrieve_candidates(csls, q, cfg.n_cand))
        .collect::<Result<_>>()?;

    // Scale raw CSLS over the chosen population.
    let scaled: Vec<Vec<F>> = match scaling {
        Scaling::MinmaxPerQuery => retrieved
            .iter()
            .map(|cands| {
                let raw: Vec<F> = cands.iter().map(|(_, s)| *s).collect();
                scale_scores(&raw, scaling)
            })
            .collect::<Result<_>>()?,
        Scaling::None | Scaling::MinmaxGlobal => {
            let raw: Vec<F> = retrieved
                .iter()
                .flat_map(|cands| cands.iter().map(|(_, s)| *s))
                .collect();
            let flat = scale_scores(&raw, scaling)?;
            let mut iter = flat.into_iter();
            retrieved
                .iter()
                .map(|cands| (&mut iter).take(cands.len()).collect())
                .collect()
        }
    };

    // One batched symmetric-scoring pass over all (query, candidate) pairs.
    let src_tag = csls.src_space().vocab().language_tag();
    let tgt_tag = csls.tgt_space().vocab().language_tag();
    let pairs: Vec<DirectedPair<'_>> = queries
        .iter()
        .zip(&retrieved)
        .flat_map(|(q, cands)| {
            cands.iter().map(move |(t, _)| DirectedPair {
                src: q,
                src_tag,
                tgt: t,
                tgt_tag,
            })
        })
        .collect();
    let tilde_flat = pair_scorer.symmetric_scores(&pairs)?;

    let mut tilde_iter = tilde_flat.into_iter();
    let mut out = Vec::with_capacity(queries.len());
    for ((query, cands), fc_row) in queries.iter().zip(retrieved).zip(scaled) {
        let mut ranked: Vec<(usize, RankedCandidate<F>)> = Vec::with_capacity(cands.len());
        for (csls_rank, ((word, _), fc)) in cands.into_iter().zip(fc_row).enumerate() {
            let f_tilde = tilde_iter.next().expect("one score per pair");
            let f_mix = mix_scores(fc, f_tilde, cfg.lambda)?;
            ranked.push((
                csls_rank,
                RankedCandidate {
                    word,
                    fc_scaled: fc,
                    f_tilde,
                    f_mix,
                },
            ));
        }
        ranked.sort_by(|(rank_a, a), (rank_b, b)| {
            b.f_mix
                .partial_cmp(&a.f_mix)
                .expect("finite scores")
                .then(rank_a.cmp(rank_b))
        });
        out.push(RankedPrediction {
            query: query.clone(),
            candidates: ranked.into_iter().map(|(_, c)| c).collect(),
        });
    }
    Ok(out)
}

/// Re-rank existing predictions under a different lambda without rescoring.
///
/// `base` must hold candidates in first-stage CSLS order (i.e. be the output
/// of [`translate`] with `lambda = 0`), because mixed-score ties fall back
/// to the candidate's position in `base`.
pub fn remix<F: Scalar>(
    base: &[RankedPrediction<F>],
    lambda: f64,
) -> Result<Vec<RankedPrediction<F>>> {
    base.iter()
        .map(|pred| {
            let mut ranked: Vec<(usize, RankedCandidate<F>)> = pred
                .candidates
                .iter()
                .enumerate()
                .map(|(csls_rank, c)| {
                    Ok((
                        csls_rank,
                        RankedCandidate {
                            word: c.word.clone(),
                            fc_scaled: c.fc_scaled,
                            f_tilde: c.f_tilde,
                            f_mix: mix_scores(c.fc_scaled, c.f_tilde, lambda)?,
                        },
                    ))
                })
                .collect::<Result<_>>()?;
            ranked.sort_by(|(rank_a, a), (rank_b, b)| {
                b.f_mix
                    .partial_cmp(&a.f_mix)
                    .expect("finite scores")
                    .then(rank_a.cmp(rank_b))
            });
            Ok(RankedPrediction {
                query: pred.query.clone(),
                candidates: ranked.into_iter().map(|(_, c)| c).collect(),
            })
        })
        .collect()
}

/// Pick the lambda with the best P@1 on a held-out dictionary, scoring the
/// candidates once and remixing per grid point. Ties prefer the smaller
/// lambda, so an unhelpful scorer falls back to the pure CSLS ranking.
/// Returns (best lambda, its dev P@1).
pub fn tune_lambda<F: Scalar, S: PairScorer<F>>(
    dev: &crate::lexicon::Lexicon,
    csls: &CslsScorer<'_, F>,
    pair_scorer: &S,
    n_cand: usize,
    scaling: Scaling,
    grid: &[f64],
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid", "empty"));
    }
    let queries: Vec<String> = dev.sources().into_iter().map(str::to_string).collect();
    let base = translate(
        &queries,
        csls,
        pair_scorer,
        &RerankConfig {
            lambda: 0.0,
            n_cand,
        },
        scaling,
    )?;
    let mut best = (grid[0], f64::MIN);
    for &lambda in grid {
        let preds = remix(&base, lambda)?;
        let p1 = crate::eval::precision_at_k(&preds, dev, 1)?;
        if p1 > best.1 {
            best = (lambda, p1);
        }
    }
    Ok(best)
}

/// Dump predictions as `query<TAB>rank<TAB>candidate<TAB>f_c<TAB>f_tilde<TAB>f_mix`.
pub fn write_predictions_tsv<F: Scalar, W: Write>(
    out: &mut W,
    predictions: &[RankedPrediction<F>],
) -> std::io::Result<()> {
    for p in predictions {
        for (rank, c) in p.candidates.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                p.query,
                rank + 1,
                c.word,
                c.fc_scaled.as_f64(),
                c.f_tilde.as_f64(),
                c.f_mix.as_f64()
            )?;
        }
    }
    Ok(())
}
