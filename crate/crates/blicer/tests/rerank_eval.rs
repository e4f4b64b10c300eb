//! Retrieve-and-rerank behaviour, the synthetic benchmark, and the external
//! scorer protocol.

mod common;

use blicer::clwe::{fit_procrustes, map_space, CslsConfig, CslsScorer, Scaling};
use blicer::crossenc::external::ExternalScorer;
use blicer::crossenc::{DirectedPair, PairScorer};
use blicer::error::Error;
use blicer::eval::{evaluate, generate_synthetic, precision_at_k, SynthSpec};
use blicer::rerank::{retrieve_candidates, translate, RerankConfig};
use blicer::scalar::Scalar;
use blicer::Result;
use common::random_unit_space;
use std::io::Write;

/// Deterministic stand-in scorer: hashes the pair text into (0, 1).
struct HashScorer;

impl<F: Scalar> PairScorer<F> for HashScorer {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>> {
        Ok(pairs
            .iter()
            .map(|p| {
                let mut h = 2166136261_u32;
                for b in p.src.bytes().chain([9]).chain(p.tgt.bytes()) {
                    h = (h ^ u32::from(b)).wrapping_mul(16777619);
                }
                F::from_f64(0.001 + 0.998 * f64::from(h % 10_000) / 10_000.0)
            })
            .collect())
    }
}

/// Scorer that always answers 0.5 (leaves every ranking to CSLS ties).
struct ConstScorer;

impl<F: Scalar> PairScorer<F> for ConstScorer {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>> {
        Ok(vec![F::half(); pairs.len()])
    }
}

fn queries_of(lex: &blicer::lexicon::Lexicon) -> Vec<String> {
    lex.sources().into_iter().map(str::to_string).collect()
}

#[test]
fn lambda_zero_reproduces_csls_ordering_and_lambda_one_the_tilde_ordering() {
    let src = random_unit_space("s", 40, 8, 301);
    let tgt = random_unit_space("t", 44, 8, 302);
    let cfg = CslsConfig {
        k: 5,
        ..CslsConfig::default()
    };
    let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
    let queries: Vec<String> = (0..10).map(|i| src.vocab().word(i).to_string()).collect();

    let zero = translate(
        &queries,
        &scorer,
        &HashScorer,
        &RerankConfig { lambda: 0.0, n_cand: 12 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    for (qi, pred) in zero.iter().enumerate() {
        let csls_order = scorer.topk_words(&queries[qi], 12).unwrap();
        let got: Vec<&str> = pred.candidates.iter().map(|c| c.word.as_str()).collect();
        let want: Vec<&str> = csls_order.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(got, want, "query {qi} at lambda = 0");
    }

    let one = translate(
        &queries,
        &scorer,
        &HashScorer,
        &RerankConfig { lambda: 1.0, n_cand: 12 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    for pred in &one {
        for w in pred.candidates.windows(2) {
            assert!(w[0].f_tilde >= w[1].f_tilde, "lambda = 1 must sort by f_tilde");
        }
    }
}

#[test]
fn mixed_scores_are_convex_and_closed_over_candidates() {
    let src = random_unit_space("s", 30, 6, 311);
    let tgt = random_unit_space("t", 30, 6, 312);
    let cfg = CslsConfig {
        k: 4,
        ..CslsConfig::default()
    };
    let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
    let queries: Vec<String> = (0..8).map(|i| src.vocab().word(i).to_string()).collect();
    let preds = translate(
        &queries,
        &scorer,
        &HashScorer,
        &RerankConfig { lambda: 0.4, n_cand: 7 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    for (q, pred) in queries.iter().zip(&preds) {
        let retrieved = retrieve_candidates(&scorer, q, 7).unwrap();
        let retrieved: Vec<&str> = retrieved.iter().map(|(w, _)| w.as_str()).collect();
        // Closure: the top-1 (and in fact every candidate) comes from the
        // first-stage retrieval.
        assert!(retrieved.contains(&pred.top1().unwrap()));
        for c in &pred.candidates {
            assert!(retrieved.contains(&c.word.as_str()));
            assert!(c.f_mix >= c.fc_scaled.min(c.f_tilde) - 1e-12);
            assert!(c.f_mix <= c.fc_scaled.max(c.f_tilde) + 1e-12);
            for v in [c.fc_scaled, c.f_tilde, c.f_mix] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn constant_scorer_keeps_csls_order_at_any_lambda() {
    // With equal f_tilde everywhere, ties fall back to the CSLS rank, so the
    // final order matches retrieval for every lambda.
    let src = random_unit_space("s", 25, 5, 321);
    let tgt = random_unit_space("t", 25, 5, 322);
    let cfg = CslsConfig {
        k: 3,
        ..CslsConfig::default()
    };
    let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
    let queries: Vec<String> = (0..6).map(|i| src.vocab().word(i).to_string()).collect();
    for lambda in [0.0, 0.31, 0.5, 1.0] {
        let preds = translate(
            &queries,
            &scorer,
            &ConstScorer,
            &RerankConfig { lambda, n_cand: 9 },
            Scaling::MinmaxGlobal,
        )
        .unwrap();
        for (q, pred) in queries.iter().zip(&preds) {
            let want: Vec<String> = scorer
                .topk_words(q, 9)
                .unwrap()
                .into_iter()
                .map(|(w, _)| w)
                .collect();
            let got: Vec<String> = pred.candidates.iter().map(|c| c.word.clone()).collect();
            assert_eq!(got, want, "lambda {lambda}");
        }
    }
}

#[test]
fn retrieval_is_a_prefix_of_the_full_ranking() {
    let src = random_unit_space("s", 25, 5, 351);
    let tgt = random_unit_space("t", 30, 5, 352);
    let cfg = CslsConfig { k: 4, ..CslsConfig::default() };
    let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
    for q in 0..5 {
        let query = src.vocab().word(q);
        let full = scorer.topk_words(query, 30).unwrap();
        for n in [1usize, 7, 30, 99] {
            let cands = retrieve_candidates(&scorer, query, n).unwrap();
            assert_eq!(cands.len(), n.min(30));
            assert_eq!(cands[..], full[..n.min(30)]);
        }
    }
}

#[test]
fn mix_is_affine_in_lambda_with_unique_crossing() {
    // Two candidates with opposite score profiles swap exactly once as
    // lambda sweeps 0 -> 1.
    let fc = (0.9_f64, 0.2_f64);
    let ft = (0.1_f64, 0.8_f64);
    let mut last_leader = None;
    let mut swaps = 0;
    for step in 0..=100 {
        let lambda = f64::from(step) / 100.0;
        let a = blicer::rerank::mix_scores(fc.0, ft.0, lambda).unwrap();
        let b = blicer::rerank::mix_scores(fc.1, ft.1, lambda).unwrap();
        let leader = a > b;
        if let Some(prev) = last_leader {
            if prev != leader {
                swaps += 1;
            }
        }
        last_leader = Some(leader);
    }
    assert_eq!(swaps, 1);
}

#[test]
fn noiseless_synthetic_recovers_perfect_p_at_1() {
    let spec = SynthSpec {
        vocab_size: 120,
        dim: 16,
        seed: 9,
        noise: 0.0,
        n_train: 40,
        n_dev: 0,
        n_test: 50,
        ..SynthSpec::default()
    };
    let bench = generate_synthetic::<f64>(&spec).unwrap();
    let map = fit_procrustes(&bench.src, &bench.tgt, &bench.train).unwrap();
    let mapped = map_space(&bench.src, &map)
        .unwrap()
        .unit_normalize()
        .unwrap();
    let cfg = CslsConfig::default();
    let scorer = CslsScorer::new(&mapped, &bench.tgt, &cfg).unwrap();
    let queries = queries_of(&bench.test);
    let preds = translate(
        &queries,
        &scorer,
        &ConstScorer,
        &RerankConfig { lambda: 0.0, n_cand: 10 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    let result = evaluate(&preds, &bench.test).unwrap();
    assert_eq!(result.p_at_1, 1.0);
    assert_eq!(result.p_at_5, 1.0);
    assert_eq!(result.mrr, 1.0);
    assert_eq!(result.n_queries, 50);
}

#[test]
fn noisy_synthetic_baseline_is_imperfect_but_reproducible() {
    let spec = SynthSpec::default(); // |V|=500, d=32, noise=0.3, 150/50/200
    let bench = generate_synthetic::<f64>(&spec).unwrap();
    let map = fit_procrustes(&bench.src, &bench.tgt, &bench.train).unwrap();
    let mapped = map_space(&bench.src, &map)
        .unwrap()
        .unit_normalize()
        .unwrap();
    let scorer = CslsScorer::new(&mapped, &bench.tgt, &CslsConfig::default()).unwrap();
    let queries = queries_of(&bench.test);
    let preds = translate(
        &queries,
        &scorer,
        &ConstScorer,
        &RerankConfig { lambda: 0.0, n_cand: 28 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    let p1 = precision_at_k(&preds, &bench.test, 1).unwrap();
    // Seed-pinned regression value, measured once with seed 33: 54 of the
    // 200 test queries rank their gold target first under pure CSLS.
    assert!(p1 < 1.0);
    assert!(
        (p1 - 0.27).abs() < 1e-9,
        "CSLS baseline P@1 drifted: {p1}"
    );
}

#[test]
fn metrics_bounds_hold_on_reranked_output() {
    let src = random_unit_space("s", 30, 6, 331);
    let tgt = random_unit_space("t", 30, 6, 332);
    let scorer = CslsScorer::new(
        &src,
        &tgt,
        &CslsConfig {
            k: 3,
            ..CslsConfig::default()
        },
    )
    .unwrap();
    let mut gold = blicer::lexicon::Lexicon::new("s", "t");
    for i in 0..10 {
        gold.insert(src.vocab().word(i), tgt.vocab().word(i));
    }
    let queries = queries_of(&gold);
    let preds = translate(
        &queries,
        &scorer,
        &HashScorer,
        &RerankConfig { lambda: 0.31, n_cand: 10 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    let res = evaluate(&preds, &gold).unwrap();
    assert!(res.p_at_1 <= res.p_at_5);
    assert!(res.p_at_5 <= 1.0);
    assert!(res.mrr >= res.p_at_1 - 1e-12);
}

// ---------------------------------------------------------------------------
// External scorer protocol conformance.
// ---------------------------------------------------------------------------

fn write_script(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "#!/bin/sh").unwrap();
    writeln!(f, "{body}").unwrap();
    path.display().to_string()
}

fn pairs<'a>() -> Vec<DirectedPair<'a>> {
    vec![
        DirectedPair { src: "dog", src_tag: "en", tgt: "hund", tgt_tag: "de" },
        DirectedPair { src: "cat", src_tag: "en", tgt: "katze", tgt_tag: "de" },
        DirectedPair { src: "fish", src_tag: "en", tgt: "fisch", tgt_tag: "de" },
    ]
}

#[test]
fn external_scorer_echo_stub() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(&dir, "half.sh", "while read -r line; do echo 0.5; done");
    let scorer = ExternalScorer::new("sh", vec![script]);
    let scores: Vec<f64> = scorer.score_pairs(&pairs()).unwrap();
    assert_eq!(scores, vec![0.5, 0.5, 0.5]);
    // Symmetric scoring doubles the lines and averages.
    let sym: Vec<f64> = scorer.symmetric_scores(&pairs()).unwrap();
    assert_eq!(sym, vec![0.5, 0.5, 0.5]);
}

#[test]
fn external_scorer_out_of_range_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(&dir, "bad.sh", "while read -r line; do echo 1.7; done");
    let scorer = ExternalScorer::new("sh", vec![script]);
    let err = <ExternalScorer as PairScorer<f64>>::score_pairs(&scorer, &pairs()).unwrap_err();
    match err {
        Error::ScorerValue { line, msg } => {
            assert_eq!(line, 1);
            assert!(msg.contains("1.7"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn external_scorer_short_output_is_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(&dir, "short.sh", "read -r line; echo 0.4");
    let scorer = ExternalScorer::new("sh", vec![script]);
    let err = <ExternalScorer as PairScorer<f64>>::score_pairs(&scorer, &pairs()).unwrap_err();
    match err {
        Error::ScorerCount { expected, got } => {
            assert_eq!(expected, 3);
            assert_eq!(got, 1);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn external_scorer_malformed_float_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(&dir, "garbage.sh", "while read -r line; do echo xyz; done");
    let scorer = ExternalScorer::new("sh", vec![script]);
    let err = <ExternalScorer as PairScorer<f64>>::score_pairs(&scorer, &pairs()).unwrap_err();
    assert!(matches!(err, Error::ScorerValue { line: 1, .. }));

    let script = write_script(&dir, "fail.sh", "exit 3");
    let scorer = ExternalScorer::new("sh", vec![script]);
    let err = <ExternalScorer as PairScorer<f64>>::score_pairs(&scorer, &pairs()).unwrap_err();
    assert!(matches!(err, Error::ScorerExit(_)), "{err:?}");
}

#[test]
fn external_scorer_via_rerank_pipeline() {
    let src = random_unit_space("s", 20, 5, 341);
    let tgt = random_unit_space("t", 20, 5, 342);
    let scorer = CslsScorer::new(
        &src,
        &tgt,
        &CslsConfig {
            k: 3,
            ..CslsConfig::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(&dir, "half.sh", "while read -r line; do echo 0.5; done");
    let external = ExternalScorer::new("sh", vec![script]);
    let queries = vec![src.vocab().word(0).to_string()];
    let preds = translate(
        &queries,
        &scorer,
        &external,
        &RerankConfig { lambda: 0.5, n_cand: 6 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    assert_eq!(preds[0].candidates.len(), 6);
    for c in &preds[0].candidates {
        assert_eq!(c.f_tilde, 0.5);
    }
}
