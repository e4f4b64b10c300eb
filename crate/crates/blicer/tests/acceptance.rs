//! Acceptance suite. Each test implements one numbered criterion, runs it at
//! the stated tolerance, and prints one pass line (run with `--nocapture` to
//! see them). Criterion 10 (CLI pipeline determinism) lives in the CLI
//! crate's own `acceptance` test target.

mod common;

use blicer::clwe::{fit_procrustes, map_space, CslsConfig, CslsScorer, Scaling};
use blicer::crossenc::external::ExternalScorer;
use blicer::crossenc::model::{CrossEncoder, EncoderConfig};
use blicer::crossenc::tokenizer::{CharTokenizer, TokenizerConfig};
use blicer::crossenc::train::{grad_check, train, TrainConfig};
use blicer::crossenc::{
    render_template, CrossEncoderScorer, DirectedPair, LanguageNameTable, PairScorer, Template,
};
use blicer::error::Error;
use blicer::eval::{generate_synthetic, precision_at_k, SynthSpec};
use blicer::lexicon::{
    assemble_training_set, augment_silver, mine_negatives, polarise, score_pairs_scaled, Lexicon,
    MiningConfig, Polarity, PolarisationParams, WordPair,
};
use blicer::rerank::{remix, translate, tune_lambda, RerankConfig};
use common::{csls_matrix_oracle, random_unit_space, rank_row_oracle};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::Write as _;
use std::sync::Mutex;
use std::time::Instant;

/// Criteria run one at a time so the stated runtime budgets are meaningful.
static GATE: Mutex<()> = Mutex::new(());

fn finish(n: usize, name: &str, started: Instant, budget_s: f64, detail: String) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("ACCEPTANCE {n:02} PASS {name}: {detail} ({elapsed:.2}s)");
    assert!(
        elapsed < budget_s,
        "criterion {n} exceeded its {budget_s}s budget: {elapsed:.2}s"
    );
}

#[test]
fn criterion_01_csls_oracle_equivalence() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut checked_pairs = 0usize;
    for case in 0..20_u64 {
        let n_x = 12 + (case as usize * 7) % 53; // 12..=64
        let n_y = 12 + (case as usize * 11) % 53;
        let d = 2 + (case as usize * 3) % 15; // 2..=16
        let k = [1, 5, 10][case as usize % 3];
        let src = random_unit_space("s", n_x, d, 10_000 + case);
        let tgt = random_unit_space("t", n_y, d, 20_000 + case);
        let cfg = CslsConfig {
            k,
            ..CslsConfig::default()
        };
        let scorer = CslsScorer::new(&src, &tgt, &cfg).unwrap();
        let oracle = csls_matrix_oracle(&src, &tgt, k);
        for i in 0..n_x {
            let hits = scorer.topk_indices(i, n_y);
            let expected = rank_row_oracle(&oracle[i]);
            assert_eq!(hits.len(), n_y);
            for (pos, &(j, score)) in hits.iter().enumerate() {
                assert_eq!(j, expected[pos], "case {case} query {i} position {pos}");
                assert!(
                    (score - oracle[i][j]).abs() < 1e-6,
                    "case {case} ({i},{j}): {score} vs {}",
                    oracle[i][j]
                );
            }
            checked_pairs += n_y;
        }
    }
    finish(
        1,
        "csls-oracle-equivalence",
        start,
        5.0,
        format!("20 seeded space pairs, {checked_pairs} ranked scores within 1e-6"),
    );
}

#[test]
fn criterion_02_polarisation_suite() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    for alpha_step in 0..=10 {
        let alpha = f64::from(alpha_step) / 10.0;
        let params = PolarisationParams::new(alpha).unwrap();
        for zi in 0..=1000 {
            let z = f64::from(zi) / 1000.0;
            let up = polarise(z, &params, Polarity::Positive).unwrap();
            let down = polarise(z, &params, Polarity::Negative).unwrap();
            assert!(down <= z && z <= up, "alpha {alpha} z {z}");
            assert!(
                ((up - down) - (1.0 - alpha)).abs() < 1e-12,
                "gap at alpha {alpha} z {z}: {}",
                up - down
            );
            if alpha_step == 10 {
                assert_eq!(up, z);
                assert_eq!(down, z);
            }
            if alpha_step == 0 {
                assert_eq!(up, 1.0);
                assert_eq!(down, 0.0);
            }
        }
    }
    finish(
        2,
        "polarisation-suite",
        start,
        1.0,
        "1001-point z grid x 11 alphas: bracketing, 1-alpha gap, exact endpoints".to_string(),
    );
}

#[test]
fn criterion_03_negative_mining_soundness() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut total_mined = 0usize;
    for case in 0..10_u64 {
        let n_x = 18 + (case as usize * 5) % 20;
        let n_y = 18 + (case as usize * 3) % 20;
        let d = 4 + (case as usize) % 5;
        let k = 3 + (case as usize) % 3;
        let delta = 0.05 + 0.03 * case as f64;
        let src = random_unit_space("s", n_x, d, 30_000 + case);
        let tgt = random_unit_space("t", n_y, d, 40_000 + case);
        let mut positives = Lexicon::new("s", "t");
        for p in 0..6 {
            positives.insert(src.vocab().word((p * 3) % n_x), tgt.vocab().word((p * 2) % n_y));
        }
        let cfg = MiningConfig {
            delta,
            n_neg: 5,
            ..MiningConfig::default()
        };
        let csls = CslsConfig {
            k,
            ..CslsConfig::default()
        };
        let mined = mine_negatives(&positives, &src, &tgt, &cfg, &csls).unwrap();
        let oracle = csls_matrix_oracle(&src, &tgt, k);
        let score = |s: &str, t: &str| {
            oracle[src.vocab().rank(s).unwrap()][tgt.vocab().rank(t).unwrap()]
        };
        for pair in mined.iter() {
            assert!(!positives.contains_pair(pair), "case {case}: overlap");
            let neg = score(&pair.src, &pair.tgt);
            let ok = positives.iter().any(|p| {
                (p.src == pair.src || p.tgt == pair.tgt)
                    && neg >= score(&p.src, &p.tgt) - delta - 1e-9
            });
            assert!(ok, "case {case}: ({}, {}) unjustified", pair.src, pair.tgt);
        }
        total_mined += mined.len();
    }
    assert!(total_mined > 0);
    finish(
        3,
        "negative-mining-soundness",
        start,
        5.0,
        format!("10 seeded instances, {total_mined} mined pairs all satisfy the margin rule"),
    );
}

#[test]
fn criterion_04_training_set_arithmetic() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..50 {
        let n_p = rng.gen_range(1..30);
        let n_n = rng.gen_range(0..60);
        let n_rep = rng.gen_range(1..10);
        let mut d_p = Lexicon::new("a", "b");
        for i in 0..n_p {
            d_p.insert(format!("p{i}"), format!("q{i}"));
        }
        let mut d_n = Lexicon::new("a", "b");
        for i in 0..n_n {
            d_n.insert(format!("p{i}"), format!("q{}", 1000 + i));
        }
        let mut scores: HashMap<WordPair, f64> = HashMap::new();
        for p in d_p.iter().chain(d_n.iter()) {
            scores.insert(p.clone(), rng.gen_range(0.0..1.0));
        }
        let params = PolarisationParams::new(rng.gen_range(0.0..1.0)).unwrap();
        let set = assemble_training_set(&d_p, &d_n, &scores, &params, n_rep).unwrap();
        assert_eq!(set.len(), 2 * n_rep * n_p + 2 * n_n);
        // Every positive's reversed twin carries the identical target.
        for pair in d_p.iter() {
            let fwd = set
                .examples
                .iter()
                .find(|e| e.src == pair.src && e.tgt == pair.tgt)
                .unwrap();
            let rev = set
                .examples
                .iter()
                .find(|e| e.src == pair.tgt && e.tgt == pair.src)
                .unwrap();
            assert_eq!(fwd.target.to_bits(), rev.target.to_bits());
        }
    }
    finish(
        4,
        "training-set-arithmetic",
        start,
        1.0,
        "50 random (|D_P|, |D_N|, n_rep) triples: size formula exact, twins matched".to_string(),
    );
}

#[test]
fn criterion_05_gradient_check() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let corpus = [
        "apple (english)!",
        "pomme (français)!",
        "hund (deutsch)!",
        "0123456789 abcdefghijklmnopqrstuvwxyz",
    ];
    let tokenizer =
        CharTokenizer::build(corpus.iter().copied(), TokenizerConfig { max_len: 24 }).unwrap();
    let examples = [
        ("apple", "en", "pomme", "fr", 0.9),
        ("pomme", "fr", "apple", "en", 0.1),
        ("hund", "de", "apple", "en", 0.35),
        ("apple", "en", "hund", "de", 0.65),
        ("pomme", "fr", "hund", "de", 0.5),
    ];
    let mut worst = 0.0_f64;
    for model_seed in 1..=5_u64 {
        let cfg = EncoderConfig {
            layers: 2,
            width: 16,
            heads: 2,
            ff: 32,
            max_len: 24,
            vocab_size: tokenizer.vocab_size(),
            param_seed: model_seed,
        };
        let scorer = CrossEncoderScorer::<f64>::new(
            CrossEncoder::init(cfg).unwrap(),
            tokenizer.clone(),
            Template::default(),
            LanguageNameTable::builtin(),
        )
        .unwrap();
        assert!(scorer.model.num_params() < 50_000);
        for (i, (s, st, t, tt, v)) in examples.iter().enumerate() {
            let pair = DirectedPair {
                src: s,
                src_tag: st,
                tgt: t,
                tgt_tag: tt,
            };
            let report =
                grad_check(&scorer, &pair, *v, 200, model_seed * 100 + i as u64).unwrap();
            assert!(
                report.max_relative_error < 1e-3,
                "model {model_seed} example {i}: {}",
                report.max_relative_error
            );
            worst = worst.max(report.max_relative_error);
        }
    }
    finish(
        5,
        "gradient-check",
        start,
        30.0,
        format!("5 models x 5 examples, 200 coordinates each, worst relative error {worst:.2e}"),
    );
}

/// The shared desk-scale benchmark run used by criteria 6 and 7: the
/// semi-supervised recipe on the seeded synthetic benchmark.
struct BenchmarkRun {
    baseline_p1: f64,
    reranked_p1: f64,
    chosen_lambda: f64,
    dev_p1: f64,
    scorer: CrossEncoderScorer<f64>,
    mapped: blicer::embed::EmbeddingSpace<f64>,
    tgt: blicer::embed::EmbeddingSpace<f64>,
    test: Lexicon,
}

fn run_synth_benchmark() -> BenchmarkRun {
    // Benchmark data pinned by the acceptance criterion.
    let spec = SynthSpec {
        vocab_size: 500,
        dim: 32,
        seed: 33,
        noise: 0.3,
        n_train: 150,
        n_dev: 50,
        n_test: 200,
        ..SynthSpec::default()
    };
    let bench = generate_synthetic::<f64>(&spec).unwrap();

    let map = fit_procrustes(&bench.src, &bench.tgt, &bench.train).unwrap();
    let mapped = map_space(&bench.src, &map)
        .unwrap()
        .unit_normalize()
        .unwrap();
    let csls_cfg = CslsConfig::default(); // k = 10, minmax_global
    let scorer = CslsScorer::new(&mapped, &bench.tgt, &csls_cfg).unwrap();

    // Semi-supervised mode defaults: 5 epochs, n_aug = 4000, n_rep = 4,
    // delta = 0.2, alpha = 1.0. Desk-scale adaptations recorded here:
    // n_freq is clamped to the 500-word vocabulary (the 20k default would
    // be an error), and n_neg = 4 keeps the mined set's size, and with it
    // the training budget, laptop-sized.
    let mining = MiningConfig {
        delta: 0.2,
        n_neg: 4,
        n_freq: 500,
        n_aug: 4000,
        ..MiningConfig::default()
    };
    let silver = augment_silver(&mapped, &bench.tgt, &bench.train, &mining, &csls_cfg).unwrap();
    let positives = bench.train.union(&silver).unwrap();
    let negatives = mine_negatives(&positives, &mapped, &bench.tgt, &mining, &csls_cfg).unwrap();
    let scores =
        score_pairs_scaled(&scorer, &positives, &negatives, Scaling::MinmaxGlobal).unwrap();
    let params = PolarisationParams::new(1.0).unwrap();
    let training_set = assemble_training_set(&positives, &negatives, &scores, &params, 4).unwrap();

    // Desk-scale toy scorer.
    let template = Template::default();
    let mut table = LanguageNameTable::builtin();
    table.insert("xx", "xlang");
    table.insert("yy", "ylang");
    let texts: Vec<String> = training_set
        .examples
        .iter()
        .flat_map(|e| {
            [
                render_template(&e.src, &e.src_tag, &template, &table).unwrap(),
                render_template(&e.tgt, &e.tgt_tag, &template, &table).unwrap(),
            ]
        })
        .collect();
    let tokenizer = CharTokenizer::build(
        texts.iter().map(String::as_str),
        TokenizerConfig { max_len: 32 },
    )
    .unwrap();
    let encoder_cfg = EncoderConfig {
        layers: 2,
        width: 32,
        heads: 4,
        ff: 64,
        max_len: 32,
        vocab_size: tokenizer.vocab_size(),
        param_seed: 33,
    };
    let mut toy = CrossEncoderScorer::new(
        CrossEncoder::init(encoder_cfg).unwrap(),
        tokenizer,
        template,
        table,
    )
    .unwrap();
    let train_cfg = TrainConfig {
        epochs: 5,
        batch_size: 256,
        learning_rate: 3e-3,
        weight_decay: 0.01,
        shuffle_seed: 33,
    };
    let trace = train(&mut toy, &training_set, &train_cfg).unwrap();
    assert!(trace.iter().all(|l| l.is_finite()));

    let rerank_cfg = RerankConfig {
        lambda: 0.0,
        n_cand: 28,
    };

    // CSLS baseline measured first.
    let test_queries: Vec<String> = bench.test.sources().into_iter().map(str::to_string).collect();
    let base_preds = translate(
        &test_queries,
        &scorer,
        &toy,
        &rerank_cfg,
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    let baseline_p1 = precision_at_k(&base_preds, &bench.test, 1).unwrap();

    // Lambda tuned on the held-out dev split, then applied to test.
    let grid: Vec<f64> = (0..=20).map(|i| f64::from(i) * 0.05).collect();
    let (chosen_lambda, dev_p1) = tune_lambda(
        &bench.dev,
        &scorer,
        &toy,
        rerank_cfg.n_cand,
        Scaling::MinmaxGlobal,
        &grid,
    )
    .unwrap();
    let reranked = remix(&base_preds, chosen_lambda).unwrap();
    let reranked_p1 = precision_at_k(&reranked, &bench.test, 1).unwrap();

    BenchmarkRun {
        baseline_p1,
        reranked_p1,
        chosen_lambda,
        dev_p1,
        scorer: toy,
        mapped,
        tgt: bench.tgt,
        test: bench.test,
    }
}

#[test]
fn criterion_06_symmetry_and_endpoints() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();

    // Bit-exact symmetric scores on 100 random word pairs.
    let corpus = ["abcdefghijklmnopqrstuvwxyz (english)! (français)!"];
    let tokenizer =
        CharTokenizer::build(corpus.iter().copied(), TokenizerConfig { max_len: 24 }).unwrap();
    let cfg = EncoderConfig {
        layers: 1,
        width: 16,
        heads: 2,
        ff: 32,
        max_len: 24,
        vocab_size: tokenizer.vocab_size(),
        param_seed: 6,
    };
    let mut toy = CrossEncoderScorer::<f64>::new(
        CrossEncoder::init(cfg).unwrap(),
        tokenizer,
        Template::default(),
        LanguageNameTable::builtin(),
    )
    .unwrap();
    // Randomize the output head so scores are non-trivial.
    {
        let n = toy.model.num_params();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for p in toy.model.params_mut()[n - 17..].iter_mut() {
            *p = rng.gen_range(-0.5..0.5);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let words: Vec<String> = (0..200)
        .map(|_| {
            let len = rng.gen_range(2..9);
            (0..len)
                .map(|_| char::from(b'a' + rng.gen_range(0..26u8)))
                .collect()
        })
        .collect();
    for i in 0..100 {
        let pair = DirectedPair {
            src: &words[2 * i],
            src_tag: "en",
            tgt: &words[2 * i + 1],
            tgt_tag: "fr",
        };
        let fwd = toy.symmetric_scores(&[pair]).unwrap()[0];
        let rev = toy.symmetric_scores(&[pair.reversed()]).unwrap()[0];
        assert_eq!(fwd.to_bits(), rev.to_bits(), "pair {i}");
    }

    // Endpoint argsort equality on the synthetic benchmark.
    let spec = SynthSpec {
        vocab_size: 150,
        dim: 16,
        seed: 34,
        noise: 0.25,
        n_train: 50,
        n_dev: 0,
        n_test: 60,
        ..SynthSpec::default()
    };
    let bench = generate_synthetic::<f64>(&spec).unwrap();
    let map = fit_procrustes(&bench.src, &bench.tgt, &bench.train).unwrap();
    let mapped = map_space(&bench.src, &map)
        .unwrap()
        .unit_normalize()
        .unwrap();
    let csls = CslsScorer::new(&mapped, &bench.tgt, &CslsConfig::default()).unwrap();
    let mut table = LanguageNameTable::new();
    table.insert("xx", "xlang");
    table.insert("yy", "ylang");
    let mut toy_synth = {
        let tok = CharTokenizer::build(
            ["st0123456789 (xlang)! (ylang)!"],
            TokenizerConfig { max_len: 32 },
        )
        .unwrap();
        let cfg = EncoderConfig {
            layers: 1,
            width: 16,
            heads: 2,
            ff: 32,
            max_len: 32,
            vocab_size: tok.vocab_size(),
            param_seed: 7,
        };
        CrossEncoderScorer::<f64>::new(
            CrossEncoder::init(cfg).unwrap(),
            tok,
            Template::default(),
            table,
        )
        .unwrap()
    };
    {
        let n = toy_synth.model.num_params();
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        for p in toy_synth.model.params_mut()[n - 17..].iter_mut() {
            *p = rng.gen_range(-0.5..0.5);
        }
    }
    let queries: Vec<String> = bench.test.sources().into_iter().map(str::to_string).collect();
    let at_zero = translate(
        &queries,
        &csls,
        &toy_synth,
        &RerankConfig { lambda: 0.0, n_cand: 15 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    for (q, pred) in queries.iter().zip(&at_zero) {
        let want: Vec<String> = csls
            .topk_words(q, 15)
            .unwrap()
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        let got: Vec<String> = pred.candidates.iter().map(|c| c.word.clone()).collect();
        assert_eq!(got, want, "lambda=0 must equal the CSLS ordering");
    }
    let at_one = translate(
        &queries,
        &csls,
        &toy_synth,
        &RerankConfig { lambda: 1.0, n_cand: 15 },
        Scaling::MinmaxGlobal,
    )
    .unwrap();
    for pred in &at_one {
        for w in pred.candidates.windows(2) {
            assert!(w[0].f_tilde >= w[1].f_tilde, "lambda=1 must sort by f_tilde");
        }
    }
    finish(
        6,
        "symmetry-and-endpoints",
        start,
        10.0,
        "100 bit-exact symmetric pairs; endpoint argsort equality on the benchmark".to_string(),
    );
}

#[test]
fn criterion_07_end_to_end_blicer_effect() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let run = run_synth_benchmark();
    assert!(
        run.reranked_p1 >= run.baseline_p1,
        "reranked P@1 {} fell below the CSLS baseline {}",
        run.reranked_p1,
        run.baseline_p1
    );
    // Regression fixture, measured once with the fixed seeds above: the
    // baseline resolves 54/200 test queries, reranking at the dev-tuned
    // lambda lifts that to 57/200.
    assert!((run.baseline_p1 - 0.270).abs() < 1e-9, "baseline drifted: {}", run.baseline_p1);
    assert!((run.reranked_p1 - 0.285).abs() < 1e-9, "reranked drifted: {}", run.reranked_p1);
    assert!((run.chosen_lambda - 0.90).abs() < 1e-9, "lambda drifted: {}", run.chosen_lambda);
    finish(
        7,
        "end-to-end-blicer-effect",
        start,
        180.0,
        format!(
            "baseline P@1 {:.4} -> reranked {:.4} (lambda {:.2}, dev P@1 {:.4})",
            run.baseline_p1, run.reranked_p1, run.chosen_lambda, run.dev_p1
        ),
    );
    let _ = (run.scorer, run.mapped, run.tgt, run.test);
}

#[test]
fn criterion_08_noiseless_sanity() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let spec = SynthSpec {
        vocab_size: 200,
        dim: 16,
        seed: 35,
        noise: 0.0,
        n_train: 60,
        n_dev: 0,
        n_test: 80,
        ..SynthSpec::default()
    };
    let bench = generate_synthetic::<f64>(&spec).unwrap();
    let map = fit_procrustes(&bench.src, &bench.tgt, &bench.train).unwrap();
    let mapped = map_space(&bench.src, &map)
        .unwrap()
        .unit_normalize()
        .unwrap();
    let csls = CslsScorer::new(&mapped, &bench.tgt, &CslsConfig::default()).unwrap();
    let queries: Vec<String> = bench.test.sources().into_iter().map(str::to_string).collect();
    let mut correct = 0usize;
    for q in &queries {
        let top = csls.topk_words(q, 1).unwrap();
        let gold = bench
            .test
            .iter()
            .find(|p| p.src == *q)
            .map(|p| p.tgt.clone())
            .unwrap();
        if top[0].0 == gold {
            correct += 1;
        }
    }
    assert_eq!(correct, queries.len(), "noiseless rotation must be exactly invertible");
    finish(
        8,
        "noiseless-sanity",
        start,
        10.0,
        format!("Procrustes + CSLS test P@1 = 1.0 over {} queries", queries.len()),
    );
}

#[test]
fn criterion_09_external_scorer_protocol() {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let script = |name: &str, body: &str| -> String {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "#!/bin/sh\n{body}").unwrap();
        path.display().to_string()
    };
    let pairs = vec![
        DirectedPair { src: "dog", src_tag: "en", tgt: "hund", tgt_tag: "de" },
        DirectedPair { src: "cat", src_tag: "en", tgt: "katze", tgt_tag: "de" },
    ];

    let ok = ExternalScorer::new("sh", vec![script("ok.sh", "while read -r l; do echo 0.5; done")]);
    let scores: Vec<f64> = ok.score_pairs(&pairs).unwrap();
    assert_eq!(scores, vec![0.5, 0.5]);

    let range = ExternalScorer::new(
        "sh",
        vec![script("range.sh", "while read -r l; do echo 1.7; done")],
    );
    match <ExternalScorer as PairScorer<f64>>::score_pairs(&range, &pairs) {
        Err(Error::ScorerValue { line: 1, .. }) => {}
        other => panic!("expected ScorerValue on line 1, got {other:?}"),
    }

    let short = ExternalScorer::new("sh", vec![script("short.sh", "read -r l; echo 0.4")]);
    match <ExternalScorer as PairScorer<f64>>::score_pairs(&short, &pairs) {
        Err(Error::ScorerCount { expected: 2, got: 1 }) => {}
        other => panic!("expected ScorerCount, got {other:?}"),
    }
    finish(
        9,
        "external-scorer-protocol",
        start,
        5.0,
        "correct, out-of-range and short-output stubs hit their error classes".to_string(),
    );
}
