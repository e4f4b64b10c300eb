//! Shared test fixtures: seeded random spaces and a brute-force CSLS oracle
//! kept deliberately independent of the library's scoring path (full cosine
//! matrix, explicit top-k means, plain sorts).

#![allow(dead_code)]

use blicer::embed::{EmbeddingSpace, Vocabulary};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_unit_space(tag: &str, n: usize, d: usize, seed: u64) -> EmbeddingSpace<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = Array2::<f64>::zeros((n, d));
    for mut row in matrix.rows_mut() {
        loop {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            if row.iter().map(|v| v * v).sum::<f64>() > 1e-3 {
                break;
            }
        }
    }
    let words: Vec<String> = (0..n).map(|i| format!("{tag}{i:04}")).collect();
    let vocab = Vocabulary::new(tag, words).unwrap();
    EmbeddingSpace::new(vocab, matrix)
        .unwrap()
        .unit_normalize()
        .unwrap()
}

/// Full |X| x |Y| cosine matrix from scalar loops.
pub fn cosine_matrix(src: &EmbeddingSpace<f64>, tgt: &EmbeddingSpace<f64>) -> Vec<Vec<f64>> {
    let d = src.dim();
    (0..src.len())
        .map(|i| {
            (0..tgt.len())
                .map(|j| {
                    let mut dot = 0.0;
                    for c in 0..d {
                        dot += src.row(i)[c] * tgt.row(j)[c];
                    }
                    dot
                })
                .collect()
        })
        .collect()
}

fn mean_of_k_largest(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted[..k].iter().sum::<f64>() / k as f64
}

/// Brute-force CSLS score matrix per the definition: cosine minus each
/// side's mean top-k neighbourhood cosine.
pub fn csls_matrix_oracle(
    src: &EmbeddingSpace<f64>,
    tgt: &EmbeddingSpace<f64>,
    k: usize,
) -> Vec<Vec<f64>> {
    let cos = cosine_matrix(src, tgt);
    let n_x = src.len();
    let n_y = tgt.len();
    let src_penalty: Vec<f64> = (0..n_x).map(|i| mean_of_k_largest(&cos[i], k)).collect();
    let tgt_penalty: Vec<f64> = (0..n_y)
        .map(|j| {
            let column: Vec<f64> = (0..n_x).map(|i| cos[i][j]).collect();
            mean_of_k_largest(&column, k)
        })
        .collect();
    (0..n_x)
        .map(|i| {
            (0..n_y)
                .map(|j| cos[i][j] - tgt_penalty[j] - src_penalty[i])
                .collect()
        })
        .collect()
}

/// Full ranking of one oracle row under the tie rule (score descending,
/// lower target rank first).
pub fn rank_row_oracle(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    order
}
