//! Word-vector I/O: parse, trim and unit-normalize monolingual embedding
//! spaces stored in the plain-text format used by fastText and word2vec
//! (`count dim` header, then one `token f1 .. fd` line per word).
//!
//! File order is treated as frequency order: rank 0 is the most frequent
//! word, and trimming to `max_vocab` keeps a frequency prefix. Tokens with
//! internal spaces are not supported; lines are split on single spaces.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array2, ArrayView1, ArrayView2};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// An ordered vocabulary with O(1) word -> rank lookup.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    language_tag: String,
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build a vocabulary from unique words in frequency order.
    pub fn new(language_tag: impl Into<String>, words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("vocabulary", "no words"));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(
                    "vocabulary",
                    format!("duplicate token `{w}`"),
                ));
            }
        }
        Ok(Vocabulary {
            language_tag: language_tag.into(),
            words,
            index,
        })
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Word at the given frequency rank.
    pub fn word(&self, rank: usize) -> &str {
        &self.words[rank]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Frequency rank of a word, if present.
    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }
}

/// A vocabulary plus its |V| x d embedding matrix (row i = vector of word i).
#[derive(Debug, Clone)]
pub struct EmbeddingSpace<F> {
    vocab: Vocabulary,
    matrix: Array2<F>,
    unit_normalized: bool,
}

impl<F: Scalar> EmbeddingSpace<F> {
    /// Wrap a vocabulary and matrix, checking shape and finiteness.
    pub fn new(vocab: Vocabulary, matrix: Array2<F>) -> Result<Self> {
        if matrix.nrows() != vocab.len() {
            return Err(Error::invalid(
                "embedding matrix",
                format!("{} rows for {} words", matrix.nrows(), vocab.len()),
            ));
        }
        if matrix.ncols() == 0 {
            return Err(Error::invalid("embedding matrix", "zero dimension"));
        }
        if let Some((i, _)) = matrix
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(
                "embedding matrix",
                format!("non-finite value in row for `{}`", vocab.word(i)),
            ));
        }
        Ok(EmbeddingSpace {
            vocab,
            matrix,
            unit_normalized: false,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn matrix(&self) -> ArrayView2<'_, F> {
        self.matrix.view()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_unit_normalized(&self) -> bool {
        self.unit_normalized
    }

    /// Row vector at the given rank.
    pub fn row(&self, rank: usize) -> ArrayView1<'_, F> {
        self.matrix.row(rank)
    }

    /// Vector of a word, if present.
    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, F>> {
        self.vocab.rank(word).map(|r| self.matrix.row(r))
    }

    /// Divide every row by its Euclidean norm (accumulated in f64).
    ///
    /// Idempotent: an already normalized space is returned unchanged, so a
    /// second application is an exact no-op.
    pub fn unit_normalize(mut self) -> Result<Self> {
        if self.unit_normalized {
            return Ok(self);
        }
        for (i, mut row) in self.matrix.rows_mut().into_iter().enumerate() {
            let norm = row
                .iter()
                .map(|v| {
                    let x = v.as_f64();
                    x * x
                })
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm(self.vocab.word(i).to_string()));
            }
            let norm = F::from_f64(norm);
            row.mapv_inplace(|v| v / norm);
        }
        self.unit_normalized = true;
        Ok(self)
    }

    /// Replace the matrix while keeping the vocabulary (used after mapping).
    pub(crate) fn with_matrix(&self, matrix: Array2<F>) -> Result<Self> {
        EmbeddingSpace::new(self.vocab.clone(), matrix)
    }

    /// Write the space back to the text format (`count dim` header).
    ///
    /// Floats use the shortest round-trip representation, so reloading
    /// reproduces the matrix exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut out = BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        writeln!(out, "{} {}", self.len(), self.dim()).map_err(io_err)?;
        for (i, row) in self.matrix.rows().into_iter().enumerate() {
            write!(out, "{}", self.vocab.word(i)).map_err(io_err)?;
            for v in row.iter() {
                write!(out, " {v}").map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Load the first `min(count, max_vocab)` entries of a word-vector text file.
///
/// The header must hold two positive integers (count, dimension); every
/// following line holds a token plus exactly `dimension` finite decimal
/// floats, single-space separated. The space is returned un-normalized.
pub fn load_word_vectors<F: Scalar>(
    path: &Path,
    language_tag: &str,
    max_vocab: usize,
) -> Result<EmbeddingSpace<F>> {
    if max_vocab == 0 {
        return Err(Error::invalid("max_vocab", "must be positive"));
    }
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::parse(&display, 1, "missing header"))?
        .map_err(|e| Error::io(&display, e))?;
    let mut fields = header.split(' ');
    let count: usize = fields
        .next()
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::parse(&display, 1, format!("bad header `{header}`")))?;
    let dim: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::parse(&display, 1, format!("bad header `{header}`")))?;
    if fields.next().is_some() {
        return Err(Error::parse(&display, 1, format!("bad header `{header}`")));
    }

    let keep = count.min(max_vocab);
    let mut words = Vec::with_capacity(keep);
    let mut seen: HashMap<String, ()> = HashMap::with_capacity(keep);
    let mut matrix = Array2::<F>::zeros((keep, dim));

    for i in 0..keep {
        let line_no = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| {
                Error::parse(&display, line_no, "unexpected end of file")
            })?
            .map_err(|e| Error::io(&display, e))?;
        let mut fields = line.split(' ');
        let token = fields
            .next()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::parse(&display, line_no, "empty token"))?;
        if seen.insert(token.to_string(), ()).is_some() {
            return Err(Error::parse(
                &display,
                line_no,
                format!("duplicate token `{token}`"),
            ));
        }
        let mut row = matrix.row_mut(i);
        let mut n_vals = 0usize;
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(&display, line_no, format!("bad float `{field}`"))
            })?;
            if !value.is_finite() {
                return Err(Error::parse(
                    &display,
                    line_no,
                    format!("non-finite value `{field}`"),
                ));
            }
            if n_vals < dim {
                row[n_vals] = F::from_f64(value);
            }
            n_vals += 1;
        }
        if n_vals != dim {
            return Err(Error::parse(
                &display,
                line_no,
                format!("expected {dim} values, found {n_vals}"),
            ));
        }
        words.push(token.to_string());
    }

    let vocab = Vocabulary::new(language_tag, words)?;
    EmbeddingSpace::new(vocab, matrix)
}
