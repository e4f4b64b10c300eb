//! Cross-encoder pair scoring: text templates, character-level tokenization,
//! a small trainable transformer scorer, and an external-process scorer that
//! lets a full pretrained cross-encoder plug into the same pipeline.

pub mod external;
pub mod model;
pub mod tokenizer;
pub mod train;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use model::{CrossEncoder, EncoderConfig};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use tokenizer::CharTokenizer;

/// A single templated word pair fed to a scorer, in a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedPair<'a> {
    pub src: &'a str,
    pub src_tag: &'a str,
    pub tgt: &'a str,
    pub tgt_tag: &'a str,
}

impl<'a> DirectedPair<'a> {
    pub fn reversed(&self) -> DirectedPair<'a> {
        DirectedPair {
            src: self.tgt,
            src_tag: self.tgt_tag,
            tgt: self.src,
            tgt_tag: self.src_tag,
        }
    }
}

/// Anything that maps directed word pairs to similarity scores in [0, 1].
pub trait PairScorer<F: Scalar> {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>>;

    /// Direction-symmetric score: the mean of the pair's score and its
    /// reversed twin's score. Symmetric by construction, bit-exactly:
    /// swapping the pair swaps the two addends of a commutative sum.
    fn symmetric_scores(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>> {
        let mut doubled = Vec::with_capacity(pairs.len() * 2);
        doubled.extend_from_slice(pairs);
        doubled.extend(pairs.iter().map(DirectedPair::reversed));
        let scores = self.score_pairs(&doubled)?;
        let n = pairs.len();
        Ok((0..n)
            .map(|i| (scores[i] + scores[n + i]) / F::two())
            .collect())
    }
}

/// A text template with a `[w]` slot and an optional `[L_w]` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: u8,
    pattern: String,
}

const BUILTIN_PATTERNS: [&str; 16] = [
    "[w]",
    "the word [w]",
    "[w] ([L_w])",
    "the word [w] in [L_w]",
    "'[w]'",
    "the word '[w]'",
    "'[w]' ([L_w])",
    "the word '[w]' in [L_w]",
    "[w].",
    "the word [w].",
    "[w] ([L_w]).",
    "the word [w] in [L_w].",
    "[w]!",
    "the word [w]!",
    "[w] ([L_w])!",
    "the word [w] in [L_w]!",
];

impl Template {
    /// One of the 16 built-in templates, by 1-based id. T15 (`[w] ([L_w])!`)
    /// is the default used throughout.
    pub fn builtin(id: u8) -> Result<Template> {
        if !(1..=16).contains(&id) {
            return Err(Error::invalid(
                "template",
                format!("id {id} outside 1..=16"),
            ));
        }
        Ok(Template {
            id,
            pattern: BUILTIN_PATTERNS[id as usize - 1].to_string(),
        })
    }

    /// A custom pattern; must contain `[w]` exactly once and `[L_w]` at most
    /// once. Custom templates carry id 0.
    pub fn custom(pattern: impl Into<String>) -> Result<Template> {
        let pattern = pattern.into();
        if pattern.matches("[w]").count() != 1 {
            return Err(Error::invalid(
                "template",
                format!("pattern `{pattern}` must contain [w] exactly once"),
            ));
        }
        if pattern.matches("[L_w]").count() > 1 {
            return Err(Error::invalid(
                "template",
                format!("pattern `{pattern}` may contain [L_w] at most once"),
            ));
        }
        Ok(Template { id: 0, pattern })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn uses_language_name(&self) -> bool {
        self.pattern.contains("[L_w]")
    }
}

impl Default for Template {
    fn default() -> Self {
        Template::builtin(15).expect("builtin id")
    }
}

/// Language tag -> native-language name, for the `[L_w]` template slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageNameTable {
    names: BTreeMap<String, String>,
}

impl LanguageNameTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The languages of the standard BLI benchmarks, each named in itself.
    pub fn builtin() -> Self {
        let mut t = Self::new();
        for (tag, name) in [
            ("bg", "български"),
            ("ca", "català"),
            ("de", "deutsch"),
            ("en", "english"),
            ("et", "eesti"),
            ("fi", "suomi"),
            ("fr", "français"),
            ("he", "עברית"),
            ("hr", "hrvatski"),
            ("hu", "magyar"),
            ("it", "italiano"),
            ("ka", "ქართული"),
            ("ru", "русский"),
            ("tr", "türkçe"),
        ] {
            t.insert(tag, name);
        }
        t
    }

    pub fn insert(&mut self, tag: impl Into<String>, name: impl Into<String>) {
        self.names.insert(tag.into(), name.into());
    }

    pub fn get(&self, tag: &str) -> Option<&str> {
        self.names.get(tag).map(String::as_str)
    }

    /// Entries in tag order (deterministic serialization).
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.names.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Substitute the word (and language name, if the pattern asks for one) into
/// a template. No case folding or other transformation is applied.
pub fn render_template(
    word: &str,
    language_tag: &str,
    template: &Template,
    table: &LanguageNameTable,
) -> Result<String> {
    let mut text = template.pattern.replace("[w]", word);
    if template.uses_language_name() {
        let name = table.get(language_tag).ok_or_else(|| {
            Error::invalid(
                "language table",
                format!("no name for language tag `{language_tag}`"),
            )
        })?;
        text = text.replace("[L_w]", name);
    }
    Ok(text)
}

/// The trainable desk-scale scorer: template + tokenizer + transformer.
#[derive(Debug, Clone)]
pub struct CrossEncoderScorer<F> {
    pub model: CrossEncoder<F>,
    pub tokenizer: CharTokenizer,
    pub template: Template,
    pub table: LanguageNameTable,
}

/// Inference micro-batch size; chunks are scored in parallel and collected
/// in order, so outputs do not depend on scheduling.
const SCORE_CHUNK: usize = 64;

impl<F: Scalar> CrossEncoderScorer<F> {
    pub fn new(
        model: CrossEncoder<F>,
        tokenizer: CharTokenizer,
        template: Template,
        table: LanguageNameTable,
    ) -> Result<Self> {
        if model.config().vocab_size != tokenizer.vocab_size() {
            return Err(Error::invalid(
                "cross-encoder",
                format!(
                    "model vocab {} != tokenizer vocab {}",
                    model.config().vocab_size,
                    tokenizer.vocab_size()
                ),
            ));
        }
        if model.config().max_len != tokenizer.max_len() {
            return Err(Error::invalid(
                "cross-encoder",
                format!(
                    "model max_len {} != tokenizer max_len {}",
                    model.config().max_len,
                    tokenizer.max_len()
                ),
            ));
        }
        Ok(CrossEncoderScorer {
            model,
            tokenizer,
            template,
            table,
        })
    }

    /// Token ids for one directed pair.
    pub fn encode(&self, pair: &DirectedPair<'_>) -> Result<Vec<u32>> {
        let a = render_template(pair.src, pair.src_tag, &self.template, &self.table)?;
        let b = render_template(pair.tgt, pair.tgt_tag, &self.template, &self.table)?;
        Ok(self.tokenizer.tokenize_pair(&a, &b))
    }

    /// Sigmoid scores for pre-encoded id sequences.
    pub fn score_encoded(&self, ids: &[Vec<u32>]) -> Vec<F> {
        let chunks: Vec<&[Vec<u32>]> = ids.chunks(SCORE_CHUNK).collect();
        chunks
            .par_iter()
            .flat_map_iter(|chunk| {
                self.model
                    .forward_logits(chunk)
                    .into_iter()
                    .map(train::sigmoid)
                    .collect::<Vec<F>>()
            })
            .collect()
    }
}

impl<F: Scalar> PairScorer<F> for CrossEncoderScorer<F> {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>> {
        let ids: Vec<Vec<u32>> = pairs
            .iter()
            .map(|p| self.encode(p))
            .collect::<Result<_>>()?;
        Ok(self.score_encoded(&ids))
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format: a self-describing binary container (magic + version +
// template + language table + tokenizer + encoder config + raw parameter
// bits) that round-trips bit-exactly.
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"BLCE";
const CHECKPOINT_VERSION: u32 = 1;

struct ByteWriter<W: Write> {
    out: W,
    path: String,
}

impl<W: Write> ByteWriter<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn string(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out
            .write_all(b)
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

struct ByteReader<R: Read> {
    inp: R,
    path: String,
}

impl<R: Read> ByteReader<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut b = vec![0u8; len];
        self.read(&mut b)?;
        String::from_utf8(b)
            .map_err(|_| Error::invalid("checkpoint", "non-UTF-8 string"))
    }
    fn read(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inp
            .read_exact(buf)
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

impl<F: Scalar> CrossEncoderScorer<F> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let display = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&display, e))?;
        let mut w = ByteWriter {
            out: BufWriter::new(file),
            path: display,
        };
        w.bytes(CHECKPOINT_MAGIC)?;
        w.u32(CHECKPOINT_VERSION)?;
        w.u32(u32::from(self.template.id))?;
        w.string(&self.template.pattern)?;
        let entries: Vec<(&str, &str)> = self.table.entries().collect();
        w.u32(entries.len() as u32)?;
        for (tag, name) in entries {
            w.string(tag)?;
            w.string(name)?;
        }
        w.u32(self.tokenizer.max_len() as u32)?;
        let chars: String = self.tokenizer.chars().iter().collect();
        w.string(&chars)?;
        let cfg = self.model.config();
        for v in [cfg.layers, cfg.width, cfg.heads, cfg.ff, cfg.max_len, cfg.vocab_size] {
            w.u32(v as u32)?;
        }
        w.u64(cfg.param_seed)?;
        w.u32(F::BYTES as u32)?;
        let params = self.model.params();
        w.u64(params.len() as u64)?;
        for p in params {
            match F::BYTES {
                4 => w.bytes(&(p.to_bits_u64() as u32).to_le_bytes())?,
                _ => w.u64(p.to_bits_u64())?,
            }
        }
        w.out.flush().map_err(|e| Error::io(w.path.clone(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut r = ByteReader {
            inp: BufReader::new(file),
            path: display,
        };
        let mut magic = [0u8; 4];
        r.read(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::invalid("checkpoint", "bad magic"));
        }
        if r.u32()? != CHECKPOINT_VERSION {
            return Err(Error::invalid("checkpoint", "unsupported version"));
        }
        let template_id = r.u32()? as u8;
        let pattern = r.string()?;
        let template = if template_id == 0 {
            Template::custom(pattern)?
        } else {
            let t = Template::builtin(template_id)?;
            if t.pattern != pattern {
                return Err(Error::invalid("checkpoint", "template pattern mismatch"));
            }
            t
        };
        let n_entries = r.u32()? as usize;
        let mut table = LanguageNameTable::new();
        for _ in 0..n_entries {
            let tag = r.string()?;
            let name = r.string()?;
            table.insert(tag, name);
        }
        let max_len = r.u32()? as usize;
        let chars: Vec<char> = r.string()?.chars().collect();
        let tokenizer = CharTokenizer::from_parts(chars, max_len)?;
        let layers = r.u32()? as usize;
        let width = r.u32()? as usize;
        let heads = r.u32()? as usize;
        let ff = r.u32()? as usize;
        let model_max_len = r.u32()? as usize;
        let vocab_size = r.u32()? as usize;
        let param_seed = r.u64()?;
        let cfg = EncoderConfig {
            layers,
            width,
            heads,
            ff,
            max_len: model_max_len,
            vocab_size,
            param_seed,
        };
        let bytes = r.u32()? as usize;
        if bytes != F::BYTES {
            return Err(Error::invalid(
                "checkpoint",
                format!("stored scalar width {bytes}B, expected {}B", F::BYTES),
            ));
        }
        let n_params = r.u64()? as usize;
        let mut model = CrossEncoder::init(cfg)?;
        if model.params().len() != n_params {
            return Err(Error::invalid(
                "checkpoint",
                format!(
                    "parameter count {} does not match config ({})",
                    n_params,
                    model.params().len()
                ),
            ));
        }
        for i in 0..n_params {
            let bits = match F::BYTES {
                4 => {
                    let mut b = [0u8; 4];
                    r.read(&mut b)?;
                    u64::from(u32::from_le_bytes(b))
                }
                _ => r.u64()?,
            };
            model.params_mut()[i] = F::from_bits_u64(bits);
        }
        CrossEncoderScorer::new(model, tokenizer, template, table)
    }
}
