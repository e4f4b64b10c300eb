//! External scorer process: lets a full pretrained cross-encoder replace the
//! built-in toy model without linking against it.
//!
//! Line protocol (UTF-8, LF): the scorer reads `src<TAB>tgt` pairs on stdin,
//! one per line, and writes one decimal float in [0, 1] per line on stdout,
//! in the same order, flushed per line.

use super::{DirectedPair, PairScorer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    program: String,
    args: Vec<String>,
}

impl ExternalScorer {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalScorer {
            program: program.into(),
            args,
        }
    }

    /// Split a command line on whitespace (no shell quoting).
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::invalid("scorer command", "empty"))?;
        Ok(ExternalScorer::new(
            program,
            parts.map(str::to_string).collect(),
        ))
    }

    fn run(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<f64>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ScorerExit(format!("failed to spawn `{}`: {e}", self.program)))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let input: String = pairs
            .iter()
            .map(|p| format!("{}\t{}\n", p.src, p.tgt))
            .collect();
        // Feed stdin from a separate thread; writing and reading from the
        // same thread can deadlock once either pipe buffer fills up.
        let writer = std::thread::spawn(move || {
            let res = stdin.write_all(input.as_bytes());
            drop(stdin);
            res
        });

        let mut scores = Vec::with_capacity(pairs.len());
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| Error::ScorerExit(format!("read failed: {e}")))?;
            if scores.len() == pairs.len() {
                return Err(Error::ScorerCount {
                    expected: pairs.len(),
                    got: pairs.len() + 1,
                });
            }
            let value: f64 = line.trim().parse().map_err(|_| Error::ScorerValue {
                line: i + 1,
                msg: format!("malformed float `{line}`"),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ScorerValue {
                    line: i + 1,
                    msg: format!("score {value} outside [0, 1]"),
                });
            }
            scores.push(value);
        }

        let write_result = writer.join().expect("writer thread");
        let status = child
            .wait()
            .map_err(|e| Error::ScorerExit(format!("wait failed: {e}")))?;
        if !status.success() {
            return Err(Error::ScorerExit(format!(
                "`{}` exited with {status}",
                self.program
            )));
        }
        // A broken pipe before all pairs were written also surfaces as a
        // count mismatch below; other write failures are process errors.
        if let Err(e) = write_result {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(Error::ScorerExit(format!("write failed: {e}")));
            }
        }
        if scores.len() != pairs.len() {
            return Err(Error::ScorerCount {
                expected: pairs.len(),
                got: scores.len(),
            });
        }
        Ok(scores)
    }
}

impl<F: Scalar> PairScorer<F> for ExternalScorer {
    fn score_pairs(&self, pairs: &[DirectedPair<'_>]) -> Result<Vec<F>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.run(pairs)?.into_iter().map(F::from_f64).collect())
    }
}
