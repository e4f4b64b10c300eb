//! Training: binary cross-entropy on polarised targets, AdamW updates, a
//! seeded shuffle per epoch, and finite-difference gradient checking.
//!
//! Determinism contract: for fixed seeds, two runs produce bit-identical
//! parameters and loss traces. Batches are split into fixed-size
//! micro-chunks whose gradients are reduced in chunk order, so enabling
//! parallelism cannot change any result.

use super::{CrossEncoderScorer, DirectedPair};
use crate::error::{Error, Result};
use crate::lexicon::TrainingSet;
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 256,
            // From-scratch toy default. When an external pretrained
            // cross-encoder is fine-tuned instead, the documented default
            // is 1.2e-5.
            learning_rate: 3e-4,
            weight_decay: 0.01,
            shuffle_seed: 33,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("train.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("train.learning_rate", "must be > 0"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("train.weight_decay", "must be >= 0"));
        }
        Ok(())
    }
}

pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Binary cross-entropy of a logit against a soft target v in [0, 1],
/// computed in the overflow-free form `max(u, 0) - u v + ln(1 + e^{-|u|})`.
pub fn bce_loss<F: Scalar>(logit: F, target: F) -> Result<F> {
    if !(target >= F::zero() && target <= F::one()) {
        return Err(Error::invalid(
            "target",
            format!("{target} outside [0, 1]"),
        ));
    }
    let zero = F::zero();
    let pos = if logit > zero { logit } else { zero };
    Ok(pos - logit * target + (F::one() + (-logit.abs()).exp()).ln())
}

/// d bce / d logit = sigmoid(logit) - target.
pub fn bce_grad<F: Scalar>(logit: F, target: F) -> F {
    sigmoid(logit) - target
}

/// AdamW: adaptive moments with decoupled weight decay.
struct AdamW<F> {
    m: Vec<F>,
    v: Vec<F>,
    step: u64,
    lr: F,
    wd: F,
    beta1: F,
    beta2: F,
    eps: F,
}

impl<F: Scalar> AdamW<F> {
    fn new(n: usize, lr: f64, wd: f64) -> Self {
        AdamW {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            step: 0,
            lr: F::from_f64(lr),
            wd: F::from_f64(wd),
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            eps: F::from_f64(1e-8),
        }
    }

    fn update(&mut self, params: &mut [F], grad: &[F]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = F::one() - self.beta1.powi(t);
        let bc2 = F::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (F::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (F::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i]
                - self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.wd * params[i]);
        }
    }
}

/// Examples per micro-chunk. Fixed (not tied to the thread count) so that
/// the reduction order, and hence every float, is schedule-independent.
const MICRO_CHUNK: usize = 32;

/// Train the scorer in place; returns the per-epoch mean loss trace.
///
/// `epochs = 0` leaves the parameters bit-identical to their inputs.
pub fn train<F: Scalar>(
    scorer: &mut CrossEncoderScorer<F>,
    data: &TrainingSet<F>,
    cfg: &TrainConfig,
) -> Result<Vec<F>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set", "empty"));
    }
    for e in &data.examples {
        if !(e.target >= F::zero() && e.target <= F::one()) {
            return Err(Error::invalid(
                "target",
                format!("{} outside [0, 1] for ({}, {})", e.target, e.src, e.tgt),
            ));
        }
    }

    // Tokenize once up front.
    let encoded: Vec<Vec<u32>> = data
        .examples
        .iter()
        .map(|e| {
            scorer.encode(&DirectedPair {
                src: &e.src,
                src_tag: &e.src_tag,
                tgt: &e.tgt,
                tgt_tag: &e.tgt_tag,
            })
        })
        .collect::<Result<_>>()?;
    let targets: Vec<F> = data.examples.iter().map(|e| e.target).collect();

    let n = data.len();
    let n_params = scorer.model.num_params();
    let mut optimizer = AdamW::<F>::new(n_params, cfg.learning_rate, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = F::zero();
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inv_batch = F::one() / F::from_f64(batch.len() as f64);
            let chunks: Vec<&[usize]> = batch.chunks(MICRO_CHUNK).collect();
            let partials: Vec<(F, Vec<F>)> = chunks
                .par_iter()
                .map(|chunk| {
                    let ids: Vec<Vec<u32>> =
                        chunk.iter().map(|&i| encoded[i].clone()).collect();
                    let (logits, cache) = scorer.model.forward_cached(&ids);
                    let mut loss_sum = F::zero();
                    let mut dlogits = Vec::with_capacity(chunk.len());
                    for (pos, &i) in chunk.iter().enumerate() {
                        let l = bce_loss(logits[pos], targets[i]).expect("validated target");
                        loss_sum += l;
                        dlogits.push(bce_grad(logits[pos], targets[i]) * inv_batch);
                    }
                    let mut grad = vec![F::zero(); n_params];
                    scorer.model.backward(&cache, &dlogits, &mut grad);
                    (loss_sum, grad)
                })
                .collect();

            let mut grad = vec![F::zero(); n_params];
            let mut batch_loss = F::zero();
            for (loss_sum, part) in &partials {
                batch_loss += *loss_sum;
                for (g, p) in grad.iter_mut().zip(part.iter()) {
                    *g += *p;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    msg: format!(
                        "batch loss {batch_loss} over {} examples (lr={})",
                        batch.len(),
                        cfg.learning_rate
                    ),
                });
            }
            epoch_loss += batch_loss;
            optimizer.update(scorer.model.params_mut(), &grad);
        }
        let mean = epoch_loss / F::from_f64(n as f64);
        log::info!("epoch {epoch}: mean loss {mean}");
        trace.push(mean);
    }
    Ok(trace)
}

/// One finite-difference comparison entry.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckEntry {
    pub param_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Gradient-check report; entries sorted by descending relative error.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

/// Relative error with an absolute floor: coordinates smaller than the floor
/// are compared absolutely, which keeps finite-difference noise on
/// near-zero gradients from dominating the report.
fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

/// Compare analytic BCE gradients against central finite differences
/// (step `1e-5`) on a seeded random subset of at least `n_coords`
/// parameters (all of them if the model is smaller). Meaningful at f64
/// precision; use small models.
pub fn grad_check<F: Scalar>(
    scorer: &CrossEncoderScorer<F>,
    pair: &DirectedPair<'_>,
    target: F,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let ids = vec![scorer.encode(pair)?];
    let target_v = vec![target];
    let n_params = scorer.model.num_params();

    let loss_fn = |model: &super::model::CrossEncoder<F>| -> F {
        let logits = model.forward_logits(&ids);
        bce_loss(logits[0], target_v[0]).expect("validated target")
    };

    let (logits, cache) = scorer.model.forward_cached(&ids);
    let _ = bce_loss(logits[0], target)?;
    let mut analytic = vec![F::zero(); n_params];
    scorer
        .model
        .backward(&cache, &[bce_grad(logits[0], target)], &mut analytic);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<usize> = if n_params <= n_coords {
        (0..n_params).collect()
    } else {
        rand::seq::index::sample(&mut rng, n_params, n_coords).into_vec()
    };

    let h = 1e-5;
    let mut model = scorer.model.clone();
    let mut entries = Vec::with_capacity(coords.len());
    for idx in coords {
        let original = model.params()[idx];
        model.params_mut()[idx] = original + F::from_f64(h);
        let plus = loss_fn(&model).as_f64();
        model.params_mut()[idx] = original - F::from_f64(h);
        let minus = loss_fn(&model).as_f64();
        model.params_mut()[idx] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[idx].as_f64();
        entries.push(GradCheckEntry {
            param_index: idx,
            analytic: a,
            numeric,
            relative_error: relative_error(a, numeric),
        });
    }
    entries.sort_by(|a, b| {
        b.relative_error
            .partial_cmp(&a.relative_error)
            .expect("finite errors")
            .then(a.param_index.cmp(&b.param_index))
    });
    let max_relative_error = entries.first().map_or(0.0, |e| e.relative_error);
    Ok(GradCheckReport {
        max_relative_error,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_zero_logit_is_ln2_weighted() {
        let l = bce_loss(0.0_f64, 0.65).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_limit_large_logit_true_target() {
        let l = bce_loss(40.0_f64, 1.0).unwrap();
        assert!(l >= 0.0 && l < 1e-12, "{l}");
        // Extreme logits stay finite.
        assert!(bce_loss(-1e6_f64, 0.0).unwrap().is_finite());
        assert!(bce_loss(1e6_f64, 0.0).unwrap().is_finite());
    }

    #[test]
    fn bce_gradient_matches_central_differences() {
        let v = 0.65_f64;
        let u = 0.0_f64;
        assert!((bce_grad(u, v) - (-0.15)).abs() < 1e-12);
        let h = 1e-6;
        for logit in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let numeric =
                (bce_loss(logit + h, v).unwrap() - bce_loss(logit - h, v).unwrap()) / (2.0 * h);
            assert!((bce_grad(logit, v) - numeric).abs() < 1e-6);
        }
        assert!(bce_loss(0.0_f64, 1.2).is_err());
        assert!(bce_loss(0.0_f64, -0.2).is_err());
    }

    #[test]
    fn bce_entropy_floor() {
        // bce(u, v) >= -(v ln v + (1-v) ln(1-v)), equality iff sigmoid(u) = v.
        for v in [0.1_f64, 0.35, 0.5, 0.9] {
            let entropy = -(v * v.ln() + (1.0 - v) * (1.0 - v).ln());
            for u in [-3.0, -0.2, 0.0, 1.5] {
                assert!(bce_loss(u, v).unwrap() >= entropy - 1e-9);
            }
            let u_star = (v / (1.0 - v)).ln();
            assert!((bce_loss(u_star, v).unwrap() - entropy).abs() < 1e-9);
        }
    }

    #[test]
    fn sigmoid_is_stable_and_in_range() {
        for z in [-745.0_f64, -20.0, 0.0, 20.0, 745.0] {
            let s = sigmoid(z);
            assert!(s >= 0.0 && s <= 1.0);
            assert!(s.is_finite());
        }
        assert_eq!(sigmoid(0.0_f64), 0.5);
    }
}
