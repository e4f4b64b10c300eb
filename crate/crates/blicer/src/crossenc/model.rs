//! A small transformer encoder scored through a scalar head: token and
//! position embeddings, post-norm self-attention blocks with ReLU
//! feed-forward layers, and a linear read-out at the CLS position.
//!
//! Parameters live in one flat buffer so that checkpointing, AdamW and
//! finite-difference checking can treat the model as a plain vector. The
//! backward pass is written by hand and verified against central
//! differences in the test suite.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub layers: usize,
    pub width: usize,
    pub heads: usize,
    pub ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub param_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 2,
            width: 64,
            heads: 4,
            ff: 128,
            max_len: 64,
            vocab_size: 0,
            param_seed: 33,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.width == 0 || self.heads == 0 || self.ff == 0 {
            return Err(Error::invalid("model", "layers/width/heads/ff must be >= 1"));
        }
        if self.width % self.heads != 0 {
            return Err(Error::invalid(
                "model.heads",
                format!("width {} not divisible by heads {}", self.width, self.heads),
            ));
        }
        if self.max_len < 8 {
            return Err(Error::invalid("model.max_len", "must be >= 8"));
        }
        if self.vocab_size == 0 {
            return Err(Error::invalid("model.vocab_size", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerLayout {
    wq: Range<usize>,
    bq: Range<usize>,
    wk: Range<usize>,
    bk: Range<usize>,
    wv: Range<usize>,
    bv: Range<usize>,
    wo: Range<usize>,
    bo: Range<usize>,
    ln1_g: Range<usize>,
    ln1_b: Range<usize>,
    w1: Range<usize>,
    c1: Range<usize>,
    w2: Range<usize>,
    c2: Range<usize>,
    ln2_g: Range<usize>,
    ln2_b: Range<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    tok_emb: Range<usize>,
    pos_emb: Range<usize>,
    layers: Vec<LayerLayout>,
    head_w: Range<usize>,
    head_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(cfg: &EncoderConfig) -> Layout {
        let mut cursor = 0usize;
        let mut seg = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let w = cfg.width;
        let tok_emb = seg(cfg.vocab_size * w);
        let pos_emb = seg(cfg.max_len * w);
        let layers = (0..cfg.layers)
            .map(|_| LayerLayout {
                wq: seg(w * w),
                bq: seg(w),
                wk: seg(w * w),
                bk: seg(w),
                wv: seg(w * w),
                bv: seg(w),
                wo: seg(w * w),
                bo: seg(w),
                ln1_g: seg(w),
                ln1_b: seg(w),
                w1: seg(w * cfg.ff),
                c1: seg(cfg.ff),
                w2: seg(cfg.ff * w),
                c2: seg(w),
                ln2_g: seg(w),
                ln2_b: seg(w),
            })
            .collect();
        let head_w = seg(w);
        let head_b = seg(1);
        Layout {
            tok_emb,
            pos_emb,
            layers,
            head_w,
            head_b,
            total: cursor,
        }
    }
}

/// Layer-norm epsilon; small enough to be invisible at unit scale, large
/// enough to keep gradients finite on constant rows.
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CrossEncoder<F> {
    cfg: EncoderConfig,
    layout: Layout,
    params: Vec<F>,
}

struct LnCache<F> {
    xhat: Array2<F>,
    inv_std: Vec<F>,
}

struct LayerCache<F> {
    x_in: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Softmax outputs per (example, head), indexed b * heads + h.
    attn: Vec<Array2<F>>,
    ctx: Array2<F>,
    ln1: LnCache<F>,
    x1: Array2<F>,
    /// ReLU outputs (the mask is recovered from u > 0).
    u: Array2<F>,
    ln2: LnCache<F>,
}

/// Forward activations kept for the backward pass.
pub struct BatchCache<F> {
    ids: Vec<Vec<u32>>,
    layers: Vec<LayerCache<F>>,
    x_final: Array2<F>,
}

impl<F: Scalar> CrossEncoder<F> {
    /// Seeded initialization: embeddings and weight matrices uniform in
    /// [-0.05, 0.05], biases and the output head zero, layer-norm gains one.
    /// A zero head makes every untrained score sigmoid(0) = 0.5.
    pub fn init(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let mut params = vec![F::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.param_seed);
        let mut fill_uniform = |params: &mut [F], r: &Range<usize>| {
            for p in &mut params[r.clone()] {
                *p = F::from_f64(rng.gen_range(-0.05..0.05));
            }
        };
        fill_uniform(&mut params, &layout.tok_emb);
        fill_uniform(&mut params, &layout.pos_emb);
        for l in 0..cfg.layers {
            let lay = layout.layers[l].clone();
            for r in [&lay.wq, &lay.wk, &lay.wv, &lay.wo, &lay.w1, &lay.w2] {
                fill_uniform(&mut params, r);
            }
            for r in [&lay.ln1_g, &lay.ln2_g] {
                for p in &mut params[r.clone()] {
                    *p = F::one();
                }
            }
        }
        Ok(CrossEncoder {
            cfg,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    fn mat(&self, r: &Range<usize>, rows: usize, cols: usize) -> ArrayView2<'_, F> {
        ArrayView2::from_shape((rows, cols), &self.params[r.clone()]).expect("layout shape")
    }

    fn vec1(&self, r: &Range<usize>) -> ArrayView1<'_, F> {
        ArrayView1::from_shape(r.len(), &self.params[r.clone()]).expect("layout shape")
    }

    /// One logit per sequence (the cache is dropped).
    pub fn forward_logits(&self, ids: &[Vec<u32>]) -> Vec<F> {
        self.forward_cached(ids).0
    }

    /// Forward pass over a batch of equal-length id sequences.
    pub fn forward_cached(&self, ids: &[Vec<u32>]) -> (Vec<F>, BatchCache<F>) {
        let b = ids.len();
        let s_len = self.cfg.max_len;
        let w = self.cfg.width;
        for seq in ids {
            assert_eq!(seq.len(), s_len, "sequence length must equal max_len");
        }

        let mut x = Array2::<F>::zeros((b * s_len, w));
        {
            let tok = self.mat(&self.layout.tok_emb, self.cfg.vocab_size, w);
            let pos = self.mat(&self.layout.pos_emb, s_len, w);
            for (bi, seq) in ids.iter().enumerate() {
                for (t, &id) in seq.iter().enumerate() {
                    let mut row = x.row_mut(bi * s_len + t);
                    row.assign(&tok.row(id as usize));
                    row += &pos.row(t);
                }
            }
        }
        let mut layer_caches = Vec::with_capacity(self.cfg.layers);
        for lay in &self.layout.layers {
            let (next, cache) = self.layer_forward(lay, x, b);
            layer_caches.push(cache);
            x = next;
        }

        let head_w = self.vec1(&self.layout.head_w);
        let head_b = self.params[self.layout.head_b.start];
        let logits: Vec<F> = (0..b)
            .map(|bi| x.row(bi * s_len).dot(&head_w) + head_b)
            .collect();

        (
            logits,
            BatchCache {
                ids: ids.to_vec(),
                layers: layer_caches,
                x_final: x,
            },
        )
    }

    fn layer_forward(
        &self,
        lay: &LayerLayout,
        x_in: Array2<F>,
        b: usize,
    ) -> (Array2<F>, LayerCache<F>) {
        let w = self.cfg.width;
        let s_len = self.cfg.max_len;
        let heads = self.cfg.heads;
        let dk = w / heads;
        let scale = F::one() / F::from_f64((dk as f64).sqrt());

        let q = linear(&x_in, self.mat(&lay.wq, w, w), self.vec1(&lay.bq));
        let k = linear(&x_in, self.mat(&lay.wk, w, w), self.vec1(&lay.bk));
        let v = linear(&x_in, self.mat(&lay.wv, w, w), self.vec1(&lay.bv));

        let mut ctx = Array2::<F>::zeros((b * s_len, w));
        let mut attn = Vec::with_capacity(b * heads);
        for bi in 0..b {
            let rows = bi * s_len..(bi + 1) * s_len;
            for h in 0..heads {
                let cols = h * dk..(h + 1) * dk;
                let qh = q.slice(s![rows.clone(), cols.clone()]);
                let kh = k.slice(s![rows.clone(), cols.clone()]);
                let vh = v.slice(s![rows.clone(), cols.clone()]);
                let mut scores = qh.dot(&kh.t());
                scores.mapv_inplace(|z| z * scale);
                softmax_rows(&mut scores);
                let ctx_h = scores.dot(&vh);
                ctx.slice_mut(s![rows.clone(), cols]).assign(&ctx_h);
                attn.push(scores);
            }
        }

        let o_out = linear(&ctx, self.mat(&lay.wo, w, w), self.vec1(&lay.bo));
        let r1 = &x_in + &o_out;
        let (x1, ln1) = layer_norm(&r1, self.vec1(&lay.ln1_g), self.vec1(&lay.ln1_b));

        let f1 = linear(&x1, self.mat(&lay.w1, w, self.cfg.ff), self.vec1(&lay.c1));
        let u = f1.mapv(|z| if z > F::zero() { z } else { F::zero() });
        let f2 = linear(&u, self.mat(&lay.w2, self.cfg.ff, w), self.vec1(&lay.c2));
        let r2 = &x1 + &f2;
        let (x2, ln2) = layer_norm(&r2, self.vec1(&lay.ln2_g), self.vec1(&lay.ln2_b));

        (
            x2,
            LayerCache {
                x_in,
                q,
                k,
                v,
                attn,
                ctx,
                ln1,
                x1,
                u,
                ln2,
            },
        )
    }

    /// Accumulate parameter gradients for d(loss)/d(logit) into `grad`
    /// (same flat layout as `params`).
    pub fn backward(&self, cache: &BatchCache<F>, dlogits: &[F], grad: &mut [F]) {
        assert_eq!(grad.len(), self.layout.total);
        assert_eq!(dlogits.len(), cache.ids.len());
        let b = cache.ids.len();
        let s_len = self.cfg.max_len;
        let w = self.cfg.width;

        let mut dx = Array2::<F>::zeros((b * s_len, w));
        {
            let head_w = self.vec1(&self.layout.head_w);
            for (bi, &dl) in dlogits.iter().enumerate() {
                let cls = cache.x_final.row(bi * s_len);
                for c in 0..w {
                    grad[self.layout.head_w.start + c] += dl * cls[c];
                }
                grad[self.layout.head_b.start] += dl;
                let mut row = dx.row_mut(bi * s_len);
                for c in 0..w {
                    row[c] += dl * head_w[c];
                }
            }
        }

        for (lay, lcache) in self
            .layout
            .layers
            .iter()
            .zip(cache.layers.iter())
            .rev()
        {
            dx = self.layer_backward(lay, lcache, dx, b, grad);
        }

        // Embedding scatter-add, sequential in (example, position) order.
        for (bi, seq) in cache.ids.iter().enumerate() {
            for (t, &id) in seq.iter().enumerate() {
                let row = dx.row(bi * s_len + t);
                let tok_base = self.layout.tok_emb.start + id as usize * w;
                let pos_base = self.layout.pos_emb.start + t * w;
                for c in 0..w {
                    grad[tok_base + c] += row[c];
                    grad[pos_base + c] += row[c];
                }
            }
        }
    }

    fn layer_backward(
        &self,
        lay: &LayerLayout,
        cache: &LayerCache<F>,
        dx2: Array2<F>,
        b: usize,
        grad: &mut [F],
    ) -> Array2<F> {
        let w = self.cfg.width;
        let ff = self.cfg.ff;
        let s_len = self.cfg.max_len;
        let heads = self.cfg.heads;
        let dk = w / heads;
        let scale = F::one() / F::from_f64((dk as f64).sqrt());

        // LN2.
        let dr2 = layer_norm_backward(
            &dx2,
            &cache.ln2,
            self.vec1(&lay.ln2_g),
            grad,
            &lay.ln2_g,
            &lay.ln2_b,
        );

        // Feed-forward; dr2 is both the residual branch and dF2.
        let mut dx1 = dr2.clone();
        let du = linear_backward(&cache.u, &dr2, self.mat(&lay.w2, ff, w), grad, &lay.w2, &lay.c2);
        let mut df1 = du;
        df1.zip_mut_with(&cache.u, |d, &u| {
            if u <= F::zero() {
                *d = F::zero();
            }
        });
        dx1 += &linear_backward(&cache.x1, &df1, self.mat(&lay.w1, w, ff), grad, &lay.w1, &lay.c1);

        // LN1.
        let dr1 = layer_norm_backward(
            &dx1,
            &cache.ln1,
            self.vec1(&lay.ln1_g),
            grad,
            &lay.ln1_g,
            &lay.ln1_b,
        );

        // Output projection; dr1 is both the residual branch and dO.
        let mut dx_in = dr1.clone();
        let dctx = linear_backward(&cache.ctx, &dr1, self.mat(&lay.wo, w, w), grad, &lay.wo, &lay.bo);

        // Attention heads.
        let mut dq = Array2::<F>::zeros((b * s_len, w));
        let mut dk_mat = Array2::<F>::zeros((b * s_len, w));
        let mut dv = Array2::<F>::zeros((b * s_len, w));
        for bi in 0..b {
            let rows = bi * s_len..(bi + 1) * s_len;
            for h in 0..heads {
                let cols = h * dk..(h + 1) * dk;
                let a = &cache.attn[bi * heads + h];
                let qh = cache.q.slice(s![rows.clone(), cols.clone()]);
                let kh = cache.k.slice(s![rows.clone(), cols.clone()]);
                let vh = cache.v.slice(s![rows.clone(), cols.clone()]);
                let dctx_h = dctx.slice(s![rows.clone(), cols.clone()]);

                let mut da = dctx_h.dot(&vh.t());
                dv.slice_mut(s![rows.clone(), cols.clone()])
                    .assign(&a.t().dot(&dctx_h));

                // Softmax backward per row: ds = a * (da - <da, a>).
                for r in 0..s_len {
                    let a_row = a.row(r);
                    let mut da_row = da.row_mut(r);
                    let dot = da_row.dot(&a_row);
                    for c in 0..s_len {
                        da_row[c] = a_row[c] * (da_row[c] - dot) * scale;
                    }
                }
                dq.slice_mut(s![rows.clone(), cols.clone()])
                    .assign(&da.dot(&kh));
                dk_mat
                    .slice_mut(s![rows.clone(), cols])
                    .assign(&da.t().dot(&qh));
            }
        }

        dx_in += &linear_backward(&cache.x_in, &dq, self.mat(&lay.wq, w, w), grad, &lay.wq, &lay.bq);
        dx_in += &linear_backward(&cache.x_in, &dk_mat, self.mat(&lay.wk, w, w), grad, &lay.wk, &lay.bk);
        dx_in += &linear_backward(&cache.x_in, &dv, self.mat(&lay.wv, w, w), grad, &lay.wv, &lay.bv);
        dx_in
    }
}

/// y = x W + bias (bias broadcast over rows).
fn linear<F: Scalar>(x: &Array2<F>, w: ArrayView2<'_, F>, bias: ArrayView1<'_, F>) -> Array2<F> {
    let mut y = x.dot(&w);
    for mut row in y.rows_mut() {
        row += &bias;
    }
    y
}

/// Accumulates dW and db into the flat gradient buffer (the bias segment
/// immediately follows the weight segment in the layout), returns dX.
fn linear_backward<F: Scalar>(
    x: &Array2<F>,
    dy: &Array2<F>,
    w: ArrayView2<'_, F>,
    grad: &mut [F],
    w_range: &Range<usize>,
    b_range: &Range<usize>,
) -> Array2<F> {
    debug_assert_eq!(w_range.end, b_range.start);
    let (dw, db) = grad[w_range.start..b_range.end].split_at_mut(w_range.len());
    let dw_mat = x.t().dot(dy);
    let mut dw_view =
        ArrayViewMut2::from_shape(dw_mat.dim(), dw).expect("gradient segment shape");
    dw_view += &dw_mat;
    for row in dy.rows() {
        for (acc, &g) in db.iter_mut().zip(row.iter()) {
            *acc += g;
        }
    }
    dy.dot(&w.t())
}

/// Numerically stable row softmax in place.
fn softmax_rows<F: Scalar>(scores: &mut Array2<F>) {
    for mut row in scores.rows_mut() {
        let mut max = row[0];
        for &z in row.iter() {
            if z > max {
                max = z;
            }
        }
        let mut sum = F::zero();
        for z in row.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        let inv = F::one() / sum;
        row.mapv_inplace(|z| z * inv);
    }
}

fn layer_norm<F: Scalar>(
    x: &Array2<F>,
    gamma: ArrayView1<'_, F>,
    beta: ArrayView1<'_, F>,
) -> (Array2<F>, LnCache<F>) {
    let n = x.ncols();
    let n_f = F::from_f64(n as f64);
    let eps = F::from_f64(LN_EPS);
    let mut xhat = Array2::<F>::zeros(x.dim());
    let mut y = Array2::<F>::zeros(x.dim());
    let mut inv_std = Vec::with_capacity(x.nrows());
    for (r, row) in x.rows().into_iter().enumerate() {
        let mut mean = F::zero();
        for &v in row.iter() {
            mean += v;
        }
        mean = mean / n_f;
        let mut var = F::zero();
        for &v in row.iter() {
            let d = v - mean;
            var += d * d;
        }
        var = var / n_f;
        let istd = F::one() / (var + eps).sqrt();
        inv_std.push(istd);
        let mut xhat_row = xhat.row_mut(r);
        let mut y_row = y.row_mut(r);
        for c in 0..n {
            let xh = (row[c] - mean) * istd;
            xhat_row[c] = xh;
            y_row[c] = gamma[c] * xh + beta[c];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward<F: Scalar>(
    dy: &Array2<F>,
    cache: &LnCache<F>,
    gamma: ArrayView1<'_, F>,
    grad: &mut [F],
    g_range: &Range<usize>,
    b_range: &Range<usize>,
) -> Array2<F> {
    debug_assert_eq!(g_range.end, b_range.start);
    let (dgamma, dbeta) = grad[g_range.start..b_range.end].split_at_mut(g_range.len());
    let n = dy.ncols();
    let n_f = F::from_f64(n as f64);
    let mut dx = Array2::<F>::zeros(dy.dim());
    for (r, dy_row) in dy.rows().into_iter().enumerate() {
        let xhat_row = cache.xhat.row(r);
        let istd = cache.inv_std[r];
        let mut mean_h = F::zero();
        let mut mean_hx = F::zero();
        for c in 0..n {
            let h = dy_row[c] * gamma[c];
            mean_h += h;
            mean_hx += h * xhat_row[c];
            dgamma[c] += dy_row[c] * xhat_row[c];
            dbeta[c] += dy_row[c];
        }
        mean_h = mean_h / n_f;
        mean_hx = mean_hx / n_f;
        let mut dx_row = dx.row_mut(r);
        for c in 0..n {
            let h = dy_row[c] * gamma[c];
            dx_row[c] = istd * (h - mean_h - xhat_row[c] * mean_hx);
        }
    }
    dx
}
