// SPDX-License-Identifier: Apache-2.0
//! The quality-metric predictor: a shared per-row feedforward embedding, a
//! learned CLS token and absolute positional vectors, a pre-layer-norm
//! transformer encoder stack, a scalar regression head on the CLS output, and
//! a per-token classification head used only during pretraining.
//!
//! All weights live in one flat `Vec<f64>` described by a [`ParamLayout`];
//! reverse-mode gradients are computed with explicitly cached activations and
//! come back in the same flat layout, plus gradients with respect to the
//! 16x4 input grids when requested.

use super::math::{
    add_assign, add_bias, col_sums, gemm_nn, gemm_nt, gemm_tn, layer_norm, layer_norm_backward,
    relu, relu_backward, Mat,
};
use crate::encoding::SoftTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_rows: usize,
    pub row_bits: usize,
    pub d_rowenc: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ffn: usize,
    pub d_head_hidden: usize,
    pub d_ssl_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_rows: 16,
            row_bits: 4,
            d_rowenc: 32,
            d_model: 64,
            n_heads: 4,
            n_layers: 3,
            d_ffn: 128,
            d_head_hidden: 32,
            d_ssl_hidden: 64,
        }
    }
}

impl ModelConfig {
    pub fn seq_len(&self) -> usize {
        self.n_rows + 1 // CLS token plus one token per row
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSegment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// Offsets of every tensor inside the flat parameter vector. Weight matrices
/// are stored row-major as [out x in].
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub segments: Vec<ParamSegment>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0usize;
        let mut push = |name: String, rows: usize, cols: usize| {
            segments.push(ParamSegment { name, rows, cols, offset });
            offset += rows * cols;
        };
        push("rowenc.w1".into(), cfg.d_rowenc, cfg.row_bits);
        push("rowenc.b1".into(), 1, cfg.d_rowenc);
        push("rowenc.w2".into(), cfg.d_model, cfg.d_rowenc);
        push("rowenc.b2".into(), 1, cfg.d_model);
        push("cls".into(), 1, cfg.d_model);
        push("pos".into(), cfg.seq_len(), cfg.d_model);
        for l in 0..cfg.n_layers {
            for (n, rows, cols) in [
                ("ln1.gamma", 1, cfg.d_model),
                ("ln1.beta", 1, cfg.d_model),
                ("attn.wq", cfg.d_model, cfg.d_model),
                ("attn.bq", 1, cfg.d_model),
                ("attn.wk", cfg.d_model, cfg.d_model),
                ("attn.bk", 1, cfg.d_model),
                ("attn.wv", cfg.d_model, cfg.d_model),
                ("attn.bv", 1, cfg.d_model),
                ("attn.wo", cfg.d_model, cfg.d_model),
                ("attn.bo", 1, cfg.d_model),
                ("ln2.gamma", 1, cfg.d_model),
                ("ln2.beta", 1, cfg.d_model),
                ("ffn.w1", cfg.d_ffn, cfg.d_model),
                ("ffn.b1", 1, cfg.d_ffn),
                ("ffn.w2", cfg.d_model, cfg.d_ffn),
                ("ffn.b2", 1, cfg.d_model),
            ] {
                push(format!("layer{l}.{n}"), rows, cols);
            }
        }
        push("head.w1".into(), cfg.d_head_hidden, cfg.d_model);
        push("head.b1".into(), 1, cfg.d_head_hidden);
        push("head.w2".into(), 1, cfg.d_head_hidden);
        push("head.b2".into(), 1, 1);
        push("ssl.w1".into(), cfg.d_ssl_hidden, cfg.d_model);
        push("ssl.b1".into(), 1, cfg.d_ssl_hidden);
        push("ssl.w2".into(), cfg.n_rows, cfg.d_ssl_hidden);
        push("ssl.b2".into(), 1, cfg.n_rows);
        Self { segments, total: offset }
    }

    pub fn find(&self, name: &str) -> &ParamSegment {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("unknown parameter segment {name}"))
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        let s = self.find(name);
        s.offset..s.offset + s.rows * s.cols
    }
}

/// All weights of the predictor in one flat, differentiable parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub config: ModelConfig,
    data: Vec<f64>,
}

impl SurrogateParams {
    /// Seeded initialization: uniform Xavier bounds for weight matrices, zero
    /// biases, unit layer-norm gains, small normal CLS/positional vectors.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let layout = ParamLayout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; layout.total];
        // Positional and CLS vectors start at the same scale as typical
        // row-encoder outputs; far smaller and position information cannot
        // compete with content in the attention logits.
        let small = Normal::new(0.0, 0.25).unwrap();
        for seg in &layout.segments {
            let slice = &mut data[seg.offset..seg.offset + seg.rows * seg.cols];
            let leaf = seg.name.rsplit('.').next().unwrap_or(&seg.name);
            match leaf {
                "w1" | "w2" | "wq" | "wk" | "wv" | "wo" => {
                    let bound = (6.0 / (seg.rows + seg.cols) as f64).sqrt();
                    let dist = Uniform::new(-bound, bound);
                    for v in slice {
                        *v = dist.sample(&mut rng);
                    }
                }
                "gamma" => slice.fill(1.0),
                "cls" | "pos" => {
                    for v in slice {
                        *v = small.sample(&mut rng);
                    }
                }
                _ => {} // biases and beta stay zero
            }
        }
        Self { config, data }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.config)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn seg(&self, layout: &ParamLayout, name: &str) -> Mat {
        let s = layout.find(name);
        Mat::from_vec(s.rows, s.cols, self.data[s.offset..s.offset + s.rows * s.cols].to_vec())
    }

    fn vec_seg<'a>(&'a self, layout: &ParamLayout, name: &str) -> &'a [f64] {
        &self.data[layout.range(name)]
    }
}

/// Batched model input: `batch * n_rows` rows of `row_bits` values.
pub fn inputs_from_soft(batch: &[SoftTensor]) -> Mat {
    let data: Vec<f64> = batch.iter().flat_map(|t| t.values().iter().copied()).collect();
    Mat::from_vec(batch.len() * 16, 4, data)
}

struct LayerCache {
    input: Mat,           // residual stream entering the layer
    n1: Mat,              // ln1 output
    n1_stats: Vec<(f64, f64)>,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Mat,            // softmaxed scores, (batch*heads*seq) x seq
    ctx: Mat,             // concatenated head contexts
    mid: Mat,             // residual stream after attention
    n2: Mat,
    n2_stats: Vec<(f64, f64)>,
    f1: Mat,              // post-ReLU hidden
}

/// Everything the backward pass needs, kept per batch.
pub struct BatchCache {
    batch: usize,
    x0: Mat,   // raw inputs (B*16) x 4
    h1: Mat,   // row encoder hidden, post-ReLU
    layers: Vec<LayerCache>,
    stream: Mat, // final residual stream
    cls_rows: Mat,
    head_h: Mat, // regression head hidden, post-ReLU
    ssl_in: Option<Mat>,
    ssl_h: Option<Mat>,
}

/// Flat parameter gradients plus optional input gradients.
pub struct Grads {
    pub params: Option<Vec<f64>>,
    /// One (n_rows x row_bits) grid per batch element, row-major.
    pub inputs: Option<Vec<Vec<f64>>>,
}

#[inline]
fn head_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multi-head attention forward over the whole batch: fills the softmaxed
/// score rows ((batch*heads*seq) x seq) and the concatenated context.
/// Parallel over samples; every output element has one writer.
fn attention_forward(
    q: &Mat,
    k: &Mat,
    v: &Mat,
    batch: usize,
    seq: usize,
    n_heads: usize,
    head_dim: usize,
    scale: f64,
) -> (Mat, Mat) {
    use rayon::prelude::*;
    let d_model = n_heads * head_dim;
    let mut attn = Mat::zeros(batch * n_heads * seq, seq);
    let mut ctx = Mat::zeros(batch * seq, d_model);
    attn.data
        .par_chunks_mut(n_heads * seq * seq)
        .zip(ctx.data.par_chunks_mut(seq * d_model))
        .enumerate()
        .for_each(|(b, (attn_b, ctx_b))| {
            for h in 0..n_heads {
                let hs = h * head_dim..(h + 1) * head_dim;
                let scores = &mut attn_b[h * seq * seq..(h + 1) * seq * seq];
                for t in 0..seq {
                    let q_row = &q.row(b * seq + t)[hs.clone()];
                    let row = &mut scores[t * seq..(t + 1) * seq];
                    for (u, s) in row.iter_mut().enumerate() {
                        *s = head_dot(q_row, &k.row(b * seq + u)[hs.clone()]) * scale;
                    }
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for s in row.iter_mut() {
                        *s = (*s - max).exp();
                        sum += *s;
                    }
                    for s in row.iter_mut() {
                        *s /= sum;
                    }
                }
                for t in 0..seq {
                    let out = &mut ctx_b[t * d_model + h * head_dim..t * d_model + (h + 1) * head_dim];
                    for u in 0..seq {
                        let a = scores[t * seq + u];
                        if a == 0.0 {
                            continue;
                        }
                        for (o, vv) in out.iter_mut().zip(&v.row(b * seq + u)[hs.clone()]) {
                            *o += a * vv;
                        }
                    }
                }
            }
        });
    (attn, ctx)
}

/// Backward of [`attention_forward`]: gradients for q, k, v from the context
/// gradient and cached probabilities.
#[allow(clippy::too_many_arguments)]
fn attention_backward(
    dctx: &Mat,
    attn: &Mat,
    q: &Mat,
    k: &Mat,
    v: &Mat,
    batch: usize,
    seq: usize,
    n_heads: usize,
    head_dim: usize,
    scale: f64,
) -> (Mat, Mat, Mat) {
    use rayon::prelude::*;
    let d_model = n_heads * head_dim;
    let mut dq = Mat::zeros(batch * seq, d_model);
    let mut dk = Mat::zeros(batch * seq, d_model);
    let mut dv = Mat::zeros(batch * seq, d_model);
    dq.data
        .par_chunks_mut(seq * d_model)
        .zip(dk.data.par_chunks_mut(seq * d_model))
        .zip(dv.data.par_chunks_mut(seq * d_model))
        .enumerate()
        .for_each(|(b, ((dq_b, dk_b), dv_b))| {
            let mut ds = vec![0.0; seq * seq];
            for h in 0..n_heads {
                let hs = h * head_dim..(h + 1) * head_dim;
                let probs = &attn.data[(b * n_heads + h) * seq * seq..(b * n_heads + h + 1) * seq * seq];
                for t in 0..seq {
                    let dctx_row = &dctx.row(b * seq + t)[hs.clone()];
                    // dv[u] += a[t][u] * dctx[t]; da[t][u] = dot(dctx[t], v[u])
                    let mut inner = 0.0;
                    let da_row = &mut ds[t * seq..(t + 1) * seq];
                    for u in 0..seq {
                        let a = probs[t * seq + u];
                        let v_row = &v.row(b * seq + u)[hs.clone()];
                        let da = head_dot(dctx_row, v_row);
                        da_row[u] = da;
                        inner += da * a;
                        if a != 0.0 {
                            let dv_row = &mut dv_b[u * d_model + h * head_dim
                                ..u * d_model + (h + 1) * head_dim];
                            for (o, g) in dv_row.iter_mut().zip(dctx_row) {
                                *o += a * g;
                            }
                        }
                    }
                    // softmax jacobian and the 1/sqrt(dk) scale
                    for u in 0..seq {
                        da_row[u] = (da_row[u] - inner) * probs[t * seq + u] * scale;
                    }
                }
                for t in 0..seq {
                    let ds_row = &ds[t * seq..(t + 1) * seq];
                    let dq_row =
                        &mut dq_b[t * d_model + h * head_dim..t * d_model + (h + 1) * head_dim];
                    for u in 0..seq {
                        let g = ds_row[u];
                        if g == 0.0 {
                            continue;
                        }
                        let k_row = &k.row(b * seq + u)[hs.clone()];
                        for (o, kv) in dq_row.iter_mut().zip(k_row) {
                            *o += g * kv;
                        }
                        let dk_row = &mut dk_b[u * d_model + h * head_dim
                            ..u * d_model + (h + 1) * head_dim];
                        let q_row = &q.row(b * seq + t)[hs.clone()];
                        for (o, qv) in dk_row.iter_mut().zip(q_row) {
                            *o += g * qv;
                        }
                    }
                }
            }
        });
    (dq, dk, dv)
}

/// Runs the encoder stack on a batch; returns the final residual stream and
/// layer caches. `params` shapes everything; batch size is inferred.
fn encode(p: &SurrogateParams, layout: &ParamLayout, x0: Mat) -> BatchCache {
    let cfg = &p.config;
    let batch = x0.rows / cfg.n_rows;
    let seq = cfg.seq_len();
    let head_dim = cfg.head_dim();
    let scale = 1.0 / (head_dim as f64).sqrt();

    // Row encoder: shared two-layer feedforward on every row.
    let w1 = p.seg(layout, "rowenc.w1");
    let w2 = p.seg(layout, "rowenc.w2");
    let mut h1 = gemm_nt(&x0, &w1);
    add_bias(&mut h1, p.vec_seg(layout, "rowenc.b1"));
    relu(&mut h1);
    let mut tokens = gemm_nt(&h1, &w2);
    add_bias(&mut tokens, p.vec_seg(layout, "rowenc.b2"));

    // Assemble CLS + row tokens and add positional vectors.
    let cls = p.vec_seg(layout, "cls");
    let pos = p.seg(layout, "pos");
    let mut stream = Mat::zeros(batch * seq, cfg.d_model);
    for b in 0..batch {
        for (j, v) in stream.row_mut(b * seq).iter_mut().enumerate() {
            *v = cls[j] + pos.row(0)[j];
        }
        for t in 0..cfg.n_rows {
            let dst = stream.row_mut(b * seq + 1 + t);
            let src = tokens.row(b * cfg.n_rows + t);
            for j in 0..cfg.d_model {
                dst[j] = src[j] + pos.row(1 + t)[j];
            }
        }
    }

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let name = |s: &str| format!("layer{l}.{s}");
        let (n1, n1_stats) = layer_norm(
            &stream,
            p.vec_seg(layout, &name("ln1.gamma")),
            p.vec_seg(layout, &name("ln1.beta")),
        );
        let mut q = gemm_nt(&n1, &p.seg(layout, &name("attn.wq")));
        add_bias(&mut q, p.vec_seg(layout, &name("attn.bq")));
        let mut k = gemm_nt(&n1, &p.seg(layout, &name("attn.wk")));
        add_bias(&mut k, p.vec_seg(layout, &name("attn.bk")));
        let mut v = gemm_nt(&n1, &p.seg(layout, &name("attn.wv")));
        add_bias(&mut v, p.vec_seg(layout, &name("attn.bv")));

        let (attn, ctx) =
            attention_forward(&q, &k, &v, batch, seq, cfg.n_heads, head_dim, scale);
        let mut o = gemm_nt(&ctx, &p.seg(layout, &name("attn.wo")));
        add_bias(&mut o, p.vec_seg(layout, &name("attn.bo")));
        let input = stream.clone();
        add_assign(&mut stream, &o);
        let mid = stream.clone();

        let (n2, n2_stats) = layer_norm(
            &stream,
            p.vec_seg(layout, &name("ln2.gamma")),
            p.vec_seg(layout, &name("ln2.beta")),
        );
        let mut f1 = gemm_nt(&n2, &p.seg(layout, &name("ffn.w1")));
        add_bias(&mut f1, p.vec_seg(layout, &name("ffn.b1")));
        relu(&mut f1);
        let mut f2 = gemm_nt(&f1, &p.seg(layout, &name("ffn.w2")));
        add_bias(&mut f2, p.vec_seg(layout, &name("ffn.b2")));
        add_assign(&mut stream, &f2);

        layers.push(LayerCache {
            input,
            n1,
            n1_stats,
            q,
            k,
            v,
            attn,
            ctx,
            mid,
            n2,
            n2_stats,
            f1,
        });
    }

    let mut cls_rows = Mat::zeros(batch, cfg.d_model);
    for b in 0..batch {
        cls_rows.row_mut(b).copy_from_slice(stream.row(b * seq));
    }
    BatchCache {
        batch,
        x0,
        h1,
        layers,
        stream,
        cls_rows,
        head_h: Mat::zeros(0, 0),
        ssl_in: None,
        ssl_h: None,
    }
}

/// Forward pass to the scalar regression output for a batch of inputs.
pub fn forward_regression(p: &SurrogateParams, x0: Mat) -> (Vec<f64>, BatchCache) {
    let layout = p.layout();
    let mut cache = encode(p, &layout, x0);
    let mut h = gemm_nt(&cache.cls_rows, &p.seg(&layout, "head.w1"));
    add_bias(&mut h, p.vec_seg(&layout, "head.b1"));
    relu(&mut h);
    let mut y = gemm_nt(&h, &p.seg(&layout, "head.w2"));
    add_bias(&mut y, p.vec_seg(&layout, "head.b2"));
    cache.head_h = h;
    (y.data, cache)
}

/// Convenience scalar forward.
pub fn forward_scalar(p: &SurrogateParams, x: &SoftTensor) -> f64 {
    forward_regression(p, inputs_from_soft(std::slice::from_ref(x))).0[0]
}

/// Forward pass to the per-row-token classification logits
/// ((batch * n_rows) x n_rows), used by the permutation pretraining task.
pub fn forward_ssl(p: &SurrogateParams, x0: Mat) -> (Mat, BatchCache) {
    let layout = p.layout();
    let cfg = &p.config;
    let mut cache = encode(p, &layout, x0);
    let seq = cfg.seq_len();
    let mut ssl_in = Mat::zeros(cache.batch * cfg.n_rows, cfg.d_model);
    for b in 0..cache.batch {
        for t in 0..cfg.n_rows {
            ssl_in
                .row_mut(b * cfg.n_rows + t)
                .copy_from_slice(cache.stream.row(b * seq + 1 + t));
        }
    }
    let mut h = gemm_nt(&ssl_in, &p.seg(&layout, "ssl.w1"));
    add_bias(&mut h, p.vec_seg(&layout, "ssl.b1"));
    relu(&mut h);
    let mut logits = gemm_nt(&h, &p.seg(&layout, "ssl.w2"));
    add_bias(&mut logits, p.vec_seg(&layout, "ssl.b2"));
    cache.ssl_in = Some(ssl_in);
    cache.ssl_h = Some(h);
    (logits, cache)
}

struct GradSink {
    data: Vec<f64>,
    enabled: bool,
}

impl GradSink {
    fn add_mat(&mut self, layout: &ParamLayout, name: &str, m: &Mat) {
        if !self.enabled {
            return;
        }
        let r = layout.range(name);
        for (dst, src) in self.data[r].iter_mut().zip(&m.data) {
            *dst += src;
        }
    }

    fn add_vec(&mut self, layout: &ParamLayout, name: &str, v: &[f64]) {
        if !self.enabled {
            return;
        }
        let r = layout.range(name);
        for (dst, src) in self.data[r].iter_mut().zip(v) {
            *dst += src;
        }
    }
}

/// Backward through the encoder stack given the gradient on the final
/// residual stream. Optionally accumulates parameter gradients and/or input
/// gradients.
fn backward_encoder(
    p: &SurrogateParams,
    layout: &ParamLayout,
    cache: &BatchCache,
    mut dstream: Mat,
    want_params: bool,
    want_inputs: bool,
    sink: &mut GradSink,
) -> Option<Vec<Vec<f64>>> {
    let cfg = &p.config;
    let batch = cache.batch;
    let seq = cfg.seq_len();
    let head_dim = cfg.head_dim();
    let scale = 1.0 / (head_dim as f64).sqrt();
    sink.enabled = want_params;

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        let name = |s: &str| format!("layer{l}.{s}");

        // FFN branch: stream = mid + f2(relu(f1(n2(mid))))
        let df2 = dstream.clone(); // gradient into the ffn output
        let w2 = p.seg(layout, &name("ffn.w2"));
        let df1 = relu_backward(&gemm_nn(&df2, &w2), &lc.f1);
        if want_params {
            sink.add_mat(layout, &name("ffn.w2"), &gemm_tn(&df2, &lc.f1));
            sink.add_vec(layout, &name("ffn.b2"), &col_sums(&df2));
            sink.add_mat(layout, &name("ffn.w1"), &gemm_tn(&df1, &lc.n2));
            sink.add_vec(layout, &name("ffn.b1"), &col_sums(&df1));
        }
        let w1 = p.seg(layout, &name("ffn.w1"));
        let dn2 = gemm_nn(&df1, &w1);
        let (dmid_ffn, dg2, db2) = layer_norm_backward(
            &dn2,
            &lc.mid,
            p.vec_seg(layout, &name("ln2.gamma")),
            &lc.n2_stats,
        );
        if want_params {
            sink.add_vec(layout, &name("ln2.gamma"), &dg2);
            sink.add_vec(layout, &name("ln2.beta"), &db2);
        }
        add_assign(&mut dstream, &dmid_ffn); // residual + ffn path

        // Attention branch: mid = input + o(ctx(n1(input)))
        let do_ = dstream.clone();
        if want_params {
            sink.add_mat(layout, &name("attn.wo"), &gemm_tn(&do_, &lc.ctx));
            sink.add_vec(layout, &name("attn.bo"), &col_sums(&do_));
        }
        let wo = p.seg(layout, &name("attn.wo"));
        let dctx = gemm_nn(&do_, &wo);

        let (dq, dk, dv) = attention_backward(
            &dctx, &lc.attn, &lc.q, &lc.k, &lc.v, batch, seq, cfg.n_heads, head_dim, scale,
        );
        if want_params {
            sink.add_mat(layout, &name("attn.wq"), &gemm_tn(&dq, &lc.n1));
            sink.add_vec(layout, &name("attn.bq"), &col_sums(&dq));
            sink.add_mat(layout, &name("attn.wk"), &gemm_tn(&dk, &lc.n1));
            sink.add_vec(layout, &name("attn.bk"), &col_sums(&dk));
            sink.add_mat(layout, &name("attn.wv"), &gemm_tn(&dv, &lc.n1));
            sink.add_vec(layout, &name("attn.bv"), &col_sums(&dv));
        }
        let mut dn1 = gemm_nn(&dq, &p.seg(layout, &name("attn.wq")));
        add_assign(&mut dn1, &gemm_nn(&dk, &p.seg(layout, &name("attn.wk"))));
        add_assign(&mut dn1, &gemm_nn(&dv, &p.seg(layout, &name("attn.wv"))));
        let (dinput_attn, dg1, db1) = layer_norm_backward(
            &dn1,
            &lc.input,
            p.vec_seg(layout, &name("ln1.gamma")),
            &lc.n1_stats,
        );
        if want_params {
            sink.add_vec(layout, &name("ln1.gamma"), &dg1);
            sink.add_vec(layout, &name("ln1.beta"), &db1);
        }
        add_assign(&mut dstream, &dinput_attn);
    }

    // Token assembly: CLS, positional vectors, row tokens.
    let mut dtokens = Mat::zeros(batch * cfg.n_rows, cfg.d_model);
    if want_params {
        let mut dcls = vec![0.0; cfg.d_model];
        let mut dpos = Mat::zeros(seq, cfg.d_model);
        for b in 0..batch {
            for (j, &g) in dstream.row(b * seq).iter().enumerate() {
                dcls[j] += g;
                dpos.row_mut(0)[j] += g;
            }
            for t in 0..cfg.n_rows {
                let g = dstream.row(b * seq + 1 + t);
                for j in 0..cfg.d_model {
                    dpos.row_mut(1 + t)[j] += g[j];
                }
            }
        }
        sink.add_vec(layout, "cls", &dcls);
        sink.add_mat(layout, "pos", &dpos);
    }
    for b in 0..batch {
        for t in 0..cfg.n_rows {
            dtokens
                .row_mut(b * cfg.n_rows + t)
                .copy_from_slice(dstream.row(b * seq + 1 + t));
        }
    }

    // Row encoder.
    let w2 = p.seg(layout, "rowenc.w2");
    let dh1 = relu_backward(&gemm_nn(&dtokens, &w2), &cache.h1);
    if want_params {
        sink.add_mat(layout, "rowenc.w2", &gemm_tn(&dtokens, &cache.h1));
        sink.add_vec(layout, "rowenc.b2", &col_sums(&dtokens));
        sink.add_mat(layout, "rowenc.w1", &gemm_tn(&dh1, &cache.x0));
        sink.add_vec(layout, "rowenc.b1", &col_sums(&dh1));
    }
    if want_inputs {
        let w1 = p.seg(layout, "rowenc.w1");
        let dx0 = gemm_nn(&dh1, &w1);
        let per_sample = cfg.n_rows * cfg.row_bits;
        Some(
            (0..batch)
                .map(|b| {
                    let mut grid = vec![0.0; per_sample];
                    for t in 0..cfg.n_rows {
                        let src = dx0.row(b * cfg.n_rows + t);
                        grid[t * cfg.row_bits..(t + 1) * cfg.row_bits].copy_from_slice(src);
                    }
                    grid
                })
                .collect(),
        )
    } else {
        None
    }
}

/// Backward from per-sample output gradients `dy` (regression head).
pub fn backward_regression(
    p: &SurrogateParams,
    cache: &BatchCache,
    dy: &[f64],
    want_params: bool,
    want_inputs: bool,
) -> Grads {
    let layout = p.layout();
    let cfg = &p.config;
    let seq = cfg.seq_len();
    let mut sink = GradSink {
        data: if want_params { vec![0.0; layout.total] } else { Vec::new() },
        enabled: want_params,
    };

    let dy_mat = Mat::from_vec(cache.batch, 1, dy.to_vec());
    let w2 = p.seg(&layout, "head.w2");
    let dh = relu_backward(&gemm_nn(&dy_mat, &w2), &cache.head_h);
    if want_params {
        sink.add_mat(&layout, "head.w2", &gemm_tn(&dy_mat, &cache.head_h));
        sink.add_vec(&layout, "head.b2", &col_sums(&dy_mat));
        sink.add_mat(&layout, "head.w1", &gemm_tn(&dh, &cache.cls_rows));
        sink.add_vec(&layout, "head.b1", &col_sums(&dh));
    }
    let w1 = p.seg(&layout, "head.w1");
    let dcls_rows = gemm_nn(&dh, &w1);
    let mut dstream = Mat::zeros(cache.batch * seq, cfg.d_model);
    for b in 0..cache.batch {
        dstream.row_mut(b * seq).copy_from_slice(dcls_rows.row(b));
    }
    let inputs = backward_encoder(p, &layout, cache, dstream, want_params, want_inputs, &mut sink);
    Grads { params: want_params.then_some(sink.data), inputs }
}

/// Backward from gradients on the SSL logits; parameter gradients only.
pub fn backward_ssl(p: &SurrogateParams, cache: &BatchCache, dlogits: &Mat) -> Vec<f64> {
    let layout = p.layout();
    let cfg = &p.config;
    let seq = cfg.seq_len();
    let mut sink = GradSink { data: vec![0.0; layout.total], enabled: true };

    let ssl_in = cache.ssl_in.as_ref().expect("ssl forward cached");
    let ssl_h = cache.ssl_h.as_ref().expect("ssl forward cached");
    let w2 = p.seg(&layout, "ssl.w2");
    let dh = relu_backward(&gemm_nn(dlogits, &w2), ssl_h);
    sink.add_mat(&layout, "ssl.w2", &gemm_tn(dlogits, ssl_h));
    sink.add_vec(&layout, "ssl.b2", &col_sums(dlogits));
    sink.add_mat(&layout, "ssl.w1", &gemm_tn(&dh, ssl_in));
    sink.add_vec(&layout, "ssl.b1", &col_sums(&dh));
    let w1 = p.seg(&layout, "ssl.w1");
    let dssl_in = gemm_nn(&dh, &w1);

    let mut dstream = Mat::zeros(cache.batch * seq, cfg.d_model);
    for b in 0..cache.batch {
        for t in 0..cfg.n_rows {
            dstream
                .row_mut(b * seq + 1 + t)
                .copy_from_slice(dssl_in.row(b * cfg.n_rows + t));
        }
    }
    backward_encoder(p, &layout, cache, dstream, true, false, &mut sink);
    sink.data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Encoding;

    fn tc_input() -> SoftTensor {
        SoftTensor::from(&Encoding::two_complement())
    }

    #[test]
    fn parameter_layout_is_contiguous() {
        let cfg = ModelConfig::default();
        let layout = ParamLayout::new(&cfg);
        let mut expected = 0;
        for s in &layout.segments {
            assert_eq!(s.offset, expected);
            expected += s.rows * s.cols;
        }
        assert_eq!(layout.total, expected);
        // Fixed architecture: known parameter count.
        assert_eq!(layout.total, 111_153);
    }

    #[test]
    fn forward_is_deterministic_and_finite() {
        let p = SurrogateParams::init(ModelConfig::default(), 7);
        let x = tc_input();
        let a = forward_scalar(&p, &x);
        let b = forward_scalar(&p, &x);
        assert_eq!(a, b);
        assert!(a.is_finite());
    }

    #[test]
    fn forward_is_continuous_in_the_input() {
        let p = SurrogateParams::init(ModelConfig::default(), 3);
        let x = tc_input();
        let y0 = forward_scalar(&p, &x);
        let mut deltas = vec![];
        for eps in [1e-2, 1e-4, 1e-6] {
            let mut vals = x.values().to_vec();
            vals[17] += eps;
            let y = forward_scalar(&p, &SoftTensor::new(vals).unwrap());
            deltas.push((y - y0).abs());
        }
        assert!(deltas[0] > deltas[1] && deltas[1] > deltas[2]);
        assert!(deltas[2] < 1e-4);
    }

    #[test]
    fn batch_forward_matches_single() {
        let p = SurrogateParams::init(ModelConfig::default(), 11);
        let xs: Vec<SoftTensor> = (0..5)
            .map(|i| {
                let mut v = tc_input().values().to_vec();
                v[i] = 0.3;
                SoftTensor::new(v).unwrap()
            })
            .collect();
        let (batch_out, _) = forward_regression(&p, inputs_from_soft(&xs));
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(batch_out[i], forward_scalar(&p, x));
        }
    }
}
