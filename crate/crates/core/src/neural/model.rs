//! Toy transformer generator and discriminator.
//!
//! Blocks are pre-norm: `x + attn(ln(x))` then `x + ffn(ln(x))`. Token
//! embeddings are scaled by `sqrt(d)` and summed with sinusoidal positions.
//! The generator's output projection is its own embedding matrix.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{sigmoid, Grads, Graph, Var};
use super::tensor::Tensor;
use super::vocab::{PAD, SEP};
use super::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub max_len: usize,
}

impl ModelConfig {
    /// L=2, d=64, 4 heads, ff=128, max_len=128.
    pub fn toy(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            d_ff: 128,
            n_layers: 2,
            max_len: 128,
        }
    }

    /// The gradient-check model: L=1, d=16.
    pub fn micro(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 16,
            n_heads: 2,
            d_ff: 32,
            n_layers: 1,
            max_len: 32,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.vocab_size == 0
            || self.d_model == 0
            || self.n_heads == 0
            || self.d_ff == 0
            || self.max_len == 0
        {
            return bad("all model dimensions must be positive");
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be divisible by n_heads");
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter {name}"
        );
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[self.index[name]]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        let i = self.index[name];
        &mut self.tensors[i]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Bit patterns of every value, for exact before/after comparisons.
    pub fn bits(&self) -> Vec<u64> {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter().map(|x| x.to_bits()))
            .collect()
    }

    /// Puts every tensor on `g`, trainable or not.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound<'_> {
        let vars = self
            .tensors
            .iter()
            .map(|t| g.leaf(t.clone(), trainable))
            .collect();
        Bound { params: self, vars }
    }
}

/// A [`ParamSet`] placed on a graph.
pub struct Bound<'a> {
    params: &'a ParamSet,
    vars: Vec<Var>,
}

impl Bound<'_> {
    pub fn var(&self, name: &str) -> Var {
        self.vars[self.params.index[name]]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Per-tensor gradients in parameter order; zeros where none flowed.
    pub fn grads(&self, grads: &Grads) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(&self.params.tensors)
            .map(|(&v, t)| grads.get_or_zeros(v, t))
            .collect()
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn normal(&mut self, rows: usize, cols: usize, std: f64) -> Tensor {
        let dist = Normal::new(0.0, std).expect("positive std");
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| dist.sample(&mut self.rng))
                .collect(),
        )
    }
}

fn push_ln(ps: &mut ParamSet, p: &str, d: usize) {
    ps.push(format!("{p}.g"), Tensor::from_vec(1, d, vec![1.0; d]));
    ps.push(format!("{p}.b"), Tensor::zeros(1, d));
}

fn push_attn(ps: &mut ParamSet, init: &mut Init, p: &str, d: usize) {
    for w in ["wq", "wk", "wv", "wo"] {
        ps.push(format!("{p}.{w}"), init.normal(d, d, (d as f64).powf(-0.5)));
    }
}

fn push_ffn(ps: &mut ParamSet, init: &mut Init, p: &str, d: usize, ff: usize) {
    ps.push(format!("{p}.w1"), init.normal(d, ff, (d as f64).powf(-0.5)));
    ps.push(format!("{p}.b1"), Tensor::zeros(1, ff));
    ps.push(
        format!("{p}.w2"),
        init.normal(ff, d, (ff as f64).powf(-0.5)),
    );
    ps.push(format!("{p}.b2"), Tensor::zeros(1, d));
}

fn push_encoder(ps: &mut ParamSet, init: &mut Init, cfg: &ModelConfig, p: &str) {
    let (d, ff) = (cfg.d_model, cfg.d_ff);
    for l in 0..cfg.n_layers {
        push_ln(ps, &format!("{p}.{l}.ln1"), d);
        push_attn(ps, init, &format!("{p}.{l}.attn"), d);
        push_ln(ps, &format!("{p}.{l}.ln2"), d);
        push_ffn(ps, init, &format!("{p}.{l}.ff"), d, ff);
    }
    push_ln(ps, &format!("{p}.ln"), d);
}

/// Sinusoidal position table, `n x d`.
pub fn positions(n: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(n, d);
    for pos in 0..n {
        for i in 0..d {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            t.row_mut(pos)[i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    t
}

fn ln(g: &mut Graph, b: &Bound<'_>, p: &str, x: Var) -> Var {
    g.layer_norm(x, b.var(&format!("{p}.g")), b.var(&format!("{p}.b")))
}

/// Multi-head attention of `xq` over `xkv`; `allowed` is `rows(xq) x rows(xkv)`.
fn attention(
    g: &mut Graph,
    b: &Bound<'_>,
    cfg: &ModelConfig,
    p: &str,
    xq: Var,
    xkv: Var,
    allowed: &[bool],
) -> Var {
    let q = g.matmul(xq, b.var(&format!("{p}.wq")));
    let k = g.matmul(xkv, b.var(&format!("{p}.wk")));
    let v = g.matmul(xkv, b.var(&format!("{p}.wv")));
    let dh = cfg.head_dim();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let qh = g.slice_cols(q, h * dh, dh);
        let kh = g.slice_cols(k, h * dh, dh);
        let vh = g.slice_cols(v, h * dh, dh);
        let s = g.matmul_bt(qh, kh);
        let s = g.scale(s, 1.0 / (dh as f64).sqrt());
        let pr = g.softmax(s, Some(allowed));
        heads.push(g.matmul(pr, vh));
    }
    let cat = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_cols(&heads)
    };
    g.matmul(cat, b.var(&format!("{p}.wo")))
}

fn ffn(g: &mut Graph, b: &Bound<'_>, p: &str, x: Var) -> Var {
    let h = g.matmul(x, b.var(&format!("{p}.w1")));
    let h = g.add_row(h, b.var(&format!("{p}.b1")));
    let h = g.gelu(h);
    let h = g.matmul(h, b.var(&format!("{p}.w2")));
    g.add_row(h, b.var(&format!("{p}.b2")))
}

fn encoder(
    g: &mut Graph,
    b: &Bound<'_>,
    cfg: &ModelConfig,
    p: &str,
    mut x: Var,
    allowed: &[bool],
) -> Var {
    for l in 0..cfg.n_layers {
        let h = ln(g, b, &format!("{p}.{l}.ln1"), x);
        let h = attention(g, b, cfg, &format!("{p}.{l}.attn"), h, h, allowed);
        x = g.add(x, h);
        let h = ln(g, b, &format!("{p}.{l}.ln2"), x);
        let h = ffn(g, b, &format!("{p}.{l}.ff"), h);
        x = g.add(x, h);
    }
    ln(g, b, &format!("{p}.ln"), x)
}

/// Scales embedding-space rows by `sqrt(d)` and adds positions.
fn add_positions(g: &mut Graph, x: Var, d: usize) -> Var {
    let n = g.value(x).rows();
    let x = g.scale(x, (d as f64).sqrt());
    let pos = g.constant(positions(n, d));
    g.add(x, pos)
}

fn check_len(len: usize, max: usize) -> Result<(), NeuralError> {
    if len == 0 {
        return Err(NeuralError::EmptyInput);
    }
    if len > max {
        return Err(NeuralError::TooLong { len, max });
    }
    Ok(())
}

fn check_ids(ids: &[usize], vocab_size: usize) -> Result<(), NeuralError> {
    match ids.iter().find(|&&i| i >= vocab_size) {
        Some(&i) => Err(NeuralError::Config(format!(
            "token id {i} outside vocabulary of {vocab_size}"
        ))),
        None => Ok(()),
    }
}

/// Encoder output plus the source key mask, reused across decoding steps.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub memory: Var,
    pub key_ok: Vec<bool>,
}

/// Encoder-decoder generator with tied output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub cfg: ModelConfig,
    pub params: ParamSet,
}

impl Generator {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut ps = ParamSet::default();
        let d = cfg.d_model;
        ps.push("emb", init.normal(cfg.vocab_size, d, (d as f64).powf(-0.5)));
        push_encoder(&mut ps, &mut init, &cfg, "enc");
        for l in 0..cfg.n_layers {
            push_ln(&mut ps, &format!("dec.{l}.ln1"), d);
            push_attn(&mut ps, &mut init, &format!("dec.{l}.self"), d);
            push_ln(&mut ps, &format!("dec.{l}.ln2"), d);
            push_attn(&mut ps, &mut init, &format!("dec.{l}.cross"), d);
            push_ln(&mut ps, &format!("dec.{l}.ln3"), d);
            push_ffn(&mut ps, &mut init, &format!("dec.{l}.ff"), d, cfg.d_ff);
        }
        push_ln(&mut ps, "dec.ln", d);
        Ok(Generator { cfg, params: ps })
    }

    /// Every parameter set to zero.
    pub fn zeroed(cfg: ModelConfig) -> Result<Self, NeuralError> {
        let mut g = Generator::new(cfg, 0)?;
        for t in g.params.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        Ok(g)
    }

    pub fn encode(
        &self,
        g: &mut Graph,
        b: &Bound<'_>,
        src: &[usize],
    ) -> Result<Encoded, NeuralError> {
        check_len(src.len(), self.cfg.max_len)?;
        check_ids(src, self.cfg.vocab_size)?;
        let key_ok: Vec<bool> = src.iter().map(|&t| t != PAD).collect();
        if !key_ok.contains(&true) {
            return Err(NeuralError::EmptyInput);
        }
        let n = src.len();
        let allowed: Vec<bool> = (0..n * n).map(|i| key_ok[i % n]).collect();
        let x = g.gather(b.var("emb"), src);
        let x = add_positions(g, x, self.cfg.d_model);
        let memory = encoder(g, b, &self.cfg, "enc", x, &allowed);
        Ok(Encoded { memory, key_ok })
    }

    /// Next-token logits for every position of `prefix`, `len(prefix) x V`.
    pub fn decode(
        &self,
        g: &mut Graph,
        b: &Bound<'_>,
        enc: &Encoded,
        prefix: &[usize],
    ) -> Result<Var, NeuralError> {
        check_len(prefix.len(), self.cfg.max_len)?;
        check_ids(prefix, self.cfg.vocab_size)?;
        let (t, n) = (prefix.len(), enc.key_ok.len());
        let causal: Vec<bool> = (0..t * t).map(|i| i % t <= i / t).collect();
        let cross: Vec<bool> = (0..t * n).map(|i| enc.key_ok[i % n]).collect();
        let emb = b.var("emb");
        let y = g.gather(emb, prefix);
        let mut y = add_positions(g, y, self.cfg.d_model);
        for l in 0..self.cfg.n_layers {
            let h = ln(g, b, &format!("dec.{l}.ln1"), y);
            let h = attention(g, b, &self.cfg, &format!("dec.{l}.self"), h, h, &causal);
            y = g.add(y, h);
            let h = ln(g, b, &format!("dec.{l}.ln2"), y);
            let h = attention(
                g,
                b,
                &self.cfg,
                &format!("dec.{l}.cross"),
                h,
                enc.memory,
                &cross,
            );
            y = g.add(y, h);
            let h = ln(g, b, &format!("dec.{l}.ln3"), y);
            let h = ffn(g, b, &format!("dec.{l}.ff"), h);
            y = g.add(y, h);
        }
        let y = ln(g, b, "dec.ln", y);
        Ok(g.matmul_bt(y, emb))
    }

    /// Teacher-forced cross-entropy: prefix `[bos] + tgt`, targets `tgt + [eos]`.
    pub fn ce_loss(
        &self,
        g: &mut Graph,
        b: &Bound<'_>,
        src: &[usize],
        tgt: &[usize],
    ) -> Result<Var, NeuralError> {
        let enc = self.encode(g, b, src)?;
        let mut prefix = Vec::with_capacity(tgt.len() + 1);
        prefix.push(super::vocab::BOS);
        prefix.extend_from_slice(tgt);
        let mut targets = tgt.to_vec();
        targets.push(super::vocab::EOS);
        let logits = self.decode(g, b, &enc, &prefix)?;
        Ok(g.cross_entropy(logits, &targets))
    }

    /// Evaluation forward pass: logits for `prefix` given `src`.
    pub fn forward(&self, src: &[usize], prefix: &[usize]) -> Result<Tensor, NeuralError> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let enc = self.encode(&mut g, &b, src)?;
        let logits = self.decode(&mut g, &b, &enc, prefix)?;
        Ok(g.value(logits).clone())
    }
}

/// The assertion part of a discriminator input.
#[derive(Clone, Copy, Debug)]
pub enum AssertionInput<'a> {
    Tokens(&'a [usize]),
    /// Embedding-space rows, e.g. from the soft-argmax bridge, `k x d`.
    Vectors(Var),
}

/// Longest assertion the discriminator accepts, leaving room for two
/// separators and one sentence token.
pub fn disc_assertion_cap(max_len: usize) -> usize {
    max_len.saturating_sub(3)
}

/// `story + [sep] + sentence + [sep]`, dropping story tokens, then sentence
/// tokens, from the front so that the context plus `assertion_len` tokens fit
/// in `max_len`.
pub fn disc_context(
    story: &[usize],
    sentence: &[usize],
    assertion_len: usize,
    max_len: usize,
) -> Vec<usize> {
    let room = max_len.saturating_sub(assertion_len + 2);
    let sentence = &sentence[sentence.len().saturating_sub(room)..];
    let keep = (room - sentence.len()).min(story.len());
    let mut ctx = Vec::with_capacity(keep + sentence.len() + 2);
    ctx.extend_from_slice(&story[story.len() - keep..]);
    ctx.push(SEP);
    ctx.extend_from_slice(sentence);
    ctx.push(SEP);
    ctx
}

/// Transformer encoder with a mean-pooled single-logit head.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub cfg: ModelConfig,
    pub params: ParamSet,
}

impl Discriminator {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut ps = ParamSet::default();
        let d = cfg.d_model;
        ps.push("emb", init.normal(cfg.vocab_size, d, (d as f64).powf(-0.5)));
        push_encoder(&mut ps, &mut init, &cfg, "enc");
        ps.push("head.w", init.normal(d, 1, (d as f64).powf(-0.5)));
        ps.push("head.b", Tensor::zeros(1, 1));
        Ok(Discriminator { cfg, params: ps })
    }

    /// Pre-sigmoid score, `1 x 1`.
    pub fn logit(
        &self,
        g: &mut Graph,
        b: &Bound<'_>,
        context: &[usize],
        assertion: AssertionInput<'_>,
    ) -> Result<Var, NeuralError> {
        check_ids(context, self.cfg.vocab_size)?;
        let emb = b.var("emb");
        let mut parts = Vec::with_capacity(2);
        if !context.is_empty() {
            parts.push(g.gather(emb, context));
        }
        match assertion {
            AssertionInput::Tokens(ids) if !ids.is_empty() => {
                check_ids(ids, self.cfg.vocab_size)?;
                parts.push(g.gather(emb, ids));
            }
            AssertionInput::Tokens(_) => {}
            AssertionInput::Vectors(v) => {
                let (rows, cols) = g.value(v).shape();
                if cols != self.cfg.d_model {
                    return Err(NeuralError::WidthMismatch {
                        expected: self.cfg.d_model,
                        found: cols,
                    });
                }
                if rows > 0 {
                    parts.push(v);
                }
            }
        }
        let n: usize = parts.iter().map(|&p| g.value(p).rows()).sum();
        check_len(n, self.cfg.max_len)?;
        let x = if parts.len() == 1 {
            parts[0]
        } else {
            g.concat_rows(&parts)
        };
        let x = add_positions(g, x, self.cfg.d_model);
        let allowed = vec![true; n * n];
        let h = encoder(g, b, &self.cfg, "enc", x, &allowed);
        let pooled = g.mean_rows(h);
        let z = g.matmul(pooled, b.var("head.w"));
        Ok(g.add(z, b.var("head.b")))
    }

    /// Sigmoid score in (0, 1) for a token-path input.
    pub fn score(&self, context: &[usize], assertion: &[usize]) -> Result<f64, NeuralError> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let z = self.logit(&mut g, &b, context, AssertionInput::Tokens(assertion))?;
        Ok(sigmoid(g.value(z).item()))
    }
}
