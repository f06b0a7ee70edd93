//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every operation is evaluated eagerly and appended to the tape; `backward`
//! walks the tape in reverse and accumulates gradients into every node that
//! depends on a trainable leaf.

use std::rc::Rc;

use super::tensor::{softmax, Tensor};

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gather(Var, Rc<[usize]>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    MeanRows(Var),
    SumAll(Var),
    CrossEntropy {
        logits: Var,
        targets: Rc<[usize]>,
        probs: Tensor,
    },
    BceWithLogits {
        z: Var,
        labels: Rc<[f64]>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node that needs them.
pub struct Grads(Vec<Option<Tensor>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0[v.0].as_ref()
    }

    /// The gradient, or zeros shaped like `like` when `v` received none.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

fn column_sums(t: &Tensor) -> Tensor {
    let mut out = vec![0.0; t.cols()];
    for r in 0..t.rows() {
        for (o, x) in out.iter_mut().zip(t.row(r)) {
            *o += x;
        }
    }
    Tensor::from_vec(1, t.cols(), out)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that does not.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor, needs_grad: bool) -> Var {
        if needs_grad {
            self.param(t)
        } else {
            self.constant(t)
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).matmul(self.value(b));
        self.push(y, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).matmul_bt(self.value(b));
        self.push(y, Op::MatMulBt(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut y = self.value(a).clone();
        y.add_assign(self.value(b));
        self.push(y, Op::Add(a, b), &[a, b])
    }

    /// Adds the `1 x n` row `r` to every row of `x`.
    pub fn add_row(&mut self, x: Var, r: Var) -> Var {
        let (xv, rv) = (self.value(x), self.value(r));
        assert_eq!((1, xv.cols()), rv.shape(), "add_row shape mismatch");
        let mut y = xv.clone();
        for i in 0..y.rows() {
            for (a, b) in y.row_mut(i).iter_mut().zip(rv.data()) {
                *a += b;
            }
        }
        self.push(y, Op::AddRow(x, r), &[x, r])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "mul shape mismatch");
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x * y)
            .collect();
        let y = Tensor::from_vec(av.rows(), av.cols(), data);
        self.push(y, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let y = self.value(x).scaled(s);
        self.push(y, Op::Scale(x, s), &[x])
    }

    /// Rows `ids` of `table`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * t.cols());
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let y = Tensor::from_vec(ids.len(), t.cols(), data);
        self.push(y, Op::Gather(table, ids.into()), &[table])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "concat_rows width mismatch");
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
            parts,
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::ConcatCols(parts.to_vec()),
            parts,
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let t = self.value(x);
        let mut data = Vec::with_capacity(t.rows() * width);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..start + width]);
        }
        let y = Tensor::from_vec(t.rows(), width, data);
        self.push(y, Op::SliceCols(x, start), &[x])
    }

    /// Row-wise softmax. Entries where `allowed` is false get probability 0.
    pub fn softmax(&mut self, x: Var, allowed: Option<&[bool]>) -> Var {
        let t = self.value(x);
        let mut y = Tensor::zeros(t.rows(), t.cols());
        for r in 0..t.rows() {
            let row = t.row(r);
            let out = match allowed {
                None => softmax(row),
                Some(mask) => {
                    let m = &mask[r * t.cols()..(r + 1) * t.cols()];
                    let masked: Vec<f64> = row
                        .iter()
                        .zip(m)
                        .map(|(&v, &ok)| if ok { v } else { f64::NEG_INFINITY })
                        .collect();
                    softmax(&masked)
                }
            };
            y.row_mut(r).copy_from_slice(&out);
        }
        self.push(y, Op::Softmax(x), &[x])
    }

    /// Per-row normalization with learned `1 x n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (t, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let n = t.cols() as f64;
        let mut xhat = Tensor::zeros(t.rows(), t.cols());
        let mut y = Tensor::zeros(t.rows(), t.cols());
        let mut inv_std = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let row = t.row(r);
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for c in 0..row.len() {
                let h = (row[c] - mu) * inv;
                xhat.row_mut(r)[c] = h;
                y.row_mut(r)[c] = h * g.data()[c] + b.data()[c];
            }
        }
        self.push(
            y,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            &[x, gamma, beta],
        )
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t
            .data()
            .iter()
            .map(|&v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()))
            .collect();
        let y = Tensor::from_vec(t.rows(), t.cols(), data);
        self.push(y, Op::Gelu(x), &[x])
    }

    /// `1 x n` mean over rows.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let y = column_sums(t).scaled(1.0 / t.rows() as f64);
        self.push(y, Op::MeanRows(x), &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(y, Op::SumAll(x), &[x])
    }

    /// Mean negative log-likelihood of `targets[i]` under row `i` of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let t = self.value(logits);
        assert_eq!(t.rows(), targets.len(), "cross_entropy length mismatch");
        let mut probs = Tensor::zeros(t.rows(), t.cols());
        let mut loss = 0.0;
        for (r, &target) in targets.iter().enumerate() {
            let row = t.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[target];
            for (p, v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let y = Tensor::scalar(loss / targets.len() as f64);
        self.push(
            y,
            Op::CrossEntropy {
                logits,
                targets: targets.into(),
                probs,
            },
            &[logits],
        )
    }

    /// Mean binary cross-entropy of sigmoid(`z`) against `labels`, `z` being `n x 1`.
    pub fn bce_with_logits(&mut self, z: Var, labels: &[f64]) -> Var {
        let t = self.value(z);
        assert_eq!((labels.len(), 1), t.shape(), "bce shape mismatch");
        let loss: f64 = t
            .data()
            .iter()
            .zip(labels)
            .map(|(&z, &y)| softplus(z) - z * y)
            .sum();
        let y = Tensor::scalar(loss / labels.len() as f64);
        self.push(
            y,
            Op::BceWithLogits {
                z,
                labels: labels.into(),
            },
            &[z],
        )
    }

    /// Gradients of the scalar `loss` with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).len(), 1, "backward from a non-scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &dy, &mut grads);
        }
        Grads(grads)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, op: &Op, y: &Tensor, dy: &Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, dy.matmul_bt(self.value(*b)));
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, self.value(*a).matmul_at(dy));
                }
            }
            Op::MatMulBt(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, dy.matmul(self.value(*b)));
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, dy.matmul_at(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, dy.clone());
                self.accumulate(grads, *b, dy.clone());
            }
            Op::AddRow(x, r) => {
                self.accumulate(grads, *x, dy.clone());
                if self.wants(*r) {
                    self.accumulate(grads, *r, column_sums(dy));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = dy
                    .data()
                    .iter()
                    .zip(bv.data())
                    .map(|(g, x)| g * x)
                    .collect();
                let gb = dy
                    .data()
                    .iter()
                    .zip(av.data())
                    .map(|(g, x)| g * x)
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(dy.rows(), dy.cols(), ga));
                self.accumulate(grads, *b, Tensor::from_vec(dy.rows(), dy.cols(), gb));
            }
            Op::Scale(x, s) => self.accumulate(grads, *x, dy.scaled(*s)),
            Op::Gather(table, ids) => {
                let t = self.value(*table);
                let mut g = Tensor::zeros(t.rows(), t.cols());
                for (r, &i) in ids.iter().enumerate() {
                    for (a, b) in g.row_mut(i).iter_mut().zip(dy.row(r)) {
                        *a += b;
                    }
                }
                self.accumulate(grads, *table, g);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let data = dy.data()[offset * dy.cols()..(offset + rows) * dy.cols()].to_vec();
                    self.accumulate(grads, p, Tensor::from_vec(rows, dy.cols(), data));
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    let mut data = Vec::with_capacity(dy.rows() * cols);
                    for r in 0..dy.rows() {
                        data.extend_from_slice(&dy.row(r)[offset..offset + cols]);
                    }
                    self.accumulate(grads, p, Tensor::from_vec(dy.rows(), cols, data));
                    offset += cols;
                }
            }
            Op::SliceCols(x, start) => {
                let t = self.value(*x);
                let mut g = Tensor::zeros(t.rows(), t.cols());
                for r in 0..t.rows() {
                    g.row_mut(r)[*start..*start + dy.cols()].copy_from_slice(dy.row(r));
                }
                self.accumulate(grads, *x, g);
            }
            Op::Softmax(x) => {
                let mut g = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (p, d) = (y.row(r), dy.row(r));
                    let dot: f64 = p.iter().zip(d).map(|(a, b)| a * b).sum();
                    for (o, (pi, di)) in g.row_mut(r).iter_mut().zip(p.iter().zip(d)) {
                        *o = pi * (di - dot);
                    }
                }
                self.accumulate(grads, *x, g);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let g = self.value(*gamma);
                if self.wants(*x) {
                    let n = xhat.cols() as f64;
                    let mut dx = Tensor::zeros(xhat.rows(), xhat.cols());
                    for r in 0..xhat.rows() {
                        let h = xhat.row(r);
                        let dh: Vec<f64> =
                            dy.row(r).iter().zip(g.data()).map(|(a, b)| a * b).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = dh.iter().zip(h).map(|(a, b)| a * b).sum();
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] / n * (n * dh[c] - sum_dh - h[c] * sum_dh_h);
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
                if self.wants(*gamma) {
                    let data = dy
                        .data()
                        .iter()
                        .zip(xhat.data())
                        .map(|(a, b)| a * b)
                        .collect();
                    self.accumulate(
                        grads,
                        *gamma,
                        column_sums(&Tensor::from_vec(dy.rows(), dy.cols(), data)),
                    );
                }
                if self.wants(*beta) {
                    self.accumulate(grads, *beta, column_sums(dy));
                }
            }
            Op::Gelu(x) => {
                let t = self.value(*x);
                let data = t
                    .data()
                    .iter()
                    .zip(dy.data())
                    .map(|(&v, &d)| {
                        let th = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                        let dinner = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                        d * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner)
                    })
                    .collect();
                self.accumulate(grads, *x, Tensor::from_vec(t.rows(), t.cols(), data));
            }
            Op::MeanRows(x) => {
                let t = self.value(*x);
                let s = 1.0 / t.rows() as f64;
                let mut g = Tensor::zeros(t.rows(), t.cols());
                for r in 0..t.rows() {
                    for (o, d) in g.row_mut(r).iter_mut().zip(dy.data()) {
                        *o = d * s;
                    }
                }
                self.accumulate(grads, *x, g);
            }
            Op::SumAll(x) => {
                let t = self.value(*x);
                self.accumulate(
                    grads,
                    *x,
                    Tensor::from_vec(t.rows(), t.cols(), vec![dy.item(); t.len()]),
                );
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let s = dy.item() / targets.len() as f64;
                let mut g = probs.scaled(s);
                for (r, &t) in targets.iter().enumerate() {
                    g.row_mut(r)[t] -= s;
                }
                self.accumulate(grads, *logits, g);
            }
            Op::BceWithLogits { z, labels } => {
                let t = self.value(*z);
                let s = dy.item() / labels.len() as f64;
                let data = t
                    .data()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&z, &y)| s * (sigmoid(z) - y))
                    .collect();
                self.accumulate(grads, *z, Tensor::from_vec(t.rows(), 1, data));
            }
        }
    }
}
