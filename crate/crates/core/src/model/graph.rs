//! Minimal reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every operation of one forward pass; [`Graph::backward`]
//! walks the tape in reverse and accumulates parameter gradients. Parameter
//! leaves borrow their values from [`Parameters`] instead of copying them, and
//! row gathers from embedding tables scatter their gradient into the touched
//! rows only.

use super::params::{Gradients, ParamId, Parameters};
use super::tensor::Mat;

pub type NodeId = usize;

const LN_EPS: f64 = 1e-5;
pub const LOG_CLAMP: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

enum Op {
    Param(ParamId),
    Input,
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Gelu(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Mat, inv_std: Vec<f64> },
    ConcatCols(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize },
    ConcatRows(Vec<NodeId>),
    SliceRow { x: NodeId, row: usize },
    Gather { table: ParamId, ids: Vec<usize> },
    BceSum { a: NodeId, labels: Vec<f64> },
}

struct Node {
    value: Option<Mat>,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p Parameters,
    nodes: Vec<Node>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Summed binary cross-entropy with log arguments clamped at [`LOG_CLAMP`].
pub fn bce_sum(a: &[f64], labels: &[f64]) -> f64 {
    a.iter()
        .zip(labels)
        .map(|(&a, &y)| -((1.0 - y) * (1.0 - a).max(LOG_CLAMP).ln() + y * a.max(LOG_CLAMP).ln()))
        .sum()
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p Parameters) -> Self {
        Graph { params, nodes: Vec::with_capacity(512) }
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        let node = &self.nodes[id];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.tensor(*p),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        self.nodes.push(Node { value: Some(value), op });
        self.nodes.len() - 1
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(v, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, self.value(a).cols), "add_row shape");
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            for (x, b) in v.row_mut(i).iter_mut().zip(&r.data) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            softmax_in_place(v.row_mut(i));
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalisation with `1 × n` gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let n = xv.cols as f64;
        let mut xhat = Mat::zeros(xv.rows, xv.cols);
        let mut out = Mat::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        for i in 0..xv.rows {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for j in 0..xv.cols {
                let h = (row[j] - mean) * is;
                xhat.set(i, j, h);
                out.set(i, j, h * g.data[j] + b.data[j]);
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                out.row_mut(i)[off..off + v.cols].copy_from_slice(v.row(i));
            }
            off += v.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        let mut out = Mat::zeros(v.rows, len);
        for i in 0..v.rows {
            out.row_mut(i).copy_from_slice(&v.row(i)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols, cols, "concat_rows col mismatch");
            data.extend_from_slice(&v.data);
            rows += v.rows;
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_row(&mut self, x: NodeId, row: usize) -> NodeId {
        let v = self.value(x);
        let out = Mat::from_vec(1, v.cols, v.row(row).to_vec());
        self.push(out, Op::SliceRow { x, row })
    }

    /// Rows `ids` of a parameter table.
    pub fn gather(&mut self, table: ParamId, ids: &[usize]) -> NodeId {
        let t = self.params.tensor(table);
        let mut out = Mat::zeros(ids.len(), t.cols);
        for (i, &id) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(id));
        }
        self.push(out, Op::Gather { table, ids: ids.to_vec() })
    }

    /// `-Σ (1-y) ln(1-a) + y ln(a)` over all entries of `a`.
    pub fn bce_sum(&mut self, a: NodeId, labels: &[f64]) -> NodeId {
        let av = self.value(a);
        assert_eq!(av.data.len(), labels.len(), "bce length mismatch");
        let loss = bce_sum(&av.data, labels);
        self.push(Mat::from_vec(1, 1, vec![loss]), Op::BceSum { a, labels: labels.to_vec() })
    }

    /// Accumulates `scale * d(output)/d(param)` into `grads`. `output` must be
    /// a `1 × 1` node.
    pub fn backward(&self, output: NodeId, scale: f64, grads: &mut Gradients) {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar output");
        let mut g: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        g[output] = Some(Mat::from_vec(1, 1, vec![scale]));
        for id in (0..=output).rev() {
            let Some(dy) = g[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Param(p) => grads.tensor_mut(*p).add_assign(&dy),
                Op::Input => {}
                Op::MatMul(a, b) => {
                    let da = dy.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&dy);
                    accumulate(&mut g[*a], da);
                    accumulate(&mut g[*b], db);
                }
                Op::MatMulBt(a, b) => {
                    let da = dy.matmul(self.value(*b));
                    let db = dy.matmul_at(self.value(*a));
                    accumulate(&mut g[*a], da);
                    accumulate(&mut g[*b], db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g[*b], dy.clone());
                    accumulate(&mut g[*a], dy);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Mat::zeros(1, dy.cols);
                    for i in 0..dy.rows {
                        for (s, v) in dr.data.iter_mut().zip(dy.row(i)) {
                            *s += v;
                        }
                    }
                    accumulate(&mut g[*row], dr);
                    accumulate(&mut g[*a], dy);
                }
                Op::Mul(a, b) => {
                    let da = dy.zip_map(self.value(*b), |d, y| d * y);
                    let db = dy.zip_map(self.value(*a), |d, x| d * x);
                    accumulate(&mut g[*a], da);
                    accumulate(&mut g[*b], db);
                }
                Op::Scale(a, s) => accumulate(&mut g[*a], dy.map(|d| d * s)),
                Op::Sigmoid(a) => {
                    let y = self.value(id);
                    accumulate(&mut g[*a], dy.zip_map(y, |d, y| d * y * (1.0 - y)));
                }
                Op::Tanh(a) => {
                    let y = self.value(id);
                    accumulate(&mut g[*a], dy.zip_map(y, |d, y| d * (1.0 - y * y)));
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    accumulate(&mut g[*a], dy.zip_map(x, |d, x| d * gelu_grad(x)));
                }
                Op::SoftmaxRows(a) => {
                    let y = self.value(id);
                    let mut dx = Mat::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let (yr, dr) = (y.row(i), dy.row(i));
                        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        for (o, (yv, dv)) in dx.row_mut(i).iter_mut().zip(yr.iter().zip(dr)) {
                            *o = yv * (dv - dot);
                        }
                    }
                    accumulate(&mut g[*a], dx);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gv = self.value(*gamma);
                    let n = xhat.cols as f64;
                    let mut dgamma = Mat::zeros(1, xhat.cols);
                    let mut dbeta = Mat::zeros(1, xhat.cols);
                    let mut dx = Mat::zeros(xhat.rows, xhat.cols);
                    for i in 0..xhat.rows {
                        let (h, d) = (xhat.row(i), dy.row(i));
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..xhat.cols {
                            dgamma.data[j] += d[j] * h[j];
                            dbeta.data[j] += d[j];
                            let dh = d[j] * gv.data[j];
                            sum_dh += dh;
                            sum_dh_h += dh * h[j];
                        }
                        let out = dx.row_mut(i);
                        for j in 0..xhat.cols {
                            let dh = d[j] * gv.data[j];
                            out[j] = inv_std[i] / n * (n * dh - sum_dh - h[j] * sum_dh_h);
                        }
                    }
                    accumulate(&mut g[*gamma], dgamma);
                    accumulate(&mut g[*beta], dbeta);
                    accumulate(&mut g[*x], dx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut dp = Mat::zeros(dy.rows, cols);
                        for i in 0..dy.rows {
                            dp.row_mut(i).copy_from_slice(&dy.row(i)[off..off + cols]);
                        }
                        off += cols;
                        accumulate(&mut g[p], dp);
                    }
                }
                Op::SliceCols { x, start } => {
                    let xv = self.value(*x);
                    let slot = g[*x].get_or_insert_with(|| Mat::zeros(xv.rows, xv.cols));
                    for i in 0..dy.rows {
                        for (o, v) in slot.row_mut(i)[*start..*start + dy.cols].iter_mut().zip(dy.row(i)) {
                            *o += v;
                        }
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let rows = self.value(p).rows;
                        let dp = Mat::from_vec(rows, dy.cols, dy.data[off * dy.cols..(off + rows) * dy.cols].to_vec());
                        off += rows;
                        accumulate(&mut g[p], dp);
                    }
                }
                Op::SliceRow { x, row } => {
                    let xv = self.value(*x);
                    let slot = g[*x].get_or_insert_with(|| Mat::zeros(xv.rows, xv.cols));
                    for (o, v) in slot.row_mut(*row).iter_mut().zip(&dy.data) {
                        *o += v;
                    }
                }
                Op::Gather { table, ids } => {
                    let t = grads.tensor_mut(*table);
                    for (i, &r) in ids.iter().enumerate() {
                        for (o, v) in t.row_mut(r).iter_mut().zip(dy.row(i)) {
                            *o += v;
                        }
                    }
                }
                Op::BceSum { a, labels } => {
                    let d = dy.data[0];
                    let av = self.value(*a);
                    let da = Mat::from_vec(
                        av.rows,
                        av.cols,
                        av.data
                            .iter()
                            .zip(labels)
                            .map(|(&a, &y)| {
                                let neg = if 1.0 - a > LOG_CLAMP { (1.0 - y) / (1.0 - a) } else { 0.0 };
                                let pos = if a > LOG_CLAMP { y / a } else { 0.0 };
                                d * (neg - pos)
                            })
                            .collect(),
                    );
                    accumulate(&mut g[*a], da);
                }
            }
        }
    }
}
