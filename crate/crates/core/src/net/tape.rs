//! A small reverse-mode differentiation tape over dense vectors.
//!
//! Nodes hold vector values; matrix parameters only appear as the weight of
//! a `linear` node and are read from [`PolicyParams`] during both passes.

use super::params::{Gradients, ParamId, PolicyParams};

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear {
        w: ParamId,
        b: Option<ParamId>,
        x: NodeId,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat(Vec<NodeId>),
    Slice {
        x: NodeId,
        start: usize,
    },
    Dot(NodeId, NodeId),
    Scale(NodeId, f64),
    Softmax(NodeId),
    WeightedSum {
        weights: NodeId,
        items: Vec<NodeId>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
    scope: &'static str,
    needs_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    scope: &'static str,
}

/// `out = W x (+ b)` for a row-major `rows x cols` matrix.
pub(crate) fn matvec(w: &[f64], cols: usize, x: &[f64], b: Option<&[f64]>, out: &mut Vec<f64>) {
    debug_assert_eq!(x.len(), cols);
    out.clear();
    out.extend(
        w.chunks_exact(cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()),
    );
    if let Some(b) = b {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += bi;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Labels subsequently created nodes for diagnostics.
    pub fn set_scope(&mut self, scope: &'static str) {
        self.scope = scope;
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    /// First node at or after `from` holding a non-finite value, with its
    /// scope label.
    pub fn first_non_finite(&self, from: NodeId) -> Option<(NodeId, &'static str)> {
        self.nodes[from..]
            .iter()
            .enumerate()
            .find(|(_, n)| n.value.iter().any(|v| !v.is_finite()))
            .map(|(i, n)| (from + i, n.scope))
    }

    fn push(&mut self, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            scope: self.scope,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    fn grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// A vector-valued parameter used directly (e.g. log standard deviations).
    pub fn param(&mut self, params: &PolicyParams, p: ParamId) -> NodeId {
        self.push(params.tensor(p).data.clone(), Op::Param(p), true)
    }

    pub fn linear(
        &mut self,
        params: &PolicyParams,
        w: ParamId,
        b: Option<ParamId>,
        x: NodeId,
    ) -> NodeId {
        let wt = params.tensor(w);
        let cols = wt.shape[1];
        let mut out = Vec::with_capacity(wt.shape[0]);
        matvec(
            &wt.data,
            cols,
            &self.nodes[x].value,
            b.map(|b| params.tensor(b).data.as_slice()),
            &mut out,
        );
        self.push(out, Op::Linear { w, b, x }, true)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "elementwise op on mismatched lengths");
        let v = va.iter().zip(vb).map(|(x, y)| f(*x, *y)).collect();
        let g = self.grad(&[a, b]);
        self.push(v, op, g)
    }

    fn map(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let v = self.nodes[a].value.iter().map(|x| f(*x)).collect();
        let g = self.grad(&[a]);
        self.push(v, op, g)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::with_capacity(parts.iter().map(|&p| self.nodes[p].value.len()).sum());
        for &p in parts {
            v.extend_from_slice(&self.nodes[p].value);
        }
        let g = self.grad(parts);
        self.push(v, Op::Concat(parts.to_vec()), g)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[x].value[start..start + len].to_vec();
        let g = self.grad(&[x]);
        self.push(v, Op::Slice { x, start }, g)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "dot of mismatched lengths");
        let v = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let g = self.grad(&[a, b]);
        self.push(vec![v], Op::Dot(a, b), g)
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut v: Vec<f64> = x.iter().map(|xi| (xi - max).exp()).collect();
        let sum: f64 = v.iter().sum();
        for vi in &mut v {
            *vi /= sum;
        }
        let g = self.grad(&[a]);
        self.push(v, Op::Softmax(a), g)
    }

    /// `sum_k weights[k] * items[k]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> NodeId {
        let w = &self.nodes[weights].value;
        assert_eq!(w.len(), items.len(), "weighted_sum weight count");
        let dim = self.nodes[items[0]].value.len();
        let mut v = vec![0.0; dim];
        for (wk, &item) in w.iter().zip(items) {
            for (o, x) in v.iter_mut().zip(&self.nodes[item].value) {
                *o += wk * x;
            }
        }
        let g = self.grad(&[weights]) || self.grad(items);
        self.push(
            v,
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            g,
        )
    }

    /// Back-propagates the output gradients `seeds` and accumulates
    /// parameter gradients into `grads`.
    pub fn backward(
        &self,
        params: &PolicyParams,
        seeds: &[(NodeId, Vec<f64>)],
        grads: &mut Gradients,
    ) {
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            accumulate(&mut adj, &self.nodes, *id, |a| {
                for (ai, gi) in a.iter_mut().zip(g) {
                    *ai += gi;
                }
            });
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let nodes = &self.nodes;
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (a, gi) in grads.tensors[*p].iter_mut().zip(&g) {
                        *a += gi;
                    }
                }
                Op::Linear { w, b, x } => {
                    let wt = params.tensor(*w);
                    let cols = wt.shape[1];
                    let xv = &nodes[*x].value;
                    let gw = &mut grads.tensors[*w];
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for (a, xc) in gw[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                            *a += gr * xc;
                        }
                    }
                    if let Some(b) = b {
                        for (a, gi) in grads.tensors[*b].iter_mut().zip(&g) {
                            *a += gi;
                        }
                    }
                    accumulate(&mut adj, nodes, *x, |a| {
                        for (row, gr) in wt.data.chunks_exact(cols).zip(&g) {
                            for (ac, wc) in a.iter_mut().zip(row) {
                                *ac += wc * gr;
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, nodes, *a, |acc| add_into(acc, &g));
                    accumulate(&mut adj, nodes, *b, |acc| add_into(acc, &g));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, nodes, *a, |acc| add_into(acc, &g));
                    accumulate(&mut adj, nodes, *b, |acc| {
                        for (x, gi) in acc.iter_mut().zip(&g) {
                            *x -= gi;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for ((x, gi), y) in acc.iter_mut().zip(&g).zip(vb) {
                            *x += gi * y;
                        }
                    });
                    accumulate(&mut adj, nodes, *b, |acc| {
                        for ((x, gi), y) in acc.iter_mut().zip(&g).zip(va) {
                            *x += gi * y;
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for ((x, gi), yi) in acc.iter_mut().zip(&g).zip(y) {
                            *x += gi * (1.0 - yi * yi);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for ((x, gi), yi) in acc.iter_mut().zip(&g).zip(y) {
                            *x += gi * yi * (1.0 - yi);
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p].value.len();
                        accumulate(&mut adj, nodes, p, |acc| {
                            add_into(acc, &g[offset..offset + len])
                        });
                        offset += len;
                    }
                }
                Op::Slice { x, start } => {
                    let start = *start;
                    accumulate(&mut adj, nodes, *x, |acc| {
                        add_into(&mut acc[start..start + g.len()], &g)
                    });
                }
                Op::Dot(a, b) => {
                    let g0 = g[0];
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for (x, y) in acc.iter_mut().zip(vb) {
                            *x += g0 * y;
                        }
                    });
                    accumulate(&mut adj, nodes, *b, |acc| {
                        for (x, y) in acc.iter_mut().zip(va) {
                            *x += g0 * y;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for (x, gi) in acc.iter_mut().zip(&g) {
                            *x += c * gi;
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let gy: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    accumulate(&mut adj, nodes, *a, |acc| {
                        for ((x, gi), yi) in acc.iter_mut().zip(&g).zip(y) {
                            *x += yi * (gi - gy);
                        }
                    });
                }
                Op::WeightedSum { weights, items } => {
                    let w = &nodes[*weights].value;
                    accumulate(&mut adj, nodes, *weights, |acc| {
                        for (k, &item) in items.iter().enumerate() {
                            acc[k] += g
                                .iter()
                                .zip(&nodes[item].value)
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        }
                    });
                    for (k, &item) in items.iter().enumerate() {
                        let wk = w[k];
                        accumulate(&mut adj, nodes, item, |acc| {
                            for (x, gi) in acc.iter_mut().zip(&g) {
                                *x += wk * gi;
                            }
                        });
                    }
                }
            }
        }
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, gi) in acc.iter_mut().zip(g) {
        *a += gi;
    }
}

fn accumulate(
    adj: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    id: NodeId,
    f: impl FnOnce(&mut [f64]),
) {
    if !nodes[id].needs_grad {
        return;
    }
    let slot = adj[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()]);
    f(slot);
}
