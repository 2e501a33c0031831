//! Minimal reverse-mode tensor engine over 2-D arrays.
//!
//! A [`Tape`] records the forward computation as a flat list of nodes;
//! [`Tape::backward`] walks it in reverse and accumulates exact gradients
//! into a [`GradBuffer`] indexed like the [`ParamSet`]. Parameter values
//! are referenced, not copied, so taping a forward pass is cheap.
//! Gradients accumulate additively across backward calls until the
//! buffer is zeroed.

use ndarray::{s, Array2, Axis};

use crate::num::{erf, Real};
use crate::{Error, Result};

/// Named parameter storage; a model owns one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T: Real> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), values: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, idx: usize) -> &Array2<T> {
        &self.values[idx]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Array2<T> {
        &mut self.values[idx]
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<T>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.values.iter())
    }
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient accumulator shaped like a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct GradBuffer<T: Real> {
    grads: Vec<Array2<T>>,
}

impl<T: Real> GradBuffer<T> {
    pub fn zeros_like(params: &ParamSet<T>) -> Self {
        GradBuffer {
            grads: (0..params.len())
                .map(|i| Array2::zeros(params.value(i).dim()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in self.grads.iter_mut() {
            g.fill(T::zero());
        }
    }

    pub fn get(&self, idx: usize) -> &Array2<T> {
        &self.grads[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Array2<T> {
        &mut self.grads[idx]
    }

    pub fn add_from(&mut self, other: &GradBuffer<T>) {
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: T) {
        for g in self.grads.iter_mut() {
            g.mapv_inplace(|v| v * k);
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Value<T: Real> {
    Owned(Array2<T>),
    Param(usize),
}

enum Op<T: Real> {
    Leaf,
    MatMul(Var, Var),
    /// a (n,k) x b^T with b (m,k) -> (n,m)
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRowVec(Var, Var),
    MulRowVec(Var, Var),
    MulElem(Var, Var),
    Scale(Var, T),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNormRows(Var),
    FlattenRow(Var),
    ConcatCols(Vec<Var>),
    /// mean absolute error against a constant target row
    MaeConst(Var, Array2<T>),
    WeightedSum(Vec<Var>, Vec<T>),
}

struct Node<T: Real> {
    value: Value<T>,
    grad: Option<Array2<T>>,
    op: Op<T>,
}

const LN_EPS: f64 = 1e-6;

/// Records one forward computation over borrowed parameters.
pub struct Tape<'p, T: Real> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        match &self.nodes[v.0].value {
            Value::Owned(a) => a,
            Value::Param(i) => self.params.value(*i),
        }
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[(0, 0)]
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), grad: None, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, idx: usize) -> Var {
        self.nodes.push(Node { value: Value::Param(idx), grad: None, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Broadcast-add a (1,m) row vector to every row of a.
    pub fn add_row_vec(&mut self, a: Var, row: Var) -> Var {
        let mut v = self.value(a).clone();
        let r = self.value(row);
        for mut vr in v.axis_iter_mut(Axis(0)) {
            vr += &r.row(0);
        }
        self.push(v, Op::AddRowVec(a, row))
    }

    /// Broadcast-multiply every row of a by a (1,m) row vector.
    pub fn mul_row_vec(&mut self, a: Var, row: Var) -> Var {
        let mut v = self.value(a).clone();
        let r = self.value(row);
        for mut vr in v.axis_iter_mut(Axis(0)) {
            vr *= &r.row(0);
        }
        self.push(v, Op::MulRowVec(a, row))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MulElem(a, b))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let v = self.value(a).mapv(|x| x * k);
        self.push(v, Op::Scale(a, k))
    }

    /// Exact GELU: `x * Phi(x)` with the Gaussian CDF via erf.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * gelu_cdf(x));
        self.push(v, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let mx = row.iter().cloned().fold(T::neg_infinity(), T::max);
            row.mapv_inplace(|x| (x - mx).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Row-wise standardization (zero mean, unit variance, eps-guarded),
    /// without affine terms.
    pub fn layer_norm_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.ncols();
        let mf = T::from_f64c(m as f64);
        let eps = T::from_f64c(LN_EPS);
        let mut v = x.clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let mean = row.sum() / mf;
            let var = row.iter().fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean)) / mf;
            let inv = T::one() / (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) * inv);
        }
        self.push(v, Op::LayerNormRows(a))
    }

    pub fn flatten_row(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Array2::from_shape_vec((1, x.len()), x.iter().cloned().collect())
            .expect("contiguous flatten");
        self.push(v, Op::FlattenRow(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = Array2::zeros((rows, total));
        let mut at = 0;
        for &p in parts {
            let x = self.value(p);
            v.slice_mut(s![.., at..at + x.ncols()]).assign(x);
            at += x.ncols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// `(1/k) sum |x_i - t_i|` with zero subgradient at zero.
    pub fn mae_const(&mut self, a: Var, target: &[T]) -> Var {
        let x = self.value(a);
        assert_eq!(x.len(), target.len(), "mae: length mismatch");
        let k = T::from_f64c(target.len() as f64);
        let mut acc = T::zero();
        for (xv, tv) in x.iter().zip(target.iter()) {
            acc += (*xv - *tv).abs();
        }
        let t = Array2::from_shape_vec((1, target.len()), target.to_vec()).expect("target row");
        self.push(Array2::from_elem((1, 1), acc / k), Op::MaeConst(a, t))
    }

    pub fn weighted_sum(&mut self, parts: &[Var], weights: &[T]) -> Var {
        assert_eq!(parts.len(), weights.len());
        let mut acc = T::zero();
        for (&p, &w) in parts.iter().zip(weights.iter()) {
            acc += self.scalar(p) * w;
        }
        self.push(Array2::from_elem((1, 1), acc), Op::WeightedSum(parts.to_vec(), weights.to_vec()))
    }

    pub fn is_finite(&self, v: Var) -> bool {
        self.value(v).iter().all(|x| x.is_finite())
    }

    fn accumulate(&mut self, v: Var, g: Array2<T>, grads: &mut GradBuffer<T>) {
        if let Value::Param(idx) = self.nodes[v.0].value {
            grads.grads[idx] += &g;
            return;
        }
        match &mut self.nodes[v.0].grad {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }

    /// Reverse pass from a scalar loss node. Parameter gradients add into
    /// `grads`; calling twice without zeroing doubles them.
    pub fn backward(&mut self, loss: Var, grads: &mut GradBuffer<T>) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidState("backward: loss must be scalar".into()));
        }
        self.nodes[loss.0].grad = Some(Array2::from_elem((1, 1), T::one()));
        for i in (0..self.nodes.len()).rev() {
            let g = match self.nodes[i].grad.take() {
                Some(g) => g,
                None => continue,
            };
            // (parent, contribution) pairs computed read-only, then applied
            let mut contrib: Vec<(Var, Array2<T>)> = Vec::new();
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    contrib.push((*a, g.dot(&self.value(*b).t())));
                    contrib.push((*b, self.value(*a).t().dot(&g)));
                }
                Op::MatMulNT(a, b) => {
                    contrib.push((*a, g.dot(self.value(*b))));
                    contrib.push((*b, g.t().dot(self.value(*a))));
                }
                Op::Add(a, b) => {
                    contrib.push((*a, g.clone()));
                    contrib.push((*b, g.clone()));
                }
                Op::AddRowVec(a, row) => {
                    contrib.push((*a, g.clone()));
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    contrib.push((*row, gr));
                }
                Op::MulRowVec(a, row) => {
                    let r = self.value(*row);
                    let mut ga = g.clone();
                    for mut grow in ga.axis_iter_mut(Axis(0)) {
                        grow *= &r.row(0);
                    }
                    contrib.push((*a, ga));
                    let gr = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    contrib.push((*row, gr));
                }
                Op::MulElem(a, b) => {
                    contrib.push((*a, &g * self.value(*b)));
                    contrib.push((*b, &g * self.value(*a)));
                }
                Op::Scale(a, k) => {
                    contrib.push((*a, g.mapv(|x| x * *k)));
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut ga = g.clone();
                    ndarray::Zip::from(&mut ga).and(x).for_each(|gv, &xv| {
                        *gv *= gelu_cdf(xv) + xv * gauss_pdf(xv);
                    });
                    contrib.push((*a, ga));
                }
                Op::SoftmaxRows(a) => {
                    // uses this node's own output y
                    let y = match &self.nodes[i].value {
                        Value::Owned(v) => v,
                        Value::Param(_) => unreachable!("softmax output is owned"),
                    };
                    let mut ga = Array2::zeros(g.dim());
                    for r in 0..g.nrows() {
                        let dot = g
                            .row(r)
                            .iter()
                            .zip(y.row(r).iter())
                            .fold(T::zero(), |acc, (&gv, &yv)| acc + gv * yv);
                        for c in 0..g.ncols() {
                            ga[(r, c)] = y[(r, c)] * (g[(r, c)] - dot);
                        }
                    }
                    contrib.push((*a, ga));
                }
                Op::LayerNormRows(a) => {
                    let x = self.value(*a);
                    let m = x.ncols();
                    let mf = T::from_f64c(m as f64);
                    let eps = T::from_f64c(LN_EPS);
                    let mut ga = Array2::zeros(g.dim());
                    for r in 0..x.nrows() {
                        let row = x.row(r);
                        let mean = row.sum() / mf;
                        let var =
                            row.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean))
                                / mf;
                        let inv = T::one() / (var + eps).sqrt();
                        let gm = g.row(r).sum() / mf;
                        let mut gy = T::zero();
                        for c in 0..m {
                            let yv = (x[(r, c)] - mean) * inv;
                            gy += g[(r, c)] * yv;
                        }
                        gy /= mf;
                        for c in 0..m {
                            let yv = (x[(r, c)] - mean) * inv;
                            ga[(r, c)] = inv * (g[(r, c)] - gm - yv * gy);
                        }
                    }
                    contrib.push((*a, ga));
                }
                Op::FlattenRow(a) => {
                    let dim = self.value(*a).dim();
                    let ga = Array2::from_shape_vec(dim, g.iter().cloned().collect())
                        .expect("unflatten");
                    contrib.push((*a, ga));
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        contrib.push((p, g.slice(s![.., at..at + w]).to_owned()));
                        at += w;
                    }
                }
                Op::MaeConst(a, target) => {
                    let x = self.value(*a);
                    let k = T::from_f64c(target.len() as f64);
                    let gs = g[(0, 0)] / k;
                    let mut ga = Array2::zeros(x.dim());
                    ndarray::Zip::from(&mut ga).and(x).and(target).for_each(|gv, &xv, &tv| {
                        let d = xv - tv;
                        *gv = if d > T::zero() {
                            gs
                        } else if d < T::zero() {
                            -gs
                        } else {
                            T::zero()
                        };
                    });
                    contrib.push((*a, ga));
                }
                Op::WeightedSum(parts, weights) => {
                    let gs = g[(0, 0)];
                    for (&p, &w) in parts.iter().zip(weights.iter()) {
                        contrib.push((p, Array2::from_elem((1, 1), gs * w)));
                    }
                }
            }
            for (parent, pg) in contrib {
                self.accumulate(parent, pg, grads);
            }
        }
        Ok(())
    }
}

fn gelu_cdf<T: Real>(x: T) -> T {
    let half = T::from_f64c(0.5);
    half * (T::one() + erf(x / T::from_f64c(std::f64::consts::SQRT_2)))
}

fn gauss_pdf<T: Real>(x: T) -> T {
    let inv = T::from_f64c(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    inv * (-x * x / T::from_f64c(2.0)).exp()
}
