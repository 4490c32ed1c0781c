//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A `Tape` borrows a `ParamStore` immutably, so many tapes can run in
//! parallel against the same parameters; gradients come back as
//! `ParamGrads` and are reduced by the caller.

use std::collections::HashMap;

use super::matrix::{gemm, Matrix, ShapeError};
use super::params::{ParamGrads, ParamId, ParamStore};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    Gather { table: Var, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulBT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    SoftmaxRows(Var),
    SoftmaxCols(Var),
    NormRows(Var),
    Gelu(Var),
    Tanh(Var),
    ConcatCols(Var, Var),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    MeanRows(Var),
    RepeatRows(Var),
    SumAll(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Matrix },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    grad: bool,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

fn gelu(x: f64) -> f64 {
    const K: f64 = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (K * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const K: f64 = 0.797_884_560_802_865_4;
    let t = (K * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * K * (1.0 + 3.0 * 0.044715 * x * x)
}

fn col_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for r in 0..m.rows() {
        for (o, x) in out.data_mut().iter_mut().zip(m.row(r)) {
            *o += x;
        }
    }
    out
}

fn broadcast_row(a: &Matrix, row: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let mut out = a.clone();
    for r in 0..a.rows() {
        for (o, x) in out.row_mut(r).iter_mut().zip(row.data()) {
            *o = f(*o, *x);
        }
    }
    out
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape { store, nodes: Vec::new(), param_vars: HashMap::new() }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    fn push(&mut self, value: Matrix, op: Op, grad: bool) -> Var {
        self.nodes.push(Node { value, op, grad });
        Var(self.nodes.len() - 1)
    }

    fn g(&self, v: Var) -> bool {
        self.nodes[v.0].grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.get(0, 0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, false)
    }

    /// A leaf whose gradient is reported by `backward`.
    pub fn variable(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(&id) {
            return *v;
        }
        let v = self.push(self.store.value(id).clone(), Op::Param, true);
        self.param_vars.insert(id, v);
        v
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, ShapeError> {
        let t = self.value(table);
        if let Some(bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(ShapeError::invalid("gather", format!("row {bad} out of {}", t.rows())));
        }
        let mut out = Matrix::zeros(ids.len(), t.cols());
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(i));
        }
        let g = self.g(table);
        Ok(self.push(out, Op::Gather { table, ids: ids.to_vec() }, g))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let out = self.value(a).matmul(self.value(b))?;
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.cols() != bm.cols() {
            return Err(ShapeError::mismatch("matmul_bt", am, bm));
        }
        let mut out = Matrix::zeros(am.rows(), bm.rows());
        gemm(am.rows(), am.cols(), bm.rows(), am.data(), false, bm.data(), true, 0.0, out.data_mut());
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::MatMulBT(a, b), g))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let g = self.g(a);
        self.push(out, Op::Transpose(a), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let out = self.value(a).add(self.value(b))?;
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::Add(a, b), g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.shape() != bm.shape() {
            return Err(ShapeError::mismatch("sub", am, bm));
        }
        let out = am.zip_map(bm, |x, y| x - y);
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::Sub(a, b), g))
    }

    fn check_row(&self, op: &'static str, a: Var, row: Var) -> Result<(), ShapeError> {
        let (am, rm) = (self.value(a), self.value(row));
        if rm.rows() != 1 || rm.cols() != am.cols() {
            return Err(ShapeError::mismatch(op, am, rm));
        }
        Ok(())
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, ShapeError> {
        self.check_row("add_row", a, row)?;
        let out = broadcast_row(self.value(a), self.value(row), |x, y| x + y);
        let g = self.g(a) || self.g(row);
        Ok(self.push(out, Op::AddRow(a, row), g))
    }

    /// Multiplies every row of `a` elementwise by a `1 x c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var, ShapeError> {
        self.check_row("mul_row", a, row)?;
        let out = broadcast_row(self.value(a), self.value(row), |x, y| x * y);
        let g = self.g(a) || self.g(row);
        Ok(self.push(out, Op::MulRow(a, row), g))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.shape() != bm.shape() {
            return Err(ShapeError::mismatch("mul", am, bm));
        }
        let out = am.zip_map(bm, |x, y| x * y);
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::Mul(a, b), g))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let g = self.g(a);
        self.push(out, Op::Scale(a, s), g)
    }

    /// Adds a fixed matrix (e.g. an attention mask).
    pub fn add_const(&mut self, a: Var, c: &Matrix) -> Result<Var, ShapeError> {
        let out = self.value(a).add(c)?;
        let g = self.g(a);
        Ok(self.push(out, Op::AddConst(a), g))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_rows();
        let g = self.g(a);
        self.push(out, Op::SoftmaxRows(a), g)
    }

    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_columns();
        let g = self.g(a);
        self.push(out, Op::SoftmaxCols(a), g)
    }

    /// Standardises each row to zero mean and unit variance.
    pub fn norm_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        let c = out.cols() as f64;
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let mean = row.iter().sum::<f64>() / c;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.iter_mut().for_each(|x| *x = (*x - mean) * inv);
        }
        let g = self.g(a);
        self.push(out, Op::NormRows(a), g)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(gelu);
        let g = self.g(a);
        self.push(out, Op::Gelu(a), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let g = self.g(a);
        self.push(out, Op::Tanh(a), g)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.rows() != bm.rows() {
            return Err(ShapeError::mismatch("concat_cols", am, bm));
        }
        let cols = am.cols() + bm.cols();
        let out = Matrix::from_fn(am.rows(), cols, |r, c| if c < am.cols() { am.get(r, c) } else { bm.get(r, c - am.cols()) });
        let g = self.g(a) || self.g(b);
        Ok(self.push(out, Op::ConcatCols(a, b), g))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        let mats: Vec<&Matrix> = parts.iter().map(|v| self.value(*v)).collect();
        let out = Matrix::vstack(&mats)?;
        let g = parts.iter().any(|v| self.g(*v));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), g))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, ShapeError> {
        let am = self.value(a);
        if start + len > am.rows() {
            return Err(ShapeError::invalid("slice_rows", format!("{start}+{len} exceeds {} rows", am.rows())));
        }
        let out = am.slice_rows(start, len);
        let g = self.g(a);
        Ok(self.push(out, Op::SliceRows(a, start), g))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).mean_rows();
        let g = self.g(a);
        self.push(out, Op::MeanRows(a), g)
    }

    /// Tiles a single row `n` times.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var, ShapeError> {
        let am = self.value(a);
        if am.rows() != 1 {
            return Err(ShapeError::invalid("repeat_rows", format!("expected one row, got {}", am.rows())));
        }
        let out = Matrix::from_fn(n, am.cols(), |_, c| am.get(0, c));
        let g = self.g(a);
        Ok(self.push(out, Op::RepeatRows(a), g))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        let g = self.g(a);
        self.push(out, Op::SumAll(a), g)
    }

    /// Mean negative log-likelihood of `targets` under row-softmaxed `logits`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, ShapeError> {
        let lm = self.value(logits);
        if lm.rows() != targets.len() || lm.rows() == 0 {
            return Err(ShapeError::invalid("cross_entropy", format!("{} rows, {} targets", lm.rows(), targets.len())));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= lm.cols()) {
            return Err(ShapeError::invalid("cross_entropy", format!("class {t} out of {}", lm.cols())));
        }
        let probs = lm.softmax_rows();
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lm.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
        }
        loss /= targets.len() as f64;
        let g = self.g(logits);
        Ok(self.push(Matrix::filled(1, 1, loss), Op::CrossEntropy { logits, targets: targets.to_vec(), probs }, g))
    }

    /// Reverse pass from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Grads {
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=output.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.grad {
                continue;
            }
            self.propagate(i, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        Grads { nodes: grads, params: self.param_vars.iter().map(|(p, v)| (*p, *v)).collect(), n_params: self.store.len() }
    }

    fn propagate(&self, i: usize, dy: &Matrix, grads: &mut [Option<Matrix>]) {
        let nodes = &self.nodes;
        let want = |v: Var| nodes[v.0].grad;
        let mut acc = |v: Var, g: Matrix| {
            if !nodes[v.0].grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        };
        let y = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf | Op::Param => {}
            Op::Gather { table, ids } => {
                let t = &nodes[table.0].value;
                let mut g = Matrix::zeros(t.rows(), t.cols());
                for (r, &id) in ids.iter().enumerate() {
                    for (o, x) in g.row_mut(id).iter_mut().zip(dy.row(r)) {
                        *o += x;
                    }
                }
                acc(*table, g);
            }
            Op::MatMul(a, b) => {
                let (am, bm) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (am.rows(), am.cols(), bm.cols());
                if want(*a) {
                    let mut g = Matrix::zeros(m, k);
                    gemm(m, n, k, dy.data(), false, bm.data(), true, 0.0, g.data_mut());
                    acc(*a, g);
                }
                if want(*b) {
                    let mut g = Matrix::zeros(k, n);
                    gemm(k, m, n, am.data(), true, dy.data(), false, 0.0, g.data_mut());
                    acc(*b, g);
                }
            }
            Op::MatMulBT(a, b) => {
                let (am, bm) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (am.rows(), am.cols(), bm.rows());
                if want(*a) {
                    let mut g = Matrix::zeros(m, k);
                    gemm(m, n, k, dy.data(), false, bm.data(), false, 0.0, g.data_mut());
                    acc(*a, g);
                }
                if want(*b) {
                    let mut g = Matrix::zeros(n, k);
                    gemm(n, m, k, dy.data(), true, am.data(), false, 0.0, g.data_mut());
                    acc(*b, g);
                }
            }
            Op::Transpose(a) => acc(*a, dy.transpose()),
            Op::Add(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.scale(-1.0));
            }
            Op::AddRow(a, row) => {
                acc(*a, dy.clone());
                if want(*row) {
                    acc(*row, col_sums(dy));
                }
            }
            Op::MulRow(a, row) => {
                let (am, rm) = (&nodes[a.0].value, &nodes[row.0].value);
                if want(*a) {
                    acc(*a, broadcast_row(dy, rm, |x, y| x * y));
                }
                if want(*row) {
                    acc(*row, col_sums(&dy.zip_map(am, |x, y| x * y)));
                }
            }
            Op::Mul(a, b) => {
                let (am, bm) = (&nodes[a.0].value, &nodes[b.0].value);
                if want(*a) {
                    acc(*a, dy.zip_map(bm, |x, y| x * y));
                }
                if want(*b) {
                    acc(*b, dy.zip_map(am, |x, y| x * y));
                }
            }
            Op::Scale(a, s) => acc(*a, dy.scale(*s)),
            Op::AddConst(a) => acc(*a, dy.clone()),
            Op::SoftmaxRows(a) => {
                let mut g = dy.clone();
                for r in 0..y.rows() {
                    let dot: f64 = dy.row(r).iter().zip(y.row(r)).map(|(d, p)| d * p).sum();
                    for (o, p) in g.row_mut(r).iter_mut().zip(y.row(r)) {
                        *o = p * (*o - dot);
                    }
                }
                acc(*a, g);
            }
            Op::SoftmaxCols(a) => {
                let mut g = dy.clone();
                for c in 0..y.cols() {
                    let dot: f64 = (0..y.rows()).map(|r| dy.get(r, c) * y.get(r, c)).sum();
                    for r in 0..y.rows() {
                        g.set(r, c, y.get(r, c) * (dy.get(r, c) - dot));
                    }
                }
                acc(*a, g);
            }
            Op::NormRows(a) => {
                let x = &nodes[a.0].value;
                let c = x.cols() as f64;
                let mut g = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let row = x.row(r);
                    let mean = row.iter().sum::<f64>() / c;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    let (dyr, yr) = (dy.row(r), y.row(r));
                    let mean_dy = dyr.iter().sum::<f64>() / c;
                    let mean_dyy = dyr.iter().zip(yr).map(|(d, v)| d * v).sum::<f64>() / c;
                    for ((o, d), v) in g.row_mut(r).iter_mut().zip(dyr).zip(yr) {
                        *o = inv * (d - mean_dy - v * mean_dyy);
                    }
                }
                acc(*a, g);
            }
            Op::Gelu(a) => {
                let x = &nodes[a.0].value;
                acc(*a, dy.zip_map(x, |d, v| d * gelu_grad(v)));
            }
            Op::Tanh(a) => acc(*a, dy.zip_map(y, |d, t| d * (1.0 - t * t))),
            Op::ConcatCols(a, b) => {
                let ac = nodes[a.0].value.cols();
                let bc = nodes[b.0].value.cols();
                if want(*a) {
                    acc(*a, Matrix::from_fn(dy.rows(), ac, |r, c| dy.get(r, c)));
                }
                if want(*b) {
                    acc(*b, Matrix::from_fn(dy.rows(), bc, |r, c| dy.get(r, ac + c)));
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let rows = nodes[p.0].value.rows();
                    if want(*p) {
                        acc(*p, dy.slice_rows(start, rows));
                    }
                    start += rows;
                }
            }
            Op::SliceRows(a, start) => {
                let x = &nodes[a.0].value;
                let mut g = Matrix::zeros(x.rows(), x.cols());
                let c = x.cols();
                g.data_mut()[start * c..start * c + dy.data().len()].copy_from_slice(dy.data());
                acc(*a, g);
            }
            Op::MeanRows(a) => {
                let x = &nodes[a.0].value;
                let s = 1.0 / x.rows().max(1) as f64;
                acc(*a, Matrix::from_fn(x.rows(), x.cols(), |_, c| dy.get(0, c) * s));
            }
            Op::RepeatRows(a) => acc(*a, col_sums(dy)),
            Op::SumAll(a) => {
                let x = &nodes[a.0].value;
                acc(*a, Matrix::filled(x.rows(), x.cols(), dy.get(0, 0)));
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let s = dy.get(0, 0) / targets.len() as f64;
                let mut g = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let row = g.row_mut(r);
                    row[t] -= 1.0;
                    row.iter_mut().for_each(|x| *x *= s);
                }
                acc(*logits, g);
            }
        }
    }
}

/// Result of a reverse pass.
pub struct Grads {
    nodes: Vec<Option<Matrix>>,
    params: Vec<(ParamId, Var)>,
    n_params: usize,
}

impl Grads {
    /// Gradient with respect to any node, if it was reached.
    pub fn of(&self, v: Var) -> Option<&Matrix> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    pub fn into_param_grads(mut self) -> ParamGrads {
        let mut out = ParamGrads::empty(self.n_params);
        for (p, v) in &self.params {
            out.0[p.0] = self.nodes.get_mut(v.0).and_then(Option::take);
        }
        out
    }
}
