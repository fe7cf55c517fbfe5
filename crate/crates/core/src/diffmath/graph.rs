//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Var`] is an immutable node holding its forward value and a link to
//! the operation that produced it. Calling [`Var::backward`] walks the
//! graph reachable from the output once, in reverse topological order, and
//! sums gradient contributions at every node, so shared subexpressions
//! receive the total derivative.
//!
//! Graphs are kept alive by reference counting. A latent state carried from
//! one update to the next keeps its history reachable until it is
//! [`detach`](Var::detach)ed, which is how the training loop controls the
//! backpropagation window.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use super::tensor::{gemm, Tensor};

/// Index of a trainable tensor in a [`ParamStore`](super::nn::ParamStore).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

#[derive(Default)]
enum Op {
    #[default]
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    AddCol(Var, Var),
    MulCol(Var, Var),
    MatMul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    SumAll(Var),
    SumRows(Var),
    LogSumExpRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Rc<[usize]>),
    Reshape(Var),
}

impl Op {
    fn parents(&self) -> Vec<&Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | AddRow(a, b) | AddCol(a, b)
            | MulCol(a, b) | MatMul(a, b) => vec![a, b],
            Scale(a, _) | AddScalar(a) | Relu(a) | Tanh(a) | Sigmoid(a) | Softplus(a) | Exp(a)
            | Ln(a) | Square(a) | SumAll(a) | SumRows(a) | LogSumExpRows(a)
            | SliceCols(a, _) | GatherRows(a, _) | Reshape(a) => vec![a],
            ConcatCols(v) | ConcatRows(v) => v.iter().collect(),
        }
    }

    fn take_parents(&mut self) -> Vec<Var> {
        use Op::*;
        match std::mem::take(self) {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | AddRow(a, b) | AddCol(a, b)
            | MulCol(a, b) | MatMul(a, b) => vec![a, b],
            Scale(a, _) | AddScalar(a) | Relu(a) | Tanh(a) | Sigmoid(a) | Softplus(a) | Exp(a)
            | Ln(a) | Square(a) | SumAll(a) | SumRows(a) | LogSumExpRows(a)
            | SliceCols(a, _) | GatherRows(a, _) | Reshape(a) => vec![a],
            ConcatCols(v) | ConcatRows(v) => v,
        }
    }
}

struct Node {
    id: u64,
    value: Tensor,
    op: Op,
    param: Option<ParamId>,
}

impl Drop for Node {
    // Long recurrent chains would overflow the stack with the default
    // recursive drop.
    fn drop(&mut self) {
        let mut stack = self.op.take_parents();
        while let Some(var) = stack.pop() {
            if let Ok(mut node) = Rc::try_unwrap(var.0) {
                stack.extend(node.op.take_parents());
            }
        }
    }
}

/// A differentiable value.
#[derive(Clone)]
pub struct Var(Rc<Node>);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("value", &self.0.value)
            .finish()
    }
}

impl Var {
    fn from_op(value: Tensor, op: Op) -> Self {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            op,
            param: None,
        }))
    }

    /// A leaf with no gradient tag; gradients w.r.t. it are still reported.
    pub fn leaf(value: Tensor) -> Self {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            op: Op::Leaf,
            param: None,
        }))
    }

    /// A leaf bound to a trainable parameter.
    pub fn param(id: ParamId, value: Tensor) -> Self {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            op: Op::Leaf,
            param: Some(id),
        }))
    }

    pub fn scalar(v: f64) -> Self {
        Self::leaf(Tensor::scalar(v))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.value.shape()
    }

    pub fn rows(&self) -> usize {
        self.0.value.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.value.cols()
    }

    pub fn item(&self) -> f64 {
        self.0.value.item()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }

    pub fn param_id(&self) -> Option<ParamId> {
        self.0.param
    }

    /// Same value, no history.
    pub fn detach(&self) -> Self {
        Self::leaf(self.0.value.clone())
    }

    fn same_shape(&self, other: &Var, what: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{what}: shape mismatch {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
    }

    pub fn add(&self, other: &Var) -> Var {
        self.same_shape(other, "add");
        let v = self.value().zip_map(other.value(), |a, b| a + b);
        Var::from_op(v, Op::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Var) -> Var {
        self.same_shape(other, "sub");
        let v = self.value().zip_map(other.value(), |a, b| a - b);
        Var::from_op(v, Op::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Var) -> Var {
        self.same_shape(other, "mul");
        let v = self.value().zip_map(other.value(), |a, b| a * b);
        Var::from_op(v, Op::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Var) -> Var {
        self.same_shape(other, "div");
        let v = self.value().zip_map(other.value(), |a, b| a / b);
        Var::from_op(v, Op::Div(self.clone(), other.clone()))
    }

    /// `self (n×c) + row (1×c)` broadcast over rows.
    pub fn add_row(&self, row: &Var) -> Var {
        let (n, c) = self.shape();
        assert_eq!(row.shape(), (1, c), "add_row: {:?} + {:?}", self.shape(), row.shape());
        let r = row.value().data();
        let mut v = self.value().clone();
        for i in 0..n {
            for (x, b) in v.data_mut()[i * c..(i + 1) * c].iter_mut().zip(r) {
                *x += b;
            }
        }
        Var::from_op(v, Op::AddRow(self.clone(), row.clone()))
    }

    /// `self (n×c) + col (n×1)` broadcast over columns.
    pub fn add_col(&self, col: &Var) -> Var {
        let (n, c) = self.shape();
        assert_eq!(col.shape(), (n, 1), "add_col: {:?} + {:?}", self.shape(), col.shape());
        let mut v = self.value().clone();
        for i in 0..n {
            let b = col.value().data()[i];
            for x in &mut v.data_mut()[i * c..(i + 1) * c] {
                *x += b;
            }
        }
        Var::from_op(v, Op::AddCol(self.clone(), col.clone()))
    }

    /// `self (n×c) ⊙ col (n×1)` broadcast over columns.
    pub fn mul_col(&self, col: &Var) -> Var {
        let (n, c) = self.shape();
        assert_eq!(col.shape(), (n, 1), "mul_col: {:?} * {:?}", self.shape(), col.shape());
        let mut v = self.value().clone();
        for i in 0..n {
            let b = col.value().data()[i];
            for x in &mut v.data_mut()[i * c..(i + 1) * c] {
                *x *= b;
            }
        }
        Var::from_op(v, Op::MulCol(self.clone(), col.clone()))
    }

    pub fn matmul(&self, other: &Var) -> Var {
        let v = self
            .value()
            .matmul(other.value())
            .unwrap_or_else(|e| panic!("{e}"));
        Var::from_op(v, Op::MatMul(self.clone(), other.clone()))
    }

    pub fn scale(&self, s: f64) -> Var {
        Var::from_op(self.value().map(|x| x * s), Op::Scale(self.clone(), s))
    }

    pub fn neg(&self) -> Var {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, s: f64) -> Var {
        Var::from_op(self.value().map(|x| x + s), Op::AddScalar(self.clone()))
    }

    pub fn relu(&self) -> Var {
        Var::from_op(self.value().map(|x| x.max(0.0)), Op::Relu(self.clone()))
    }

    pub fn tanh(&self) -> Var {
        Var::from_op(self.value().map(f64::tanh), Op::Tanh(self.clone()))
    }

    pub fn sigmoid(&self) -> Var {
        Var::from_op(self.value().map(sigmoid), Op::Sigmoid(self.clone()))
    }

    /// `ln(1 + eˣ)`, evaluated without overflow.
    pub fn softplus(&self) -> Var {
        Var::from_op(self.value().map(softplus), Op::Softplus(self.clone()))
    }

    pub fn exp(&self) -> Var {
        Var::from_op(self.value().map(f64::exp), Op::Exp(self.clone()))
    }

    pub fn ln(&self) -> Var {
        Var::from_op(self.value().map(f64::ln), Op::Ln(self.clone()))
    }

    pub fn square(&self) -> Var {
        Var::from_op(self.value().map(|x| x * x), Op::Square(self.clone()))
    }

    pub fn sum(&self) -> Var {
        Var::from_op(Tensor::scalar(self.value().sum()), Op::SumAll(self.clone()))
    }

    pub fn mean(&self) -> Var {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Per-row sum: `n×c → n×1`.
    pub fn sum_rows(&self) -> Var {
        let (n, _) = self.shape();
        let data = (0..n).map(|i| self.value().row_slice(i).iter().sum()).collect();
        let v = Tensor::new(n, 1, data).expect("sum_rows shape");
        Var::from_op(v, Op::SumRows(self.clone()))
    }

    /// Per-row log-sum-exp with max subtraction: `n×c → n×1`.
    pub fn logsumexp_rows(&self) -> Var {
        let (n, _) = self.shape();
        let data = (0..n)
            .map(|i| log_sum_exp(self.value().row_slice(i)))
            .collect();
        let v = Tensor::new(n, 1, data).expect("logsumexp shape");
        Var::from_op(v, Op::LogSumExpRows(self.clone()))
    }

    pub fn concat_cols(parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let n = parts[0].rows();
        let total: usize = parts.iter().map(Var::cols).sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for p in parts {
                assert_eq!(p.rows(), n, "concat_cols: row count mismatch");
                data.extend_from_slice(p.value().row_slice(i));
            }
        }
        let v = Tensor::new(n, total, data).expect("concat_cols shape");
        Var::from_op(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let c = parts[0].cols();
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            assert_eq!(p.cols(), c, "concat_rows: column count mismatch");
            data.extend_from_slice(p.value().data());
            n += p.rows();
        }
        let v = Tensor::new(n, c, data).expect("concat_rows shape");
        Var::from_op(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Var {
        let (n, c) = self.shape();
        assert!(start + len <= c, "slice_cols {start}+{len} of {c}");
        let mut data = Vec::with_capacity(n * len);
        for i in 0..n {
            data.extend_from_slice(&self.value().row_slice(i)[start..start + len]);
        }
        let v = Tensor::new(n, len, data).expect("slice shape");
        Var::from_op(v, Op::SliceCols(self.clone(), start))
    }

    /// Rows `index[i]` in order; gradients scatter-add back.
    pub fn gather_rows(&self, index: &[usize]) -> Var {
        let n = self.rows();
        assert!(index.iter().all(|&i| i < n), "gather_rows index out of range");
        let v = self.value().gather_rows(index);
        Var::from_op(v, Op::GatherRows(self.clone(), index.into()))
    }

    /// Repeats each row `times` times consecutively.
    pub fn repeat_rows(&self, times: usize) -> Var {
        let index: Vec<usize> = (0..self.rows())
            .flat_map(|i| std::iter::repeat_n(i, times))
            .collect();
        self.gather_rows(&index)
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Var {
        let v = self
            .value()
            .reshape(rows, cols)
            .unwrap_or_else(|e| panic!("{e}"));
        Var::from_op(v, Op::Reshape(self.clone()))
    }

    /// Gradients of this scalar w.r.t. every leaf reachable from it.
    pub fn backward(&self) -> Gradients {
        self.backward_retaining(&[])
    }

    /// As [`backward`](Self::backward), additionally keeping the gradient of
    /// the listed intermediate nodes.
    pub fn backward_retaining(&self, retain: &[&Var]) -> Gradients {
        assert_eq!(self.shape(), (1, 1), "backward needs a scalar output");
        let order = topo_order(self);
        let keep: HashSet<u64> = retain.iter().map(|v| v.id()).collect();

        let mut grads: HashMap<u64, Tensor> = HashMap::with_capacity(order.len());
        grads.insert(self.id(), Tensor::scalar(1.0));
        let mut kept = HashMap::new();
        let mut params = Vec::new();

        for var in order.iter().rev() {
            let Some(g) = grads.remove(&var.id()) else {
                continue;
            };
            let node = &var.0;
            if matches!(node.op, Op::Leaf) {
                if let Some(p) = node.param {
                    params.push((p, var.id()));
                }
                kept.insert(var.id(), g);
                continue;
            }
            propagate(node, &g, &mut grads);
            if keep.contains(&var.id()) {
                kept.insert(var.id(), g);
            }
        }
        Gradients { map: kept, params }
    }
}

/// Post-order over the graph reachable from `root` (parents before children).
fn topo_order(root: &Var) -> Vec<Var> {
    let mut order = Vec::new();
    let mut visited = HashSet::new();
    let mut stack: Vec<(Var, bool)> = vec![(root.clone(), false)];
    while let Some((var, expanded)) = stack.pop() {
        if expanded {
            order.push(var);
            continue;
        }
        if !visited.insert(var.id()) {
            continue;
        }
        stack.push((var.clone(), true));
        for p in var.0.op.parents().into_iter().rev() {
            if !visited.contains(&p.id()) {
                stack.push((p.clone(), false));
            }
        }
    }
    order
}

fn accumulate(grads: &mut HashMap<u64, Tensor>, var: &Var, g: Tensor) {
    match grads.get_mut(&var.id()) {
        Some(existing) => existing.add_assign(&g),
        None => {
            grads.insert(var.id(), g);
        }
    }
}

fn propagate(node: &Node, g: &Tensor, grads: &mut HashMap<u64, Tensor>) {
    use Op::*;
    let out = &node.value;
    match &node.op {
        Leaf => {}
        Add(a, b) => {
            accumulate(grads, a, g.clone());
            accumulate(grads, b, g.clone());
        }
        Sub(a, b) => {
            accumulate(grads, a, g.clone());
            accumulate(grads, b, g.map(|x| -x));
        }
        Mul(a, b) => {
            accumulate(grads, a, g.zip_map(b.value(), |x, y| x * y));
            accumulate(grads, b, g.zip_map(a.value(), |x, y| x * y));
        }
        Div(a, b) => {
            accumulate(grads, a, g.zip_map(b.value(), |x, y| x / y));
            let gb = g
                .zip_map(out, |x, o| x * o)
                .zip_map(b.value(), |x, y| -x / y);
            accumulate(grads, b, gb);
        }
        AddRow(a, b) => {
            accumulate(grads, a, g.clone());
            let (n, c) = g.shape();
            let mut gb = Tensor::zeros(1, c);
            for i in 0..n {
                for (s, x) in gb.data_mut().iter_mut().zip(g.row_slice(i)) {
                    *s += x;
                }
            }
            accumulate(grads, b, gb);
        }
        AddCol(a, b) => {
            accumulate(grads, a, g.clone());
            let n = g.rows();
            let data = (0..n).map(|i| g.row_slice(i).iter().sum()).collect();
            accumulate(grads, b, Tensor::new(n, 1, data).expect("shape"));
        }
        MulCol(a, b) => {
            let (n, c) = g.shape();
            let mut ga = g.clone();
            let mut gb = Vec::with_capacity(n);
            for i in 0..n {
                let s = b.value().data()[i];
                let row = &mut ga.data_mut()[i * c..(i + 1) * c];
                let mut acc = 0.0;
                for (x, av) in row.iter_mut().zip(a.value().row_slice(i)) {
                    acc += *x * av;
                    *x *= s;
                }
                gb.push(acc);
            }
            accumulate(grads, a, ga);
            accumulate(grads, b, Tensor::new(n, 1, gb).expect("shape"));
        }
        MatMul(a, b) => {
            let mut ga = Tensor::zeros(a.rows(), a.cols());
            gemm(false, true, 1.0, g, b.value(), 0.0, &mut ga);
            let mut gb = Tensor::zeros(b.rows(), b.cols());
            gemm(true, false, 1.0, a.value(), g, 0.0, &mut gb);
            accumulate(grads, a, ga);
            accumulate(grads, b, gb);
        }
        Scale(a, s) => accumulate(grads, a, g.map(|x| x * s)),
        AddScalar(a) => accumulate(grads, a, g.clone()),
        Relu(a) => accumulate(
            grads,
            a,
            g.zip_map(a.value(), |x, v| if v > 0.0 { x } else { 0.0 }),
        ),
        Tanh(a) => accumulate(grads, a, g.zip_map(out, |x, o| x * (1.0 - o * o))),
        Sigmoid(a) => accumulate(grads, a, g.zip_map(out, |x, o| x * o * (1.0 - o))),
        Softplus(a) => accumulate(grads, a, g.zip_map(a.value(), |x, v| x * sigmoid(v))),
        Exp(a) => accumulate(grads, a, g.zip_map(out, |x, o| x * o)),
        Ln(a) => accumulate(grads, a, g.zip_map(a.value(), |x, v| x / v)),
        Square(a) => accumulate(grads, a, g.zip_map(a.value(), |x, v| 2.0 * x * v)),
        SumAll(a) => {
            let (n, c) = a.shape();
            accumulate(grads, a, Tensor::filled(n, c, g.item()));
        }
        SumRows(a) => {
            let (n, c) = a.shape();
            let mut ga = Tensor::zeros(n, c);
            for i in 0..n {
                let gi = g.data()[i];
                ga.data_mut()[i * c..(i + 1) * c].fill(gi);
            }
            accumulate(grads, a, ga);
        }
        LogSumExpRows(a) => {
            let (n, c) = a.shape();
            let mut ga = Tensor::zeros(n, c);
            for i in 0..n {
                let lse = out.data()[i];
                let gi = g.data()[i];
                for (dst, &x) in ga.data_mut()[i * c..(i + 1) * c]
                    .iter_mut()
                    .zip(a.value().row_slice(i))
                {
                    *dst = gi * (x - lse).exp();
                }
            }
            accumulate(grads, a, ga);
        }
        ConcatCols(parts) => {
            let n = g.rows();
            let mut offset = 0;
            for p in parts {
                let c = p.cols();
                let mut gp = Vec::with_capacity(n * c);
                for i in 0..n {
                    gp.extend_from_slice(&g.row_slice(i)[offset..offset + c]);
                }
                accumulate(grads, p, Tensor::new(n, c, gp).expect("shape"));
                offset += c;
            }
        }
        ConcatRows(parts) => {
            let c = g.cols();
            let mut offset = 0;
            for p in parts {
                let n = p.rows();
                let gp = g.data()[offset * c..(offset + n) * c].to_vec();
                accumulate(grads, p, Tensor::new(n, c, gp).expect("shape"));
                offset += n;
            }
        }
        SliceCols(a, start) => {
            let (n, c) = a.shape();
            let len = g.cols();
            let mut ga = Tensor::zeros(n, c);
            for i in 0..n {
                ga.data_mut()[i * c + start..i * c + start + len].copy_from_slice(g.row_slice(i));
            }
            accumulate(grads, a, ga);
        }
        GatherRows(a, index) => {
            let (n, c) = a.shape();
            let mut ga = Tensor::zeros(n, c);
            for (r, &src) in index.iter().enumerate() {
                for (dst, x) in ga.data_mut()[src * c..(src + 1) * c]
                    .iter_mut()
                    .zip(g.row_slice(r))
                {
                    *dst += x;
                }
            }
            accumulate(grads, a, ga);
        }
        Reshape(a) => {
            let (n, c) = a.shape();
            accumulate(grads, a, g.reshape(n, c).expect("shape"));
        }
    }
}

/// Result of a backward pass.
pub struct Gradients {
    map: HashMap<u64, Tensor>,
    params: Vec<(ParamId, u64)>,
}

impl Gradients {
    /// Gradient w.r.t. a leaf (or retained node); `None` when the output
    /// does not depend on it.
    pub fn get(&self, var: &Var) -> Option<&Tensor> {
        self.map.get(&var.id())
    }

    /// Summed gradient per parameter, over every bound copy reached.
    pub fn param_grads(&self, n_params: usize) -> Vec<Option<Tensor>> {
        let mut out: Vec<Option<Tensor>> = vec![None; n_params];
        for &(pid, id) in &self.params {
            let g = &self.map[&id];
            match &mut out[pid.0] {
                Some(acc) => acc.add_assign(g),
                slot @ None => *slot = Some(g.clone()),
            }
        }
        out
    }

    pub fn touches_param(&self, pid: ParamId) -> bool {
        self.params.iter().any(|&(p, _)| p == pid)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}

/// Log-sum-exp with max subtraction; `-inf` when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Var {
        Var::scalar(v)
    }

    #[test]
    fn square_at_three() {
        let x = s(3.0);
        let y = x.mul(&x);
        let g = y.backward();
        assert_eq!(y.item(), 9.0);
        assert_eq!(g.get(&x).unwrap().item(), 6.0);
    }

    #[test]
    fn diamond_graph_accumulates() {
        // y = a*b + a*c with b = 2a, c = a + 1 → y = 2a² + a² + a = 3a² + a
        let a = s(1.5);
        let b = a.scale(2.0);
        let c = a.add_scalar(1.0);
        let y = a.mul(&b).add(&a.mul(&c));
        let g = y.backward();
        assert!((y.item() - (3.0 * 1.5 * 1.5 + 1.5)).abs() < 1e-15);
        assert_eq!(g.get(&a).unwrap().item(), 6.0 * 1.5 + 1.0);
    }

    #[test]
    fn unreachable_leaf_has_no_gradient() {
        let a = s(1.0);
        let b = s(2.0);
        let y = a.square();
        let g = y.backward();
        assert!(g.get(&b).is_none());
        let d = a.detach();
        let g = d.square().backward();
        assert!(g.get(&a).is_none());
    }

    #[test]
    fn retained_intermediate() {
        let a = s(2.0);
        let h = a.tanh();
        let y = h.square();
        let g = y.backward_retaining(&[&h]);
        assert!((g.get(&h).unwrap().item() - 2.0 * 2f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn deep_chain_drops_without_overflow() {
        let mut x = s(0.1);
        for _ in 0..200_000 {
            x = x.scale(1.0);
        }
        let g = x.backward();
        drop(g);
        drop(x);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(-800.0) > 0.0 || softplus(-800.0) == 0.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-30.0) > 0.0);
    }
}
