//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation as it is evaluated. Calling
//! [`Graph::backward`] on a `1x1` node walks the tape in reverse and returns
//! the gradient of that node with respect to every leaf created with
//! [`Graph::param`]. Nodes that do not depend on a parameter are never
//! differentiated.
//!
//! The op set is deliberately small. Second-order quantities (the critic's
//! input gradient inside the gradient penalty) are obtained by writing the
//! backward pass of the critic out of these same ops, see
//! [`crate::nn::mlp::input_gradient_graph`].

use crate::error::{Error, Result};
use crate::nn::tensor::{matmul, matmul_at, matmul_bt, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulBt(Var, Var),
    /// `a (n x m) + row (1 x m)` broadcast over rows.
    AddRow(Var, Var),
    /// `a (n x m) * row (1 x m)` broadcast over rows.
    MulRow(Var, Var),
    /// `a (n x m) * col (n x 1)` broadcast over columns.
    MulCol(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sqrt(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    SumRows(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Vec<Var>),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients returned by [`Graph::backward`], indexed by leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`, zeros if the loss does not depend on it.
    pub fn get(&self, g: &Graph, var: Var) -> Tensor {
        self.grads[var.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(g.value(var).rows(), g.value(var).cols()))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    fn check_same(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.dims(a) != self.dims(b) {
            return Err(Error::Shape(format!("{op}: {:?} vs {:?}", self.dims(a), self.dims(b))));
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).map(f);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (r, c) = self.dims(a);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let ng = self.ng(a) || self.ng(b);
        self.push(Tensor::from_parts(r, c, data), op, ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((_, k), (k2, _)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(Error::Shape(format!("matmul: {:?} x {:?}", self.dims(a), self.dims(b))));
        }
        let value = matmul(self.value(a), self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a).1 != self.dims(b).1 {
            return Err(Error::Shape(format!(
                "matmul_bt: {:?} x {:?}^T",
                self.dims(a),
                self.dims(b)
            )));
        }
        let value = matmul_bt(self.value(a), self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMulBt(a, b), ng))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let ((n, m), (r1, m2)) = (self.dims(a), self.dims(row));
        if r1 != 1 || m != m2 {
            return Err(Error::Shape(format!("add_row: {n}x{m} + {r1}x{m2}")));
        }
        let rv = self.value(row).data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for chunk in data.chunks_mut(m.max(1)) {
            for (x, b) in chunk.iter_mut().zip(&rv) {
                *x += b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(Tensor::from_parts(n, m, data), Op::AddRow(a, row), ng))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let ((n, m), (r1, m2)) = (self.dims(a), self.dims(row));
        if r1 != 1 || m != m2 {
            return Err(Error::Shape(format!("mul_row: {n}x{m} * {r1}x{m2}")));
        }
        let rv = self.value(row).data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for chunk in data.chunks_mut(m.max(1)) {
            for (x, b) in chunk.iter_mut().zip(&rv) {
                *x *= b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(Tensor::from_parts(n, m, data), Op::MulRow(a, row), ng))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let ((n, m), (n2, c1)) = (self.dims(a), self.dims(col));
        if c1 != 1 || n != n2 {
            return Err(Error::Shape(format!("mul_col: {n}x{m} * {n2}x{c1}")));
        }
        let cv = self.value(col).data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for (chunk, c) in data.chunks_mut(m.max(1)).zip(&cv) {
            for x in chunk.iter_mut() {
                *x *= c;
            }
        }
        let ng = self.ng(a) || self.ng(col);
        Ok(self.push(Tensor::from_parts(n, m, data), Op::MulCol(a, col), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        Ok(self.binary(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "sub")?;
        Ok(self.binary(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        Ok(self.binary(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::Scale(a, k), |x| x * k)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + k)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Square root; its derivative at exactly zero is taken to be zero.
    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a), f64::sqrt)
    }

    /// `max(a, floor)`; the gradient is blocked where the floor is active.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        self.unary(a, Op::ClampMin(a, floor), |x| x.max(floor))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let ng = self.ng(a);
        self.push(value, Op::Softmax(a), ng)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let value = log_softmax_rows(self.value(a));
        let ng = self.ng(a);
        self.push(value, Op::LogSoftmax(a), ng)
    }

    /// `n x m -> n x 1`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data: Vec<f64> = t.iter_rows().map(|r| r.iter().sum()).collect();
        let n = data.len();
        let ng = self.ng(a);
        self.push(Tensor::from_parts(n, 1, data), Op::SumRows(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.sum() / t.len().max(1) as f64;
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Mean(a), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let value = Tensor::concat_cols(&tensors)?;
        let ng = parts.iter().any(|&v| self.ng(v));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).reshape(rows, cols)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Reshape(a), ng))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.dims(loss) != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a 1x1 loss, got {:?}",
                self.dims(loss)
            )));
        }
        if !self.value(loss).is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            let acc = |v: Var, t: Tensor, grads: &mut Vec<Option<Tensor>>| {
                if !self.ng(v) {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, matmul_bt(&g, self.value(*b)), &mut grads);
                    }
                    if self.ng(*b) {
                        acc(*b, matmul_at(self.value(*a), &g), &mut grads);
                    }
                }
                Op::MatMulBt(a, b) => {
                    // y = a b^T: da = g b, db = g^T a
                    if self.ng(*a) {
                        acc(*a, matmul(&g, self.value(*b)), &mut grads);
                    }
                    if self.ng(*b) {
                        acc(*b, matmul_at(&g, self.value(*a)), &mut grads);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.ng(*row) {
                        acc(*row, col_sums(&g), &mut grads);
                    }
                    acc(*a, g, &mut grads);
                }
                Op::MulRow(a, row) => {
                    let (av, rv) = (self.value(*a), self.value(*row));
                    if self.ng(*row) {
                        let prod = zip_map(&g, av, |x, y| x * y);
                        acc(*row, col_sums(&prod), &mut grads);
                    }
                    if self.ng(*a) {
                        let m = rv.cols();
                        let data = g
                            .data()
                            .iter()
                            .enumerate()
                            .map(|(i, &x)| x * rv.data()[i % m])
                            .collect();
                        acc(*a, Tensor::from_parts(g.rows(), g.cols(), data), &mut grads);
                    }
                }
                Op::MulCol(a, col) => {
                    let (av, cv) = (self.value(*a), self.value(*col));
                    let m = g.cols().max(1);
                    if self.ng(*col) {
                        let prod = zip_map(&g, av, |x, y| x * y);
                        let data = prod.iter_rows().map(|r| r.iter().sum()).collect();
                        acc(*col, Tensor::from_parts(g.rows(), 1, data), &mut grads);
                    }
                    if self.ng(*a) {
                        let data = g
                            .data()
                            .iter()
                            .enumerate()
                            .map(|(i, &x)| x * cv.data()[i / m])
                            .collect();
                        acc(*a, Tensor::from_parts(g.rows(), g.cols(), data), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone(), &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|x| -x), &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, zip_map(&g, self.value(*b), |x, y| x * y), &mut grads);
                    }
                    if self.ng(*b) {
                        acc(*b, zip_map(&g, self.value(*a), |x, y| x * y), &mut grads);
                    }
                }
                Op::Scale(a, k) => acc(*a, g.map(|x| x * k), &mut grads),
                Op::AddScalar(a) => acc(*a, g, &mut grads),
                Op::Tanh(a) => acc(*a, zip_map(&g, y, |x, t| x * (1.0 - t * t)), &mut grads),
                Op::Relu(a) => acc(
                    *a,
                    zip_map(&g, self.value(*a), |x, z| if z > 0.0 { x } else { 0.0 }),
                    &mut grads,
                ),
                Op::LeakyRelu(a, s) => acc(
                    *a,
                    zip_map(&g, self.value(*a), |x, z| if z > 0.0 { x } else { x * s }),
                    &mut grads,
                ),
                Op::Exp(a) => acc(*a, zip_map(&g, y, |x, e| x * e), &mut grads),
                Op::Log(a) => acc(*a, zip_map(&g, self.value(*a), |x, z| x / z), &mut grads),
                Op::Square(a) => acc(*a, zip_map(&g, self.value(*a), |x, z| 2.0 * x * z), &mut grads),
                Op::Sqrt(a) => acc(
                    *a,
                    zip_map(&g, y, |x, s| if s > 0.0 { x / (2.0 * s) } else { 0.0 }),
                    &mut grads,
                ),
                Op::ClampMin(a, floor) => acc(
                    *a,
                    zip_map(&g, self.value(*a), |x, z| if z >= *floor { x } else { 0.0 }),
                    &mut grads,
                ),
                Op::Softmax(a) => {
                    let m = y.cols().max(1);
                    let mut data = Vec::with_capacity(y.len());
                    for (gr, yr) in g.data().chunks(m).zip(y.data().chunks(m)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(p, q)| p * q).sum();
                        data.extend(gr.iter().zip(yr).map(|(p, q)| q * (p - dot)));
                    }
                    acc(*a, Tensor::from_parts(y.rows(), y.cols(), data), &mut grads);
                }
                Op::LogSoftmax(a) => {
                    let m = y.cols().max(1);
                    let mut data = Vec::with_capacity(y.len());
                    for (gr, yr) in g.data().chunks(m).zip(y.data().chunks(m)) {
                        let total: f64 = gr.iter().sum();
                        data.extend(gr.iter().zip(yr).map(|(p, ly)| p - ly.exp() * total));
                    }
                    acc(*a, Tensor::from_parts(y.rows(), y.cols(), data), &mut grads);
                }
                Op::SumRows(a) => {
                    let (n, m) = self.dims(*a);
                    let mut data = Vec::with_capacity(n * m);
                    for &gv in g.data() {
                        data.extend(std::iter::repeat_n(gv, m));
                    }
                    acc(*a, Tensor::from_parts(n, m, data), &mut grads);
                }
                Op::Sum(a) => {
                    let (n, m) = self.dims(*a);
                    acc(*a, Tensor::filled(n, m, g.data()[0]), &mut grads);
                }
                Op::Mean(a) => {
                    let (n, m) = self.dims(*a);
                    let k = g.data()[0] / (n * m).max(1) as f64;
                    acc(*a, Tensor::filled(n, m, k), &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.dims(p).1;
                        if self.ng(p) {
                            acc(p, g.slice_cols(start, start + w), &mut grads);
                        }
                        start += w;
                    }
                }
                Op::Reshape(a) => {
                    let (n, m) = self.dims(*a);
                    acc(*a, Tensor::from_parts(n, m, g.into_data()), &mut grads);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.rows(), a.cols(), data)
}

fn col_sums(t: &Tensor) -> Tensor {
    let m = t.cols();
    let mut out = vec![0.0; m];
    for row in t.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::from_parts(1, m, out)
}

pub(crate) fn softmax_rows(t: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(t.len());
    for row in t.iter_rows() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        let mut total = 0.0;
        for &v in row {
            let e = (v - max).exp();
            total += e;
            data.push(e);
        }
        for v in &mut data[start..] {
            *v /= total;
        }
    }
    Tensor::from_parts(t.rows(), t.cols(), data)
}

pub(crate) fn log_softmax_rows(t: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(t.len());
    for row in t.iter_rows() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        data.extend(row.iter().map(|v| v - lse));
    }
    Tensor::from_parts(t.rows(), t.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(3.0));
        let l = g.square(w);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(&g, w).data(), &[6.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let mut g = Graph::new();
        let w = g.param(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let c = g.constant(Tensor::scalar(4.0));
        let l = g.square(c);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(&g, w).data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let w = g.param(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        assert!(matches!(g.backward(w), Err(Error::Shape(_))));
    }

    #[test]
    fn sqrt_at_zero_has_zero_gradient() {
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(0.0));
        let s = g.sqrt(w);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(&g, w).data(), &[0.0]);
    }

    // Every op against central differences on one composite expression.
    #[test]
    fn composite_expression_matches_finite_differences() {
        let a0 = Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, 0.7, -0.4]).unwrap();
        let b0 = Tensor::matrix(3, 2, vec![0.2, 0.1, -0.3, 0.4, 0.6, -0.5]).unwrap();
        let r0 = Tensor::matrix(1, 2, vec![0.05, -0.1]).unwrap();

        let eval = |a: &Tensor, b: &Tensor, r: &Tensor| -> (f64, Vec<Tensor>) {
            let mut g = Graph::new();
            let (a, b, r) = (g.param(a.clone()), g.param(b.clone()), g.param(r.clone()));
            let h = g.matmul(a, b).unwrap();
            let h = g.add_row(h, r).unwrap();
            let t = g.tanh(h);
            let lr = g.leaky_relu(h, 0.2);
            let sm = g.softmax(t);
            let ls = g.log_softmax(lr);
            let m = g.mul(sm, ls).unwrap();
            let e = g.exp(t);
            let e = g.mul_row(e, r).unwrap();
            let bt = g.matmul_bt(e, b).unwrap();
            let sq = g.square(bt);
            let rs = g.sum_rows(sq);
            let rs = g.add_scalar(rs, 1.0);
            let sr = g.sqrt(rs);
            let mc = g.mul_col(m, sr).unwrap();
            let cat = g.concat_cols(&[mc, t]).unwrap();
            let rsh = g.reshape(cat, 1, 8).unwrap();
            let lg = g.add_scalar(rsh, 3.0);
            let lg = g.log(lg);
            let cl = g.clamp_min(lg, 0.9);
            let s1 = g.sum(cl);
            let s2 = g.mean(rsh);
            let s2 = g.scale(s2, 0.5);
            let d = g.sub(s1, s2).unwrap();
            let loss = g.add(d, s2).unwrap();
            let loss = g.add(loss, s2).unwrap();
            let v = g.value(loss).data()[0];
            let grads = g.backward(loss).unwrap();
            (v, vec![grads.get(&g, a), grads.get(&g, b), grads.get(&g, r)])
        };

        let inputs = [a0, b0, r0];
        let (_, analytic) = eval(&inputs[0], &inputs[1], &inputs[2]);
        let h = 1e-6;
        for which in 0..3 {
            for i in 0..inputs[which].len() {
                let mut plus = inputs.clone();
                let mut minus = inputs.clone();
                plus[which].data_mut()[i] += h;
                minus[which].data_mut()[i] -= h;
                let fd = (eval(&plus[0], &plus[1], &plus[2]).0 - eval(&minus[0], &minus[1], &minus[2]).0) / (2.0 * h);
                let an = analytic[which].data()[i];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "input {which}[{i}]: fd {fd} vs analytic {an}"
                );
            }
        }
    }
}
