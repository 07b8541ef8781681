use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Clamp(Var, f64, f64),
    Square(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    SumCols(Var),
    Mean(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param => "param",
            Op::MatMul(..) => "matmul",
            Op::AddBias(..) => "add_bias",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Softplus(..) => "softplus",
            Op::Clamp(..) => "clamp",
            Op::Square(..) => "square",
            Op::Concat(..) => "concat",
            Op::Slice(..) => "slice",
            Op::SumCols(..) => "sum_cols",
            Op::Mean(..) => "mean",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Shape errors panic at the offending call; non-finite results poison the
/// graph and surface as [`Error::NonFinite`] naming the first bad primitive.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    poison: Option<&'static str>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        if self.poison.is_none() && !value.is_finite() {
            self.poison = Some(op.name());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Error for the first primitive that produced a non-finite value.
    pub fn check(&self) -> Result<()> {
        match self.poison {
            Some(op) => Err(Error::NonFinite(op)),
            None => Ok(()),
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.check()?;
        let t = self.value(v);
        if t.shape() != (1, 1) {
            return Err(Error::Shape(format!("expected a scalar, got {:?}", t.shape())));
        }
        Ok(t.data()[0])
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(t.clone(), Op::Param)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn same(&self, a: Var, b: Var, op: &str) {
        if self.shape(a) != self.shape(b) {
            panic!("{op}: shape {:?} vs {:?}", self.shape(a), self.shape(b));
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols(), tb.rows(), "matmul: {:?} x {:?}", ta.shape(), tb.shape());
        let v = matmul(ta, tb);
        self.push(v, Op::MatMul(a, b))
    }

    /// Adds the `1 × n` row `b` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(tb.rows() == 1 && tb.cols() == ta.cols(), "add_bias: {:?} + {:?}", ta.shape(), tb.shape());
        let mut v = ta.clone();
        let n = v.cols();
        for row in v.data_mut().chunks_mut(n) {
            for (x, b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        self.push(v, Op::AddBias(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same(a, b, "add");
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same(a, b, "sub");
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same(a, b, "mul");
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Joins equally tall nodes side by side.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                assert_eq!(t.rows(), rows, "concat: row count mismatch");
                data.extend_from_slice(t.row(r));
            }
        }
        let v = Tensor::new(rows, cols, data).expect("sizes computed above");
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..end` of `a`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Var {
        let t = self.value(a);
        assert!(start <= end && end <= t.cols(), "slice {start}..{end} of {:?}", t.shape());
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..end]);
        }
        let v = Tensor::new(t.rows(), end - start, data).expect("sizes computed above");
        self.push(v, Op::Slice(a, start))
    }

    /// Row sums as a column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        let v = Tensor::new(t.rows(), 1, data).expect("one per row");
        self.push(v, Op::SumCols(a))
    }

    /// Mean of every element, `1 × 1`.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let v = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        self.push(v, Op::Mean(a))
    }

    /// Gradients of the scalar `loss` with respect to the graph's leaves.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check()?;
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape(format!("loss must be a scalar, got {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Constant | Op::Param) {
                grads[i] = Some(g);
                continue;
            }
            let y = &node.value;
            let mut acc = |v: Var, d: Tensor| match &mut grads[v.0] {
                Some(t) => t.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Constant | Op::Param => unreachable!(),
                Op::MatMul(a, b) => {
                    acc(*a, matmul_nt(&g, self.value(*b)));
                    acc(*b, matmul_tn(self.value(*a), &g));
                }
                Op::AddBias(a, b) => {
                    let n = g.cols();
                    let mut db = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (s, x) in db.iter_mut().zip(row) {
                            *s += x;
                        }
                    }
                    acc(*b, Tensor::row_vector(&db));
                    acc(*a, g);
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|x| -x));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(self.value(*b), |d, y| d * y));
                    acc(*b, g.zip_map(self.value(*a), |d, x| d * x));
                }
                Op::Scale(a, c) => acc(*a, g.map(|d| d * c)),
                Op::AddScalar(a) => acc(*a, g),
                Op::Sigmoid(a) => acc(*a, g.zip_map(y, |d, s| d * s * (1.0 - s))),
                Op::Tanh(a) => acc(*a, g.zip_map(y, |d, t| d * (1.0 - t * t))),
                Op::Relu(a) => acc(*a, g.zip_map(self.value(*a), |d, x| if x > 0.0 { d } else { 0.0 })),
                Op::Exp(a) => acc(*a, g.zip_map(y, |d, e| d * e)),
                Op::Log(a) => acc(*a, g.zip_map(self.value(*a), |d, x| d / x)),
                Op::Softplus(a) => acc(*a, g.zip_map(self.value(*a), |d, x| d * sigmoid(x))),
                Op::Clamp(a, lo, hi) => acc(
                    *a,
                    g.zip_map(self.value(*a), |d, x| if x >= *lo && x <= *hi { d } else { 0.0 }),
                ),
                Op::Square(a) => acc(*a, g.zip_map(self.value(*a), |d, x| 2.0 * d * x)),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        acc(p, Tensor::new(g.rows(), w, data).expect("slice of gradient"));
                        offset += w;
                    }
                }
                Op::Slice(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Tensor::zeros(rows, cols);
                    let w = g.cols();
                    for r in 0..rows {
                        d.data_mut()[r * cols + start..r * cols + start + w].copy_from_slice(g.row(r));
                    }
                    acc(*a, d);
                }
                Op::SumCols(a) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        d.data_mut()[r * cols..(r + 1) * cols].fill(g.data()[r]);
                    }
                    acc(*a, d);
                }
                Op::Mean(a) => {
                    let (rows, cols) = self.shape(*a);
                    acc(*a, Tensor::filled(rows, cols, g.data()[0] / (rows * cols) as f64));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zeros of `like`'s shape when absent.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

/// Value and gradients of `f` with respect to every tensor in `params`.
pub fn evaluate_with_gradients(
    params: &[Tensor],
    f: impl FnOnce(&mut Graph, &[Var]) -> Var,
) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p)).collect();
    let loss = f(&mut g, &vars);
    let value = g.scalar(loss)?;
    let grads = g.backward(loss)?;
    let out = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get_or_zeros(v, p))
        .collect();
    Ok((value, out))
}

/// Value of `f` without gradient bookkeeping beyond the tape itself.
pub fn evaluate(params: &[Tensor], f: impl FnOnce(&mut Graph, &[Var]) -> Var) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.constant(p.clone())).collect();
    let out = f(&mut g, &vars);
    g.scalar(out)
}
