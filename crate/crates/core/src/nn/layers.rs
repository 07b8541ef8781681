use rand::Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// A named, ordered collection of parameter tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn names(&self) -> Vec<String>;

    fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(rows, cols, data).expect("sized above")
}

/// GRU cell weights. Each gate matrix maps `[x, h]` (or `[x, r ⊙ h]` for
/// the candidate) of width `input + hidden` to `hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub input: usize,
    pub hidden: usize,
    pub w_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(input + hidden, hidden);
        let b = || Tensor::zeros(1, hidden);
        Self {
            input,
            hidden,
            w_z: w(),
            b_z: b(),
            w_r: w(),
            b_r: b(),
            w_h: w(),
            b_h: b(),
        }
    }

    /// Uniform in `±1/sqrt(hidden)`.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let n = input + hidden;
        Self {
            input,
            hidden,
            w_z: uniform(n, hidden, k, rng),
            b_z: uniform(1, hidden, k, rng),
            w_r: uniform(n, hidden, k, rng),
            b_r: uniform(1, hidden, k, rng),
            w_h: uniform(n, hidden, k, rng),
            b_h: uniform(1, hidden, k, rng),
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> GruVars {
        let mut b = |t: &Tensor| if trainable { g.param(t) } else { g.constant(t.clone()) };
        GruVars {
            w_z: b(&self.w_z),
            b_z: b(&self.b_z),
            w_r: b(&self.w_r),
            b_r: b(&self.b_r),
            w_h: b(&self.w_h),
            b_h: b(&self.b_h),
        }
    }
}

impl Parameters for GruParams {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_z, &self.b_z, &self.w_r, &self.b_r, &self.w_h, &self.b_h]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.b_h,
        ]
    }

    fn names(&self) -> Vec<String> {
        ["w_z", "b_z", "w_r", "b_r", "w_h", "b_h"].map(String::from).to_vec()
    }
}

/// Graph handles for a bound [`GruParams`], in `tensors()` order.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub b_h: Var,
}

impl GruVars {
    pub fn all(&self) -> Vec<Var> {
        vec![self.w_z, self.b_z, self.w_r, self.b_r, self.w_h, self.b_h]
    }

    /// One cell step on a batch: `x` is `B × input`, `h` is `B × hidden`.
    pub fn step(&self, g: &mut Graph, x: Var, h: Var) -> Var {
        let xh = g.concat(&[x, h]);
        let z = g.matmul(xh, self.w_z);
        let z = g.add_bias(z, self.b_z);
        let z = g.sigmoid(z);
        let r = g.matmul(xh, self.w_r);
        let r = g.add_bias(r, self.b_r);
        let r = g.sigmoid(r);
        let rh = g.mul(r, h);
        let xrh = g.concat(&[x, rh]);
        let c = g.matmul(xrh, self.w_h);
        let c = g.add_bias(c, self.b_h);
        let c = g.tanh(c);
        // h' = h + z ⊙ (h̃ − h)
        let d = g.sub(c, h);
        let zd = g.mul(z, d);
        g.add(h, zd)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

/// Fully connected stack: ReLU on hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

impl MlpParams {
    /// `sizes` lists every width from input to output.
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense {
                    w: Tensor::zeros(w[0], w[1]),
                    b: Tensor::zeros(1, w[1]),
                })
                .collect(),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`; the last layer is scaled by
    /// `output_scale`.
    pub fn init(sizes: &[usize], output_scale: f64, rng: &mut impl Rng) -> Self {
        let n = sizes.len() - 1;
        Self {
            layers: sizes
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let k = (1.0 / (w[0] as f64).sqrt()) * if i + 1 == n { output_scale } else { 1.0 };
                    Dense {
                        w: uniform(w[0], w[1], k, rng),
                        b: uniform(1, w[1], k, rng),
                    }
                })
                .collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.rows())
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.cols())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.b.shape() != (1, l.w.cols()) {
                return Err(Error::Shape(format!("layer {i} bias {:?} for weight {:?}", l.b.shape(), l.w.shape())));
            }
            if let Some(next) = self.layers.get(i + 1) {
                if next.w.rows() != l.w.cols() {
                    return Err(Error::Shape(format!("layer {} expects {} inputs, layer {i} emits {}", i + 1, next.w.rows(), l.w.cols())));
                }
            }
        }
        Ok(())
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    if trainable {
                        (g.param(&l.w), g.param(&l.b))
                    } else {
                        (g.constant(l.w.clone()), g.constant(l.b.clone()))
                    }
                })
                .collect(),
        }
    }
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    fn names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("w{i}"), format!("b{i}")])
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct MlpVars {
    pub layers: Vec<(Var, Var)>,
}

impl MlpVars {
    pub fn all(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = g.matmul(h, w);
            h = g.add_bias(h, b);
            if i + 1 < self.layers.len() {
                h = g.relu(h);
            }
        }
        h
    }

    /// Splits the `2·n_a` outputs into the mean and the clamped log-std.
    pub fn gaussian_head(&self, g: &mut Graph, x: Var, n_a: usize) -> (Var, Var) {
        let out = self.forward(g, x);
        let mu = g.slice(out, 0, n_a);
        let log_std = g.slice(out, n_a, 2 * n_a);
        let log_std = g.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX);
        (mu, log_std)
    }
}

/// One GRU step for a single sample.
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    if x.len() != p.input || h_prev.len() != p.hidden {
        return Err(Error::Shape(format!(
            "GRU expects input {} / hidden {}, got {} / {}",
            p.input,
            p.hidden,
            x.len(),
            h_prev.len()
        )));
    }
    let mut g = Graph::new();
    let vars = p.bind(&mut g, false);
    let xv = g.constant(Tensor::row_vector(x));
    let hv = g.constant(Tensor::row_vector(h_prev));
    let out = vars.step(&mut g, xv, hv);
    g.check()?;
    Ok(g.value(out).data().to_vec())
}

/// `(μ, σ)` of the Gaussian policy head for a single hidden vector.
pub fn mlp_gaussian_head(h: &[f64], p: &MlpParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    if h.len() != p.input_size() || !p.output_size().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "head expects {} inputs and an even output, got {} inputs / {} outputs",
            p.input_size(),
            h.len(),
            p.output_size()
        )));
    }
    let n_a = p.output_size() / 2;
    let mut g = Graph::new();
    let vars = p.bind(&mut g, false);
    let hv = g.constant(Tensor::row_vector(h));
    let (mu, log_std) = vars.gaussian_head(&mut g, hv, n_a);
    let sigma = g.exp(log_std);
    g.check()?;
    Ok((g.value(mu).data().to_vec(), g.value(sigma).data().to_vec()))
}
