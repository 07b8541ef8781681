//! Checks tape gradients of a small GRU + Gaussian head loss against central
//! differences.
//!
//! `cargo run --example gradient_check`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softcoord::nn::{Graph, GruParams, MlpParams, Parameters, Tensor};

const STEP: f64 = 1e-5;

fn loss(gru: &GruParams, head: &MlpParams, xs: &[Tensor], want_grads: bool) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let gv = gru.bind(&mut g, want_grads);
    let hv = head.bind(&mut g, want_grads);
    let mut h = g.constant(Tensor::zeros(xs[0].rows(), gru.hidden));
    for x in xs {
        let x = g.constant(x.clone());
        h = gv.step(&mut g, x, h);
    }
    let (mu, log_std) = hv.gaussian_head(&mut g, h, 1);
    let a = g.tanh(mu);
    let sq = g.square(a);
    let s = g.sub(sq, log_std);
    let l = g.mean(s);
    let value = g.scalar(l).expect("scalar loss");
    let mut grads = Vec::new();
    if want_grads {
        let gs = g.backward(l).expect("backward");
        for (v, t) in gv.all().iter().zip(gru.tensors()) {
            grads.push(gs.get_or_zeros(*v, t));
        }
        for (v, t) in hv.all().iter().zip(head.tensors()) {
            grads.push(gs.get_or_zeros(*v, t));
        }
    }
    (value, grads)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gru = GruParams::init(2, 3, &mut rng);
    let head = MlpParams::init(&[3, 4, 2], 1.0, &mut rng);
    let xs = vec![
        Tensor::new(2, 2, vec![0.3, -0.7, 1.1, 0.2]).unwrap(),
        Tensor::new(2, 2, vec![-0.4, 0.9, 0.0, -1.2]).unwrap(),
    ];
    let (value, analytic) = loss(&gru, &head, &xs, true);
    println!("loss {value:.6}");

    let n_gru = gru.tensors().len();
    let mut worst: f64 = 0.0;
    for (ti, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let eval = |delta: f64| {
                let (mut g2, mut h2) = (gru.clone(), head.clone());
                if ti < n_gru {
                    g2.tensors_mut()[ti].data_mut()[k] += delta;
                } else {
                    h2.tensors_mut()[ti - n_gru].data_mut()[k] += delta;
                }
                loss(&g2, &h2, &xs, false).0
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            let a = grad.data()[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    let count: usize = analytic.iter().map(Tensor::len).sum();
    println!("{count} parameters, worst relative error {worst:.2e}");
}
