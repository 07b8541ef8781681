//! Central finite differences over every parameter entry, compared with the
//! tape's analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softcoord::nn::{Graph, GruParams, MlpParams, Parameters, Tensor};
use softcoord::rsac::{actor_loss, critic_loss, value_loss, Batch, Hyperparams, Layout, Networks};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Below this magnitude relative error is measured against the floor.
pub const FLOOR: f64 = 1e-6;

/// Largest componentwise relative error between `analytic` and central
/// differences of `f` around `p`.
pub fn max_rel_error<P: Parameters + Clone>(p: &P, analytic: &[Tensor], f: impl Fn(&P) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let n = p.tensors().len();
    assert_eq!(n, analytic.len());
    for (ti, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let mut plus = p.clone();
            plus.tensors_mut()[ti].data_mut()[k] += STEP;
            let mut minus = p.clone();
            minus.tensors_mut()[ti].data_mut()[k] -= STEP;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * STEP);
            let a = grad.data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Two unrolled GRU steps feeding a squared-error loss.
fn gru_case(rng: &mut ChaCha8Rng) -> f64 {
    let p = GruParams::init(3, 4, rng);
    let x1 = random_tensor(2, 3, 1.0, rng);
    let x2 = random_tensor(2, 3, 1.0, rng);
    let h0 = random_tensor(2, 4, 0.5, rng);
    let target = random_tensor(2, 4, 0.5, rng);
    let loss = |p: &GruParams, grads: bool| {
        let mut g = Graph::new();
        let vars = p.bind(&mut g, true);
        let (a, b, h) = (g.constant(x1.clone()), g.constant(x2.clone()), g.constant(h0.clone()));
        let h1 = vars.step(&mut g, a, h);
        let h2 = vars.step(&mut g, b, h1);
        let t = g.constant(target.clone());
        let d = g.sub(h2, t);
        let sq = g.square(d);
        let l = g.mean(sq);
        let value = g.scalar(l).unwrap();
        let gr = grads.then(|| {
            let gs = g.backward(l).unwrap();
            vars.all().iter().zip(p.tensors()).map(|(&v, t)| gs.get_or_zeros(v, t)).collect::<Vec<_>>()
        });
        (value, gr)
    };
    let (_, analytic) = loss(&p, true);
    max_rel_error(&p, &analytic.unwrap(), |q| loss(q, false).0)
}

/// Gaussian head, reparameterised sample and tanh squashing.
fn head_case(rng: &mut ChaCha8Rng) -> f64 {
    let p = MlpParams::init(&[4, 6, 4], 1.0, rng);
    let x = random_tensor(3, 4, 1.0, rng);
    let eps = random_tensor(3, 2, 1.5, rng);
    let w = random_tensor(3, 2, 1.0, rng);
    let loss = |p: &MlpParams, grads: bool| {
        let mut g = Graph::new();
        let vars = p.bind(&mut g, true);
        let xv = g.constant(x.clone());
        let (mu, log_std) = vars.gaussian_head(&mut g, xv, 2);
        let sigma = g.exp(log_std);
        let e = g.constant(eps.clone());
        let n = g.mul(e, sigma);
        let u = g.add(mu, n);
        let a = g.tanh(u);
        let wv = g.constant(w.clone());
        let aw = g.mul(a, wv);
        let m2u = g.scale(u, -2.0);
        let sp = g.softplus(m2u);
        let s = g.add(aw, sp);
        let s = g.sub(s, log_std);
        let l = g.mean(s);
        let value = g.scalar(l).unwrap();
        let gr = grads.then(|| {
            let gs = g.backward(l).unwrap();
            vars.all().iter().zip(p.tensors()).map(|(&v, t)| gs.get_or_zeros(v, t)).collect::<Vec<_>>()
        });
        (value, gr)
    };
    let (_, analytic) = loss(&p, true);
    max_rel_error(&p, &analytic.unwrap(), |q| loss(q, false).0)
}

fn tiny_layout() -> (Layout, Hyperparams) {
    let layout = Layout {
        feature_dim: 3,
        n_a: 2,
        hidden: 4,
        q_max_pu: vec![0.3, 0.6],
    };
    let hp = Hyperparams {
        gru_hidden: 4,
        head_hidden: vec![5],
        critic_hidden: vec![6],
        ..Hyperparams::default()
    };
    (layout, hp)
}

fn random_batch(layout: &Layout, n: usize, rng: &mut ChaCha8Rng) -> Batch {
    Batch {
        state: random_tensor(n, layout.feature_dim, 1.0, rng),
        prev_action: random_tensor(n, layout.n_a, 0.9, rng),
        prev_hidden: random_tensor(n, layout.hidden, 0.9, rng),
        action: random_tensor(n, layout.n_a, 0.9, rng),
        reward: random_tensor(n, 1, 2.0, rng),
        next_state: random_tensor(n, layout.feature_dim, 1.0, rng),
        hidden: random_tensor(n, layout.hidden, 0.9, rng),
    }
}

fn critic_case(rng: &mut ChaCha8Rng) -> f64 {
    let (layout, hp) = tiny_layout();
    let nets = Networks::init(&layout, &hp, rng);
    let batch = random_batch(&layout, 4, rng);
    let (_, g) = critic_loss(&batch, &nets.critic, &nets.target, 0.95).unwrap();
    max_rel_error(&nets.critic, &g, |c| critic_loss(&batch, c, &nets.target, 0.95).unwrap().0)
}

fn value_case(rng: &mut ChaCha8Rng) -> f64 {
    let (layout, hp) = tiny_layout();
    let nets = Networks::init(&layout, &hp, rng);
    let batch = random_batch(&layout, 4, rng);
    let eps = random_tensor(4, 2, 1.5, rng);
    let f = |v: &MlpParams| value_loss(&batch, v, &nets.critic, &nets.actor, &layout, &eps, 0.2).unwrap();
    let (_, g) = f(&nets.value);
    max_rel_error(&nets.value, &g, |v| f(v).0)
}

fn actor_case(rng: &mut ChaCha8Rng) -> f64 {
    let (layout, hp) = tiny_layout();
    let nets = Networks::init(&layout, &hp, rng);
    let batch = random_batch(&layout, 4, rng);
    let eps = random_tensor(4, 2, 1.5, rng);
    let f = |a: &softcoord::rsac::ActorParams| actor_loss(&batch, a, &nets.critic, &layout, &eps, 0.2).unwrap();
    let (_, g) = f(&nets.actor);
    max_rel_error(&nets.actor, &g, |a| f(a).0)
}

pub const CASE_NAMES: [&str; 5] = ["gru-2-step", "gaussian-head-tanh", "critic-loss", "value-loss", "actor-loss"];

/// Worst relative error of computation `index` (cycling through the five
/// kinds) built from `seed`.
pub fn run_case(index: usize, seed: u64) -> (&'static str, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(index as u64));
    let kind = index % CASE_NAMES.len();
    let err = match kind {
        0 => gru_case(&mut rng),
        1 => head_case(&mut rng),
        2 => critic_case(&mut rng),
        3 => value_case(&mut rng),
        _ => actor_case(&mut rng),
    };
    (CASE_NAMES[kind], err)
}
