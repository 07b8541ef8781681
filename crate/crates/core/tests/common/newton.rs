//! Dense polar Newton-Raphson load flow used as an oracle for the sweep
//! solver. Builds its own admittance matrix straight from the raw line list.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use softcoord::grid::{Injections, NetworkModel};

pub struct NewtonSolution {
    pub voltages: Vec<Complex64>,
    pub loss_kw: f64,
    pub iterations: usize,
}

pub fn newton_raphson(model: &NetworkModel, inj: &Injections) -> NewtonSolution {
    let n = model.buses.len();
    let pos = |id: usize| model.buses.iter().position(|b| b.id == id).unwrap();
    let z_base = model.v_base_kv.powi(2) / model.s_base_mva;
    let s_base_kw = model.s_base_mva * 1000.0;

    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for l in &model.lines {
        let (a, b) = (pos(l.from), pos(l.to));
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(l.r_ohm / z_base, l.x_ohm / z_base);
        y[a][a] += ys;
        y[b][b] += ys;
        y[a][b] -= ys;
        y[b][a] -= ys;
    }
    let slack = pos(model.tap.feeder_bus);
    let v_slack = model.v_slack_pu * (1.0 + model.tap.step * inj.tap as f64);
    // specified injections = −demand
    let p_spec: Vec<f64> = inj.p_kw.iter().map(|p| -p / s_base_kw).collect();
    let q_spec: Vec<f64> = inj.q_kvar.iter().map(|q| -q / s_base_kw).collect();

    let mut vm = vec![v_slack; n];
    let mut va = vec![0.0; n];
    let unknown: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = unknown.len();

    let calc = |vm: &[f64], va: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                let (g, b) = (y[i][k].re, y[i][k].im);
                if g == 0.0 && b == 0.0 {
                    continue;
                }
                let t = va[i] - va[k];
                p[i] += vm[i] * vm[k] * (g * t.cos() + b * t.sin());
                q[i] += vm[i] * vm[k] * (g * t.sin() - b * t.cos());
            }
        }
        (p, q)
    };

    let mut iterations = 0;
    for _ in 0..50 {
        let (p, q) = calc(&vm, &va);
        let mut f = DVector::zeros(2 * m);
        for (r, &i) in unknown.iter().enumerate() {
            f[r] = p[i] - p_spec[i];
            f[m + r] = q[i] - q_spec[i];
        }
        if f.amax() < 1e-13 {
            break;
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(2 * m, 2 * m);
        for (r, &i) in unknown.iter().enumerate() {
            for (c, &k) in unknown.iter().enumerate() {
                let (g, b) = (y[i][k].re, y[i][k].im);
                let t = va[i] - va[k];
                if i == k {
                    jac[(r, c)] = -q[i] - b * vm[i] * vm[i];
                    jac[(r, m + c)] = p[i] / vm[i] + g * vm[i];
                    jac[(m + r, c)] = p[i] - g * vm[i] * vm[i];
                    jac[(m + r, m + c)] = q[i] / vm[i] - b * vm[i];
                } else {
                    jac[(r, c)] = vm[i] * vm[k] * (g * t.sin() - b * t.cos());
                    jac[(r, m + c)] = vm[i] * (g * t.cos() + b * t.sin());
                    jac[(m + r, c)] = -vm[i] * vm[k] * (g * t.cos() + b * t.sin());
                    jac[(m + r, m + c)] = vm[i] * (g * t.sin() - b * t.cos());
                }
            }
        }
        let dx = jac.lu().solve(&(-f)).expect("non-singular Jacobian");
        for (r, &i) in unknown.iter().enumerate() {
            va[i] += dx[r];
            vm[i] += dx[m + r];
        }
    }

    let voltages: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
    let loss_pu: f64 = model
        .lines
        .iter()
        .map(|l| {
            let dv = voltages[pos(l.from)] - voltages[pos(l.to)];
            let z = Complex64::new(l.r_ohm / z_base, l.x_ohm / z_base);
            (dv / z).norm_sqr() * z.re
        })
        .sum();
    NewtonSolution {
        voltages,
        loss_kw: loss_pu * s_base_kw,
        iterations,
    }
}
