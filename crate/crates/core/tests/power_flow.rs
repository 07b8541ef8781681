mod common;

use common::newton::newton_raphson;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softcoord::grid::ieee33::{build_ieee33, ieee33};
use softcoord::grid::{
    solve_power_flow, validate_network, Bus, Feeder, Injections, Line, NetworkModel, SolverOptions,
    TapChanger,
};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn two_bus() -> NetworkModel {
    // 1 kV / 1 MVA base: 1 ohm = 1 p.u., 1000 kW = 1 p.u.
    NetworkModel {
        buses: vec![
            Bus { id: 1, p_kw: 0.0, q_kvar: 0.0 },
            Bus { id: 2, p_kw: 100.0, q_kvar: 0.0 },
        ],
        lines: vec![Line { from: 1, to: 2, r_ohm: 0.1, x_ohm: 0.1 }],
        pv_sites: vec![],
        v_base_kv: 1.0,
        s_base_mva: 1.0,
        v_slack_pu: 1.0,
        tap: TapChanger::default(),
    }
}

fn random_injections(model: &NetworkModel, rng: &mut ChaCha8Rng) -> Injections {
    let mut inj = Injections::base_case(model);
    for (k, bus) in model.buses.iter().enumerate() {
        let f = rng.random_range(0.0..=1.0);
        inj.p_kw[k] = bus.p_kw * f;
        inj.q_kvar[k] = bus.q_kvar * f;
    }
    for site in &model.pv_sites {
        let k = model.bus_index(site.bus).unwrap();
        inj.p_kw[k] -= rng.random_range(0.0..=site.p_max_kw);
        inj.q_kvar[k] -= rng.random_range(-site.q_max_kvar..=site.q_max_kvar);
    }
    inj.tap = rng.random_range(-8..=8);
    inj
}

#[test]
fn two_bus_matches_closed_form() {
    let feeder = Feeder::new(two_bus()).unwrap();
    let inj = Injections::base_case(feeder.model());
    let pf = solve_power_flow(&feeder, &inj, &opts()).unwrap();
    assert!(pf.converged);
    // |V|^4 + (2(PR+QX) − |V1|²)|V|² + (P²+Q²)(R²+X²) = 0 with P=0.1, R=X=0.1
    let (p, r, x) = (0.1f64, 0.1f64, 0.1f64);
    let b = 2.0 * p * r - 1.0;
    let c = p * p * (r * r + x * x);
    let v2 = ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt();
    let loss = p * p / (v2 * v2) * r;
    assert!((pf.voltages[1].norm() - v2).abs() < 1e-9, "{} vs {v2}", pf.voltages[1].norm());
    assert!((pf.loss_pu - loss).abs() < 1e-10, "{} vs {loss}", pf.loss_pu);
}

#[test]
fn unloaded_feeder_is_flat() {
    let feeder = Feeder::new(ieee33()).unwrap();
    let pf = solve_power_flow(&feeder, &Injections::zero(33), &opts()).unwrap();
    assert!(pf.converged && pf.iterations <= 2);
    assert_eq!(pf.loss_pu, 0.0);
    assert!(pf.voltages.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
}

#[test]
fn base_case_matches_newton_and_published_values() {
    let model = build_ieee33(&[]).unwrap();
    let feeder = Feeder::new(model.clone()).unwrap();
    let inj = Injections::base_case(&model);
    let pf = solve_power_flow(&feeder, &inj, &opts()).unwrap();
    let nr = newton_raphson(&model, &inj);
    let loss_kw = pf.loss_pu * 1000.0;
    assert!((loss_kw - nr.loss_kw).abs() / nr.loss_kw < 1e-3);
    let mags = pf.magnitudes();
    let nr_min = nr.voltages.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    assert!((pf.vmin() - nr_min).abs() / nr_min < 1e-3);
    for (a, b) in pf.voltages.iter().zip(&nr.voltages) {
        assert!((a - b).norm() < 1e-6);
    }
    // sanity anchors for the standard feeder
    assert!((loss_kw - 202.7).abs() < 0.5, "loss {loss_kw}");
    let worst = mags.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(model.buses[worst.0].id, 18);
    assert!((worst.1 - 0.913).abs() < 1e-3);
}

#[test]
fn random_injections_match_newton() {
    let model = ieee33();
    let feeder = Feeder::new(model.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..100 {
        let inj = random_injections(&model, &mut rng);
        let pf = solve_power_flow(&feeder, &inj, &opts()).unwrap();
        assert!(pf.converged);
        let nr = newton_raphson(&model, &inj);
        for (a, b) in pf.voltages.iter().zip(&nr.voltages) {
            assert!((a - b).norm() < 1e-6);
        }
        assert!((pf.loss_pu * 1000.0 - nr.loss_kw).abs() <= 1e-3 * nr.loss_kw.max(1e-3));
    }
}

#[test]
fn raising_tap_lifts_every_bus() {
    let model = build_ieee33(&[]).unwrap();
    let feeder = Feeder::new(model.clone()).unwrap();
    for tap in -8..8 {
        let lo = solve_power_flow(&feeder, &Injections::base_case(&model).with_tap(tap), &opts()).unwrap();
        let hi = solve_power_flow(&feeder, &Injections::base_case(&model).with_tap(tap + 1), &opts()).unwrap();
        for (a, b) in lo.magnitudes().iter().zip(hi.magnitudes()) {
            assert!(b > *a);
        }
    }
}

#[test]
fn injecting_vars_never_lowers_site_voltage() {
    let model = ieee33();
    let feeder = Feeder::new(model.clone()).unwrap();
    for site in &model.pv_sites {
        let k = model.bus_index(site.bus).unwrap();
        let mut previous = f64::NEG_INFINITY;
        for step in 0..=10 {
            let q = -site.q_max_kvar + 2.0 * site.q_max_kvar * step as f64 / 10.0;
            let mut inj = Injections::base_case(&model);
            inj.q_kvar[k] -= q;
            let v = solve_power_flow(&feeder, &inj, &opts()).unwrap().voltages[k].norm();
            assert!(v >= previous);
            previous = v;
        }
    }
}

#[test]
fn validation_reports_structure_faults() {
    assert!(validate_network(&ieee33()).is_empty());

    let mut cut = ieee33();
    let removed = cut.lines.iter().position(|l| l.from == 2 && l.to == 19).unwrap();
    cut.lines.remove(removed);
    let report: Vec<String> = validate_network(&cut).iter().map(|d| d.to_string()).collect();
    for bus in [19, 20, 21, 22] {
        assert!(report.contains(&format!("disconnected bus {bus}")), "{report:?}");
    }
    assert_eq!(report.len(), 4);

    let mut looped = ieee33();
    let dup = looped.lines[5].clone();
    looped.lines.push(dup);
    let report: Vec<String> = validate_network(&looped).iter().map(|d| d.to_string()).collect();
    assert!(report.iter().any(|d| d.contains("cycle detected")), "{report:?}");

    let mut negative = ieee33();
    negative.lines[3].r_ohm = -0.1;
    assert!(!validate_network(&negative).is_empty());
    assert!(Feeder::new(negative).is_err());
}

#[test]
fn non_finite_injection_is_an_error() {
    let feeder = Feeder::new(ieee33()).unwrap();
    let mut inj = Injections::base_case(feeder.model());
    inj.p_kw[4] = f64::NAN;
    assert!(solve_power_flow(&feeder, &inj, &opts()).is_err());
}

#[test]
fn iteration_cap_flags_non_convergence() {
    let feeder = Feeder::new(ieee33()).unwrap();
    let inj = Injections::base_case(feeder.model());
    let pf = solve_power_flow(&feeder, &inj, &SolverOptions { tolerance: 1e-8, max_iter: 1 }).unwrap();
    assert!(!pf.converged);
    assert_eq!(pf.iterations, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balance_loss_and_purity(seed in any::<u64>()) {
        let model = ieee33();
        let feeder = Feeder::new(model.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inj = random_injections(&model, &mut rng);
        let a = solve_power_flow(&feeder, &inj, &opts()).unwrap();
        let b = solve_power_flow(&feeder, &inj, &opts()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.converged);
        prop_assert!(a.loss_pu >= 0.0);
        let net: f64 = inj.p_kw.iter().sum::<f64>() / 1000.0;
        let source = a.source_power_pu().re;
        prop_assert!((source - net - a.loss_pu).abs() <= 10.0 * 1e-8, "{} vs {}", source, net + a.loss_pu);
    }
}
