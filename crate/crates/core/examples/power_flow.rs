//! Solves the 33-bus feeder at peak load, then sweeps the OLTC tap.
//!
//! `cargo run --example power_flow`

use softcoord::grid::ieee33::{ieee33, REMOTE_BUS};
use softcoord::grid::{solve_power_flow, Feeder, Injections, SolverOptions};

fn main() -> softcoord::Result<()> {
    let model = ieee33();
    let feeder = Feeder::new(model.clone())?;
    let opts = SolverOptions::default();
    let base = Injections::base_case(&model);
    let pf = solve_power_flow(&feeder, &base, &opts)?;
    let remote = model.bus_index(REMOTE_BUS).expect("remote bus");
    println!(
        "base case: loss {:.2} kW, vmin {:.4}, bus {REMOTE_BUS} {:.4}, {} sweeps",
        pf.loss_pu * model.kw_per_pu(),
        pf.vmin(),
        pf.voltages[remote].norm(),
        pf.iterations
    );

    println!("tap  ratio    vmin    vmax    loss_kW");
    for tap in (-8..=8).step_by(4) {
        let pf = solve_power_flow(&feeder, &base.clone().with_tap(tap), &opts)?;
        println!(
            "{tap:>3}  {:.5}  {:.4}  {:.4}  {:.2}",
            model.tap.ratio(tap),
            pf.vmin(),
            pf.vmax(),
            pf.loss_pu * model.kw_per_pu()
        );
    }

    // full PV output at noon with the inverters idle
    let mut noon = base.clone();
    for site in &model.pv_sites {
        noon.p_kw[model.bus_index(site.bus).expect("pv bus")] -= site.p_max_kw;
    }
    let pf = solve_power_flow(&feeder, &noon, &opts)?;
    println!("with full PV: vmax {:.4}, loss {:.2} kW", pf.vmax(), pf.loss_pu * model.kw_per_pu());
    Ok(())
}
