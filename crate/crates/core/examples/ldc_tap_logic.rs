//! Feeds a scripted LDC voltage estimate through the timer-gated tap logic.
//!
//! `cargo run --example ldc_tap_logic`

use softcoord::oltc::{oltc_step, LdcSettings, OltcState};

fn main() {
    let settings = LdcSettings::default();
    let (lo, hi) = settings.band();
    println!("band [{lo:.3}, {hi:.3}], delay {} s", settings.delay_s);

    // a sag that clears early, an overvoltage that persists, then recovery
    let script = [
        0.990, 0.990, 1.000, 1.015, 1.015, 1.015, 1.015, 1.015, 1.015, 1.004, 0.985, 0.985, 0.985,
    ];
    let mut state = OltcState::at_tap(0);
    println!("minute  v_est   timer  tap");
    for (minute, &v) in script.iter().enumerate() {
        let (next, delta) = oltc_step(state, v, 60.0, &settings);
        state = next;
        let mark = match delta {
            1 => " raise",
            -1 => " lower",
            _ => "",
        };
        println!("{minute:>6}  {v:.3}  {:>5.0}  {:>3}{mark}", state.timer_s, state.tap);
    }
}
