//! Line-drop-compensation tap control of the substation OLTC.
//!
//! The transformer estimates a remote voltage from its own secondary-side
//! measurement, `V_est = |V0 − I0·(R + jX)|`, and steps its tap once the
//! estimate has stayed on one side of the dead band for the time delay.
//! Nothing outside this module changes the tap.

use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct LdcSettings {
    /// Voltage target, p.u.
    pub v_target: f64,
    /// Compensator resistance, p.u. on `rating_mva`.
    pub r: f64,
    /// Compensator reactance, p.u. on `rating_mva`.
    pub x: f64,
    /// Half-width of the dead band, p.u.
    pub dead_band: f64,
    /// Time delay, seconds.
    pub delay_s: f64,
    pub tap_min: i32,
    pub tap_max: i32,
    /// Ratio change per tap step, p.u.
    pub step: f64,
    /// Power base of the compensator's current measurement, MVA. The feeder
    /// current is rescaled from the system base onto this one before use.
    pub rating_mva: f64,
}

impl Default for LdcSettings {
    fn default() -> Self {
        Self {
            v_target: 1.0,
            r: 0.864,
            x: 0.538,
            dead_band: 0.008,
            delay_s: 180.0,
            tap_min: -8,
            tap_max: 8,
            step: 0.00625,
            rating_mva: 190.0,
        }
    }
}

impl LdcSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dead_band > 0.0) {
            return Err("dead band must be positive".into());
        }
        if !(self.delay_s > 0.0) {
            return Err("time delay must be positive".into());
        }
        if self.tap_min >= self.tap_max {
            return Err("tap_min must be below tap_max".into());
        }
        if !(self.rating_mva > 0.0) {
            return Err("compensator rating must be positive".into());
        }
        Ok(())
    }

    pub fn band(&self) -> (f64, f64) {
        (self.v_target - self.dead_band, self.v_target + self.dead_band)
    }

    /// `V_est` from a measurement on the system base `s_base_mva`.
    pub fn estimate_from_system(&self, v0: Complex64, i0_sys: Complex64, s_base_mva: f64) -> f64 {
        estimate_voltage(v0, i0_sys * (s_base_mva / self.rating_mva), self)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimerDirection {
    #[default]
    None,
    Over,
    Under,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OltcState {
    pub tap: i32,
    /// Timer reading, seconds.
    pub timer_s: f64,
    pub direction: TimerDirection,
}

impl OltcState {
    pub fn at_tap(tap: i32) -> Self {
        Self {
            tap,
            ..Self::default()
        }
    }
}

/// `|V0 − I0·(R + jX)|`, all on the compensator's per-unit base.
pub fn estimate_voltage(v0: Complex64, i0: Complex64, settings: &LdcSettings) -> f64 {
    (v0 - i0 * Complex64::new(settings.r, settings.x)).norm()
}

/// One control interval of the timer-gated tap logic.
///
/// Returns the next state and the tap movement (−1, 0 or +1). An estimate
/// above the band lowers the tap, below raises it. The timer resets inside
/// the band, on a change of direction and right after a tap. At a tap limit
/// the timer saturates at the delay instead of firing.
pub fn oltc_step(state: OltcState, v_est: f64, dt: f64, settings: &LdcSettings) -> (OltcState, i32) {
    let (low, high) = settings.band();
    let direction = if v_est > high {
        TimerDirection::Over
    } else if v_est < low {
        TimerDirection::Under
    } else {
        return (OltcState::at_tap(state.tap), 0);
    };

    let carried = if state.direction == direction {
        state.timer_s
    } else {
        0.0
    };
    let timer = carried + dt;
    let (delta, can_move) = match direction {
        TimerDirection::Over => (-1, state.tap > settings.tap_min),
        _ => (1, state.tap < settings.tap_max),
    };

    if timer >= settings.delay_s {
        if can_move {
            return (OltcState::at_tap(state.tap + delta), delta);
        }
        return (
            OltcState {
                tap: state.tap,
                timer_s: settings.delay_s,
                direction,
            },
            0,
        );
    }
    (
        OltcState {
            tap: state.tap,
            timer_s: timer,
            direction,
        },
        0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polar(r: f64, deg: f64) -> Complex64 {
        Complex64::from_polar(r, deg * PI / 180.0)
    }

    #[test]
    fn zero_current_gives_measured_voltage() {
        let s = LdcSettings::default();
        let v0 = polar(1.013, -3.0);
        assert_eq!(estimate_voltage(v0, Complex64::new(0.0, 0.0), &s), v0.norm());
    }

    #[test]
    fn forward_and_reverse_flow_estimates() {
        let s = LdcSettings::default();
        // 1 − 0.05·(0.864 + j0.538) = 0.9568 − j0.0269
        let fwd = estimate_voltage(polar(1.0, 0.0), polar(0.05, 0.0), &s);
        let hand = (0.9568f64.powi(2) + 0.0269f64.powi(2)).sqrt();
        assert!((fwd - hand).abs() < 1e-12);
        assert!((fwd - 0.95718).abs() < 5e-6);
        let rev = estimate_voltage(polar(1.0, 0.0), polar(-0.05, 0.0), &s);
        let hand = (1.0432f64.powi(2) + 0.0269f64.powi(2)).sqrt();
        assert!((rev - hand).abs() < 1e-12);
        assert!((rev - 1.04355).abs() < 5e-6);
        assert!(rev > 1.0);
    }

    #[test]
    fn in_band_resets_timer() {
        let s = LdcSettings::default();
        let prior = OltcState {
            tap: 3,
            timer_s: 120.0,
            direction: TimerDirection::Under,
        };
        let (next, delta) = oltc_step(prior, 1.003, 60.0, &s);
        assert_eq!(delta, 0);
        assert_eq!(next, OltcState::at_tap(3));
    }

    #[test]
    fn persistent_overvoltage_taps_down_on_third_step() {
        let s = LdcSettings::default();
        let mut state = OltcState::at_tap(0);
        let mut deltas = Vec::new();
        for _ in 0..3 {
            let (next, d) = oltc_step(state, 1.02, 60.0, &s);
            state = next;
            deltas.push(d);
        }
        assert_eq!(deltas, vec![0, 0, -1]);
        assert_eq!(state.tap, -1);
        assert_eq!(state.timer_s, 0.0);
        assert_eq!(state.direction, TimerDirection::None);
    }

    #[test]
    fn interrupted_timer_never_fires() {
        let s = LdcSettings::default();
        let mut state = OltcState::at_tap(0);
        for v in [1.02, 1.02, 1.0, 1.02, 1.02, 1.0, 1.02] {
            let (next, d) = oltc_step(state, v, 60.0, &s);
            assert_eq!(d, 0);
            state = next;
        }
        assert_eq!(state.tap, 0);
    }

    #[test]
    fn direction_change_restarts_timer() {
        let s = LdcSettings::default();
        let (a, _) = oltc_step(OltcState::at_tap(0), 1.02, 60.0, &s);
        let (b, _) = oltc_step(a, 1.02, 60.0, &s);
        let (c, d) = oltc_step(b, 0.98, 60.0, &s);
        assert_eq!(d, 0);
        assert_eq!(c.timer_s, 60.0);
        assert_eq!(c.direction, TimerDirection::Under);
    }

    #[test]
    fn timer_saturates_at_limit() {
        let s = LdcSettings::default();
        let mut state = OltcState::at_tap(s.tap_min);
        for _ in 0..10 {
            let (next, d) = oltc_step(state, 1.05, 60.0, &s);
            assert_eq!(d, 0);
            state = next;
        }
        assert_eq!(state.tap, s.tap_min);
        assert_eq!(state.timer_s, s.delay_s);
        // relief from the opposite side starts a fresh count
        let (next, d) = oltc_step(state, 0.95, 60.0, &s);
        assert_eq!(d, 0);
        assert_eq!(next.timer_s, 60.0);
    }
}
