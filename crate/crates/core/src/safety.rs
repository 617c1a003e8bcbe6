//! Distance-only safety control.
//!
//! With `ζ₁ = d_o − d̄_o` and `ζ₂ = ζ̇₁`, the distance obeys (near `δ ≈ ±π/2`)
//! `ζ̇₂ ≈ −vω + v²/d̄_o + Δ`. A super-twisting virtual input `û_ζ` on the surface
//! `s_ζ = ζ₂ + c_ζ ζ₁` is turned into a turn-rate reference
//! `ω̂_r = v/d̄_o − sat(û_ζ/U_ζ)·U_ζ/v`, which first-order backstepping loops on `ω`
//! and `v` then track. Only the measured distance and bearing are needed.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dynamics::{velocity_bounds, RobotParams, RobotState, WheelCommand};
use crate::geometry::{DistanceReading, Turn};
use crate::math::{sat, wrap_angle};
use crate::reference::V_MIN;
use crate::sta::{self, StaGains, StaState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyGains {
    pub c_zeta: f64,
    pub k1: f64,
    pub k2: f64,
    pub c_v: f64,
    pub c_omega: f64,
    /// Adds the `dω̂_r/dt` feed-forward to the angular loop. Off by default; the
    /// reference turn rate keeps moving while `δ̃` oscillates and the extra term
    /// only injects that motion into the wheels.
    #[serde(default)]
    pub omega_ref_feedforward: bool,
}

impl Default for SafetyGains {
    fn default() -> Self {
        Self::obstacle()
    }
}

impl SafetyGains {
    /// Gains for stationary and moving obstacles.
    pub const fn obstacle() -> Self {
        Self {
            c_zeta: 1.0,
            k1: 0.8,
            k2: 0.04,
            c_v: 5.0,
            c_omega: 5.0,
            omega_ref_feedforward: false,
        }
    }

    /// Gains for geofencing and border patrol.
    pub const fn border() -> Self {
        Self {
            c_zeta: 10.0,
            c_v: 3.0,
            c_omega: 3.0,
            ..Self::obstacle()
        }
    }
}

/// `U_ζ = (bU/a)²(2/d − 1/d̄_o)`, the admissible magnitude of `û_ζ`.
pub fn u_zeta_bound(params: &RobotParams, safe_distance: f64) -> f64 {
    let (v_max, _) = velocity_bounds(params);
    v_max * v_max * (2.0 / params.d - 1.0 / safe_distance)
}

/// Turn-rate reference for the given circulation direction. `v` is floored at
/// [`V_MIN`] where it divides.
pub fn omega_ref(v: f64, safe_distance: f64, u_zeta: f64, u_zeta_bound: f64, turn: Turn) -> f64 {
    let divisor = v.max(V_MIN);
    turn.sign() * (v / safe_distance - sat(u_zeta / u_zeta_bound) * u_zeta_bound / divisor)
}

/// Alignment error `δ̃ = δ ∓ π/2` (minus for counterclockwise).
pub fn alignment_error(delta: f64, turn: Turn) -> f64 {
    wrap_angle(delta - turn.sign() * FRAC_PI_2)
}

/// Analytic `ζ₂ = v cos δ`; the feature's own motion is left to the disturbance.
pub fn zeta2_analytic(state: &RobotState, reading: &DistanceReading) -> f64 {
    state.v * reading.delta.cos()
}

/// Distance-rate estimate. Stationary features use [`zeta2_analytic`]; moving ones a
/// first-order low-pass (time constant `10·dt`) on the finite difference of `d_o`.
#[derive(Clone, Debug, Default)]
pub struct ZetaRateEstimator {
    last: Option<(usize, f64)>,
    filtered: f64,
}

impl ZetaRateEstimator {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn estimate(
        &mut self,
        state: &RobotState,
        reading: &DistanceReading,
        moving: bool,
        dt: f64,
    ) -> f64 {
        let analytic = zeta2_analytic(state, reading);
        if !moving {
            self.last = Some((reading.feature, reading.distance));
            self.filtered = analytic;
            return analytic;
        }
        let out = match self.last {
            Some((feature, prev)) if feature == reading.feature => {
                let raw = (reading.distance - prev) / dt;
                let alpha = dt / (10.0 * dt + dt);
                self.filtered += alpha * (raw - self.filtered);
                self.filtered
            }
            _ => {
                self.filtered = analytic;
                analytic
            }
        };
        self.last = Some((reading.feature, reading.distance));
        out
    }
}

/// Diagnostics of one safety update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SafetyOutput {
    pub command: WheelCommand,
    pub zeta1: f64,
    pub zeta2: f64,
    pub s_zeta: f64,
    pub u_zeta: f64,
    pub omega_ref: f64,
    pub alignment_error: f64,
}

/// What the safety law needs to know about the feature it is holding off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyTarget {
    pub safe_distance: f64,
    pub turn: Turn,
    pub moving: bool,
}

#[derive(Clone, Debug)]
pub struct SafetyController {
    pub gains: SafetyGains,
    params: RobotParams,
    sta: StaState,
    rate: ZetaRateEstimator,
    last_omega_ref: Option<f64>,
}

impl SafetyController {
    pub fn new(gains: SafetyGains, params: RobotParams) -> Self {
        Self {
            gains,
            params,
            sta: StaState::default(),
            rate: ZetaRateEstimator::default(),
            last_omega_ref: None,
        }
    }

    /// Clears the integral and rate filter; called on every entry into safety mode.
    pub fn activate(&mut self) {
        self.sta.reset();
        self.rate.reset();
        self.last_omega_ref = None;
    }

    pub fn sta_state(&self) -> StaState {
        self.sta
    }

    pub fn command(
        &mut self,
        state: &RobotState,
        reading: &DistanceReading,
        target: SafetyTarget,
        v_target: f64,
        dt: f64,
    ) -> SafetyOutput {
        let g = self.gains;
        let p = self.params;
        let bound = u_zeta_bound(&p, target.safe_distance);

        let zeta1 = reading.distance - target.safe_distance;
        let zeta2 = self.rate.estimate(state, reading, target.moving, dt);
        let s_zeta = sta::surface(zeta1, zeta2, g.c_zeta);
        let sta_gains = StaGains::new(g.k1, g.k2, g.c_zeta).with_output_bound(bound);
        let u_zeta = sta::control(s_zeta, -g.c_zeta * zeta2, &sta_gains, &mut self.sta, dt);

        let w_ref = omega_ref(state.v, target.safe_distance, u_zeta, bound, target.turn);
        let feedforward = match (g.omega_ref_feedforward, self.last_omega_ref) {
            (true, Some(prev)) => (w_ref - prev) / dt,
            _ => 0.0,
        };
        self.last_omega_ref = Some(w_ref);

        let u_omega = (-g.c_omega * (state.omega - w_ref) + p.a * state.omega + feedforward) / p.b;
        let u_v = (-g.c_v * (state.v - v_target) + p.a * state.v) / p.b;

        SafetyOutput {
            command: WheelCommand::from_body(u_v, u_omega, &p),
            zeta1,
            zeta2,
            s_zeta,
            u_zeta,
            omega_ref: w_ref,
            alignment_error: alignment_error(reading.delta, target.turn),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::body_inputs;
    use crate::math::Vec2;
    use std::f64::consts::PI;

    const P: RobotParams = RobotParams::reference_robot();

    fn reading(distance: f64, delta: f64) -> DistanceReading {
        DistanceReading {
            feature: 0,
            closest: Vec2::ZERO,
            distance,
            bearing: 0.0,
            delta,
            at_vertex: false,
        }
    }

    const CCW: SafetyTarget = SafetyTarget {
        safe_distance: 0.5,
        turn: Turn::Counterclockwise,
        moving: false,
    };

    #[test]
    fn omega_ref_examples() {
        let b = u_zeta_bound(&P, 0.5);
        assert!((omega_ref(0.7, 0.5, 0.0, b, Turn::Counterclockwise) - 1.4).abs() < 1e-12);
        assert!((b - 3.1902).abs() < 5e-5, "{b}");
        let over = omega_ref(0.7, 0.5, 2.0 * b, b, Turn::Counterclockwise);
        assert!((over - (1.4 - b / 0.7)).abs() < 1e-12);
        assert_eq!(
            omega_ref(0.7, 0.5, 0.3, b, Turn::Clockwise),
            -omega_ref(0.7, 0.5, 0.3, b, Turn::Counterclockwise)
        );
    }

    #[test]
    fn zeta2_examples() {
        let s = RobotState::new(0.0, 0.0, 0.0, 0.6, 0.0);
        assert!(zeta2_analytic(&s, &reading(1.0, PI / 2.0)).abs() < 1e-15);
        assert!((zeta2_analytic(&s, &reading(1.0, PI / 3.0)) - 0.3).abs() < 1e-12);
        assert_eq!(zeta2_analytic(&s, &reading(1.0, 0.0)), 0.6);
    }

    #[test]
    fn on_safe_circle_is_pure_decay_compensation() {
        let v = 0.5;
        let w = v / CCW.safe_distance;
        let s = RobotState::new(0.5, 0.0, PI / 2.0, v, w);
        let mut c = SafetyController::new(SafetyGains::obstacle(), P);
        let out = c.command(&s, &reading(0.5, PI / 2.0), CCW, v, 1e-3);
        assert!(out.zeta1.abs() < 1e-15 && out.zeta2.abs() < 1e-15);
        // cos(π/2) is not exactly zero and the STA responds with √|σ|
        assert!((out.omega_ref - w).abs() < 1e-6);
        let (uv, uw) = body_inputs(out.command, &P);
        assert!((uv - P.a * v / P.b).abs() < 1e-12);
        assert!((uw - P.a * w / P.b).abs() < 1e-6);
    }

    #[test]
    fn too_far_tightens_the_turn() {
        let s = RobotState::new(0.6, 0.0, PI / 2.0, 0.5, 1.0);
        let mut c = SafetyController::new(SafetyGains::obstacle(), P);
        let out = c.command(&s, &reading(0.6, PI / 2.0), CCW, 0.5, 1e-3);
        assert!(out.u_zeta < 0.0);
        assert!(out.omega_ref > 0.5 / 0.5);
    }

    #[test]
    fn moving_feature_rate_filter() {
        let mut est = ZetaRateEstimator::default();
        let s = RobotState::new(0.0, 0.0, 0.0, 0.4, 0.0);
        let dt = 1e-3;
        // distance shrinking at 1 m/s; analytic value would be 0.4·cos(π) = −0.4
        let first = est.estimate(&s, &reading(2.0, PI), true, dt);
        assert!((first + 0.4).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..200 {
            last = est.estimate(&s, &reading(2.0 - k as f64 * dt, PI), true, dt);
        }
        assert!((last + 1.0).abs() < 1e-6, "{last}");
        // a feature switch resets to the analytic value
        let mut r = reading(1.0, PI / 3.0);
        r.feature = 4;
        assert!((est.estimate(&s, &r, true, dt) - 0.2).abs() < 1e-12);
    }
}
