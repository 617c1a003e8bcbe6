//! Two-channel super-twisting trajectory tracker.
//!
//! Pipeline per step: transformed errors → surfaces `s_q = q̃₂ + c q̃₁` → STA with
//! `w_eq = q̇_r2 − c q̃₂` → clamp to `±U_q` → inverse input map → clamp `u_v`, `u_ω`
//! → wheel mixing → per-wheel clamp.

use serde::{Deserialize, Serialize};

use crate::dynamics::{RobotParams, RobotState, WheelCommand};
use crate::linearization::{self, default_look_ahead, max_transformed_bound};
use crate::math::sat_to;
use crate::reference::ReferencePoint;
use crate::sta::{self, StaGains, StaState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingGains {
    /// Surface slope shared by both channels.
    #[serde(default = "TrackingGains::default_c")]
    pub c: f64,
    #[serde(default = "TrackingGains::default_k1")]
    pub k1: f64,
    #[serde(default = "TrackingGains::default_k2")]
    pub k2: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            c: Self::default_c(),
            k1: Self::default_k1(),
            k2: Self::default_k2(),
        }
    }
}

impl TrackingGains {
    fn default_c() -> f64 {
        10.0
    }
    fn default_k1() -> f64 {
        2.0
    }
    fn default_k2() -> f64 {
        0.5
    }

    pub fn sta(&self, output_bound: f64) -> StaGains {
        StaGains::new(self.k1, self.k2, self.c).with_output_bound(output_bound)
    }
}

/// Diagnostics of one tracking update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrackingOutput {
    pub command: WheelCommand,
    pub s_eta: f64,
    pub s_xi: f64,
    pub u_eta: f64,
    pub u_xi: f64,
}

/// Tracking controller for one robot.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub gains: TrackingGains,
    params: RobotParams,
    look_ahead: f64,
    bound: f64,
    eta: StaState,
    xi: StaState,
}

impl Tracker {
    pub fn new(gains: TrackingGains, params: RobotParams) -> Self {
        Self {
            gains,
            params,
            look_ahead: default_look_ahead(&params),
            bound: max_transformed_bound(&params),
            eta: StaState::default(),
            xi: StaState::default(),
        }
    }

    /// `U_q = 2bU(1 − bU/(a²d))`.
    pub fn channel_bound(&self) -> f64 {
        self.bound
    }

    pub fn look_ahead(&self) -> f64 {
        self.look_ahead
    }

    pub fn states(&self) -> (StaState, StaState) {
        (self.eta, self.xi)
    }

    pub fn reset(&mut self) {
        self.eta.reset();
        self.xi.reset();
    }

    /// Surfaces `(s_η, s_ξ)` without advancing anything.
    pub fn surfaces(&self, state: &RobotState, reference: &ReferencePoint) -> (f64, f64) {
        let ts = linearization::forward(state, self.look_ahead);
        (
            sta::surface(
                ts.eta1 - reference.eta1,
                ts.eta2 - reference.eta2,
                self.gains.c,
            ),
            sta::surface(ts.xi1 - reference.xi1, ts.xi2 - reference.xi2, self.gains.c),
        )
    }

    pub fn track(
        &mut self,
        state: &RobotState,
        reference: &ReferencePoint,
        dt: f64,
    ) -> TrackingOutput {
        let ts = linearization::forward(state, self.look_ahead);
        let c = self.gains.c;
        let sta_gains = self.gains.sta(self.bound);

        let (e1, e2) = (ts.eta1 - reference.eta1, ts.eta2 - reference.eta2);
        let s_eta = sta::surface(e1, e2, c);
        let u_eta = sta::control(
            s_eta,
            reference.eta2_dot - c * e2,
            &sta_gains,
            &mut self.eta,
            dt,
        );

        let (e1, e2) = (ts.xi1 - reference.xi1, ts.xi2 - reference.xi2);
        let s_xi = sta::surface(e1, e2, c);
        let u_xi = sta::control(
            s_xi,
            reference.xi2_dot - c * e2,
            &sta_gains,
            &mut self.xi,
            dt,
        );

        let u_eta = sat_to(u_eta, self.bound);
        let u_xi = sat_to(u_xi, self.bound);
        let (u_v, u_w) =
            linearization::input_inverse(u_eta, u_xi, state, &self.params, self.look_ahead);
        TrackingOutput {
            command: WheelCommand::from_body(u_v, u_w, &self.params),
            s_eta,
            s_xi,
            u_eta,
            u_xi,
        }
    }
}

/// Half-angle `φ = arctan(v_r/(Lω_r))` of the heading zero dynamics; the spurious
/// equilibrium sits at `θ̃ = −2φ`.
pub fn zero_dynamics_phase(v_r: f64, omega_r: f64, look_ahead: f64) -> f64 {
    v_r.atan2(look_ahead * omega_r)
}

/// Heading-error rate once both surfaces are pinned: `√(L²ω_r² + v_r²)/L · (cos(θ̃+φ) − cos φ)`.
pub fn zero_dynamics_rate(theta_err: f64, v_r: f64, omega_r: f64, look_ahead: f64) -> f64 {
    let phi = zero_dynamics_phase(v_r, omega_r, look_ahead);
    (look_ahead * look_ahead * omega_r * omega_r + v_r * v_r).sqrt() / look_ahead
        * ((theta_err + phi).cos() - phi.cos())
}

/// Robot state whose look-ahead point and its velocity coincide with the reference's
/// while the heading is offset by `theta_err`. Both surfaces start at zero.
pub fn state_on_surfaces(
    reference: &ReferencePoint,
    theta_err: f64,
    look_ahead: f64,
) -> RobotState {
    let ts = linearization::TransformedState {
        eta1: reference.eta1,
        xi1: reference.xi1,
        eta2: reference.eta2,
        xi2: reference.xi2,
        theta: crate::math::wrap_angle(reference.theta + theta_err),
    };
    linearization::inverse(&ts, look_ahead)
}
