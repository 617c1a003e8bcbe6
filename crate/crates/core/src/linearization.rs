//! Look-ahead point feedback linearization.
//!
//! The point `L` metres ahead of the axle centre turns the plant into two double
//! integrators `(η₁, η₂)`, `(ξ₁, ξ₂)` with the heading left over as zero dynamics.

use thiserror::Error;

use crate::dynamics::{RobotParams, RobotState};
use crate::math::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizationError {
    #[error("look-ahead L={l} outside the admissible interval ({lo}, {hi})")]
    InadmissibleLookAhead { l: f64, lo: f64, hi: f64 },
}

/// Coordinates of the linearized system.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransformedState {
    pub eta1: f64,
    pub xi1: f64,
    pub eta2: f64,
    pub xi2: f64,
    pub theta: f64,
}

/// `[η₁ ξ₁]ᵀ = [x y]ᵀ + R_θ[L 0]ᵀ`, `[η₂ ξ₂]ᵀ = R_θ[v Lω]ᵀ`.
pub fn forward(state: &RobotState, look_ahead: f64) -> TransformedState {
    let p = state.position() + Vec2::new(look_ahead, 0.0).rotate(state.theta);
    let vel = Vec2::new(state.v, look_ahead * state.omega).rotate(state.theta);
    TransformedState {
        eta1: p.x,
        xi1: p.y,
        eta2: vel.x,
        xi2: vel.y,
        theta: state.theta,
    }
}

pub fn inverse(ts: &TransformedState, look_ahead: f64) -> RobotState {
    let p = Vec2::new(ts.eta1, ts.xi1) - Vec2::new(look_ahead, 0.0).rotate(ts.theta);
    let vel = Vec2::new(ts.eta2, ts.xi2).rotate_inv(ts.theta);
    RobotState::new(p.x, p.y, ts.theta, vel.x, vel.y / look_ahead)
}

/// Maps transformed inputs `(u_η, u_ξ)` back to body inputs `(u_v, u_ω)`.
pub fn input_inverse(
    u_eta: f64,
    u_xi: f64,
    state: &RobotState,
    params: &RobotParams,
    look_ahead: f64,
) -> (f64, f64) {
    let w = Vec2::new(u_eta, u_xi).rotate_inv(state.theta);
    let (v, om, a, b) = (state.v, state.omega, params.a, params.b);
    let u_v = (a * v + look_ahead * om * om + w.x) / b;
    let l_u_omega = (a * look_ahead * om - v * om + w.y) / b;
    (u_v, l_u_omega / look_ahead)
}

/// Open interval `(bU/(2a²), a²d²/(2bU))` of look-ahead values for which both
/// transformed-input bounds are positive.
pub fn look_ahead_interval(params: &RobotParams) -> (f64, f64) {
    let RobotParams { a, b, d, u_max: u } = *params;
    (b * u / (2.0 * a * a), a * a * d * d / (2.0 * b * u))
}

/// The two affine branches of `U'(L)`: (decreasing thrust branch, increasing turn branch).
pub fn bound_branches(params: &RobotParams, look_ahead: f64) -> (f64, f64) {
    let RobotParams { a, b, d, u_max: u } = *params;
    let l = look_ahead;
    let thrust = 2.0 * b * u - 4.0 * l * b * b * u * u / (a * a * d * d);
    let turn = 4.0 * l * b * u / d - 2.0 * b * b * u * u / (a * a * d);
    (thrust, turn)
}

/// `U'(L)`, the infinity-norm bound on `(u_η, u_ξ)` that keeps the body inputs admissible.
pub fn bound_profile(params: &RobotParams, look_ahead: f64) -> Result<f64, LinearizationError> {
    let (lo, hi) = look_ahead_interval(params);
    if !(look_ahead > lo && look_ahead < hi) {
        return Err(LinearizationError::InadmissibleLookAhead {
            l: look_ahead,
            lo,
            hi,
        });
    }
    let (thrust, turn) = bound_branches(params, look_ahead);
    Ok(thrust.min(turn))
}

/// `U'(d/2) = 2bU(1 − bU/(a²d))`, the bound used by the tracking channels.
pub fn max_transformed_bound(params: &RobotParams) -> f64 {
    let RobotParams { a, b, d, u_max: u } = *params;
    2.0 * b * u * (1.0 - b * u / (a * a * d))
}

/// Look-ahead used throughout: half the wheel separation.
pub fn default_look_ahead(params: &RobotParams) -> f64 {
    params.d / 2.0
}
