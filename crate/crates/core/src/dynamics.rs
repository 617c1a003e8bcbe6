//! Differential-drive plant: unicycle kinematics driven by two first-order wheel motors.
//!
//! State is `[x, y, θ, v, ω]`, inputs are the right/left motor voltages. Each wheel obeys
//! `v̇_i = −a v_i + b u_i + Δ_i`, which after mixing gives
//! `v̇ = −a v + b u_v + Δ_v` and `ω̇ = −a ω + b u_ω + Δ_ω`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{sat_to, wrap_angle, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("motor pole a must be positive, got {0}")]
    NonPositivePole(f64),
    #[error("motor gain b must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("wheel separation d must be positive, got {0}")]
    NonPositiveSeparation(f64),
    #[error("voltage bound U={u} must satisfy 0 < U < a²d/b = {limit}")]
    VoltageBound { u: f64, limit: f64 },
}

/// Motor and geometry constants of one robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Motor pole, 1/s.
    pub a: f64,
    /// Motor gain, (m/s²)/V.
    pub b: f64,
    /// Wheel separation, m.
    pub d: f64,
    /// Per-wheel voltage bound, V.
    pub u_max: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self::reference_robot()
    }
}

impl RobotParams {
    /// The robot used by all shipped case studies.
    pub const fn reference_robot() -> Self {
        Self {
            a: 3.85,
            b: 3.85,
            d: 0.235,
            u_max: 0.7,
        }
    }

    pub fn new(a: f64, b: f64, d: f64, u_max: f64) -> Result<Self, ParamError> {
        let p = Self { a, b, d, u_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.a > 0.0) {
            return Err(ParamError::NonPositivePole(self.a));
        }
        if !(self.b > 0.0) {
            return Err(ParamError::NonPositiveGain(self.b));
        }
        if !(self.d > 0.0) {
            return Err(ParamError::NonPositiveSeparation(self.d));
        }
        let limit = self.voltage_limit();
        if !(self.u_max > 0.0 && self.u_max < limit) {
            return Err(ParamError::VoltageBound {
                u: self.u_max,
                limit,
            });
        }
        Ok(())
    }

    /// Upper admissible voltage bound `a²d/b`.
    pub fn voltage_limit(&self) -> f64 {
        self.a * self.a * self.d / self.b
    }

    /// Bound on the angular voltage channel, `2U/d`.
    pub fn u_omega_max(&self) -> f64 {
        2.0 * self.u_max / self.d
    }
}

/// Plant state. `theta` is kept in (−π, π].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub const fn new(x: f64, y: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            theta,
            v,
            omega,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.theta, self.v, self.omega]
    }

    fn from_array(s: [f64; 5]) -> Self {
        Self::new(s[0], s[1], s[2], s[3], s[4])
    }
}

/// Right/left motor voltages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WheelCommand {
    pub u_r: f64,
    pub u_l: f64,
}

impl WheelCommand {
    pub const fn new(u_r: f64, u_l: f64) -> Self {
        Self { u_r, u_l }
    }

    /// Clamps both wheels to `±U`.
    pub fn saturate(self, params: &RobotParams) -> Self {
        Self::new(
            sat_to(self.u_r, params.u_max),
            sat_to(self.u_l, params.u_max),
        )
    }

    /// Builds wheel voltages from body-channel inputs through
    /// `[u_R u_L]ᵀ = [[1, d/2], [1, −d/2]] [U sat(u_v/U), U_ω sat(u_ω/U_ω)]ᵀ`
    /// followed by the per-wheel clamp.
    pub fn from_body(u_v: f64, u_omega: f64, params: &RobotParams) -> Self {
        let u_v = sat_to(u_v, params.u_max);
        let u_omega = sat_to(u_omega, params.u_omega_max());
        let half = params.d / 2.0;
        Self::new(u_v + half * u_omega, u_v - half * u_omega).saturate(params)
    }
}

/// Mixes wheel voltages into the thrust and turning inputs `(u_v, u_ω)`.
pub fn body_inputs(cmd: WheelCommand, params: &RobotParams) -> (f64, f64) {
    ((cmd.u_r + cmd.u_l) / 2.0, (cmd.u_r - cmd.u_l) / params.d)
}

/// `(bU/a, 2bU/(ad))`: the velocity envelope of the nominal saturated plant.
pub fn velocity_bounds(params: &RobotParams) -> (f64, f64) {
    let v_max = params.b * params.u_max / params.a;
    (v_max, 2.0 * v_max / params.d)
}

/// Bounded, Lipschitz wheel perturbation `Δ(t)` in m/s².
#[derive(Clone, Debug, PartialEq)]
pub enum Disturbance {
    Zero,
    Constant(f64),
    /// `amplitude · sin(frequency · t + phase)`, frequency in rad/s.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Piecewise-linear random walk on a fixed knot grid. Slopes are drawn in
    /// `[−lipschitz, lipschitz]` and knot values clamped to `±bound`, so both
    /// declared constants hold exactly under linear interpolation.
    RandomWalk(RandomWalk),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomWalk {
    knot_spacing: f64,
    knots: Vec<f64>,
    bound: f64,
    lipschitz: f64,
}

impl RandomWalk {
    pub fn new(bound: f64, lipschitz: f64, horizon: f64, knot_spacing: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (horizon / knot_spacing).ceil() as usize + 2;
        let mut knots = Vec::with_capacity(n);
        let mut value = if bound > 0.0 {
            rng.random_range(-bound..=bound)
        } else {
            0.0
        };
        knots.push(value);
        for _ in 1..n {
            let slope = if lipschitz > 0.0 {
                rng.random_range(-lipschitz..=lipschitz)
            } else {
                0.0
            };
            value = (value + slope * knot_spacing).clamp(-bound, bound);
            knots.push(value);
        }
        Self {
            knot_spacing,
            knots,
            bound,
            lipschitz,
        }
    }

    fn sample(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.knots[0];
        }
        let pos = t / self.knot_spacing;
        let i = pos.floor() as usize;
        if i + 1 >= self.knots.len() {
            return *self.knots.last().unwrap();
        }
        let frac = pos - i as f64;
        self.knots[i] + frac * (self.knots[i + 1] - self.knots[i])
    }
}

impl Disturbance {
    pub fn sample(&self, t: f64) -> f64 {
        match self {
            Disturbance::Zero => 0.0,
            Disturbance::Constant(c) => *c,
            Disturbance::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            Disturbance::RandomWalk(w) => w.sample(t),
        }
    }

    /// Declared magnitude bound `M`.
    pub fn bound(&self) -> f64 {
        match self {
            Disturbance::Zero => 0.0,
            Disturbance::Constant(c) => c.abs(),
            Disturbance::Sinusoid { amplitude, .. } => amplitude.abs(),
            Disturbance::RandomWalk(w) => w.bound,
        }
    }

    /// Declared Lipschitz constant `L`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Disturbance::Zero | Disturbance::Constant(_) => 0.0,
            Disturbance::Sinusoid {
                amplitude,
                frequency,
                ..
            } => (amplitude * frequency).abs(),
            Disturbance::RandomWalk(w) => w.lipschitz,
        }
    }
}

/// A right/left pair of wheel perturbations.
#[derive(Clone, Debug, PartialEq)]
pub struct WheelDisturbance {
    pub right: Disturbance,
    pub left: Disturbance,
}

impl Default for WheelDisturbance {
    fn default() -> Self {
        Self::zero()
    }
}

impl WheelDisturbance {
    pub fn zero() -> Self {
        Self {
            right: Disturbance::Zero,
            left: Disturbance::Zero,
        }
    }

    pub fn sample(&self, t: f64) -> (f64, f64) {
        (self.right.sample(t), self.left.sample(t))
    }

    /// Bound and Lipschitz constant of `(Δ_v, Δ_ω)`.
    pub fn body_class(&self, params: &RobotParams) -> BodyDisturbanceClass {
        let (mr, ml) = (self.right.bound(), self.left.bound());
        let (lr, ll) = (self.right.lipschitz(), self.left.lipschitz());
        BodyDisturbanceClass {
            bound_v: (mr + ml) / 2.0,
            bound_omega: (mr + ml) / params.d,
            lipschitz_v: (lr + ll) / 2.0,
            lipschitz_omega: (lr + ll) / params.d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyDisturbanceClass {
    pub bound_v: f64,
    pub bound_omega: f64,
    pub lipschitz_v: f64,
    pub lipschitz_omega: f64,
}

/// Right-hand side of the full plant, for an already-saturated command and a sampled
/// wheel perturbation pair `(Δ_R, Δ_L)`.
pub fn derivative(
    state: &RobotState,
    cmd: WheelCommand,
    dist: (f64, f64),
    params: &RobotParams,
) -> [f64; 5] {
    let (u_v, u_w) = body_inputs(cmd, params);
    let delta_v = (dist.0 + dist.1) / 2.0;
    let delta_w = (dist.0 - dist.1) / params.d;
    let (s, c) = state.theta.sin_cos();
    [
        state.v * c,
        state.v * s,
        state.omega,
        -params.a * state.v + params.b * u_v + delta_v,
        -params.a * state.omega + params.b * u_w + delta_w,
    ]
}

/// One classic RK4 step of length `dt` starting at time `t`, with the command held
/// and the disturbance sampled at the stage times. `θ` is re-wrapped afterwards.
pub fn step(
    state: &RobotState,
    cmd: WheelCommand,
    dist: &WheelDisturbance,
    params: &RobotParams,
    t: f64,
    dt: f64,
) -> RobotState {
    debug_assert!(dt > 0.0);
    let f = |s: [f64; 5], tau: f64| {
        derivative(&RobotState::from_array(s), cmd, dist.sample(tau), params)
    };
    let y = state.to_array();
    let out = rk4(y, t, dt, f);
    let mut next = RobotState::from_array(out);
    next.theta = wrap_angle(next.theta);
    next
}

/// Generic fixed-step RK4 for small state vectors.
pub fn rk4<const N: usize>(
    y: [f64; N],
    t: f64,
    dt: f64,
    f: impl Fn([f64; N], f64) -> [f64; N],
) -> [f64; N] {
    let axpy = |base: [f64; N], k: [f64; N], h: f64| {
        let mut out = base;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(y, t);
    let k2 = f(axpy(y, k1, dt / 2.0), t + dt / 2.0);
    let k3 = f(axpy(y, k2, dt / 2.0), t + dt / 2.0);
    let k4 = f(axpy(y, k3, dt), t + dt);
    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
