//! Super-twisting algorithm.
//!
//! For a perturbed double integrator with errors `(e₁, e₂)` the controller drives the
//! surface `σ = e₂ + λe₁` to zero in finite time with the continuous law
//! `w = w_eq − k₁√|σ| sign(σ) − k₂∫sign(σ)`.

use serde::{Deserialize, Serialize};

use crate::math::{sat_to, sign};

/// Gains of one super-twisting channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaGains {
    pub k1: f64,
    pub k2: f64,
    /// Surface slope λ, 1/s.
    pub lambda: f64,
    /// Output bound `M_w`; enables conditional-integration anti-windup when set.
    pub output_bound: Option<f64>,
}

impl StaGains {
    pub const fn new(k1: f64, k2: f64, lambda: f64) -> Self {
        Self {
            k1,
            k2,
            lambda,
            output_bound: None,
        }
    }

    pub const fn with_output_bound(mut self, bound: f64) -> Self {
        self.output_bound = Some(bound);
        self
    }
}

/// Integral state of one channel: `integral` is `∫sign(σ)dτ`, unscaled.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StaState {
    pub integral: f64,
    /// Whether the last step saturated and froze the integral.
    pub saturated: bool,
}

impl StaState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Mirrored state, for sign-symmetry checks.
    pub fn mirrored(&self) -> Self {
        Self {
            integral: -self.integral,
            saturated: self.saturated,
        }
    }
}

pub fn surface(e1: f64, e2: f64, lambda: f64) -> f64 {
    e2 + lambda * e1
}

/// One controller update. The output uses the integral accumulated so far; the
/// integral then advances by `sign(σ)·dt` (forward Euler) unless the output had to be
/// clamped to `±M_w`, in which case it is frozen for this step.
pub fn control(sigma: f64, w_eq: f64, gains: &StaGains, state: &mut StaState, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    let s = sign(sigma);
    let w = w_eq - gains.k1 * sigma.abs().sqrt() * s - gains.k2 * state.integral;
    match gains.output_bound {
        Some(bound) if w.abs() > bound => {
            state.saturated = true;
            sat_to(w, bound)
        }
        Some(bound) => {
            state.saturated = false;
            state.integral += s * dt;
            if gains.k2 > 0.0 {
                let cap = bound / gains.k2;
                state.integral = state.integral.clamp(-cap, cap);
            }
            w
        }
        None => {
            state.saturated = false;
            state.integral += s * dt;
            w
        }
    }
}

/// Which of the sufficient gain conditions `k₂ > L_Δ`, `k₁ > 2√k₂` fail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainReport {
    /// `k₂ − L_Δ`; must be positive.
    pub integral_margin: f64,
    /// `k₁ − 2√k₂`; must be positive.
    pub proportional_margin: f64,
}

impl GainReport {
    pub fn integral_ok(&self) -> bool {
        self.integral_margin > 0.0
    }

    pub fn proportional_ok(&self) -> bool {
        self.proportional_margin > 0.0
    }

    pub fn is_ok(&self) -> bool {
        self.integral_ok() && self.proportional_ok()
    }
}

impl std::fmt::Display for GainReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k2 > L_delta: {} (margin {:+.4}); k1 > 2 sqrt(k2): {} (margin {:+.4})",
            if self.integral_ok() { "ok" } else { "VIOLATED" },
            self.integral_margin,
            if self.proportional_ok() {
                "ok"
            } else {
                "VIOLATED"
            },
            self.proportional_margin
        )
    }
}

pub fn validate_gains(gains: &StaGains, lipschitz: f64) -> GainReport {
    GainReport {
        integral_margin: gains.k2 - lipschitz,
        proportional_margin: gains.k1 - 2.0 * gains.k2.sqrt(),
    }
}
