//! Reference trajectories generated from speed/turn-rate profiles.
//!
//! The reference pose integrates `ẋ_r = v_r cos θ_r`, `ẏ_r = v_r sin θ_r`, `θ̇_r = ω_r`,
//! so every reference is nonholonomic by construction. Profiles are declarative
//! segments with analytic derivatives, which lets the tracking law use exact
//! `η̇_r2`, `ξ̇_r2` instead of numerically differentiated ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{rk4, RobotState};
use crate::linearization;
use crate::math::{angle_diff, wrap_angle};

/// Floor on the shadowed speed; the safety law divides by the robot speed.
pub const V_MIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("reference speed must stay positive, got v_r={v} at t={t}")]
    NonPositiveSpeed { v: f64, t: f64 },
    #[error("reference profile has no segments")]
    EmptyProfile,
    #[error("segment {index} has non-positive duration {duration}")]
    BadDuration { index: usize, duration: f64 },
}

/// Instantaneous reference rates and their time derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rates {
    pub v: f64,
    pub omega: f64,
    pub v_dot: f64,
    pub omega_dot: f64,
}

/// One piece of a reference profile. The last segment is held past its duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSegment {
    Constant {
        duration_s: f64,
        v_mps: f64,
        omega_radps: f64,
    },
    /// `v = v_mean + v_amp sin(f t + φ)`, `ω = ω_mean + ω_amp sin(f t + φ)` with `t`
    /// measured from the segment start.
    Sinusoid {
        duration_s: f64,
        v_mean_mps: f64,
        #[serde(default)]
        v_amplitude_mps: f64,
        omega_mean_radps: f64,
        #[serde(default)]
        omega_amplitude_radps: f64,
        frequency_radps: f64,
        #[serde(default)]
        phase_rad: f64,
    },
}

impl ProfileSegment {
    pub fn duration(&self) -> f64 {
        match self {
            ProfileSegment::Constant { duration_s, .. }
            | ProfileSegment::Sinusoid { duration_s, .. } => *duration_s,
        }
    }

    fn rates(&self, local_t: f64) -> Rates {
        match *self {
            ProfileSegment::Constant {
                v_mps, omega_radps, ..
            } => Rates {
                v: v_mps,
                omega: omega_radps,
                v_dot: 0.0,
                omega_dot: 0.0,
            },
            ProfileSegment::Sinusoid {
                v_mean_mps,
                v_amplitude_mps,
                omega_mean_radps,
                omega_amplitude_radps,
                frequency_radps,
                phase_rad,
                ..
            } => {
                let (s, c) = (frequency_radps * local_t + phase_rad).sin_cos();
                Rates {
                    v: v_mean_mps + v_amplitude_mps * s,
                    omega: omega_mean_radps + omega_amplitude_radps * s,
                    v_dot: v_amplitude_mps * frequency_radps * c,
                    omega_dot: omega_amplitude_radps * frequency_radps * c,
                }
            }
        }
    }
}

/// A sequence of segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub segments: Vec<ProfileSegment>,
}

impl Profile {
    pub fn constant(v: f64, omega: f64) -> Self {
        Self {
            segments: vec![ProfileSegment::Constant {
                duration_s: 1.0,
                v_mps: v,
                omega_radps: omega,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), ReferenceError> {
        if self.segments.is_empty() {
            return Err(ReferenceError::EmptyProfile);
        }
        for (index, seg) in self.segments.iter().enumerate() {
            if !(seg.duration() > 0.0) {
                return Err(ReferenceError::BadDuration {
                    index,
                    duration: seg.duration(),
                });
            }
        }
        Ok(())
    }

    pub fn rates(&self, t: f64) -> Rates {
        let mut start = 0.0;
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if i == last || t < start + seg.duration() {
                return seg.rates(t - start);
            }
            start += seg.duration();
        }
        unreachable!("profile validated non-empty")
    }
}

/// Reference pose, rates, and their images under the look-ahead transform.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferencePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub eta1: f64,
    pub xi1: f64,
    pub eta2: f64,
    pub xi2: f64,
    pub eta2_dot: f64,
    pub xi2_dot: f64,
}

impl ReferencePoint {
    /// Builds the full reference point from a pose and its rates.
    pub fn from_pose(t: f64, x: f64, y: f64, theta: f64, rates: Rates, look_ahead: f64) -> Self {
        let ts = linearization::forward(
            &RobotState::new(x, y, theta, rates.v, rates.omega),
            look_ahead,
        );
        let (s, c) = theta.sin_cos();
        let l = look_ahead;
        let (v, w) = (rates.v, rates.omega);
        let eta2_dot = rates.v_dot * c - v * w * s - l * rates.omega_dot * s - l * w * w * c;
        let xi2_dot = rates.v_dot * s + v * w * c + l * rates.omega_dot * c - l * w * w * s;
        Self {
            t,
            x,
            y,
            theta: wrap_angle(theta),
            v,
            omega: w,
            eta1: ts.eta1,
            xi1: ts.xi1,
            eta2: ts.eta2,
            xi2: ts.xi2,
            eta2_dot,
            xi2_dot,
        }
    }

    pub fn position(&self) -> crate::math::Vec2 {
        crate::math::Vec2::new(self.x, self.y)
    }
}

fn pose_rhs(pose: [f64; 3], v: f64, w: f64) -> [f64; 3] {
    [v * pose[2].cos(), v * pose[2].sin(), w]
}

/// RK4 step of a reference moving at constant `(v_r, ω_r)`.
pub fn advance(
    reference: &ReferencePoint,
    v_r: f64,
    omega_r: f64,
    dt: f64,
    look_ahead: f64,
) -> Result<ReferencePoint, ReferenceError> {
    if !(v_r > 0.0) {
        return Err(ReferenceError::NonPositiveSpeed {
            v: v_r,
            t: reference.t,
        });
    }
    let pose = rk4(
        [reference.x, reference.y, reference.theta],
        reference.t,
        dt,
        |p, _| pose_rhs(p, v_r, omega_r),
    );
    let rates = Rates {
        v: v_r,
        omega: omega_r,
        ..Rates::default()
    };
    Ok(ReferencePoint::from_pose(
        reference.t + dt,
        pose[0],
        pose[1],
        pose[2],
        rates,
        look_ahead,
    ))
}

/// Reference generator driven by a [`Profile`].
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory {
    profile: Profile,
    pose: [f64; 3],
    t: f64,
    look_ahead: f64,
}

impl ReferenceTrajectory {
    pub fn new(
        profile: Profile,
        x: f64,
        y: f64,
        theta: f64,
        look_ahead: f64,
    ) -> Result<Self, ReferenceError> {
        profile.validate()?;
        let r = profile.rates(0.0);
        if !(r.v > 0.0) {
            return Err(ReferenceError::NonPositiveSpeed { v: r.v, t: 0.0 });
        }
        Ok(Self {
            profile,
            pose: [x, y, theta],
            t: 0.0,
            look_ahead,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn point(&self) -> ReferencePoint {
        let rates = self.profile.rates(self.t);
        ReferencePoint::from_pose(
            self.t,
            self.pose[0],
            self.pose[1],
            self.pose[2],
            rates,
            self.look_ahead,
        )
    }

    pub fn advance(&mut self, dt: f64) -> Result<(), ReferenceError> {
        let profile = &self.profile;
        for tau in [self.t, self.t + dt / 2.0, self.t + dt] {
            let v = profile.rates(tau).v;
            if !(v > 0.0) {
                return Err(ReferenceError::NonPositiveSpeed { v, t: tau });
            }
        }
        self.pose = rk4(self.pose, self.t, dt, |p, tau| {
            let r = profile.rates(tau);
            pose_rhs(p, r.v, r.omega)
        });
        // Keep θ bounded without introducing jumps inside a step.
        self.pose[2] = wrap_angle(self.pose[2]);
        self.t += dt;
        Ok(())
    }
}

/// Speed the safety law follows while the robot shadows the reference:
/// `v_r cos(θ − θ_r)`, floored at [`V_MIN`].
pub fn shadow_speed(theta: f64, theta_r: f64, v_r: f64) -> f64 {
    (v_r * angle_diff(theta, theta_r).cos()).max(V_MIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const L: f64 = 0.1175;

    #[test]
    fn circle_quarter_period() {
        let w = 0.5 * PI;
        let mut r = ReferenceTrajectory::new(Profile::constant(0.5 * PI, w), 1.0, 0.0, PI / 2.0, L)
            .unwrap();
        let dt = 1e-3;
        // quarter period = (π/2)/ω = 1 s
        for _ in 0..1000 {
            r.advance(dt).unwrap();
        }
        let p = r.point();
        assert!(p.x.abs() < 1e-6 && (p.y - 1.0).abs() < 1e-6, "{p:?}");
        assert!((p.theta - PI).abs() < 1e-6 || (p.theta + PI).abs() < 1e-6);
    }

    #[test]
    fn straight_line() {
        let mut r =
            ReferenceTrajectory::new(Profile::constant(0.4, 0.0), 0.0, 0.0, 0.3, L).unwrap();
        for _ in 0..500 {
            r.advance(1e-3).unwrap();
        }
        let p = r.point();
        assert!((p.x - 0.2 * 0.3f64.cos()).abs() < 1e-12);
        assert!((p.y - 0.2 * 0.3f64.sin()).abs() < 1e-12);
        assert_eq!(p.theta, 0.3);
    }

    #[test]
    fn transformed_speed_constant_on_circle() {
        let (v, w) = (0.5 * PI, 0.5 * PI);
        let mut r =
            ReferenceTrajectory::new(Profile::constant(v, w), 1.0, 0.0, PI / 2.0, L).unwrap();
        let expected = (v * v + L * L * w * w).sqrt();
        for _ in 0..3000 {
            let p = r.point();
            assert!(((p.eta2.powi(2) + p.xi2.powi(2)).sqrt() - expected).abs() < 1e-12);
            r.advance(1e-3).unwrap();
        }
    }

    #[test]
    fn rejects_non_positive_speed() {
        assert!(ReferenceTrajectory::new(Profile::constant(0.0, 1.0), 0.0, 0.0, 0.0, L).is_err());
        let p0 = ReferencePoint::from_pose(
            0.0,
            0.0,
            0.0,
            0.0,
            Rates {
                v: 1.0,
                ..Default::default()
            },
            L,
        );
        assert!(matches!(
            advance(&p0, -0.1, 0.0, 1e-3, L),
            Err(ReferenceError::NonPositiveSpeed { .. })
        ));
        assert!(advance(&p0, 0.1, 0.0, 1e-3, L).is_ok());
    }

    #[test]
    fn shadow_speed_examples() {
        assert_eq!(shadow_speed(0.4, 0.4, 1.2), 1.2);
        assert_eq!(shadow_speed(PI / 2.0, 0.0, 1.2), V_MIN);
        assert!((shadow_speed(PI / 3.0, 0.0, 0.5 * PI) - 0.25 * PI).abs() < 1e-12);
        // wrapped difference
        assert!((shadow_speed(PI - 0.1, -PI + 0.1, 1.0) - 0.2f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn profile_segments_switch() {
        let p = Profile {
            segments: vec![
                ProfileSegment::Constant {
                    duration_s: 2.0,
                    v_mps: 0.3,
                    omega_radps: 0.0,
                },
                ProfileSegment::Sinusoid {
                    duration_s: 1.0,
                    v_mean_mps: 0.4,
                    v_amplitude_mps: 0.1,
                    omega_mean_radps: 0.0,
                    omega_amplitude_radps: 0.5,
                    frequency_radps: 2.0,
                    phase_rad: 0.0,
                },
            ],
        };
        assert_eq!(p.rates(1.0).v, 0.3);
        let r = p.rates(2.0);
        assert_eq!(r.v, 0.4);
        assert!((r.v_dot - 0.2).abs() < 1e-12 && (r.omega_dot - 1.0).abs() < 1e-12);
        // held past the end
        let r = p.rates(100.0);
        assert!((r.v - (0.4 + 0.1 * (2.0f64 * 98.0).sin())).abs() < 1e-12);
    }

    #[test]
    fn analytic_accelerations_match_finite_differences() {
        let p = Profile {
            segments: vec![ProfileSegment::Sinusoid {
                duration_s: 10.0,
                v_mean_mps: 0.4,
                v_amplitude_mps: 0.1,
                omega_mean_radps: 0.3,
                omega_amplitude_radps: 0.6,
                frequency_radps: 1.3,
                phase_rad: 0.2,
            }],
        };
        let mut r = ReferenceTrajectory::new(p, 0.0, 0.0, 0.0, L).unwrap();
        let h = 1e-4;
        for _ in 0..20_000 {
            r.advance(h).unwrap();
        }
        let a = r.point();
        r.advance(h).unwrap();
        let b = r.point();
        let fd_eta = (b.eta2 - a.eta2) / h;
        let fd_xi = (b.xi2 - a.xi2) / h;
        let mid_eta = 0.5 * (a.eta2_dot + b.eta2_dot);
        let mid_xi = 0.5 * (a.xi2_dot + b.xi2_dot);
        assert!((fd_eta - mid_eta).abs() < 1e-6, "{fd_eta} {mid_eta}");
        assert!((fd_xi - mid_xi).abs() < 1e-6, "{fd_xi} {mid_xi}");
    }
}
