use std::f64::consts::PI;

use proptest::prelude::*;

use safetrack::dynamics::{self, RobotParams, RobotState, WheelCommand, WheelDisturbance};
use safetrack::geometry::{closest, Containment, Feature, Shape, Turn};
use safetrack::linearization::{bound_profile, look_ahead_interval};
use safetrack::math::Vec2;
use safetrack::reference::{Profile, ProfileSegment, ReferenceTrajectory};
use safetrack::safety::{SafetyController, SafetyGains, SafetyTarget};
use safetrack::sta::{self, StaGains, StaState};
use safetrack::tracking::{Tracker, TrackingGains};

const P: RobotParams = RobotParams::reference_robot();

fn state() -> impl Strategy<Value = RobotState> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        -PI..PI,
        -0.7..0.7f64,
        -5.9..5.9f64,
    )
        .prop_map(|(x, y, th, v, w)| RobotState::new(x, y, th, v, w))
}

fn command() -> impl Strategy<Value = WheelCommand> {
    (-0.7..=0.7f64, -0.7..=0.7f64).prop_map(|(u_r, u_l)| WheelCommand { u_r, u_l })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rk4_matches_fine_step_oracle(s0 in state(), cmd in command()) {
        let dist = WheelDisturbance::zero();
        let (mut coarse, mut fine) = (s0, s0);
        for k in 0..1000 {
            coarse = dynamics::step(&coarse, cmd, &dist, &P, k as f64 * 1e-3, 1e-3);
        }
        for k in 0..100_000 {
            fine = dynamics::step(&fine, cmd, &dist, &P, k as f64 * 1e-5, 1e-5);
        }
        let gap = coarse.position().distance(fine.position())
            .max((coarse.v - fine.v).abs())
            .max((coarse.omega - fine.omega).abs());
        prop_assert!(gap < 1e-6, "gap {gap} after 1 s");
    }

    #[test]
    fn motion_is_nonholonomic(s0 in state(), cmd in command()) {
        let dist = WheelDisturbance::zero();
        let dt = 1e-4;
        let s1 = dynamics::step(&s0, cmd, &dist, &P, 0.0, dt);
        let s2 = dynamics::step(&s1, cmd, &dist, &P, dt, dt);
        // Central difference of the position at the middle sample.
        let (xd, yd) = ((s2.x - s0.x) / (2.0 * dt), (s2.y - s0.y) / (2.0 * dt));
        let residual = xd * s1.theta.sin() - yd * s1.theta.cos();
        prop_assert!(residual.abs() < 1e-6, "residual {residual}");
    }

    #[test]
    fn tracker_respects_voltage_bound(s in state(), th_r in -PI..PI, v_r in 0.05..2.0f64, w_r in -4.0..4.0f64) {
        let mut tracker = Tracker::new(TrackingGains::default(), P);
        let mut reference = ReferenceTrajectory::new(Profile::constant(v_r, w_r), 0.5, -0.5, th_r, tracker.look_ahead()).unwrap();
        let mut s = s;
        let dist = WheelDisturbance::zero();
        for k in 0..200 {
            let cmd = tracker.track(&s, &reference.point(), 1e-3).command;
            prop_assert!(cmd.u_r.abs() <= P.u_max && cmd.u_l.abs() <= P.u_max, "{cmd:?}");
            s = dynamics::step(&s, cmd, &dist, &P, k as f64 * 1e-3, 1e-3);
            reference.advance(1e-3).unwrap();
        }
    }

    #[test]
    fn safety_respects_voltage_bound(s in state(), d_bar in 0.2..0.8f64, ccw in any::<bool>(), v_t in 0.05..1.6f64, border in any::<bool>()) {
        let gains = if border { SafetyGains::border() } else { SafetyGains::obstacle() };
        let mut ctl = SafetyController::new(gains, P);
        let feature = Feature {
            name: "p".into(),
            shape: Shape::Disc { center: Vec2::new(4.0, 4.0), radius: 0.0 },
            safe_distance: d_bar,
            band: 0.1 * d_bar,
            containment: Containment::AvoidOutside,
            turn: if ccw { Turn::Counterclockwise } else { Turn::Clockwise },
        };
        let target = SafetyTarget { safe_distance: d_bar, turn: feature.turn, moving: false };
        let mut s = s;
        let dist = WheelDisturbance::zero();
        for k in 0..200 {
            let reading = closest(&s, 0, &feature, &[]).unwrap();
            let cmd = ctl.command(&s, &reading, target, v_t, 1e-3).command;
            prop_assert!(cmd.u_r.abs() <= P.u_max && cmd.u_l.abs() <= P.u_max, "{cmd:?}");
            s = dynamics::step(&s, cmd, &dist, &P, k as f64 * 1e-3, 1e-3);
        }
    }

    #[test]
    fn sta_is_odd_in_its_inputs(sigma in -2.0..2.0f64, w_eq in -1.0..1.0f64, integral in -3.0..3.0f64, bounded in any::<bool>()) {
        let gains = StaGains::new(2.0, 0.5, 10.0);
        let gains = if bounded { gains.with_output_bound(1.2) } else { gains };
        let mut a = StaState { integral, saturated: false };
        let mut b = a.mirrored();
        let wa = sta::control(sigma, w_eq, &gains, &mut a, 1e-3);
        let wb = sta::control(-sigma, -w_eq, &gains, &mut b, 1e-3);
        prop_assert_eq!(wa, -wb);
        prop_assert_eq!(a.integral, -b.integral);
    }

    #[test]
    fn look_ahead_velocity_is_the_derivative_of_its_position(
        th in -PI..PI, v_mean in 0.2..1.0f64, w_mean in -2.0..2.0f64, v_amp in 0.0..0.1f64, w_amp in 0.0..1.0f64, f in 0.1..3.0f64,
    ) {
        let l = P.d / 2.0;
        let profile = Profile { segments: vec![ProfileSegment::Sinusoid {
            duration_s: 10.0,
            v_mean_mps: v_mean,
            v_amplitude_mps: v_amp,
            omega_mean_radps: w_mean,
            omega_amplitude_radps: w_amp,
            frequency_radps: f,
            phase_rad: 0.0,
        }]};
        let dt = 1e-4;
        let mut r = ReferenceTrajectory::new(profile, 0.0, 0.0, th, l).unwrap();
        for _ in 0..500 {
            let p0 = r.point();
            r.advance(dt).unwrap();
            let p1 = r.point();
            r.advance(dt).unwrap();
            let p2 = r.point();
            let eta2 = (p2.eta1 - p0.eta1) / (2.0 * dt);
            let xi2 = (p2.xi1 - p0.xi1) / (2.0 * dt);
            let eta2_dot = (p2.eta2 - p0.eta2) / (2.0 * dt);
            let xi2_dot = (p2.xi2 - p0.xi2) / (2.0 * dt);
            prop_assert!((eta2 - p1.eta2).abs() < 1e-6 && (xi2 - p1.xi2).abs() < 1e-6);
            prop_assert!((eta2_dot - p1.eta2_dot).abs() < 1e-5 && (xi2_dot - p1.xi2_dot).abs() < 1e-5);
        }
    }

    #[test]
    fn distance_rate_and_bearing_rate_match_finite_differences(s in state(), cx in -1.0..1.0f64, cy in -1.0..1.0f64, cmd in command()) {
        let feature = Feature {
            name: "p".into(),
            shape: Shape::Disc { center: Vec2::new(cx, cy) * 5.0, radius: 0.1 },
            safe_distance: 0.3,
            band: 0.03,
            containment: Containment::AvoidOutside,
            turn: Turn::Counterclockwise,
        };
        let dt = 1e-5;
        let dist = WheelDisturbance::zero();
        let mid = dynamics::step(&s, cmd, &dist, &P, 0.0, dt);
        let ahead = dynamics::step(&mid, cmd, &dist, &P, dt, dt);
        let r = closest(&mid, 0, &feature, &[]).unwrap();
        prop_assume!(r.distance > 0.05);
        let (rb, ra) = (closest(&s, 0, &feature, &[]).unwrap(), closest(&ahead, 0, &feature, &[]).unwrap());
        let d_dot = (ra.distance - rb.distance) / (2.0 * dt);
        let beta_dot = safetrack::math::angle_diff(ra.bearing, rb.bearing) / (2.0 * dt);
        let rho = r.distance + 0.1;
        let v = mid.v;
        prop_assert!((d_dot - v * r.delta.cos()).abs() < 1e-6, "{d_dot} vs {}", v * r.delta.cos());
        prop_assert!((beta_dot - v * r.delta.sin() / rho).abs() < 1e-5, "{beta_dot} vs {}", v * r.delta.sin() / rho);
    }
}

#[test]
fn bound_profile_peaks_at_half_wheel_separation() {
    let (lo, hi) = look_ahead_interval(&P);
    let peak = P.d / 2.0;
    let at = |l: f64| bound_profile(&P, l).unwrap();
    for k in 1..100 {
        let left = lo + (peak - lo) * k as f64 / 100.0;
        let right = peak + (hi - peak) * k as f64 / 100.0;
        assert!(at(left) < at(peak) && at(right) < at(peak));
        assert!(at(left) > 0.0 && at(right) > 0.0);
    }
    assert!(bound_profile(&P, lo).is_err() && bound_profile(&P, hi).is_err());
}
