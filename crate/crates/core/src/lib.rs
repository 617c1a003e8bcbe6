//! Variable-structure control for differential-drive robots.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: the plant (wheel-voltage driven unicycle with first-order motor lag),
//!   disturbance generators and a fixed-step RK4 integrator.
//! - [`linearization`]: look-ahead point change of variables, its inverse, and the
//!   admissible transformed-input bound `U'(L)`.
//! - [`sta`]: a generic super-twisting controller with conditional-integration anti-windup.
//! - [`reference`]: nonholonomic reference trajectories and the speed-shadowing rule.
//! - [`tracking`]: the two-channel super-twisting tracking law and its saturation cascade.
//! - [`geometry`]: closest-point distance queries against discs, points, polylines and
//!   other robots.
//! - [`safety`]: the distance-only safety law that holds a robot at a standoff distance.
//! - [`supervisor`]: the A0/A1/A2 switching logic between tracking and safety.
//! - [`harness`]: scenario files, the closed-loop simulator, metrics and trace emission.
//!
//! Sweeps over independent runs go through [`par`], which uses rayon when the
//! `parallel` feature is on (the default) and plain iterators otherwise.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod geometry;
pub mod harness;
pub mod linearization;
pub mod math;
pub mod par;
pub mod reference;
pub mod safety;
pub mod sta;
pub mod supervisor;
pub mod tracking;

pub use dynamics::{Disturbance, RobotParams, RobotState, WheelCommand};
pub use math::Vec2;
