//! Environment features and the distance kernel.
//!
//! Every safety decision is made from a [`DistanceReading`]: the closest point `p_o`
//! of a feature, the distance `d_o`, the bearing `β_o` of the robot seen from `p_o`,
//! and the relative heading `δ = θ − β_o`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::RobotState;
use crate::math::{wrap_angle, Vec2};
use crate::reference::ReferencePoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("position coincides with feature {feature}: distance direction undefined")]
    Degenerate { feature: usize },
    #[error("feature {name}: safe distance {safe} must exceed half the wheel separation {half_d}")]
    SafeDistanceTooSmall {
        name: String,
        safe: f64,
        half_d: f64,
    },
    #[error("feature {name}: band half-width {band} must be in (0, 0.2·safe distance = {limit}]")]
    BandWidth { name: String, band: f64, limit: f64 },
    #[error("feature {name}: polyline needs at least 3 vertices, got {count}")]
    TooFewVertices { name: String, count: usize },
    #[error("feature {name}: polyline edges {i} and {j} intersect")]
    SelfIntersecting { name: String, i: usize, j: usize },
    #[error("feature {name}: disc radius must be non-negative, got {radius}")]
    NegativeRadius { name: String, radius: f64 },
    #[error("feature {name}: keep-inside requires a closed polyline")]
    KeepInsideNeedsPolyline { name: String },
    #[error("feature {name}: moving point references unknown robot {robot}")]
    UnknownRobot { name: String, robot: usize },
}

/// Direction the safety law circulates around a feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    #[default]
    Counterclockwise,
    Clockwise,
}

impl Turn {
    /// +1 for counterclockwise, −1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Turn::Counterclockwise => 1.0,
            Turn::Clockwise => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Turn::Counterclockwise => Turn::Clockwise,
            Turn::Clockwise => Turn::Counterclockwise,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    /// Obstacles: stay outside.
    #[default]
    AvoidOutside,
    /// Geofences and patrolled borders: stay inside.
    KeepInside,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// A disc; radius zero gives a point obstacle.
    Disc { center: Vec2, radius: f64 },
    /// Closed polyline; the last vertex connects back to the first.
    Polyline { vertices: Vec<Vec2> },
    /// Another robot's position, read from the world snapshot each step.
    MovingPoint { robot: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub name: String,
    pub shape: Shape,
    /// `d̄_o`, m.
    pub safe_distance: f64,
    /// `ε_o`, m.
    pub band: f64,
    pub containment: Containment,
    pub turn: Turn,
}

impl Feature {
    /// Circulation sense about the closest point. Traversing a keep-inside region
    /// counterclockwise keeps the border on the robot's right, which is a clockwise
    /// turn about the closest border point.
    pub fn local_turn(&self) -> Turn {
        match self.containment {
            Containment::AvoidOutside => self.turn,
            Containment::KeepInside => self.turn.flipped(),
        }
    }

    pub fn validate(&self, wheel_separation: f64, robot_count: usize) -> Result<(), GeometryError> {
        let name = self.name.clone();
        if !(self.safe_distance > wheel_separation / 2.0) {
            return Err(GeometryError::SafeDistanceTooSmall {
                name,
                safe: self.safe_distance,
                half_d: wheel_separation / 2.0,
            });
        }
        let limit = 0.2 * self.safe_distance;
        if !(self.band > 0.0 && self.band <= limit * (1.0 + 1e-12)) {
            return Err(GeometryError::BandWidth {
                name,
                band: self.band,
                limit,
            });
        }
        match &self.shape {
            Shape::Disc { radius, .. } => {
                if *radius < 0.0 {
                    return Err(GeometryError::NegativeRadius {
                        name,
                        radius: *radius,
                    });
                }
                if self.containment == Containment::KeepInside {
                    return Err(GeometryError::KeepInsideNeedsPolyline { name });
                }
            }
            Shape::Polyline { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeometryError::TooFewVertices {
                        name,
                        count: vertices.len(),
                    });
                }
                if let Some((i, j)) = first_self_intersection(vertices) {
                    return Err(GeometryError::SelfIntersecting { name, i, j });
                }
            }
            Shape::MovingPoint { robot } => {
                if *robot >= robot_count {
                    return Err(GeometryError::UnknownRobot {
                        name,
                        robot: *robot,
                    });
                }
                if self.containment == Containment::KeepInside {
                    return Err(GeometryError::KeepInsideNeedsPolyline { name });
                }
            }
        }
        Ok(())
    }
}

/// Closest-point measurement against one feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceReading {
    pub feature: usize,
    pub closest: Vec2,
    pub distance: f64,
    /// `β_o`, angle of `p − p_o`.
    pub bearing: f64,
    /// `δ = wrap(θ − β_o)`.
    pub delta: f64,
    /// Closest point is a polyline vertex (a corner passage).
    pub at_vertex: bool,
}

fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t, t)
}

fn segments(vertices: &[Vec2]) -> impl Iterator<Item = (usize, Vec2, Vec2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (i, vertices[i], vertices[(i + 1) % n]))
}

/// Nearest point on a closed polyline; ties go to the lowest segment index.
pub fn closest_on_polyline(p: Vec2, vertices: &[Vec2]) -> (Vec2, bool) {
    let mut best = (Vec2::ZERO, f64::INFINITY, false);
    for (_, a, b) in segments(vertices) {
        let (q, t) = closest_on_segment(p, a, b);
        let d = p.distance(q);
        if d < best.1 {
            best = (q, d, t <= 0.0 || t >= 1.0);
        }
    }
    (best.0, best.2)
}

/// Even-odd point-in-polygon test.
pub fn contains(vertices: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    for (_, a, b) in segments(vertices) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Signed area (positive for counterclockwise vertex order).
pub fn signed_area(vertices: &[Vec2]) -> f64 {
    segments(vertices).map(|(_, a, b)| a.cross(b)).sum::<f64>() / 2.0
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| (q - p).cross(r - p);
    let (d1, d2, d3, d4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn first_self_intersection(vertices: &[Vec2]) -> Option<(usize, usize)> {
    let n = vertices.len();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn feature_point(shape: &Shape, p: Vec2, robots: &[Vec2]) -> (Vec2, bool) {
    match shape {
        Shape::Disc { center, radius } => {
            let r = p - *center;
            let n = r.norm();
            if n > 0.0 {
                (*center + r * (radius / n), false)
            } else {
                (*center, false)
            }
        }
        Shape::Polyline { vertices } => closest_on_polyline(p, vertices),
        Shape::MovingPoint { robot } => (robots[*robot], false),
    }
}

/// Closest-point reading of `feature` seen from a robot at `state`.
///
/// `robots` is the position snapshot used to resolve moving-point features.
pub fn closest(
    state: &RobotState,
    feature_id: usize,
    feature: &Feature,
    robots: &[Vec2],
) -> Result<DistanceReading, GeometryError> {
    let p = state.position();
    if let Shape::Disc { center, .. } = feature.shape {
        if p == center {
            return Err(GeometryError::Degenerate {
                feature: feature_id,
            });
        }
    }
    let (closest, at_vertex) = feature_point(&feature.shape, p, robots);
    let offset = p - closest;
    let distance = offset.norm();
    if distance == 0.0 {
        return Err(GeometryError::Degenerate {
            feature: feature_id,
        });
    }
    let bearing = offset.angle();
    Ok(DistanceReading {
        feature: feature_id,
        closest,
        distance,
        bearing,
        delta: wrap_angle(state.theta - bearing),
        at_vertex,
    })
}

/// Distance to the feature, negative on the forbidden side (inside an obstacle,
/// outside a geofence).
pub fn signed_clearance(p: Vec2, feature: &Feature, robots: &[Vec2]) -> f64 {
    match (&feature.shape, feature.containment) {
        (Shape::Disc { center, radius }, _) => p.distance(*center) - radius,
        (Shape::MovingPoint { robot }, _) => p.distance(robots[*robot]),
        (Shape::Polyline { vertices }, containment) => {
            let (q, _) = closest_on_polyline(p, vertices);
            let d = p.distance(q);
            let inside = contains(vertices, p);
            match (containment, inside) {
                (Containment::AvoidOutside, false) | (Containment::KeepInside, true) => d,
                _ => -d,
            }
        }
    }
}

/// Membership in the avoidance zone: clearance at most `d̄_o + ε_o`.
pub fn in_avoidance(clearance: f64, feature: &Feature) -> bool {
    clearance <= feature.safe_distance + feature.band
}

/// Tracking error expressed in the robot body frame, `(e_x, e_y)`; `e_y > 0` means the
/// reference lies to the robot's left.
pub fn body_error(state: &RobotState, reference: &ReferencePoint) -> (f64, f64) {
    let e = (reference.position() - state.position()).rotate_inv(state.theta);
    (e.x, e.y)
}

/// Translational and rotational rate of a moving closest point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MovingRates {
    pub speed: f64,
    /// `None` when the point is (numerically) stationary.
    pub turn_rate: Option<f64>,
}

/// Central-difference estimate of `(v_o, ω_o)` at the second-to-last sample.
/// Returns `None` with fewer than three samples.
pub fn moving_rates(samples: &[Vec2], dt: f64) -> Option<MovingRates> {
    let n = samples.len();
    if n < 3 {
        return None;
    }
    let (p0, p1, p2) = (samples[n - 3], samples[n - 2], samples[n - 1]);
    let vel = (p2 - p0) * (1.0 / (2.0 * dt));
    let acc = (p2 - p1 * 2.0 + p0) * (1.0 / (dt * dt));
    let speed2 = vel.norm_sq();
    let turn_rate = if speed2 > 1e-12 {
        Some((acc.y * vel.x - acc.x * vel.y) / speed2)
    } else {
        None
    };
    Some(MovingRates {
        speed: speed2.sqrt(),
        turn_rate,
    })
}

/// Polyline approximation of a rounded rectangle centred at `center`, counterclockwise.
pub fn rounded_rectangle(
    center: Vec2,
    width: f64,
    height: f64,
    corner_radius: f64,
    arc_segments: usize,
) -> Vec<Vec2> {
    let (hw, hh) = (width / 2.0 - corner_radius, height / 2.0 - corner_radius);
    let corners = [
        (Vec2::new(hw, -hh), -std::f64::consts::FRAC_PI_2),
        (Vec2::new(hw, hh), 0.0),
        (Vec2::new(-hw, hh), std::f64::consts::FRAC_PI_2),
        (Vec2::new(-hw, -hh), std::f64::consts::PI),
    ];
    let mut out = Vec::with_capacity(4 * (arc_segments + 1));
    for (c, start) in corners {
        for k in 0..=arc_segments {
            let a = start + std::f64::consts::FRAC_PI_2 * k as f64 / arc_segments as f64;
            out.push(center + c + Vec2::new(a.cos(), a.sin()) * corner_radius);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn point_feature(center: Vec2, radius: f64) -> Feature {
        Feature {
            name: "f".into(),
            shape: Shape::Disc { center, radius },
            safe_distance: 0.5,
            band: 0.05,
            containment: Containment::AvoidOutside,
            turn: Turn::Counterclockwise,
        }
    }

    fn square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn point_obstacle_345() {
        let f = point_feature(Vec2::ZERO, 0.0);
        let r = closest(&RobotState::new(3.0, 4.0, 0.0, 0.0, 0.0), 0, &f, &[]).unwrap();
        assert_eq!(r.distance, 5.0);
        assert!((r.bearing - 4f64.atan2(3.0)).abs() < 1e-15);
        assert!((r.bearing - 0.9273).abs() < 1e-4);
    }

    #[test]
    fn disc_reading() {
        let f = point_feature(Vec2::ZERO, 1.0);
        let r = closest(&RobotState::new(2.0, 0.0, PI / 2.0, 0.0, 0.0), 0, &f, &[]).unwrap();
        assert_eq!(r.closest, Vec2::new(1.0, 0.0));
        assert_eq!(r.distance, 1.0);
        assert_eq!(r.bearing, 0.0);
        assert_eq!(r.delta, PI / 2.0);
    }

    #[test]
    fn polyline_inside_nearest_edge() {
        let f = Feature {
            shape: Shape::Polyline { vertices: square() },
            containment: Containment::KeepInside,
            ..point_feature(Vec2::ZERO, 0.0)
        };
        let r = closest(&RobotState::new(0.9, 0.5, 0.0, 0.0, 0.0), 0, &f, &[]).unwrap();
        assert!((r.closest - Vec2::new(1.0, 0.5)).norm() < 1e-15);
        assert!((r.distance - 0.1).abs() < 1e-12);
        assert!((signed_clearance(Vec2::new(0.9, 0.5), &f, &[]) - 0.1).abs() < 1e-12);
        assert!((signed_clearance(Vec2::new(1.2, 0.5), &f, &[]) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_positions() {
        let f = point_feature(Vec2::new(1.0, 1.0), 0.2);
        assert!(matches!(
            closest(&RobotState::new(1.0, 1.0, 0.0, 0.0, 0.0), 3, &f, &[]),
            Err(GeometryError::Degenerate { feature: 3 })
        ));
        let m = Feature {
            shape: Shape::MovingPoint { robot: 0 },
            ..point_feature(Vec2::ZERO, 0.0)
        };
        assert!(closest(
            &RobotState::new(2.0, 0.0, 0.0, 0.0, 0.0),
            0,
            &m,
            &[Vec2::new(2.0, 0.0)]
        )
        .is_err());
    }

    #[test]
    fn body_error_examples() {
        let rp = |x, y| ReferencePoint {
            x,
            y,
            ..Default::default()
        };
        assert_eq!(
            body_error(&RobotState::default(), &rp(1.0, 1.0)),
            (1.0, 1.0)
        );
        let (ex, ey) = body_error(
            &RobotState::new(0.0, 0.0, PI / 2.0, 0.0, 0.0),
            &rp(1.0, 0.0),
        );
        assert!(ex.abs() < 1e-15 && (ey + 1.0).abs() < 1e-15);
        let (ex, ey) = body_error(&RobotState::new(0.4, -2.0, 1.0, 0.0, 0.0), &rp(0.4, -2.0));
        assert_eq!((ex, ey), (0.0, 0.0));
    }

    #[test]
    fn avoidance_membership() {
        let f = point_feature(Vec2::ZERO, 0.3);
        assert!(in_avoidance(0.5, &f));
        assert!(!in_avoidance(0.6, &f));
        // reference crossing the obstacle interior
        assert!(in_avoidance(
            signed_clearance(Vec2::new(0.1, 0.0), &f, &[]),
            &f
        ));
    }

    #[test]
    fn moving_rate_estimates() {
        let dt = 1e-3;
        let still = [Vec2::new(1.0, 1.0); 3];
        let r = moving_rates(&still, dt).unwrap();
        assert_eq!(r.speed, 0.0);
        assert!(r.turn_rate.is_none());

        let circ: Vec<Vec2> = (0..3)
            .map(|k| {
                let t = 0.4 + k as f64 * dt;
                Vec2::new(t.cos(), t.sin())
            })
            .collect();
        let r = moving_rates(&circ, dt).unwrap();
        assert!((r.speed - 1.0).abs() < 1e-6);
        assert!((r.turn_rate.unwrap() - 1.0).abs() < 1e-5);

        let line: Vec<Vec2> = (0..3)
            .map(|k| Vec2::new(2.0 * k as f64 * dt, 0.0))
            .collect();
        let r = moving_rates(&line, dt).unwrap();
        assert!((r.speed - 2.0).abs() < 1e-9);
        assert!(r.turn_rate.unwrap().abs() < 1e-9);
        assert!(moving_rates(&line[..2], dt).is_none());
    }

    #[test]
    fn validation() {
        let mut f = point_feature(Vec2::ZERO, 0.1);
        assert!(f.validate(0.235, 1).is_ok());
        f.safe_distance = 0.1;
        assert!(matches!(
            f.validate(0.235, 1),
            Err(GeometryError::SafeDistanceTooSmall { .. })
        ));
        f.safe_distance = 0.5;
        f.band = 0.2;
        assert!(matches!(
            f.validate(0.235, 1),
            Err(GeometryError::BandWidth { .. })
        ));
        let bow = Feature {
            shape: Shape::Polyline {
                vertices: vec![
                    Vec2::new(0.0, 0.0),
                    Vec2::new(1.0, 1.0),
                    Vec2::new(1.0, 0.0),
                    Vec2::new(0.0, 1.0),
                ],
            },
            ..point_feature(Vec2::ZERO, 0.0)
        };
        assert!(matches!(
            bow.validate(0.235, 1),
            Err(GeometryError::SelfIntersecting { .. })
        ));
        let sq = Feature {
            shape: Shape::Polyline { vertices: square() },
            ..point_feature(Vec2::ZERO, 0.0)
        };
        assert!(sq.validate(0.235, 1).is_ok());
    }

    #[test]
    fn rounded_rectangle_shape() {
        let v = rounded_rectangle(Vec2::ZERO, 2.0, 1.5, 0.3, 8);
        assert!(signed_area(&v) > 0.0);
        assert!(first_self_intersection(&v).is_none());
        let (q, _) = closest_on_polyline(Vec2::ZERO, &v);
        assert!((q.distance(Vec2::ZERO) - 0.75).abs() < 1e-12);
        assert!(contains(&v, Vec2::new(0.9, 0.0)) && !contains(&v, Vec2::new(1.1, 0.0)));
    }

    #[test]
    fn polyline_ties_take_lowest_segment() {
        // centre of the unit square is equidistant from all edges
        let (q, _) = closest_on_polyline(Vec2::new(0.5, 0.5), &square());
        assert!((q - Vec2::new(0.5, 0.0)).norm() < 1e-15);
    }
}
