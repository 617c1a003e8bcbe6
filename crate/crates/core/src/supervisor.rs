//! Switching logic between trajectory tracking and safety control.
//!
//! ```text
//!            band entry ∧ ref in zone
//!     A0 ──────────────────────────────▶ A1
//!      ▲                                 │ ref leaves zone
//!      │ release test                    ▼
//!      └──────────────────────────────── A2 ◀─┐
//!                                        │    │
//!                                        └────┘ ref re-enters zone → A1
//! ```
//!
//! `A0` tracks the reference; `A1` and `A2` run the safety law. The release test on the
//! body-frame lateral error `e_y` prevents dropping out of safety while the straight
//! line to the reference still cuts through the avoidance zone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Containment, Turn};

/// Minimum time spent in a state before another transition is allowed, s.
pub const DEFAULT_DWELL: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    A0,
    A1,
    A2,
}

impl Mode {
    pub fn is_safety(self) -> bool {
        !matches!(self, Mode::A0)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::A0 => "A0",
            Mode::A1 => "A1",
            Mode::A2 => "A2",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which release test keep-inside features use.
///
/// For keep-inside features, one variant holds on `e_y < 0` and releases on `e_y ≥ 0`
/// (a sign mirror of the obstacle rule); the other holds on `e_y > 0` and releases
/// on `e_y ≥ 0`, which overlap, so it only releases at exactly `e_y = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepInsideRule {
    #[default]
    Mirrored,
    Overlapping,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    BandEntry,
    ReferenceExit,
    Release,
    ReferenceReentry,
}

/// What the supervisor needs to know about one feature this step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureAssessment {
    pub feature: usize,
    /// Robot clearance (signed for polylines).
    pub clearance: f64,
    /// Robot within `d̄_o + ε_o`.
    pub in_band: bool,
    /// Reference point inside the avoidance zone.
    pub reference_in_zone: bool,
    pub containment: Containment,
    pub turn: Turn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
    pub feature: usize,
    pub trigger: Trigger,
    pub e_y: f64,
    pub clearance: f64,
    pub reference_in_zone: bool,
}

/// `(hold, release)` predicates on `e_y`.
pub fn release_predicates(
    e_y: f64,
    containment: Containment,
    turn: Turn,
    rule: KeepInsideRule,
) -> (bool, bool) {
    // Clockwise circulation mirrors the sign of e_y.
    let e = turn.sign() * e_y;
    match containment {
        Containment::AvoidOutside => (e > 0.0, e <= 0.0),
        Containment::KeepInside => match rule {
            KeepInsideRule::Mirrored => (e < 0.0, e >= 0.0),
            KeepInsideRule::Overlapping => (e > 0.0, e >= 0.0),
        },
    }
}

#[derive(Clone, Debug)]
pub struct Supervisor {
    mode: Mode,
    active: Option<usize>,
    turn: Turn,
    entered_at: f64,
    pub dwell: f64,
    pub keep_inside_rule: KeepInsideRule,
    log: Vec<Transition>,
}

impl Default for Supervisor {
    fn default() -> Self {
        Self::new(DEFAULT_DWELL, KeepInsideRule::default())
    }
}

impl Supervisor {
    pub fn new(dwell: f64, keep_inside_rule: KeepInsideRule) -> Self {
        Self {
            mode: Mode::A0,
            active: None,
            turn: Turn::default(),
            entered_at: f64::NEG_INFINITY,
            dwell,
            keep_inside_rule,
            log: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Feature being held off in A1/A2.
    pub fn active_feature(&self) -> Option<usize> {
        self.active
    }

    pub fn turn(&self) -> Turn {
        self.turn
    }

    pub fn log(&self) -> &[Transition] {
        &self.log
    }

    /// Minimum-clearance feature.
    pub fn dominant(assessments: &[FeatureAssessment]) -> Option<&FeatureAssessment> {
        assessments
            .iter()
            .min_by(|a, b| a.clearance.total_cmp(&b.clearance))
    }

    /// Advances the state machine. Returns the transition taken, if any.
    pub fn decide(
        &mut self,
        t: f64,
        assessments: &[FeatureAssessment],
        e_y: f64,
    ) -> Option<Transition> {
        if t - self.entered_at < self.dwell {
            return None;
        }
        let (to, fa, trigger) = match self.mode {
            Mode::A0 => {
                let fa = Self::dominant(assessments)?;
                if fa.in_band && fa.reference_in_zone {
                    (Mode::A1, fa, Trigger::BandEntry)
                } else {
                    return None;
                }
            }
            Mode::A1 => {
                let fa = self.active_assessment(assessments)?;
                if fa.reference_in_zone {
                    return None;
                }
                let (hold, release) =
                    release_predicates(e_y, fa.containment, fa.turn, self.keep_inside_rule);
                if hold {
                    (Mode::A2, fa, Trigger::ReferenceExit)
                } else if release {
                    (Mode::A0, fa, Trigger::Release)
                } else {
                    return None;
                }
            }
            Mode::A2 => {
                let fa = self.active_assessment(assessments)?;
                if fa.reference_in_zone {
                    (Mode::A1, fa, Trigger::ReferenceReentry)
                } else {
                    let (hold, release) =
                        release_predicates(e_y, fa.containment, fa.turn, self.keep_inside_rule);
                    if release && !hold {
                        (Mode::A0, fa, Trigger::Release)
                    } else {
                        return None;
                    }
                }
            }
        };
        let tr = Transition {
            t,
            from: self.mode,
            to,
            feature: fa.feature,
            trigger,
            e_y,
            clearance: fa.clearance,
            reference_in_zone: fa.reference_in_zone,
        };
        self.mode = to;
        self.entered_at = t;
        if to.is_safety() {
            self.active = Some(fa.feature);
            self.turn = fa.turn;
        } else {
            self.active = None;
        }
        self.log.push(tr);
        Some(tr)
    }

    fn active_assessment<'a>(
        &self,
        assessments: &'a [FeatureAssessment],
    ) -> Option<&'a FeatureAssessment> {
        let id = self.active?;
        assessments.iter().find(|a| a.feature == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obstacle(clearance: f64, in_band: bool, reference_in_zone: bool) -> FeatureAssessment {
        FeatureAssessment {
            feature: 0,
            clearance,
            in_band,
            reference_in_zone,
            containment: Containment::AvoidOutside,
            turn: Turn::Counterclockwise,
        }
    }

    #[test]
    fn no_band_contact_stays_tracking() {
        let mut s = Supervisor::default();
        assert!(s.decide(0.0, &[obstacle(0.6, false, true)], 0.0).is_none());
        assert_eq!(s.mode(), Mode::A0);
    }

    #[test]
    fn band_entry_with_reference_inside() {
        let mut s = Supervisor::default();
        let tr = s.decide(0.0, &[obstacle(0.5, true, true)], 0.0).unwrap();
        assert_eq!(
            (tr.from, tr.to, tr.trigger),
            (Mode::A0, Mode::A1, Trigger::BandEntry)
        );
        assert_eq!(s.active_feature(), Some(0));
    }

    #[test]
    fn band_entry_needs_reference_in_zone() {
        let mut s = Supervisor::default();
        assert!(s.decide(0.0, &[obstacle(0.5, true, false)], 0.0).is_none());
    }

    #[test]
    fn full_cycle_with_release_boundary() {
        let mut s = Supervisor::default();
        s.decide(0.0, &[obstacle(0.5, true, true)], 0.0);
        // reference leaves while the straight line still crosses the zone
        let tr = s.decide(1.0, &[obstacle(0.5, true, false)], 0.2).unwrap();
        assert_eq!(tr.to, Mode::A2);
        assert!(s.decide(1.5, &[obstacle(0.5, true, false)], 0.1).is_none());
        let tr = s.decide(2.0, &[obstacle(0.5, true, false)], -0.01).unwrap();
        assert_eq!(
            (tr.from, tr.to, tr.trigger),
            (Mode::A2, Mode::A0, Trigger::Release)
        );
        assert_eq!(s.log().len(), 3);
        assert_eq!(s.active_feature(), None);
    }

    #[test]
    fn reentry_returns_to_a1() {
        let mut s = Supervisor::default();
        s.decide(0.0, &[obstacle(0.5, true, true)], 0.0);
        s.decide(1.0, &[obstacle(0.5, true, false)], 0.3);
        let tr = s.decide(2.0, &[obstacle(0.5, true, true)], 0.3).unwrap();
        assert_eq!((tr.to, tr.trigger), (Mode::A1, Trigger::ReferenceReentry));
    }

    #[test]
    fn a1_releases_directly_when_test_passes() {
        let mut s = Supervisor::default();
        s.decide(0.0, &[obstacle(0.5, true, true)], 0.0);
        let tr = s.decide(1.0, &[obstacle(0.5, true, false)], -0.2).unwrap();
        assert_eq!((tr.from, tr.to), (Mode::A1, Mode::A0));
    }

    #[test]
    fn dwell_defers_without_latching() {
        let mut s = Supervisor::default();
        s.decide(0.0, &[obstacle(0.5, true, true)], 0.0);
        assert!(s
            .decide(0.05, &[obstacle(0.5, true, false)], -1.0)
            .is_none());
        // the deferred trigger is gone by the time dwell expires
        assert!(s.decide(0.2, &[obstacle(0.5, true, true)], -1.0).is_none());
        assert_eq!(s.mode(), Mode::A1);
    }

    #[test]
    fn clockwise_mirrors_release_test() {
        let ccw = release_predicates(
            0.3,
            Containment::AvoidOutside,
            Turn::Counterclockwise,
            KeepInsideRule::Mirrored,
        );
        let cw = release_predicates(
            -0.3,
            Containment::AvoidOutside,
            Turn::Clockwise,
            KeepInsideRule::Mirrored,
        );
        assert_eq!(ccw, cw);
        assert_eq!(ccw, (true, false));
        let ki = release_predicates(
            -0.3,
            Containment::KeepInside,
            Turn::Counterclockwise,
            KeepInsideRule::Mirrored,
        );
        assert_eq!(ki, (true, false));
        let ki = release_predicates(
            0.3,
            Containment::KeepInside,
            Turn::Counterclockwise,
            KeepInsideRule::Overlapping,
        );
        assert_eq!(ki, (true, true));
    }

    #[test]
    fn dominant_is_min_clearance() {
        let a = obstacle(0.9, false, false);
        let mut b = obstacle(0.4, true, true);
        b.feature = 1;
        assert_eq!(Supervisor::dominant(&[a, b]).unwrap().feature, 1);
    }
}
