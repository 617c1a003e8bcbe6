//! Run statistics.

use serde::Serialize;

use crate::supervisor::Mode;

use super::scenario::Scenario;
use super::sim::{RunStatus, Trace};

/// Safety-mode steps with `|δ̃|` above this are outside the nominal model's validity region.
pub const ALIGNMENT_FLAG: f64 = 0.3;

/// `(min, mean, fraction ≥ threshold)` of a clearance series; NaN entries are skipped.
pub fn clearance_stats(series: &[f64], threshold: f64) -> (f64, f64, f64) {
    let mut n = 0usize;
    let (mut min, mut sum, mut above) = (f64::INFINITY, 0.0, 0usize);
    for &d in series.iter().filter(|d| !d.is_nan()) {
        n += 1;
        min = min.min(d);
        sum += d;
        if d >= threshold {
            above += 1;
        }
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    (min, sum / n as f64, above as f64 / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureStats {
    pub feature: String,
    pub safe_distance: f64,
    /// Violation floor, `violation_floor_fraction · d̄_o`.
    pub floor: f64,
    pub min_clearance: f64,
    pub min_clearance_t: f64,
    pub mean_clearance: f64,
    pub fraction_above_floor: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Encounter {
    pub feature: String,
    pub start: f64,
    /// Release time; `None` if the run ended in safety mode.
    pub end: Option<f64>,
    pub transitions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobotSummary {
    pub robot: String,
    pub final_position: [f64; 2],
    /// RMS position error over steps in tracking mode.
    pub tracking_rms_a0: f64,
    pub final_tracking_error: f64,
    pub fraction_in_safety: f64,
    /// Fraction of safety-mode steps with `|δ̃| > ALIGNMENT_FLAG`.
    pub alignment_excursion_fraction: f64,
    pub max_alignment_error: f64,
    pub features: Vec<FeatureStats>,
    pub encounters: Vec<Encounter>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub dt: f64,
    pub steps: usize,
    #[serde(flatten)]
    pub status: RunStatus,
    pub safety_violation: bool,
    pub robots: Vec<RobotSummary>,
    pub transitions: Vec<super::sim::RobotTransition>,
}

impl Summary {
    /// 0 when all safety invariants held, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.safety_violation {
            2
        } else {
            0
        }
    }
}

pub fn summarize(scenario: &Scenario, trace: &Trace) -> Summary {
    let floor_fraction = scenario.file.output.violation_floor_fraction;
    let n_robots = trace.robot_names.len();
    let mut robots = Vec::with_capacity(n_robots);
    for i in 0..n_robots {
        let rows: Vec<_> = trace.robot_rows(i).collect();
        let tracking: Vec<f64> = rows
            .iter()
            .filter(|r| r.mode == Mode::A0)
            .map(|r| r.position_error().powi(2))
            .collect();
        let tracking_rms_a0 = if tracking.is_empty() {
            f64::NAN
        } else {
            (tracking.iter().sum::<f64>() / tracking.len() as f64).sqrt()
        };
        let in_safety = rows.iter().filter(|r| r.mode.is_safety()).count();
        let deltas: Vec<f64> = rows
            .iter()
            .filter(|r| r.mode.is_safety())
            .map(|r| r.alignment_error.abs())
            .collect();
        let excursions = deltas.iter().filter(|d| **d > ALIGNMENT_FLAG).count();
        let max_alignment_error = deltas.iter().copied().fold(0.0, f64::max);

        let mut features = Vec::new();
        for (j, f) in scenario.features.iter().enumerate() {
            let series: Vec<f64> = rows.iter().map(|r| r.clearances[j]).collect();
            if series.iter().all(|d| d.is_nan()) {
                continue;
            }
            let floor = floor_fraction * f.safe_distance;
            let (min, mean, frac) = clearance_stats(&series, floor);
            let min_t = rows
                .iter()
                .filter(|r| r.clearances[j] == min)
                .map(|r| r.t)
                .next()
                .unwrap_or(f64::NAN);
            features.push(FeatureStats {
                feature: f.name.clone(),
                safe_distance: f.safe_distance,
                floor,
                min_clearance: min,
                min_clearance_t: min_t,
                mean_clearance: mean,
                fraction_above_floor: frac,
                violated: min < floor,
            });
        }

        let mut encounters: Vec<Encounter> = Vec::new();
        for tr in trace
            .transitions
            .iter()
            .filter(|t| t.robot == i)
            .map(|t| &t.transition)
        {
            if tr.from == Mode::A0 {
                encounters.push(Encounter {
                    feature: trace.feature_names[tr.feature].clone(),
                    start: tr.t,
                    end: None,
                    transitions: 1,
                });
            } else if let Some(e) = encounters.last_mut() {
                e.transitions += 1;
                if tr.to == Mode::A0 {
                    e.end = Some(tr.t);
                }
            }
        }

        let final_state = trace.final_states[i];
        let final_tracking_error = rows.last().map(|r| r.position_error()).unwrap_or(f64::NAN);
        robots.push(RobotSummary {
            robot: trace.robot_names[i].clone(),
            final_position: [final_state.x, final_state.y],
            tracking_rms_a0,
            final_tracking_error,
            fraction_in_safety: if rows.is_empty() {
                0.0
            } else {
                in_safety as f64 / rows.len() as f64
            },
            alignment_excursion_fraction: if deltas.is_empty() {
                0.0
            } else {
                excursions as f64 / deltas.len() as f64
            },
            max_alignment_error,
            features,
            encounters,
        });
    }

    let violated = robots.iter().any(|r| r.features.iter().any(|f| f.violated));
    Summary {
        scenario: trace.scenario.clone(),
        dt: trace.dt,
        steps: trace.rows.len() / n_robots.max(1),
        safety_violation: violated || trace.status.is_failed(),
        status: trace.status.clone(),
        robots,
        transitions: trace.transitions.clone(),
    }
}
