//! Closed-loop multi-robot simulation.
//!
//! Each step reads a snapshot of all robot positions, runs the geometry queries,
//! the supervisor and the active controller for every robot, and only then
//! integrates all plants. References advance on their own clock.

use serde::Serialize;

use crate::dynamics::{self, RobotState, WheelCommand};
use crate::geometry::{
    body_error, closest, in_avoidance, signed_clearance, DistanceReading, Shape,
};
use crate::math::{angle_diff, Vec2};
use crate::reference::{shadow_speed, ReferenceTrajectory};
use crate::safety::{SafetyController, SafetyTarget};
use crate::supervisor::{FeatureAssessment, Mode, Supervisor, Transition};
use crate::tracking::{zero_dynamics_phase, Tracker};

use super::scenario::Scenario;

/// One robot at one time step, recorded before the plant step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub robot: usize,
    pub state: RobotState,
    pub command: WheelCommand,
    pub mode: Mode,
    /// Signed clearance to the dominant feature (`NaN` without features).
    pub d_o: f64,
    pub dominant: Option<usize>,
    pub e_x: f64,
    pub e_y: f64,
    pub s_eta: f64,
    pub s_xi: f64,
    pub s_zeta: f64,
    /// `δ̃` while in safety mode, `NaN` otherwise.
    pub alignment_error: f64,
    pub reference: (f64, f64, f64),
    /// Signed clearance to every scenario feature; `NaN` where it does not apply.
    pub clearances: Vec<f64>,
}

impl TraceRow {
    pub fn position_error(&self) -> f64 {
        Vec2::new(
            self.state.x - self.reference.0,
            self.state.y - self.reference.1,
        )
        .norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed {
        t: f64,
        robot: String,
        feature: Option<String>,
        reason: String,
    },
}

impl RunStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, RunStatus::Failed { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobotTransition {
    pub robot: usize,
    #[serde(flatten)]
    pub transition: Transition,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub scenario: String,
    pub dt: f64,
    pub robot_names: Vec<String>,
    pub feature_names: Vec<String>,
    /// Rows ordered by step, then robot.
    pub rows: Vec<TraceRow>,
    pub transitions: Vec<RobotTransition>,
    pub final_states: Vec<RobotState>,
    pub status: RunStatus,
}

impl Trace {
    pub fn robot_rows(&self, robot: usize) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.robot == robot)
    }
}

struct Agent {
    state: RobotState,
    reference: ReferenceTrajectory,
    tracker: Tracker,
    safety: SafetyController,
    supervisor: Supervisor,
}

fn applies(shape: &Shape, robot: usize) -> bool {
    !matches!(shape, Shape::MovingPoint { robot: r } if *r == robot)
}

/// Runs a validated scenario to completion or to the first degenerate distance.
pub fn run(scenario: &Scenario) -> Trace {
    let dt = scenario.dt();
    let steps = (scenario.duration() / dt).round() as usize;
    let features = &scenario.features;
    let sup_spec = &scenario.file.supervisor;

    let mut agents: Vec<Agent> = scenario
        .robots
        .iter()
        .map(|r| {
            let tracker = Tracker::new(r.tracking, r.params);
            let (x, y, th) = r.reference_pose;
            let reference = ReferenceTrajectory::new(r.profile.clone(), x, y, th, tracker.look_ahead())
                .expect("validated profile");
            let rp = reference.point();
            let spurious = -2.0 * zero_dynamics_phase(rp.v, rp.omega, tracker.look_ahead());
            if angle_diff(angle_diff(r.initial.theta, rp.theta), spurious).abs() < 0.05 {
                log::warn!(
                    "{}: initial heading error within 0.05 rad of the unstable equilibrium {spurious:.3}",
                    r.name
                );
            }
            Agent {
                state: r.initial,
                reference,
                tracker,
                safety: SafetyController::new(r.safety, r.params),
                supervisor: Supervisor::new(sup_spec.dwell_s, sup_spec.keep_inside_rule),
            }
        })
        .collect();

    let n = agents.len();
    let mut rows = Vec::with_capacity(steps * n);
    let mut transitions = Vec::new();
    let mut status = RunStatus::Completed;
    let mut commands = vec![WheelCommand::default(); n];
    let mut at_corner = vec![false; n];

    'outer: for k in 0..steps {
        let t = k as f64 * dt;
        let snapshot: Vec<Vec2> = agents.iter().map(|a| a.state.position()).collect();

        for (i, agent) in agents.iter_mut().enumerate() {
            let setup = &scenario.robots[i];
            let state = agent.state;
            let rp = agent.reference.point();

            let mut readings: Vec<Option<DistanceReading>> = vec![None; features.len()];
            let mut clearances = vec![f64::NAN; features.len()];
            let mut assessments = Vec::with_capacity(features.len());
            for (j, f) in features.iter().enumerate() {
                if !applies(&f.shape, i) {
                    continue;
                }
                let reading = match closest(&state, j, f, &snapshot) {
                    Ok(r) => r,
                    Err(e) => {
                        status = RunStatus::Failed {
                            t,
                            robot: setup.name.clone(),
                            feature: Some(f.name.clone()),
                            reason: e.to_string(),
                        };
                        break 'outer;
                    }
                };
                let clearance = signed_clearance(state.position(), f, &snapshot);
                let ref_clearance = signed_clearance(rp.position(), f, &snapshot);
                readings[j] = Some(reading);
                clearances[j] = clearance;
                assessments.push(FeatureAssessment {
                    feature: j,
                    clearance,
                    in_band: in_avoidance(clearance, f),
                    reference_in_zone: in_avoidance(ref_clearance, f),
                    containment: f.containment,
                    turn: f.turn,
                });
            }

            let (e_x, e_y) = body_error(&state, &rp);
            if let Some(tr) = agent.supervisor.decide(t, &assessments, e_y) {
                if tr.from == Mode::A0 {
                    agent.safety.activate();
                }
                transitions.push(RobotTransition {
                    robot: i,
                    transition: tr,
                });
            }
            let mode = agent.supervisor.mode();
            let dominant = Supervisor::dominant(&assessments).map(|a| a.feature);

            let (s_eta, s_xi) = agent.tracker.surfaces(&state, &rp);
            let (command, s_zeta, alignment_error) =
                match (mode.is_safety(), agent.supervisor.active_feature()) {
                    (true, Some(j)) => {
                        let f = &features[j];
                        let reading = readings[j].expect("active feature applies to this robot");
                        if reading.at_vertex && !at_corner[i] {
                            log::debug!("t={t:.3} {}: corner passage on {}", setup.name, f.name);
                        }
                        at_corner[i] = reading.at_vertex;
                        let target = SafetyTarget {
                            safe_distance: f.safe_distance,
                            turn: f.local_turn(),
                            moving: matches!(f.shape, Shape::MovingPoint { .. }),
                        };
                        let v_target = if setup.shadow_speed {
                            shadow_speed(state.theta, rp.theta, rp.v)
                        } else {
                            rp.v
                        };
                        let out = agent.safety.command(&state, &reading, target, v_target, dt);
                        (out.command, out.s_zeta, out.alignment_error)
                    }
                    _ => {
                        let out = agent.tracker.track(&state, &rp, dt);
                        let s_zeta = dominant
                            .and_then(|j| readings[j].map(|r| (j, r)))
                            .map(|(j, r)| {
                                crate::safety::zeta2_analytic(&state, &r)
                                    + setup.safety.c_zeta * (r.distance - features[j].safe_distance)
                            })
                            .unwrap_or(f64::NAN);
                        (out.command, s_zeta, f64::NAN)
                    }
                };
            commands[i] = command;

            rows.push(TraceRow {
                t,
                robot: i,
                state,
                command,
                mode,
                d_o: dominant.map(|j| clearances[j]).unwrap_or(f64::NAN),
                dominant,
                e_x,
                e_y,
                s_eta,
                s_xi,
                s_zeta,
                alignment_error,
                reference: (rp.x, rp.y, rp.theta),
                clearances,
            });
        }

        for (i, agent) in agents.iter_mut().enumerate() {
            let setup = &scenario.robots[i];
            agent.state = dynamics::step(
                &agent.state,
                commands[i],
                &setup.disturbance,
                &setup.params,
                t,
                dt,
            );
            if let Err(e) = agent.reference.advance(dt) {
                status = RunStatus::Failed {
                    t,
                    robot: setup.name.clone(),
                    feature: None,
                    reason: e.to_string(),
                };
                break 'outer;
            }
        }
    }

    Trace {
        scenario: scenario.name().to_string(),
        dt,
        robot_names: scenario.robots.iter().map(|r| r.name.clone()).collect(),
        feature_names: features.iter().map(|f| f.name.clone()).collect(),
        rows,
        transitions,
        final_states: agents.iter().map(|a| a.state).collect(),
        status,
    }
}
