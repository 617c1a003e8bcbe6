//! Scenario files.
//!
//! Scenarios are TOML documents whose keys carry their units (`safe_distance_m`,
//! `frequency_radps`, ...). Unknown keys are rejected so that a typo in a safety
//! parameter never silently falls back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    velocity_bounds, Disturbance, RandomWalk, RobotParams, RobotState, WheelDisturbance,
};
use crate::geometry::{rounded_rectangle, Containment, Feature, Shape, Turn};
use crate::linearization::{default_look_ahead, look_ahead_interval, max_transformed_bound};
use crate::math::Vec2;
use crate::reference::{Profile, ProfileSegment};
use crate::safety::{u_zeta_bound, SafetyGains};
use crate::sta::{validate_gains, StaGains};
use crate::supervisor::{KeepInsideRule, DEFAULT_DWELL};
use crate::tracking::TrackingGains;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario failed admissibility checks:\n{0}")]
    Invalid(ValidationReport),
    #[error("feature {feature}: unknown robot {robot:?}")]
    UnknownRobot { feature: String, robot: String },
    #[error("feature {feature}: {problem}")]
    BadFeature { feature: String, problem: String },
}

fn default_dt() -> f64 {
    1e-3
}

/// Top-level scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub supervisor: SupervisorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisorSpec {
    #[serde(default = "SupervisorSpec::default_dwell")]
    pub dwell_s: f64,
    #[serde(default)]
    pub keep_inside_rule: KeepInsideRule,
}

impl SupervisorSpec {
    fn default_dwell() -> f64 {
        DEFAULT_DWELL
    }
}

impl Default for SupervisorSpec {
    fn default() -> Self {
        Self {
            dwell_s: DEFAULT_DWELL,
            keep_inside_rule: KeepInsideRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub svg: bool,
    /// A feature's clearance below this fraction of its safe distance is a violation.
    #[serde(default = "OutputSpec::default_floor")]
    pub violation_floor_fraction: f64,
}

impl OutputSpec {
    fn default_floor() -> f64 {
        0.9
    }
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            svg: false,
            violation_floor_fraction: Self::default_floor(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    #[serde(default)]
    pub v_mps: f64,
    #[serde(default)]
    pub omega_radps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub a_per_s: f64,
    pub b_mps2_per_v: f64,
    pub wheel_separation_m: f64,
    pub voltage_bound_v: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        let p = RobotParams::reference_robot();
        Self {
            a_per_s: p.a,
            b_mps2_per_v: p.b,
            wheel_separation_m: p.d,
            voltage_bound_v: p.u_max,
        }
    }
}

impl From<ParamsSpec> for RobotParams {
    fn from(s: ParamsSpec) -> Self {
        RobotParams {
            a: s.a_per_s,
            b: s.b_mps2_per_v,
            d: s.wheel_separation_m,
            u_max: s.voltage_bound_v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyPreset {
    #[default]
    Obstacle,
    Border,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySpec {
    #[serde(default)]
    pub preset: SafetyPreset,
    pub c_zeta: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub c_v: Option<f64>,
    pub c_omega: Option<f64>,
    #[serde(default)]
    pub omega_ref_feedforward: bool,
}

impl SafetySpec {
    pub fn gains(&self) -> SafetyGains {
        let base = match self.preset {
            SafetyPreset::Obstacle => SafetyGains::obstacle(),
            SafetyPreset::Border => SafetyGains::border(),
        };
        SafetyGains {
            c_zeta: self.c_zeta.unwrap_or(base.c_zeta),
            k1: self.k1.unwrap_or(base.k1),
            k2: self.k2.unwrap_or(base.k2),
            c_v: self.c_v.unwrap_or(base.c_v),
            c_omega: self.c_omega.unwrap_or(base.c_omega),
            omega_ref_feedforward: self.omega_ref_feedforward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    /// Follow `v_r cos(θ − θ_r)` instead of `v_r` while in safety mode.
    #[serde(default)]
    pub shadow_speed: bool,
    pub segments: Vec<ProfileSegment>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    Zero,
    Constant {
        value_mps2: f64,
    },
    Sinusoid {
        amplitude_mps2: f64,
        frequency_radps: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    RandomWalk {
        bound_mps2: f64,
        lipschitz_mps3: f64,
        #[serde(default = "DisturbanceSpec::default_knot")]
        knot_spacing_s: f64,
    },
}

impl DisturbanceSpec {
    fn default_knot() -> f64 {
        0.05
    }

    pub fn build(&self, horizon: f64, seed: u64) -> Disturbance {
        match *self {
            DisturbanceSpec::Zero => Disturbance::Zero,
            DisturbanceSpec::Constant { value_mps2 } => Disturbance::Constant(value_mps2),
            DisturbanceSpec::Sinusoid {
                amplitude_mps2,
                frequency_radps,
                phase_rad,
            } => Disturbance::Sinusoid {
                amplitude: amplitude_mps2,
                frequency: frequency_radps,
                phase: phase_rad,
            },
            DisturbanceSpec::RandomWalk {
                bound_mps2,
                lipschitz_mps3,
                knot_spacing_s,
            } => Disturbance::RandomWalk(RandomWalk::new(
                bound_mps2,
                lipschitz_mps3,
                horizon,
                knot_spacing_s,
                seed,
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelDisturbanceSpec {
    #[serde(default)]
    pub right: DisturbanceSpec,
    #[serde(default)]
    pub left: DisturbanceSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub name: String,
    pub initial: PoseSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub tracking: TrackingGains,
    #[serde(default)]
    pub safety: SafetySpec,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub disturbance: WheelDisturbanceSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundedRectangleSpec {
    pub center_m: [f64; 2],
    pub width_m: f64,
    pub height_m: f64,
    pub corner_radius_m: f64,
    #[serde(default = "RoundedRectangleSpec::default_arc")]
    pub arc_segments: usize,
}

impl RoundedRectangleSpec {
    fn default_arc() -> usize {
        12
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    Point,
    Disc,
    Polyline,
    RoundedRectangle,
    Robot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub center_m: Option<[f64; 2]>,
    pub radius_m: Option<f64>,
    pub vertices_m: Option<Vec<[f64; 2]>>,
    pub rounded_rectangle: Option<RoundedRectangleSpec>,
    /// Robot name, for `kind = "robot"`.
    pub robot: Option<String>,
    pub safe_distance_m: f64,
    /// Defaults to 10% of the safe distance.
    pub band_m: Option<f64>,
    #[serde(default)]
    pub containment: Containment,
    #[serde(default)]
    pub turn: Turn,
}

/// A validated, ready-to-run scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub robots: Vec<RobotSetup>,
    pub features: Vec<Feature>,
}

#[derive(Clone, Debug)]
pub struct RobotSetup {
    pub name: String,
    pub params: RobotParams,
    pub initial: RobotState,
    pub tracking: TrackingGains,
    pub safety: SafetyGains,
    pub profile: Profile,
    pub reference_pose: (f64, f64, f64),
    pub shadow_speed: bool,
    pub disturbance: WheelDisturbance,
}

/// One admissibility check with its margin (positive means satisfied).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub subject: String,
    pub check: String,
    pub margin: f64,
    pub ok: bool,
    /// Advisory checks are reported but never abort a run.
    pub advisory: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, subject: &str, check: impl Into<String>, margin: f64, advisory: bool) {
        self.checks.push(Check {
            subject: subject.to_string(),
            check: check.into(),
            margin,
            ok: margin > 0.0,
            advisory,
        });
    }

    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok || c.advisory)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok && !c.advisory)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let status = match (c.ok, c.advisory) {
                (true, _) => "ok",
                (false, true) => "WARN",
                (false, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<5} {:<12} {:<48} margin {:+.6}",
                status, c.subject, c.check, c.margin
            )?;
        }
        Ok(())
    }
}

/// Lipschitz constant of the transformed-channel perturbation for a wheel
/// disturbance class, `L_v + L·L_ω`. The rotation-rate coupling of `R_θ` is not
/// included.
pub fn channel_lipschitz(dist: &WheelDisturbance, params: &RobotParams) -> f64 {
    let c = dist.body_class(params);
    c.lipschitz_v + default_look_ahead(params) * c.lipschitz_omega
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    fn robot_index(&self, name: &str) -> Option<usize> {
        self.robots.iter().position(|r| r.name == name)
    }

    fn build_feature(&self, spec: &FeatureSpec) -> Result<Feature, ScenarioError> {
        let bad = |problem: &str| ScenarioError::BadFeature {
            feature: spec.name.clone(),
            problem: problem.to_string(),
        };
        let shape = match spec.kind {
            FeatureKind::Point | FeatureKind::Disc => {
                let c = spec.center_m.ok_or_else(|| bad("missing center_m"))?;
                let radius = match spec.kind {
                    FeatureKind::Point => {
                        if spec.radius_m.is_some() {
                            return Err(bad("point features take no radius_m"));
                        }
                        0.0
                    }
                    _ => spec.radius_m.ok_or_else(|| bad("missing radius_m"))?,
                };
                Shape::Disc {
                    center: Vec2::new(c[0], c[1]),
                    radius,
                }
            }
            FeatureKind::Polyline => {
                let v = spec
                    .vertices_m
                    .as_ref()
                    .ok_or_else(|| bad("missing vertices_m"))?;
                Shape::Polyline {
                    vertices: v.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
                }
            }
            FeatureKind::RoundedRectangle => {
                let r = spec
                    .rounded_rectangle
                    .ok_or_else(|| bad("missing rounded_rectangle"))?;
                if !(r.corner_radius_m >= 0.0
                    && 2.0 * r.corner_radius_m <= r.width_m.min(r.height_m)
                    && r.arc_segments >= 1)
                {
                    return Err(bad(
                        "rounded rectangle needs 0 <= 2*corner_radius <= min(width, height)",
                    ));
                }
                Shape::Polyline {
                    vertices: rounded_rectangle(
                        Vec2::new(r.center_m[0], r.center_m[1]),
                        r.width_m,
                        r.height_m,
                        r.corner_radius_m,
                        r.arc_segments,
                    ),
                }
            }
            FeatureKind::Robot => {
                let name = spec.robot.as_ref().ok_or_else(|| bad("missing robot"))?;
                let robot = self
                    .robot_index(name)
                    .ok_or_else(|| ScenarioError::UnknownRobot {
                        feature: spec.name.clone(),
                        robot: name.clone(),
                    })?;
                Shape::MovingPoint { robot }
            }
        };
        Ok(Feature {
            name: spec.name.clone(),
            shape,
            safe_distance: spec.safe_distance_m,
            band: spec.band_m.unwrap_or(0.1 * spec.safe_distance_m),
            containment: spec.containment,
            turn: spec.turn,
        })
    }

    /// Builds runtime objects and runs every admissibility check.
    pub fn build(&self) -> Result<(Scenario, ValidationReport), ScenarioError> {
        let features = self
            .features
            .iter()
            .map(|f| self.build_feature(f))
            .collect::<Result<Vec<_>, _>>()?;
        let mut report = ValidationReport::default();

        report.push("scenario", "dt_s > 0", self.dt_s, false);
        report.push(
            "scenario",
            "duration_s >= 0",
            self.duration_s + f64::MIN_POSITIVE,
            false,
        );
        report.push(
            "scenario",
            "at least one robot",
            self.robots.len() as f64,
            false,
        );
        report.push(
            "supervisor",
            "dwell_s >= 0",
            self.supervisor.dwell_s + f64::MIN_POSITIVE,
            false,
        );

        let mut robots = Vec::with_capacity(self.robots.len());
        for (i, spec) in self.robots.iter().enumerate() {
            let name = spec.name.as_str();
            let params: RobotParams = spec.params.into();
            report.push(name, "a > 0", params.a, false);
            report.push(name, "b > 0", params.b, false);
            report.push(name, "d > 0", params.d, false);
            report.push(name, "U > 0", params.u_max, false);
            let sane = params.a > 0.0 && params.b > 0.0 && params.d > 0.0 && params.u_max > 0.0;
            if sane {
                report.push(
                    name,
                    "U < a^2 d / b",
                    params.voltage_limit() - params.u_max,
                    false,
                );
                let (lo, hi) = look_ahead_interval(&params);
                let l = default_look_ahead(&params);
                report.push(name, "L = d/2 > bU/(2a^2)", l - lo, false);
                report.push(name, "L = d/2 < a^2 d^2/(2bU)", hi - l, false);
                report.push(name, "U'(d/2) > 0", max_transformed_bound(&params), false);
                let (v_max, w_max) = velocity_bounds(&params);
                report.push(
                    name,
                    "|v(0)| <= bU/a",
                    v_max - spec.initial.v_mps.abs() + f64::EPSILON,
                    false,
                );
                report.push(
                    name,
                    "|w(0)| <= 2bU/(ad)",
                    w_max - spec.initial.omega_radps.abs() + f64::EPSILON,
                    false,
                );
            }

            let t = &spec.tracking;
            report.push(name, "tracking c > 0", t.c, false);
            report.push(name, "tracking k1 > 0", t.k1, false);
            report.push(name, "tracking k2 > 0", t.k2, false);

            let seed = self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(2 * i as u64);
            let horizon = self.duration_s.max(0.0) + 1.0;
            let disturbance = WheelDisturbance {
                right: spec.disturbance.right.build(horizon, seed),
                left: spec.disturbance.left.build(horizon, seed + 1),
            };
            if sane {
                let l_delta = channel_lipschitz(&disturbance, &params);
                let g = validate_gains(&StaGains::new(t.k1, t.k2, t.c), l_delta);
                report.push(
                    name,
                    format!("tracking k2 > L_delta ({l_delta:.4})"),
                    g.integral_margin,
                    false,
                );
                report.push(
                    name,
                    "tracking k1 > 2 sqrt(k2)",
                    g.proportional_margin,
                    false,
                );
            }

            let s = spec.safety.gains();
            for (label, v) in [
                ("safety c_zeta > 0", s.c_zeta),
                ("safety k1 > 0", s.k1),
                ("safety k2 > 0", s.k2),
                ("safety c_v > 0", s.c_v),
                ("safety c_omega > 0", s.c_omega),
            ] {
                report.push(name, label, v, false);
            }
            // The distance-channel perturbation bound is not computable in closed form,
            // so only the structural STA condition is checked, as advisory.
            let g = validate_gains(&StaGains::new(s.k1, s.k2, s.c_zeta), 0.0);
            report.push(name, "safety k1 > 2 sqrt(k2)", g.proportional_margin, true);

            let profile = Profile {
                segments: spec.reference.segments.clone(),
            };
            report.push(
                name,
                "reference has segments",
                profile.segments.len() as f64,
                false,
            );
            for (k, seg) in profile.segments.iter().enumerate() {
                report.push(
                    name,
                    format!("segment {k} duration > 0"),
                    seg.duration(),
                    false,
                );
                let v_min = match *seg {
                    ProfileSegment::Constant { v_mps, .. } => v_mps,
                    ProfileSegment::Sinusoid {
                        v_mean_mps,
                        v_amplitude_mps,
                        ..
                    } => v_mean_mps - v_amplitude_mps.abs(),
                };
                report.push(name, format!("segment {k} v_r > 0"), v_min, false);
            }

            robots.push(RobotSetup {
                name: spec.name.clone(),
                params,
                initial: RobotState::new(
                    spec.initial.x_m,
                    spec.initial.y_m,
                    crate::math::wrap_angle(spec.initial.theta_rad),
                    spec.initial.v_mps,
                    spec.initial.omega_radps,
                ),
                tracking: *t,
                safety: s,
                profile,
                reference_pose: (
                    spec.reference.x_m,
                    spec.reference.y_m,
                    spec.reference.theta_rad,
                ),
                shadow_speed: spec.reference.shadow_speed,
                disturbance,
            });
        }

        let min_d = robots.iter().map(|r| r.params.d).fold(0.0, f64::max);
        for f in &features {
            let name = f.name.as_str();
            report.push(
                name,
                "safe distance > d/2",
                f.safe_distance - min_d / 2.0,
                false,
            );
            report.push(name, "band > 0", f.band, false);
            report.push(
                name,
                "band <= 0.2 safe distance",
                0.2 * f.safe_distance - f.band + 1e-12,
                false,
            );
            if let Err(e) = f.validate(min_d, robots.len()) {
                report.push(name, e.to_string(), -1.0, false);
            }
            for r in &robots {
                if f.safe_distance > r.params.d / 2.0 {
                    report.push(
                        name,
                        format!("U_zeta for {} > 0", r.name),
                        u_zeta_bound(&r.params, f.safe_distance),
                        false,
                    );
                }
            }
        }

        let scenario = Scenario {
            file: self.clone(),
            robots,
            features,
        };
        Ok((scenario, report))
    }
}

impl Scenario {
    /// Parses, builds, and rejects inadmissible scenarios.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        ScenarioFile::from_toml(text)?.validated()
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        ScenarioFile::load(path)?.validated()
    }

    pub fn dt(&self) -> f64 {
        self.file.dt_s
    }

    pub fn duration(&self) -> f64 {
        self.file.duration_s
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }
}

impl ScenarioFile {
    pub fn validated(&self) -> Result<Scenario, ScenarioError> {
        let (scenario, report) = self.build()?;
        if report.is_ok() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(report))
        }
    }
}
