//! Versioned JSON scenario schema: parsing, validation with key-path
//! diagnostics, and construction of a runnable [`SimConfig`].
//!
//! A scenario file is a single JSON document with `schema: 1`. Unknown keys
//! are rejected, every numeric field is range-checked, and the first
//! offending key path is reported so a caller can surface it verbatim.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::PlanarTwoLink;
use crate::controller::{ControlMode, ControllerConfig};
use crate::dynamics::{default_link_inertias, scaled_inertias, FrictionParams, DEFAULT_GRAVITY};
use crate::offset::{BindingImpedance, DonningGeometry, OffsetRateForm};
use crate::sim::binding::{BindingParams, SensorParams};
use crate::sim::intent::{HumanIntent, IntentProfile, Movement, SquarePath};
use crate::sim::plant::PlantParams;
use crate::sim::runner::{DonningConfig, SimConfig};
use crate::{JointVec, Scalar, JOINT_COUNT};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector2, Vector3};

/// Errors raised while loading or building a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    /// The document is not valid JSON or contains unknown/mistyped keys.
    #[error("scenario parse error: {message}")]
    Parse { message: String },
    /// A field is out of range; `path` is the first offending key path.
    #[error("invalid scenario field `{path}`: {message}")]
    Invalid { path: String, message: String },
}

/// Segment lengths and cuff placement.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmSection {
    /// Wearer's upper-arm length (m).
    pub human_upper: f64,
    /// Wearer's forearm length (m).
    pub human_forearm: f64,
    /// Device upper-arm rod length (m).
    pub exo_upper: f64,
    /// Device forearm rod length (m).
    pub exo_forearm: f64,
    /// Upper-arm cuff position as a fraction of the rod length.
    pub ua_cuff_fraction: f64,
    /// Forearm cuff position as a fraction of the rod length.
    pub fa_cuff_fraction: f64,
}

impl Default for ArmSection {
    fn default() -> Self {
        Self {
            human_upper: 0.33,
            human_forearm: 0.27,
            exo_upper: crate::chain::DEFAULT_UPPER_ARM,
            exo_forearm: crate::chain::DEFAULT_FOREARM,
            ua_cuff_fraction: crate::chain::DEFAULT_UA_CUFF_FRACTION,
            fa_cuff_fraction: crate::chain::DEFAULT_FA_CUFF_FRACTION,
        }
    }
}

/// Scripted motion description.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntentSection {
    /// Stay at the posture.
    Hold,
    /// Sinusoidal drive of one movement's joints.
    JointSine {
        /// Movement name (e.g. `elbow_flex`, `arm_lift`).
        movement: Movement,
        /// Half excursion (rad).
        amplitude: f64,
        /// Peak joint speed (rad/s).
        peak_speed: f64,
    },
    /// Rounded-square endpoint path in the sagittal plane.
    SquarePath {
        /// Square center, distance below the shoulder (m).
        #[serde(default = "default_center_down")]
        center_down: f64,
        /// Square center, distance forward of the shoulder (m).
        #[serde(default)]
        center_forward: f64,
        /// Side length (m).
        #[serde(default = "default_side")]
        side: f64,
        /// Corner radius (m).
        #[serde(default = "default_corner")]
        corner_radius: f64,
        /// Peak endpoint speed (m/s).
        peak_speed: f64,
    },
}

fn default_center_down() -> f64 {
    0.34
}
fn default_side() -> f64 {
    0.4
}
fn default_corner() -> f64 {
    0.1
}

/// Spring-damper binding coefficients (shared by all three cuffs).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BindingSection {
    /// Translational stiffness (N/m), every axis.
    pub linear_stiffness: f64,
    /// Translational damping (N·s/m).
    pub linear_damping: f64,
    /// Rotational stiffness (N·m/rad).
    pub angular_stiffness: f64,
    /// Rotational damping (N·m·s/rad).
    pub angular_damping: f64,
    /// Mounting offset: translation of the spring rest frame from the
    /// reference attachment frame, in that frame (m).
    pub mounting_offset_translation: [f64; 3],
}

impl Default for BindingSection {
    fn default() -> Self {
        Self {
            linear_stiffness: 1500.0,
            linear_damping: 40.0,
            angular_stiffness: 30.0,
            angular_damping: 1.0,
            mounting_offset_translation: [0.0; 3],
        }
    }
}

/// Donning mismatch injection (omit the section to disable it).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DonningSection {
    /// Rotational stiffness of the cuff straps (N·m/rad).
    pub stiffness: f64,
    /// Rotational damping of the cuff straps (N·m·s/rad).
    pub damping: f64,
}

impl Default for DonningSection {
    fn default() -> Self {
        let imp = BindingImpedance::<f64>::default();
        Self { stiffness: imp.stiffness, damping: imp.damping }
    }
}

/// Sensor model parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    /// Force-axis noise standard deviation (N).
    pub force_noise_std: f64,
    /// Torque-axis noise standard deviation (N·m).
    pub torque_noise_std: f64,
    /// Force measurement range (±N).
    pub force_range: f64,
    /// Torque measurement range (±N·m).
    pub torque_range: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let p = SensorParams::<f64>::default();
        Self {
            force_noise_std: p.force_noise_std,
            torque_noise_std: p.torque_noise_std,
            force_range: p.force_range,
            torque_range: p.torque_range,
        }
    }
}

/// Plant-side mismatch and integration settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    /// Plant mass/inertia scale relative to the controller model.
    pub mass_scale: f64,
    /// Plant friction scale relative to the controller model.
    pub friction_scale: f64,
    /// Integration substeps per control tick.
    pub substeps: u32,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self { mass_scale: 1.05, friction_scale: 1.2, substeps: 10 }
    }
}

/// Optional controller overrides; unset fields keep the defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// Wrench/rate filter cutoff (Hz).
    pub filter_cutoff_hz: Option<f64>,
    /// Alignment gain-map force bound (N).
    pub f_max: Option<f64>,
    /// Intent-gating force threshold (N).
    pub intent_threshold: Option<f64>,
    /// Elbow coordination gain slope.
    pub lambda_elbow: Option<f64>,
    /// Wrist coordination gain slope.
    pub lambda_wrist: Option<f64>,
    /// Per-joint torque limits (N·m).
    pub torque_limits: Option<[f64; JOINT_COUNT]>,
}

/// A parsed scenario document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Schema version; must be 1.
    pub schema: u32,
    /// Scenario name, carried into metrics and output files.
    pub name: String,
    /// Control mode (overridable by the caller).
    #[serde(default = "default_mode")]
    pub mode: ControlMode,
    /// Run duration (s).
    pub duration_s: f64,
    /// Sensor-noise seed (overridable by the caller).
    #[serde(default)]
    pub seed: u64,
    /// Segment lengths and cuff placement.
    #[serde(default)]
    pub arm: ArmSection,
    /// Base posture (rad, 9 joints).
    #[serde(default = "default_posture")]
    pub posture: [f64; JOINT_COUNT],
    /// Scripted motion.
    pub intent: IntentSection,
    /// Per-axis cap on the force the human sustains (N).
    #[serde(default = "default_force_cap")]
    pub force_cap: f64,
    /// Per-axis cap on the torque the human sustains (N·m).
    #[serde(default = "default_torque_cap")]
    pub torque_cap: f64,
    /// Binding spring-damper coefficients.
    #[serde(default)]
    pub binding: BindingSection,
    /// Donning mismatch injection; omit for perfectly matched lengths.
    #[serde(default)]
    pub donning: Option<DonningSection>,
    /// Sensor model.
    #[serde(default)]
    pub sensors: SensorSection,
    /// Plant mismatch and integration.
    #[serde(default)]
    pub plant: PlantSection,
    /// Controller overrides.
    #[serde(default)]
    pub controller: ControllerSection,
}

fn default_mode() -> ControlMode {
    ControlMode::BasFcm
}
fn default_posture() -> [f64; JOINT_COUNT] {
    [0.0; JOINT_COUNT]
}
fn default_force_cap() -> f64 {
    60.0
}
fn default_torque_cap() -> f64 {
    12.0
}

impl ScenarioFile {
    /// Parses a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse { message: e.to_string() })
    }

    /// Serializes back to pretty JSON (used to generate fixture files).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    /// Range-checks every field, reporting the first offending key path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        fn check(path: &str, value: f64, lo: f64, hi: f64) -> Result<(), ScenarioError> {
            if !value.is_finite() || value < lo || value > hi {
                return Err(ScenarioError::Invalid {
                    path: path.to_string(),
                    message: format!("{value} is outside [{lo}, {hi}]"),
                });
            }
            Ok(())
        }

        if self.schema != 1 {
            return Err(ScenarioError::Invalid {
                path: "schema".into(),
                message: format!("unsupported schema version {}", self.schema),
            });
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(ScenarioError::Invalid {
                path: "name".into(),
                message: "must be non-empty and use only [A-Za-z0-9_-]".into(),
            });
        }
        check("duration_s", self.duration_s, 1e-3, 600.0)?;
        check("arm.human_upper", self.arm.human_upper, 0.05, 1.0)?;
        check("arm.human_forearm", self.arm.human_forearm, 0.05, 1.0)?;
        check("arm.exo_upper", self.arm.exo_upper, 0.05, 1.0)?;
        check("arm.exo_forearm", self.arm.exo_forearm, 0.05, 1.0)?;
        check("arm.ua_cuff_fraction", self.arm.ua_cuff_fraction, 0.05, 0.95)?;
        check("arm.fa_cuff_fraction", self.arm.fa_cuff_fraction, 0.05, 0.95)?;
        for (j, v) in self.posture.iter().enumerate() {
            check(&format!("posture[{j}]"), *v, -3.2, 3.2)?;
        }
        match &self.intent {
            IntentSection::Hold => {}
            IntentSection::JointSine { amplitude, peak_speed, .. } => {
                check("intent.amplitude", *amplitude, 1e-3, 1.5)?;
                check("intent.peak_speed", *peak_speed, 1e-3, 10.0)?;
            }
            IntentSection::SquarePath {
                center_down,
                center_forward,
                side,
                corner_radius,
                peak_speed,
            } => {
                check("intent.center_down", *center_down, -1.0, 1.0)?;
                check("intent.center_forward", *center_forward, -1.0, 1.0)?;
                check("intent.side", *side, 0.01, 1.0)?;
                check("intent.corner_radius", *corner_radius, 1e-4, side * 0.5)?;
                check("intent.peak_speed", *peak_speed, 1e-3, 10.0)?;
                self.check_path_reach()?;
            }
        }
        check("force_cap", self.force_cap, 1e-3, 1e4)?;
        check("torque_cap", self.torque_cap, 1e-3, 1e4)?;
        check("binding.linear_stiffness", self.binding.linear_stiffness, 0.0, 1e15)?;
        check("binding.linear_damping", self.binding.linear_damping, 0.0, 1e12)?;
        check("binding.angular_stiffness", self.binding.angular_stiffness, 0.0, 1e15)?;
        check("binding.angular_damping", self.binding.angular_damping, 0.0, 1e12)?;
        for (i, v) in self.binding.mounting_offset_translation.iter().enumerate() {
            check(&format!("binding.mounting_offset_translation[{i}]"), *v, -0.5, 0.5)?;
        }
        if let Some(d) = &self.donning {
            check("donning.stiffness", d.stiffness, 0.0, 1e6)?;
            check("donning.damping", d.damping, 0.0, 1e6)?;
        }
        check("sensors.force_noise_std", self.sensors.force_noise_std, 0.0, 100.0)?;
        check("sensors.torque_noise_std", self.sensors.torque_noise_std, 0.0, 100.0)?;
        check("sensors.force_range", self.sensors.force_range, 1e-3, 1e6)?;
        check("sensors.torque_range", self.sensors.torque_range, 1e-3, 1e6)?;
        check("plant.mass_scale", self.plant.mass_scale, 0.1, 10.0)?;
        check("plant.friction_scale", self.plant.friction_scale, 0.0, 10.0)?;
        if self.plant.substeps == 0 || self.plant.substeps > 1000 {
            return Err(ScenarioError::Invalid {
                path: "plant.substeps".into(),
                message: format!("{} is outside [1, 1000]", self.plant.substeps),
            });
        }
        let c = &self.controller;
        if let Some(v) = c.filter_cutoff_hz {
            check("controller.filter_cutoff_hz", v, 0.1, 40.0)?;
        }
        if let Some(v) = c.f_max {
            check("controller.f_max", v, 1e-3, 1e4)?;
        }
        if let Some(v) = c.intent_threshold {
            check("controller.intent_threshold", v, 1e-3, 1e4)?;
        }
        if let Some(v) = c.lambda_elbow {
            check("controller.lambda_elbow", v, 0.0, 100.0)?;
        }
        if let Some(v) = c.lambda_wrist {
            check("controller.lambda_wrist", v, 0.0, 100.0)?;
        }
        if let Some(limits) = &c.torque_limits {
            for (j, v) in limits.iter().enumerate() {
                if !(*v > 0.0) {
                    return Err(ScenarioError::Invalid {
                        path: format!("controller.torque_limits[{j}]"),
                        message: format!("{v} must be positive"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Ensures the square path stays inside the reachable annulus of the
    /// human arm and, when donning mismatch is active, the device rods.
    fn check_path_reach(&self) -> Result<(), ScenarioError> {
        let IntentSection::SquarePath { center_down, center_forward, side, corner_radius, .. } =
            &self.intent
        else {
            return Ok(());
        };
        let path = SquarePath::<f64> {
            center: Vector2::new(*center_down, *center_forward),
            side: *side,
            corner_radius: *corner_radius,
        };
        path.validate().map_err(|e| ScenarioError::Invalid {
            path: "intent.corner_radius".into(),
            message: e.to_string(),
        })?;
        let mut chains = vec![("arm.human_upper/human_forearm", self.arm.human_upper, self.arm.human_forearm)];
        if self.donning.is_some() {
            chains.push(("arm.exo_upper/exo_forearm", self.arm.exo_upper, self.arm.exo_forearm));
        }
        let total = path.perimeter();
        for (what, l1, l2) in chains {
            let (min_r, max_r) = ((l1 - l2).abs(), l1 + l2);
            for k in 0..=256 {
                let s = total * k as f64 / 256.0;
                let (p, _) = path.point_and_tangent(s);
                let r = p.norm();
                if r < min_r + 1e-6 || r > max_r - 1e-6 {
                    return Err(ScenarioError::Invalid {
                        path: "intent".into(),
                        message: format!(
                            "path radius {r:.4} m leaves the reachable band [{min_r:.4}, {max_r:.4}] of {what}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds the runnable configuration, applying optional overrides.
    pub fn build(
        &self,
        mode_override: Option<ControlMode>,
        seed_override: Option<u64>,
    ) -> Result<SimConfig<Scalar>, ScenarioError> {
        self.validate()?;
        let mode = mode_override.unwrap_or(self.mode);
        let seed = seed_override.unwrap_or(self.seed);

        let model = crate::chain::ChainModel::with_segments(
            self.arm.exo_upper,
            self.arm.exo_forearm,
            self.arm.ua_cuff_fraction,
            self.arm.fa_cuff_fraction,
        );

        let mut controller = ControllerConfig::with_mode(mode);
        let c = &self.controller;
        if let Some(v) = c.filter_cutoff_hz {
            controller.filter_cutoff_hz = v;
        }
        if let Some(v) = c.f_max {
            controller.bas.f_max = v;
        }
        if let Some(v) = c.intent_threshold {
            controller.fcm.threshold = v;
        }
        if let Some(v) = c.lambda_elbow {
            controller.fcm.lambda_elbow = v;
        }
        if let Some(v) = c.lambda_wrist {
            controller.fcm.lambda_wrist = v;
        }
        if let Some(limits) = c.torque_limits {
            controller.torque_limits = limits;
        }

        let profile = match self.intent {
            IntentSection::Hold => IntentProfile::Hold,
            IntentSection::JointSine { movement, amplitude, peak_speed } => {
                IntentProfile::JointSine { movement, amplitude, peak_speed }
            }
            IntentSection::SquarePath {
                center_down,
                center_forward,
                side,
                corner_radius,
                peak_speed,
            } => IntentProfile::TargetPath {
                path: SquarePath {
                    center: Vector2::new(center_down, center_forward),
                    side,
                    corner_radius,
                },
                peak_speed,
            },
        };
        let planar = PlanarTwoLink::new(self.arm.human_upper, self.arm.human_forearm)
            .map_err(|e| ScenarioError::Invalid {
                path: "arm.human_upper".into(),
                message: e.to_string(),
            })?;
        let intent = HumanIntent {
            posture: JointVec::from_row_slice(&self.posture),
            profile,
            planar,
            force_cap: self.force_cap,
            torque_cap: self.torque_cap,
        };

        let b = &self.binding;
        let offset_t = b.mounting_offset_translation;
        let binding = BindingParams {
            linear_stiffness: Vector3::repeat(b.linear_stiffness),
            linear_damping: Vector3::repeat(b.linear_damping),
            angular_stiffness: Vector3::repeat(b.angular_stiffness),
            angular_damping: Vector3::repeat(b.angular_damping),
            mounting_offset: Isometry3::from_parts(
                Translation3::new(offset_t[0], offset_t[1], offset_t[2]),
                UnitQuaternion::identity(),
            ),
        };

        let donning = match &self.donning {
            None => None,
            Some(d) => Some(DonningConfig {
                geometry: DonningGeometry {
                    human: planar,
                    exo: PlanarTwoLink::new(self.arm.exo_upper, self.arm.exo_forearm).map_err(
                        |e| ScenarioError::Invalid {
                            path: "arm.exo_upper".into(),
                            message: e.to_string(),
                        },
                    )?,
                },
                impedance: BindingImpedance { stiffness: d.stiffness, damping: d.damping },
                rate_form: OffsetRateForm::ChainRule,
            }),
        };

        let plant = PlantParams {
            links: scaled_inertias(&default_link_inertias(), self.plant.mass_scale),
            friction: [FrictionParams::default().scaled(self.plant.friction_scale); JOINT_COUNT],
            gravity: Vector3::from(DEFAULT_GRAVITY),
            substeps: self.plant.substeps,
            control_dt: 1.0 / controller.control_rate_hz,
        };

        Ok(SimConfig {
            name: self.name.clone(),
            model,
            controller,
            plant,
            intent,
            bindings: [binding; 3],
            sensors: SensorParams {
                force_noise_std: self.sensors.force_noise_std,
                torque_noise_std: self.sensors.torque_noise_std,
                force_range: self.sensors.force_range,
                torque_range: self.sensors.torque_range,
            },
            donning,
            duration_s: self.duration_s,
            seed,
        })
    }
}
