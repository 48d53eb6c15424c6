//! Scripted human-arm motion.
//!
//! The human side of the loop is purely kinematic: a reference joint
//! trajectory `q_h(t)` sampled at any time. Three profile families cover the
//! experiment protocols: a static hold, single/compound joint sinusoids with
//! a commanded peak angular speed, and a planar rounded-square endpoint path
//! followed with minimum-jerk pacing.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BindingSite, JointId, PlanarTwoLink};
use crate::classify::Channel;
use crate::offset::{solve_planar_angles, ElbowBranch, OffsetError};
use crate::{JointVec, Real};

/// Errors raised while sampling an intent profile.
#[derive(Debug, Error, PartialEq)]
pub enum IntentError {
    /// Profile parameters are out of range.
    #[error("invalid intent parameter {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    /// The target path left the reachable annulus or hit a singularity.
    #[error(transparent)]
    Offset(#[from] OffsetError),
}

/// Named single- and compound-joint movements used by the speed sweep and
/// the instability scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    /// Shoulder flexion/extension (sagittal swing).
    ShoulderFlex,
    /// Elbow flexion/extension.
    ElbowFlex,
    /// Shoulder adduction/abduction (frontal swing).
    ShoulderAbduction,
    /// Shoulder internal/external rotation (upper-arm roll).
    ShoulderRotation,
    /// Compound: shoulder and elbow flexion together (arm raise).
    ArmLift,
    /// Compound: upper-arm roll with abduction (outward swing).
    OutwardSwing,
    /// Compound: shoulder flexion with elbow extension (reaching forward);
    /// not part of the speed sweep.
    WholeArmExtension,
}

impl Movement {
    /// The six sweep movements, sweep order.
    pub const SWEEP: [Movement; 6] = [
        Movement::ShoulderFlex,
        Movement::ElbowFlex,
        Movement::ShoulderAbduction,
        Movement::ShoulderRotation,
        Movement::ArmLift,
        Movement::OutwardSwing,
    ];

    /// Every movement.
    pub const ALL: [Movement; 7] = [
        Movement::ShoulderFlex,
        Movement::ElbowFlex,
        Movement::ShoulderAbduction,
        Movement::ShoulderRotation,
        Movement::ArmLift,
        Movement::OutwardSwing,
        Movement::WholeArmExtension,
    ];

    /// Stable lowercase name used in CSV output and CLI arguments.
    pub fn label(self) -> &'static str {
        match self {
            Movement::ShoulderFlex => "shoulder_flex",
            Movement::ElbowFlex => "elbow_flex",
            Movement::ShoulderAbduction => "shoulder_abduction",
            Movement::ShoulderRotation => "shoulder_rotation",
            Movement::ArmLift => "arm_lift",
            Movement::OutwardSwing => "outward_swing",
            Movement::WholeArmExtension => "whole_arm_extension",
        }
    }

    /// Parses a label produced by [`Movement::label`].
    pub fn from_label(label: &str) -> Option<Movement> {
        Movement::ALL.iter().copied().find(|m| m.label() == label)
    }

    /// The joints the scripted profile drives, with the direction each one
    /// takes relative to the profile excursion.
    pub fn driven_joints(self) -> &'static [(JointId, f64)] {
        match self {
            Movement::ShoulderFlex => &[(JointId::Sh1, 1.0)],
            Movement::ElbowFlex => &[(JointId::El2, 1.0)],
            Movement::ShoulderAbduction => &[(JointId::Sh2, 1.0)],
            Movement::ShoulderRotation => &[(JointId::El1, 1.0)],
            Movement::ArmLift => &[(JointId::Sh1, 1.0), (JointId::El2, 1.0)],
            Movement::OutwardSwing => &[(JointId::El1, 1.0), (JointId::Sh2, 1.0)],
            Movement::WholeArmExtension => &[(JointId::Sh1, 1.0), (JointId::El2, -1.0)],
        }
    }

    /// Misalignment-torque channels excited by this movement; a compound
    /// movement lists the channels of both constituent joints, and its
    /// sweep score is the summed magnitude across them.
    pub fn assistant_channels(self) -> &'static [(BindingSite, Channel)] {
        match self {
            Movement::ShoulderFlex => &[(BindingSite::UpperArm, Channel::Tz)],
            Movement::ElbowFlex => &[(BindingSite::Forearm, Channel::Tz)],
            Movement::ShoulderAbduction => &[(BindingSite::UpperArm, Channel::Ty)],
            Movement::ShoulderRotation => &[(BindingSite::Forearm, Channel::Ty)],
            Movement::ArmLift => &[
                (BindingSite::Forearm, Channel::Tz),
                (BindingSite::UpperArm, Channel::Tz),
            ],
            Movement::OutwardSwing => &[
                (BindingSite::Forearm, Channel::Ty),
                (BindingSite::UpperArm, Channel::Ty),
            ],
            Movement::WholeArmExtension => &[
                (BindingSite::UpperArm, Channel::Tz),
                (BindingSite::Forearm, Channel::Tz),
            ],
        }
    }

    /// Whether this profile drives more than one joint.
    pub fn is_compound(self) -> bool {
        self.driven_joints().len() > 1
    }
}

/// Axis-aligned square with rounded corners in the sagittal plane.
///
/// Plane coordinates: the first component points straight down from the
/// shoulder, the second points forward, matching [`PlanarTwoLink`] with the
/// arm hanging at zero angles. Arc length starts at the middle of the lower
/// edge's straight run and proceeds with increasing `forward` first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquarePath<S: Real> {
    /// Square center, (down, forward) in meters.
    pub center: Vector2<S>,
    /// Side length (m).
    pub side: S,
    /// Corner radius (m); must satisfy `0 < radius <= side / 2`.
    pub corner_radius: S,
}

impl<S: Real> SquarePath<S> {
    /// A 0.4 m square with 0.1 m corner radii centered within easy reach.
    pub fn standard() -> Self {
        Self {
            center: Vector2::new(S::scalar(0.34), S::zero()),
            side: S::scalar(0.4),
            corner_radius: S::scalar(0.1),
        }
    }

    /// Validates the geometric parameters.
    pub fn validate(&self) -> Result<(), IntentError> {
        let ok = self.side.is_finite()
            && self.corner_radius.is_finite()
            && self.center.x.is_finite()
            && self.center.y.is_finite()
            && self.side > S::zero()
            && self.corner_radius > S::zero()
            && self.corner_radius <= self.side * S::scalar(0.5);
        if ok {
            Ok(())
        } else {
            Err(IntentError::InvalidParameter {
                what: "square path geometry",
                value: self.corner_radius.as_f64(),
            })
        }
    }

    /// Total arc length of the rounded square.
    pub fn perimeter(&self) -> S {
        let straight = self.side - self.corner_radius * S::scalar(2.0);
        S::scalar(4.0) * straight + S::scalar(2.0) * S::pi() * self.corner_radius
    }

    /// Point and unit tangent at arc length `s` (wrapped to the perimeter).
    ///
    /// The loop runs: straight run on the far (max-down) edge toward
    /// +forward, quarter arc, straight run toward −down, arc, near edge
    /// toward −forward, arc, straight run toward +down, arc, closing.
    pub fn point_and_tangent(&self, s: S) -> (Vector2<S>, Vector2<S>) {
        let r = self.corner_radius;
        let straight = self.side - r * S::scalar(2.0);
        let half = self.side * S::scalar(0.5);
        let quarter = S::pi() * r * S::scalar(0.5);
        let total = self.perimeter();
        let mut s = s % total;
        if s < S::zero() {
            s += total;
        }
        // Start mid-way along the far edge so s = 0 is a straight section.
        let mut rem = s + straight * S::scalar(0.5);
        if rem >= total {
            rem -= total;
        }
        let cx = self.center.x;
        let cy = self.center.y;
        let hs = straight * S::scalar(0.5);
        // Straight segment starts and directions, loop order. Each tuple is
        // (start point, direction); arcs pivot about the matching corner.
        let segs = [
            (Vector2::new(cx + half, cy - hs), Vector2::new(S::zero(), S::one())),
            (Vector2::new(cx + hs, cy + half), Vector2::new(-S::one(), S::zero())),
            (Vector2::new(cx - half, cy + hs), Vector2::new(S::zero(), -S::one())),
            (Vector2::new(cx - hs, cy - half), Vector2::new(S::one(), S::zero())),
        ];
        for (i, (start, dir)) in segs.iter().enumerate() {
            if rem <= straight {
                return (start + dir * rem, *dir);
            }
            rem -= straight;
            if rem <= quarter {
                // Quarter arc from this segment's end, turning left (toward
                // the square interior) by rem / r radians.
                let end = start + dir * straight;
                let normal = Vector2::new(-dir.y, dir.x); // left of travel
                let arc_center = end + normal * r;
                let phi = rem / r;
                let (sin, cos) = (phi.sin(), phi.cos());
                // Radial vector from arc center to the moving point.
                let radial0 = -normal;
                let radial = radial0 * cos + *dir * sin;
                let tangent = *dir * cos - radial0 * sin;
                return (arc_center + radial * r, tangent);
            }
            rem -= quarter;
            let _ = i;
        }
        // Numerical spill-over past the last arc wraps to the start.
        (segs[0].0, segs[0].1)
    }
}

/// Minimum-jerk scaling `s(τ) = 10τ³ − 15τ⁴ + 6τ⁵` and its derivative.
fn min_jerk<S: Real>(tau: S) -> (S, S) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let s = S::scalar(10.0) * t3 - S::scalar(15.0) * t4 + S::scalar(6.0) * t4 * tau;
    let ds = S::scalar(30.0) * t2 - S::scalar(60.0) * t3 + S::scalar(30.0) * t4;
    (s, ds)
}

/// Peak of `ds/dτ` for the minimum-jerk profile (at τ = 1/2).
const MIN_JERK_PEAK: f64 = 1.875;

/// Motion profile the reference arm follows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IntentProfile<S: Real> {
    /// Stay at the posture.
    Hold,
    /// Drive the movement's joints with `q = q₀ + A(1 − cos Ωt)`,
    /// `Ω = peak_speed / A`, so the peak joint speed is `peak_speed`.
    JointSine {
        /// Which joint set moves.
        movement: Movement,
        /// Half excursion A (rad); joints travel `[q₀, q₀ + 2A]`.
        amplitude: S,
        /// Peak angular speed (rad/s).
        peak_speed: S,
    },
    /// Trace the rounded square in the sagittal plane, lap after lap, with
    /// minimum-jerk pacing per lap.
    TargetPath {
        /// The path geometry.
        path: SquarePath<S>,
        /// Peak endpoint speed along the path (m/s).
        peak_speed: S,
    },
}

/// Scripted human intent: a base posture plus a motion profile, the planar
/// segment lengths used for target-path inverse kinematics, and the caps on
/// the force/torque the human can exert through a binding.
#[derive(Clone, Debug, PartialEq)]
pub struct HumanIntent<S: Real> {
    /// Joint angles held where the profile is inactive (rad).
    pub posture: JointVec<S>,
    /// Motion profile.
    pub profile: IntentProfile<S>,
    /// Human planar segment lengths for target-path inverse kinematics.
    pub planar: PlanarTwoLink<S>,
    /// Per-axis cap on binding force the human sustains (N).
    pub force_cap: S,
    /// Per-axis cap on binding torque the human sustains (N·m).
    pub torque_cap: S,
}

impl<S: Real> HumanIntent<S> {
    /// Validates profile parameters.
    pub fn validate(&self) -> Result<(), IntentError> {
        if self.posture.iter().any(|v| !v.is_finite()) {
            return Err(IntentError::InvalidParameter {
                what: "posture",
                value: f64::NAN,
            });
        }
        for (what, v) in [("force_cap", self.force_cap), ("torque_cap", self.torque_cap)] {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(IntentError::InvalidParameter { what, value: v.as_f64() });
            }
        }
        match &self.profile {
            IntentProfile::Hold => Ok(()),
            IntentProfile::JointSine { amplitude, peak_speed, .. } => {
                for (what, v) in [("amplitude", *amplitude), ("peak_speed", *peak_speed)] {
                    if !(v > S::zero()) || !v.is_finite() {
                        return Err(IntentError::InvalidParameter { what, value: v.as_f64() });
                    }
                }
                Ok(())
            }
            IntentProfile::TargetPath { path, peak_speed } => {
                path.validate()?;
                if !(*peak_speed > S::zero()) || !peak_speed.is_finite() {
                    return Err(IntentError::InvalidParameter {
                        what: "peak_speed",
                        value: peak_speed.as_f64(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Lap duration for a target path at this peak speed.
    pub fn lap_time(&self) -> Option<S> {
        match &self.profile {
            IntentProfile::TargetPath { path, peak_speed } => {
                Some(path.perimeter() * S::scalar(MIN_JERK_PEAK) / *peak_speed)
            }
            _ => None,
        }
    }

    /// Reference joint position and velocity at time `t`.
    pub fn sample(&self, t: S) -> Result<(JointVec<S>, JointVec<S>), IntentError> {
        let mut q = self.posture;
        let mut qd = JointVec::zeros();
        match &self.profile {
            IntentProfile::Hold => {}
            IntentProfile::JointSine { movement, amplitude, peak_speed } => {
                let a = *amplitude;
                let omega = *peak_speed / a;
                let phase = omega * t;
                let dq = a * (S::one() - phase.cos());
                let dqd = a * omega * phase.sin();
                for (joint, direction) in movement.driven_joints() {
                    let dir = S::scalar(*direction);
                    q[joint.index()] += dir * dq;
                    qd[joint.index()] = dir * dqd;
                }
            }
            IntentProfile::TargetPath { path, peak_speed } => {
                let lap = path.perimeter() * S::scalar(MIN_JERK_PEAK) / *peak_speed;
                let laps = (t / lap).floor();
                let tau = (t - laps * lap) / lap;
                let (frac, dfrac) = min_jerk(tau);
                let total = path.perimeter();
                let s = total * frac;
                let sdot = total * dfrac / lap;
                let (point, tangent) = path.point_and_tangent(s);
                let (t1, t2) = solve_planar_angles(&self.planar, point, ElbowBranch::Down)?;
                q[JointId::Sh1.index()] = t1;
                q[JointId::El2.index()] = t2;
                let velocity = tangent * sdot;
                let jinv = self.planar.jacobian_inverse((t1, t2)).map_err(OffsetError::from)?;
                let rates = jinv * velocity;
                qd[JointId::Sh1.index()] = rates.x;
                qd[JointId::El2.index()] = rates.y;
            }
        }
        Ok((q, qd))
    }

    /// The pose at `t = 0`, which the plant also starts from.
    pub fn initial_pose(&self) -> Result<JointVec<S>, IntentError> {
        Ok(self.sample(S::zero())?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn standard_intent(profile: IntentProfile<f64>) -> HumanIntent<f64> {
        HumanIntent {
            posture: JointVec::zeros(),
            profile,
            planar: PlanarTwoLink::new(0.33, 0.27).unwrap(),
            force_cap: 60.0,
            torque_cap: 12.0,
        }
    }

    #[test]
    fn perimeter_matches_segment_sum() {
        let path = SquarePath::<f64>::standard();
        let expected = 4.0 * (0.4 - 0.2) + 2.0 * std::f64::consts::PI * 0.1;
        assert_relative_eq!(path.perimeter(), expected, epsilon = 1e-15);
    }

    #[test]
    fn path_point_is_continuous_and_on_the_boundary() {
        let path = SquarePath::<f64>::standard();
        let total = path.perimeter();
        let n = 5000;
        let mut prev: Option<Vector2<f64>> = None;
        for k in 0..=n {
            let s = total * k as f64 / n as f64;
            let (p, tangent) = path.point_and_tangent(s);
            assert_relative_eq!(tangent.norm(), 1.0, epsilon = 1e-12);
            // Boundary: each point is `side/2` away from the center in the
            // Chebyshev-like rounded metric: clamp to the inner square, the
            // residual must be 0 (straight run) or corner_radius (arc).
            let d = p - path.center;
            let inner = 0.2 - 0.1; // half side minus radius
            let ex = (d.x.abs() - inner).max(0.0);
            let ey = (d.y.abs() - inner).max(0.0);
            let residual = (ex * ex + ey * ey).sqrt();
            assert!(
                (residual - 0.1).abs() < 1e-9,
                "off boundary at s={s}: residual {residual}"
            );
            if let Some(prev) = prev {
                let step = total / n as f64;
                assert!((p - prev).norm() <= step * 1.01, "jump at s={s}");
            }
            prev = Some(p);
        }
        // Wrap-around closes the loop.
        let (a, _) = path.point_and_tangent(0.0);
        let (b, _) = path.point_and_tangent(total);
        assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let path = SquarePath::<f64>::standard();
        let total = path.perimeter();
        let h = 1e-7;
        for k in 0..200 {
            let s = total * (k as f64 + 0.37) / 200.0;
            let (_, tangent) = path.point_and_tangent(s);
            let (pp, _) = path.point_and_tangent(s + h);
            let (pm, _) = path.point_and_tangent(s - h);
            let fd = (pp - pm) / (2.0 * h);
            assert_relative_eq!((tangent - fd).norm(), 0.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn joint_sine_hits_commanded_peak_speed() {
        let intent = standard_intent(IntentProfile::JointSine {
            movement: Movement::ElbowFlex,
            amplitude: 0.5,
            peak_speed: 1.5,
        });
        let omega: f64 = 1.5 / 0.5;
        let quarter = std::f64::consts::FRAC_PI_2 / omega;
        let (q, qd) = intent.sample(quarter).unwrap();
        assert_relative_eq!(qd[JointId::El2.index()], 1.5, epsilon = 1e-12);
        assert_relative_eq!(q[JointId::El2.index()], 0.5, epsilon = 1e-12);
        // Starts at rest at the posture.
        let (q0, qd0) = intent.sample(0.0).unwrap();
        assert_eq!(q0, JointVec::zeros());
        assert_eq!(qd0, JointVec::zeros());
    }

    #[test]
    fn compound_movement_drives_both_joints_identically() {
        let intent = standard_intent(IntentProfile::JointSine {
            movement: Movement::ArmLift,
            amplitude: 0.4,
            peak_speed: 1.0,
        });
        let (q, qd) = intent.sample(0.9).unwrap();
        assert_eq!(q[JointId::Sh1.index()], q[JointId::El2.index()]);
        assert_eq!(qd[JointId::Sh1.index()], qd[JointId::El2.index()]);
        assert!(qd[JointId::Sh1.index()].abs() > 0.0);
    }

    #[test]
    fn target_path_velocity_matches_finite_difference() {
        let intent = standard_intent(IntentProfile::TargetPath {
            path: SquarePath::standard(),
            peak_speed: 1.0,
        });
        let h = 1e-6;
        for k in 1..40 {
            let t = 0.11 * k as f64;
            let (_, qd) = intent.sample(t).unwrap();
            let (qp, _) = intent.sample(t + h).unwrap();
            let (qm, _) = intent.sample(t - h).unwrap();
            let fd = (qp - qm) / (2.0 * h);
            for j in 0..9 {
                assert_relative_eq!(qd[j], fd[j], epsilon = 1e-4, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn target_path_peak_speed_is_respected() {
        let peak = 1.2;
        let intent = standard_intent(IntentProfile::TargetPath {
            path: SquarePath::standard(),
            peak_speed: peak,
        });
        let lap = intent.lap_time().unwrap();
        let mut max_speed: f64 = 0.0;
        for k in 0..=4000 {
            let t = lap * k as f64 / 4000.0;
            let (q, qd) = intent.sample(t).unwrap();
            let theta = (q[JointId::Sh1.index()], q[JointId::El2.index()]);
            let v = intent.planar.jacobian(theta)
                * Vector2::new(qd[JointId::Sh1.index()], qd[JointId::El2.index()]);
            max_speed = max_speed.max(v.norm());
        }
        assert_relative_eq!(max_speed, peak, epsilon = 2e-3);
        assert!(max_speed <= peak * 1.001);
    }

    #[test]
    fn target_path_laps_repeat_exactly() {
        let intent = standard_intent(IntentProfile::TargetPath {
            path: SquarePath::standard(),
            peak_speed: 0.8,
        });
        let lap = intent.lap_time().unwrap();
        let (q1, _) = intent.sample(0.3).unwrap();
        let (q2, _) = intent.sample(0.3 + lap).unwrap();
        for j in 0..9 {
            assert_relative_eq!(q1[j], q2[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut intent = standard_intent(IntentProfile::JointSine {
            movement: Movement::ElbowFlex,
            amplitude: 0.0,
            peak_speed: 1.0,
        });
        assert!(intent.validate().is_err());
        intent.profile = IntentProfile::Hold;
        intent.force_cap = -1.0;
        assert!(intent.validate().is_err());
        let bad_path = SquarePath::<f64> {
            center: Vector2::new(0.3, 0.0),
            side: 0.4,
            corner_radius: 0.3,
        };
        assert!(bad_path.validate().is_err());
    }

    #[test]
    fn movement_tables_are_consistent() {
        for m in Movement::ALL {
            assert_eq!(Movement::from_label(m.label()), Some(m));
            assert_eq!(m.is_compound(), m.driven_joints().len() > 1);
            assert_eq!(m.is_compound(), m.assistant_channels().len() > 1);
            for (_, ch) in m.assistant_channels() {
                assert!(!ch.is_force());
            }
            for (_, dir) in m.driven_joints() {
                assert_eq!(dir.abs(), 1.0);
            }
        }
        assert!(!Movement::SWEEP.contains(&Movement::WholeArmExtension));
    }

    #[test]
    fn extension_movement_straightens_the_elbow() {
        let mut intent = standard_intent(IntentProfile::JointSine {
            movement: Movement::WholeArmExtension,
            amplitude: 0.3,
            peak_speed: 1.0,
        });
        intent.posture[JointId::Sh1.index()] = 0.3;
        intent.posture[JointId::El2.index()] = 1.5;
        let omega: f64 = 1.0 / 0.3;
        let half = std::f64::consts::PI / omega; // phase π: peak excursion
        let (q, _) = intent.sample(half).unwrap();
        assert_relative_eq!(q[JointId::Sh1.index()], 0.9, epsilon = 1e-12);
        assert_relative_eq!(q[JointId::El2.index()], 0.9, epsilon = 1e-12);
    }
}
