//! Cuff binding model: a 6-DoF diagonal spring-damper between the reference
//! (human-side) attachment frame and the exoskeleton cuff frame, an active
//! force/torque cap, and the noisy range-limited force/torque sensor.
//!
//! All wrenches are expressed in the exoskeleton cuff frame, which is also
//! the sensor frame.

use nalgebra::{Isometry3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Wrench;
use crate::Real;

/// Errors raised by binding parameter validation.
#[derive(Debug, Error, PartialEq)]
pub enum BindingError {
    /// A stiffness, damping, noise, or range value is out of range.
    #[error("invalid binding parameter {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
}

/// A frame together with the velocity of its origin and its angular
/// velocity, all in base coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMotion<S: Real> {
    /// Pose of the frame in the base.
    pub pose: Isometry3<S>,
    /// Linear velocity of the frame origin (m/s, base coordinates).
    pub linear: Vector3<S>,
    /// Angular velocity of the frame (rad/s, base coordinates).
    pub angular: Vector3<S>,
}

impl<S: Real> FrameMotion<S> {
    /// A static frame.
    pub fn still(pose: Isometry3<S>) -> Self {
        Self { pose, linear: Vector3::zeros(), angular: Vector3::zeros() }
    }

    /// The motion of a frame rigidly offset from this one.
    ///
    /// The offset is expressed in this frame; the returned origin velocity
    /// picks up the lever-arm term `ω × r`.
    pub fn offset_by(&self, offset: &Isometry3<S>) -> Self {
        let pose = self.pose * offset;
        let lever = pose.translation.vector - self.pose.translation.vector;
        Self {
            pose,
            linear: self.linear + self.angular.cross(&lever),
            angular: self.angular,
        }
    }
}

/// Diagonal 6-DoF spring-damper parameters for one cuff, plus the rigid
/// mounting offset between the reference attachment frame and the spring's
/// rest frame (models strap/lever-arm misplacement).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingParams<S: Real> {
    /// Translational stiffness per cuff axis (N/m).
    pub linear_stiffness: Vector3<S>,
    /// Translational damping per cuff axis (N·s/m).
    pub linear_damping: Vector3<S>,
    /// Rotational stiffness per cuff axis (N·m/rad).
    pub angular_stiffness: Vector3<S>,
    /// Rotational damping per cuff axis (N·m·s/rad).
    pub angular_damping: Vector3<S>,
    /// Rigid transform from the reference attachment frame to the point the
    /// spring actually pulls toward. Identity for a perfect strap.
    pub mounting_offset: Isometry3<S>,
}

impl<S: Real> Default for BindingParams<S> {
    fn default() -> Self {
        Self {
            linear_stiffness: Vector3::repeat(S::scalar(1500.0)),
            linear_damping: Vector3::repeat(S::scalar(40.0)),
            angular_stiffness: Vector3::repeat(S::scalar(30.0)),
            angular_damping: Vector3::repeat(S::scalar(1.0)),
            mounting_offset: Isometry3::identity(),
        }
    }
}

impl<S: Real> BindingParams<S> {
    /// Checks every coefficient is finite and non-negative.
    pub fn validate(&self) -> Result<(), BindingError> {
        let groups: [(&'static str, &Vector3<S>); 4] = [
            ("linear_stiffness", &self.linear_stiffness),
            ("linear_damping", &self.linear_damping),
            ("angular_stiffness", &self.angular_stiffness),
            ("angular_damping", &self.angular_damping),
        ];
        for (what, v) in groups {
            for c in v.iter() {
                if !c.is_finite() || *c < S::zero() {
                    return Err(BindingError::InvalidParameter { what, value: c.as_f64() });
                }
            }
        }
        let t = self.mounting_offset.translation.vector;
        if t.iter().any(|v| !v.is_finite()) {
            return Err(BindingError::InvalidParameter {
                what: "mounting_offset",
                value: f64::NAN,
            });
        }
        Ok(())
    }
}

/// Spring-damper wrench the binding exerts on the exoskeleton cuff,
/// expressed in the cuff frame.
///
/// The reference motion is first shifted by the mounting offset; the pose
/// error is the position difference plus the small-angle (scaled-axis)
/// rotation error, and the twist error is the velocity difference, all
/// resolved in the cuff frame and scaled by the diagonal coefficients.
pub fn spring_wrench<S: Real>(
    reference: &FrameMotion<S>,
    cuff: &FrameMotion<S>,
    params: &BindingParams<S>,
) -> Wrench<S> {
    let target = reference.offset_by(&params.mounting_offset);
    let rot_cuff_inv = cuff.pose.rotation.inverse();
    let p_err = rot_cuff_inv * (target.pose.translation.vector - cuff.pose.translation.vector);
    let rot_err = (rot_cuff_inv * target.pose.rotation).scaled_axis();
    let v_err = rot_cuff_inv * (target.linear - cuff.linear);
    let w_err = rot_cuff_inv * (target.angular - cuff.angular);
    Wrench {
        force: params.linear_stiffness.component_mul(&p_err)
            + params.linear_damping.component_mul(&v_err),
        torque: params.angular_stiffness.component_mul(&rot_err)
            + params.angular_damping.component_mul(&w_err),
    }
}

/// Per-axis clamp representing the limit of force/torque the human side can
/// sustain through the binding.
pub fn cap_wrench<S: Real>(wrench: &Wrench<S>, force_cap: S, torque_cap: S) -> Wrench<S> {
    let clamp3 = |v: &Vector3<S>, cap: S| v.map(|c| c.clamp(-cap, cap));
    Wrench {
        force: clamp3(&wrench.force, force_cap),
        torque: clamp3(&wrench.torque, torque_cap),
    }
}

/// Force/torque sensor model: additive zero-mean Gaussian noise, then a
/// hard range clamp per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorParams<S: Real> {
    /// Noise standard deviation on each force axis (N).
    pub force_noise_std: S,
    /// Noise standard deviation on each torque axis (N·m).
    pub torque_noise_std: S,
    /// Measurement range on each force axis (±N).
    pub force_range: S,
    /// Measurement range on each torque axis (±N·m).
    pub torque_range: S,
}

impl<S: Real> Default for SensorParams<S> {
    fn default() -> Self {
        Self {
            force_noise_std: S::scalar(0.1),
            torque_noise_std: S::scalar(0.01),
            force_range: S::scalar(50.0),
            torque_range: S::scalar(5.0),
        }
    }
}

impl<S: Real> SensorParams<S> {
    /// Checks noise is non-negative and ranges positive, all finite.
    pub fn validate(&self) -> Result<(), BindingError> {
        for (what, v, must_be_positive) in [
            ("force_noise_std", self.force_noise_std, false),
            ("torque_noise_std", self.torque_noise_std, false),
            ("force_range", self.force_range, true),
            ("torque_range", self.torque_range, true),
        ] {
            let bad = !v.is_finite() || v < S::zero() || (must_be_positive && !(v > S::zero()));
            if bad {
                return Err(BindingError::InvalidParameter { what, value: v.as_f64() });
            }
        }
        Ok(())
    }
}

/// Reads the sensor: adds per-axis Gaussian noise (six draws in fx, fy, fz,
/// tx, ty, tz order) and clamps each axis to its range. The flag reports
/// whether any axis hit the range.
pub fn measure_wrench<S: Real, R: Rng>(
    physical: &Wrench<S>,
    params: &SensorParams<S>,
    rng: &mut R,
) -> (Wrench<S>, bool) {
    let mut draw = || S::scalar(rng.sample::<f64, _>(StandardNormal));
    let noisy_force = physical.force.map(|c| c + draw() * params.force_noise_std);
    let noisy_torque = physical.torque.map(|c| c + draw() * params.torque_noise_std);
    let mut saturated = false;
    let mut clamp3 = |v: Vector3<S>, cap: S| {
        v.map(|c| {
            if c.abs() > cap {
                saturated = true;
                c.clamp(-cap, cap)
            } else {
                c
            }
        })
    };
    let force = clamp3(noisy_force, params.force_range);
    let torque = clamp3(noisy_torque, params.torque_range);
    (Wrench { force, torque }, saturated)
}
