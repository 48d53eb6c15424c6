//! Donning-offset analysis on the planar two-rod projection of the arm.
//!
//! When the wearer's arm and the exoskeleton rods have different segment
//! lengths, tracking the same endpoint forces their joint angles apart. The
//! angle gaps ("donning offsets") twist the compliant cuffs and show up as
//! disturbance torques at the sensors. This module solves the planar
//! two-link inverse kinematics for both chains, forms the offset angles and
//! their rates under a common endpoint velocity, and evaluates the
//! spring–damper disturbance torque model.

use nalgebra::Vector2;
use thiserror::Error;

use crate::chain::{ChainError, PlanarTwoLink};
use crate::Real;

/// Default rotational stiffness of a strapped cuff (N·m/rad).
pub const DEFAULT_BINDING_STIFFNESS: f64 = 300.0;
/// Default rotational damping of a strapped cuff (N·m·s/rad).
pub const DEFAULT_BINDING_DAMPING: f64 = 5.0;

/// Which of the two elbow solutions the planar solver returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ElbowBranch {
    /// Elbow angle in `[0, π]`.
    Down,
    /// Elbow angle in `[−π, 0]`.
    Up,
}

/// Errors raised by the planar solver and offset evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum OffsetError {
    /// Endpoint outside the annular workspace of a two-link chain.
    #[error("endpoint at radius {r:.6} is outside the reachable band [{min:.6}, {max:.6}]")]
    Unreachable { r: f64, min: f64, max: f64 },
    /// Underlying planar kinematics error (singularity, bad lengths).
    #[error(transparent)]
    Chain(#[from] ChainError),
    /// Non-finite input.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
}

/// Human-vs-exoskeleton planar geometry pair.
#[derive(Clone, Copy, Debug)]
pub struct DonningGeometry<S: Real> {
    /// The wearer's arm segments.
    pub human: PlanarTwoLink<S>,
    /// The exoskeleton rod segments.
    pub exo: PlanarTwoLink<S>,
}

/// Offset angles between the exoskeleton rods and the wearer's segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffsetAngles<S: Real> {
    /// Upper-segment offset `θ_E1 − θ_H1` (rad).
    pub upper_arm: S,
    /// Cumulative forearm offset `(θ_E1 + θ_E2) − (θ_H1 + θ_H2)` (rad).
    pub forearm: S,
}

/// Rates of the offset angles under a common endpoint velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffsetRates<S: Real> {
    /// Rate of the upper-segment offset (rad/s).
    pub upper_arm: S,
    /// Rate of the cumulative forearm offset (rad/s).
    pub forearm: S,
}

/// How the forearm offset rate is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OffsetRateForm {
    /// Chain rule on the offset angles: the forearm row sums the elbow-rate
    /// difference with the upper-segment rate error. Matches the time
    /// derivative of [`offset_angles`] and is the default.
    #[default]
    ChainRule,
    /// Historical variant that feeds the upper-segment *angle* error (not
    /// its rate) into the forearm row. Kept selectable for comparison; it is
    /// dimensionally mixed and does not match the finite-difference rate.
    AngleFeedthrough,
}

/// Cuff impedance for the disturbance torque model.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BindingImpedance<S: Real> {
    /// Rotational stiffness (N·m/rad).
    pub stiffness: S,
    /// Rotational damping (N·m·s/rad).
    pub damping: S,
}

impl<S: Real> Default for BindingImpedance<S> {
    fn default() -> Self {
        Self {
            stiffness: S::scalar(DEFAULT_BINDING_STIFFNESS),
            damping: S::scalar(DEFAULT_BINDING_DAMPING),
        }
    }
}

/// Disturbance torques created by the donning offsets at the two arm cuffs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisturbanceTorques<S: Real> {
    /// Torque at the upper-arm cuff (N·m).
    pub upper_arm: S,
    /// Torque at the forearm cuff (N·m).
    pub forearm: S,
}

/// Solves the planar two-link inverse kinematics for `target`.
///
/// Returns `(θ1, θ2)` with `θ2` on the requested elbow branch. Fails when
/// the target lies outside the annulus `[|l1 − l2|, l1 + l2]` (with a small
/// numerical slack at the boundaries).
pub fn solve_planar_angles<S: Real>(
    link: &PlanarTwoLink<S>,
    target: Vector2<S>,
    branch: ElbowBranch,
) -> Result<(S, S), OffsetError> {
    if !target.x.is_finite() || !target.y.is_finite() {
        return Err(OffsetError::NonFinite {
            context: "solve_planar_angles target",
        });
    }
    let (l1, l2) = (link.l1(), link.l2());
    let r2 = target.norm_squared();
    let r = r2.sqrt();
    let min = (l1 - l2).abs();
    let max = l1 + l2;
    // cos θ2 from the law of cosines; allow a hair of slack at the rim so
    // boundary targets produced by forward kinematics still solve.
    let c2 = (r2 - l1 * l1 - l2 * l2) / (S::scalar(2.0) * l1 * l2);
    let slack = S::scalar(1e-9);
    if c2 > S::one() + slack || c2 < -S::one() - slack {
        return Err(OffsetError::Unreachable {
            r: r.as_f64(),
            min: min.as_f64(),
            max: max.as_f64(),
        });
    }
    let c2 = c2.clamp(-S::one(), S::one());
    let t2_mag = c2.acos();
    let t2 = match branch {
        ElbowBranch::Down => t2_mag,
        ElbowBranch::Up => -t2_mag,
    };
    let t1 = target.y.atan2(target.x) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
    Ok((t1, t2))
}

/// Offset angles when both chains place their endpoint at `endpoint`.
pub fn offset_angles<S: Real>(
    geom: &DonningGeometry<S>,
    endpoint: Vector2<S>,
    branch: ElbowBranch,
) -> Result<OffsetAngles<S>, OffsetError> {
    let (h1, h2) = solve_planar_angles(&geom.human, endpoint, branch)?;
    let (e1, e2) = solve_planar_angles(&geom.exo, endpoint, branch)?;
    Ok(OffsetAngles {
        upper_arm: e1 - h1,
        forearm: (e1 + e2) - (h1 + h2),
    })
}

/// Offset-angle rates when both chains track `endpoint` moving with
/// `endpoint_velocity`.
///
/// Joint rates for each chain come from the closed-form inverse Jacobian,
/// so folded/extended configurations fail with a singularity error.
pub fn offset_rates<S: Real>(
    geom: &DonningGeometry<S>,
    endpoint: Vector2<S>,
    endpoint_velocity: Vector2<S>,
    branch: ElbowBranch,
    form: OffsetRateForm,
) -> Result<OffsetRates<S>, OffsetError> {
    if !endpoint_velocity.x.is_finite() || !endpoint_velocity.y.is_finite() {
        return Err(OffsetError::NonFinite {
            context: "offset_rates endpoint velocity",
        });
    }
    let th_h = solve_planar_angles(&geom.human, endpoint, branch)?;
    let th_e = solve_planar_angles(&geom.exo, endpoint, branch)?;
    let qd_h = geom.human.jacobian_inverse(th_h)? * endpoint_velocity;
    let qd_e = geom.exo.jacobian_inverse(th_e)? * endpoint_velocity;
    let upper_arm = qd_e[0] - qd_h[0];
    let forearm = match form {
        OffsetRateForm::ChainRule => (qd_e[1] - qd_h[1]) + upper_arm,
        OffsetRateForm::AngleFeedthrough => {
            let angle = offset_angles(geom, endpoint, branch)?.upper_arm;
            (qd_e[1] - qd_h[1]) + angle
        }
    };
    Ok(OffsetRates { upper_arm, forearm })
}

/// Spring–damper disturbance torques `T = K·θ_err + D·θ̇_err` at both cuffs.
pub fn disturbance_torques<S: Real>(
    angles: &OffsetAngles<S>,
    rates: &OffsetRates<S>,
    impedance: &BindingImpedance<S>,
) -> DisturbanceTorques<S> {
    DisturbanceTorques {
        upper_arm: impedance.stiffness * angles.upper_arm + impedance.damping * rates.upper_arm,
        forearm: impedance.stiffness * angles.forearm + impedance.damping * rates.forearm,
    }
}
