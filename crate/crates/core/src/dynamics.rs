//! Rigid-body dynamics of the 9-joint chain: recursive Newton–Euler inverse
//! dynamics, a composite-rigid-body mass matrix, gravity and bias torques,
//! smoothed Coulomb/Stribeck joint friction, and energy bookkeeping.
//!
//! The feedforward path of the controller is
//! `τ_com = M̂(q)·q̈̂ + ĥ(q, q̇̂) + ĝ(q) + f̂(q̇̂)`; everything here carries hats
//! in spirit — the plant may use perturbed parameters.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::chain::{ChainError, ChainModel};
use crate::{JointMat, JointVec, Real, JOINT_COUNT};

/// Default gravity vector (m/s²) in the base frame.
pub const DEFAULT_GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];

/// Velocity scale (rad/s) of the internal sign smoothing in the Stribeck
/// friction term. Small enough that the sign factor is ≈1 at any speed that
/// matters, large enough to keep the model continuous through zero.
pub const SIGN_SMOOTHING_VELOCITY: f64 = 1e-5;

/// Mass properties of one link, expressed in that link's joint frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkInertia<S: Real> {
    /// Link mass (kg).
    pub mass: S,
    /// Center of mass in the link frame (m).
    pub com: Vector3<S>,
    /// Rotational inertia about the center of mass, link frame (kg·m²).
    pub inertia: Matrix3<S>,
}

/// Smoothed Coulomb + Stribeck friction parameters for one joint.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrictionParams<S: Real> {
    /// Coulomb (sliding) friction level (N·m).
    pub coulomb: S,
    /// Breakaway (static) friction level (N·m); at least `coulomb`.
    pub breakaway: S,
    /// Velocity scale of the Stribeck decay (rad/s).
    pub stribeck_velocity: S,
    /// Velocity scale of the arctangent smoothing (rad/s).
    pub smoothing: S,
}

impl<S: Real> Default for FrictionParams<S> {
    fn default() -> Self {
        Self {
            coulomb: S::scalar(0.5),
            breakaway: S::scalar(1.0),
            stribeck_velocity: S::scalar(0.05),
            smoothing: S::scalar(0.01),
        }
    }
}

/// Errors raised by dynamics evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    /// A link has non-positive mass or a non-finite inertia entry.
    #[error("invalid inertia for link {index}: {what}")]
    InvalidInertia { index: usize, what: &'static str },
    /// Friction parameters out of range.
    #[error("invalid friction parameters: {what}")]
    InvalidFriction { what: &'static str },
    /// A non-finite value reached the dynamics.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// Underlying kinematics error.
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl<S: Real> FrictionParams<S> {
    /// Validates the parameter set.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.coulomb >= S::zero()) || !self.coulomb.is_finite() {
            return Err(DynamicsError::InvalidFriction { what: "coulomb must be >= 0" });
        }
        if !(self.breakaway >= self.coulomb) || !self.breakaway.is_finite() {
            return Err(DynamicsError::InvalidFriction { what: "breakaway must be >= coulomb" });
        }
        if !(self.stribeck_velocity > S::zero()) || !self.stribeck_velocity.is_finite() {
            return Err(DynamicsError::InvalidFriction { what: "stribeck velocity must be > 0" });
        }
        if !(self.smoothing > S::zero()) || !self.smoothing.is_finite() {
            return Err(DynamicsError::InvalidFriction { what: "smoothing velocity must be > 0" });
        }
        Ok(())
    }

    /// Scales both friction levels (used for plant/controller mismatch).
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            coulomb: self.coulomb * factor,
            breakaway: self.breakaway * factor,
            stribeck_velocity: self.stribeck_velocity,
            smoothing: self.smoothing,
        }
    }
}

/// Validates a full set of link inertias.
pub fn validate_inertias<S: Real>(links: &[LinkInertia<S>; JOINT_COUNT]) -> Result<(), DynamicsError> {
    for (index, link) in links.iter().enumerate() {
        if !(link.mass > S::zero()) || !link.mass.is_finite() {
            return Err(DynamicsError::InvalidInertia { index, what: "mass must be positive" });
        }
        if link.com.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::InvalidInertia { index, what: "com must be finite" });
        }
        let sym = link.inertia - link.inertia.transpose();
        if sym.iter().any(|v| v.abs() > S::scalar(1e-10)) {
            return Err(DynamicsError::InvalidInertia { index, what: "inertia must be symmetric" });
        }
        if link.inertia.clone().cholesky().is_none() {
            return Err(DynamicsError::InvalidInertia { index, what: "inertia must be positive definite" });
        }
    }
    Ok(())
}

/// Default link inertias matching the default arm geometry: masses taper
/// from 1.5 kg at the girdle to 0.3 kg at the hand, with rod-like inertias
/// for the long segments.
pub fn default_link_inertias<S: Real>() -> [LinkInertia<S>; JOINT_COUNT] {
    let li = |mass: f64, com: [f64; 3], diag: [f64; 3]| LinkInertia {
        mass: S::scalar(mass),
        com: Vector3::new(S::scalar(com[0]), S::scalar(com[1]), S::scalar(com[2])),
        inertia: Matrix3::from_diagonal(&Vector3::new(
            S::scalar(diag[0]),
            S::scalar(diag[1]),
            S::scalar(diag[2]),
        )),
    };
    [
        li(1.5, [0.0, 0.0, -0.025], [0.003, 0.003, 0.001]),
        li(1.4, [0.0, 0.0, -0.05], [0.004, 0.004, 0.001]),
        li(1.2, [0.0, 0.0, -0.02], [0.002, 0.002, 0.001]),
        li(1.0, [0.0, 0.0, -0.159], [0.009, 0.009, 0.0015]),
        li(0.8, [0.0, 0.0, -0.02], [0.0015, 0.0015, 0.001]),
        li(0.7, [0.0, 0.0, -0.1305], [0.004, 0.004, 0.0008]),
        li(0.5, [0.0, 0.0, -0.015], [0.0008, 0.0008, 0.0005]),
        li(0.4, [0.0, 0.0, -0.01], [0.0006, 0.0006, 0.0004]),
        li(0.3, [0.0, 0.0, -0.05], [0.0006, 0.0006, 0.0003]),
    ]
}

/// Scales all link masses and inertias (used for plant/controller mismatch).
pub fn scaled_inertias<S: Real>(
    links: &[LinkInertia<S>; JOINT_COUNT],
    factor: S,
) -> [LinkInertia<S>; JOINT_COUNT] {
    let mut out = *links;
    for link in &mut out {
        link.mass *= factor;
        link.inertia *= factor;
    }
    out
}

fn check_finite<S: Real>(v: &JointVec<S>, context: &'static str) -> Result<(), DynamicsError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DynamicsError::NonFinite { context });
    }
    Ok(())
}

/// Inverse dynamics via the recursive Newton–Euler algorithm: the joint
/// torques that realize `qdd` at state `(q, qd)` under `gravity`, excluding
/// joint friction.
pub fn inverse_dynamics<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    gravity: &Vector3<S>,
    q: &JointVec<S>,
    qd: &JointVec<S>,
    qdd: &JointVec<S>,
) -> Result<JointVec<S>, DynamicsError> {
    check_finite(q, "inverse_dynamics q")?;
    check_finite(qd, "inverse_dynamics qd")?;
    check_finite(qdd, "inverse_dynamics qdd")?;
    if gravity.iter().any(|x| !x.is_finite()) {
        return Err(DynamicsError::NonFinite { context: "inverse_dynamics gravity" });
    }

    // Per-joint relative rotation (including the joint angle) and the fixed
    // translation to the joint origin, both relative to the parent frame.
    let mut rel_rot = [Matrix3::identity(); JOINT_COUNT];
    let mut rel_p = [Vector3::zeros(); JOINT_COUNT];
    let mut axis = [Vector3::zeros(); JOINT_COUNT];
    for (i, jd) in model.joints().iter().enumerate() {
        let spin = nalgebra::Rotation3::from_axis_angle(&jd.axis, q[i]);
        rel_rot[i] = (jd.origin.rotation.to_rotation_matrix() * spin).into_inner();
        rel_p[i] = jd.origin.translation.vector;
        axis[i] = jd.axis.into_inner();
    }

    // Outward pass: link angular velocity/acceleration and frame-origin
    // linear acceleration, each in its own frame. The base "accelerates"
    // upward at −g, which folds gravity into every link.
    let mut omega = [Vector3::zeros(); JOINT_COUNT];
    let mut alpha = [Vector3::zeros(); JOINT_COUNT];
    let mut acc = [Vector3::zeros(); JOINT_COUNT];
    let mut force = [Vector3::zeros(); JOINT_COUNT];
    let mut torque = [Vector3::zeros(); JOINT_COUNT];

    let mut omega_parent = Vector3::zeros();
    let mut alpha_parent = Vector3::zeros();
    let mut acc_parent = -*gravity;
    for i in 0..JOINT_COUNT {
        let rt = rel_rot[i].transpose();
        let omega_in = rt * omega_parent;
        let zqd = axis[i] * qd[i];
        omega[i] = omega_in + zqd;
        alpha[i] = rt * alpha_parent + omega_in.cross(&zqd) + axis[i] * qdd[i];
        acc[i] = rt
            * (acc_parent
                + alpha_parent.cross(&rel_p[i])
                + omega_parent.cross(&omega_parent.cross(&rel_p[i])));
        let acc_com = acc[i] + alpha[i].cross(&links[i].com) + omega[i].cross(&omega[i].cross(&links[i].com));
        force[i] = acc_com * links[i].mass;
        torque[i] = links[i].inertia * alpha[i] + omega[i].cross(&(links[i].inertia * omega[i]));
        omega_parent = omega[i];
        alpha_parent = alpha[i];
        acc_parent = acc[i];
    }

    // Inward pass: accumulate inter-link forces and project onto the axes.
    let mut tau = JointVec::zeros();
    let mut f_child = Vector3::zeros();
    let mut n_child = Vector3::zeros();
    for i in (0..JOINT_COUNT).rev() {
        let (f_from_child, n_from_child) = if i + 1 < JOINT_COUNT {
            let f = rel_rot[i + 1] * f_child;
            let n = rel_rot[i + 1] * n_child + rel_p[i + 1].cross(&f);
            (f, n)
        } else {
            (Vector3::zeros(), Vector3::zeros())
        };
        let f_i = force[i] + f_from_child;
        let n_i = torque[i] + links[i].com.cross(&force[i]) + n_from_child;
        tau[i] = n_i.dot(&axis[i]);
        f_child = f_i;
        n_child = n_i;
    }
    Ok(tau)
}

/// Gravity compensation torques `ĝ(q)`.
pub fn gravity_torques<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    gravity: &Vector3<S>,
    q: &JointVec<S>,
) -> Result<JointVec<S>, DynamicsError> {
    inverse_dynamics(model, links, gravity, q, &JointVec::zeros(), &JointVec::zeros())
}

/// Bias torques `ĥ(q, q̇) + ĝ(q)` (Coriolis/centrifugal plus gravity).
pub fn bias_torques<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    gravity: &Vector3<S>,
    q: &JointVec<S>,
    qd: &JointVec<S>,
) -> Result<JointVec<S>, DynamicsError> {
    inverse_dynamics(model, links, gravity, q, qd, &JointVec::zeros())
}

/// Joint-space mass matrix `M̂(q)` via the composite-rigid-body algorithm,
/// assembled in world coordinates.
pub fn mass_matrix<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    q: &JointVec<S>,
) -> Result<JointMat<S>, DynamicsError> {
    check_finite(q, "mass_matrix q")?;
    let frames = model.forward_kinematics(q)?;

    // Spatial inertia of each link about the world origin (angular block
    // first). Composite inertias accumulate from the tip inward.
    let mut composite = [nalgebra::SMatrix::<S, 6, 6>::zeros(); JOINT_COUNT];
    for i in (0..JOINT_COUNT).rev() {
        let rot = frames.joints[i].rotation.to_rotation_matrix().into_inner();
        let c_w = frames.joints[i] * nalgebra::Point3::from(links[i].com);
        let c = c_w.coords;
        let m = links[i].mass;
        let i_w = rot * links[i].inertia * rot.transpose();
        let cx = skew(&c);
        let mut spatial = nalgebra::SMatrix::<S, 6, 6>::zeros();
        let top_left = i_w + cx * cx.transpose() * m;
        let top_right = cx * m;
        spatial.fixed_view_mut::<3, 3>(0, 0).copy_from(&top_left);
        spatial.fixed_view_mut::<3, 3>(0, 3).copy_from(&top_right);
        spatial.fixed_view_mut::<3, 3>(3, 0).copy_from(&top_right.transpose());
        spatial
            .fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * m));
        composite[i] = if i + 1 < JOINT_COUNT {
            spatial + composite[i + 1]
        } else {
            spatial
        };
    }

    // Joint motion axes as spatial vectors at the world origin.
    let mut s_axes = [nalgebra::SVector::<S, 6>::zeros(); JOINT_COUNT];
    for i in 0..JOINT_COUNT {
        let a_w = frames.joints[i].rotation * model.joints()[i].axis.into_inner();
        let p = frames.joints[i].translation.vector;
        let v = p.cross(&a_w);
        s_axes[i] = nalgebra::SVector::<S, 6>::new(a_w.x, a_w.y, a_w.z, v.x, v.y, v.z);
    }

    let mut m = JointMat::zeros();
    for i in 0..JOINT_COUNT {
        for j in i..JOINT_COUNT {
            let v = (s_axes[i].transpose() * composite[j] * s_axes[j])[(0, 0)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

fn skew<S: Real>(v: &Vector3<S>) -> Matrix3<S> {
    Matrix3::new(
        S::zero(), -v.z, v.y,
        v.z, S::zero(), -v.x,
        -v.y, v.x, S::zero(),
    )
}

/// Smoothed Coulomb/Stribeck friction torque for one joint velocity.
///
/// `f̂(v) = (2·f_c/π)·atan(v/a) + (f_s − f_c)·e^(−|v/v_s|)·sgn(v)`, where the
/// sign factor is the continuous surrogate `v·|v| / (v² + ε²)` with
/// `ε =` [`SIGN_SMOOTHING_VELOCITY`]. It is exactly zero at rest, exactly
/// odd, indistinguishable from the hard sign at working speeds, and closes
/// the jump through zero (the gap at ±1e-9 rad/s is below 1e-6 N·m).
pub fn friction_torque<S: Real>(params: &FrictionParams<S>, v: S) -> Result<S, DynamicsError> {
    params.validate()?;
    if !v.is_finite() {
        return Err(DynamicsError::NonFinite { context: "friction_torque velocity" });
    }
    let eps = S::scalar(SIGN_SMOOTHING_VELOCITY);
    let sign = v * v.abs() / (v * v + eps * eps);
    let coulomb = (S::scalar(2.0) * params.coulomb / S::pi()) * (v / params.smoothing).atan();
    let stribeck = (params.breakaway - params.coulomb) * (-(v / params.stribeck_velocity).abs()).exp() * sign;
    Ok(coulomb + stribeck)
}

/// Friction torques for all joints.
pub fn friction_torques<S: Real>(
    params: &[FrictionParams<S>; JOINT_COUNT],
    qd: &JointVec<S>,
) -> Result<JointVec<S>, DynamicsError> {
    check_finite(qd, "friction_torques qd")?;
    let mut out = JointVec::zeros();
    for i in 0..JOINT_COUNT {
        out[i] = friction_torque(&params[i], qd[i])?;
    }
    Ok(out)
}

/// Model feedforward `τ_com = M̂·q̈̂ + ĥ + ĝ + f̂` from estimated rates.
pub fn feedforward_torques<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    gravity: &Vector3<S>,
    friction: &[FrictionParams<S>; JOINT_COUNT],
    q: &JointVec<S>,
    qd_est: &JointVec<S>,
    qdd_est: &JointVec<S>,
) -> Result<JointVec<S>, DynamicsError> {
    let rigid = inverse_dynamics(model, links, gravity, q, qd_est, qdd_est)?;
    let fric = friction_torques(friction, qd_est)?;
    Ok(rigid + fric)
}

/// Total kinetic energy from per-link twists (independent of the mass
/// matrix assembly, so the two can be cross-validated).
pub fn kinetic_energy<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    q: &JointVec<S>,
    qd: &JointVec<S>,
) -> Result<S, DynamicsError> {
    check_finite(q, "kinetic_energy q")?;
    check_finite(qd, "kinetic_energy qd")?;
    let frames = model.forward_kinematics(q)?;
    let mut axes_w = [Vector3::zeros(); JOINT_COUNT];
    let mut origins = [Vector3::zeros(); JOINT_COUNT];
    for i in 0..JOINT_COUNT {
        axes_w[i] = frames.joints[i].rotation * model.joints()[i].axis.into_inner();
        origins[i] = frames.joints[i].translation.vector;
    }
    let half = S::scalar(0.5);
    let mut energy = S::zero();
    for i in 0..JOINT_COUNT {
        let rot = frames.joints[i].rotation.to_rotation_matrix().into_inner();
        let c_w = (frames.joints[i] * nalgebra::Point3::from(links[i].com)).coords;
        let mut omega = Vector3::zeros();
        let mut v_com = Vector3::zeros();
        for j in 0..=i {
            omega += axes_w[j] * qd[j];
            v_com += (axes_w[j] * qd[j]).cross(&(c_w - origins[j]));
        }
        let i_w = rot * links[i].inertia * rot.transpose();
        energy += half * links[i].mass * v_com.norm_squared() + half * omega.dot(&(i_w * omega));
    }
    Ok(energy)
}

/// Gravitational potential energy `V(q) = −Σ mᵢ·g·p_com,i`, zero-referenced
/// at the world origin, so `ĝ(q) = ∂V/∂q`.
pub fn potential_energy<S: Real>(
    model: &ChainModel<S>,
    links: &[LinkInertia<S>; JOINT_COUNT],
    gravity: &Vector3<S>,
    q: &JointVec<S>,
) -> Result<S, DynamicsError> {
    check_finite(q, "potential_energy q")?;
    let frames = model.forward_kinematics(q)?;
    let mut v = S::zero();
    for i in 0..JOINT_COUNT {
        let c_w = (frames.joints[i] * nalgebra::Point3::from(links[i].com)).coords;
        v -= links[i].mass * gravity.dot(&c_w);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (ChainModel<f64>, [LinkInertia<f64>; 9], Vector3<f64>) {
        (
            ChainModel::default_arm(),
            default_link_inertias(),
            Vector3::new(0.0, 0.0, -9.81),
        )
    }

    fn rand_q(seed: u64) -> JointVec<f64> {
        // Small deterministic pseudo-random generator for test configs.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut q = JointVec::zeros();
        for i in 0..9 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            q[i] = ((s >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * 1.2;
        }
        q
    }

    #[test]
    fn default_inertias_validate() {
        let links: [LinkInertia<f64>; 9] = default_link_inertias();
        validate_inertias(&links).unwrap();
    }

    #[test]
    fn zero_gravity_hanging_chain_needs_no_torque() {
        let (model, links, _) = setup();
        let g0 = Vector3::zeros();
        let tau = gravity_torques(&model, &links, &g0, &rand_q(7)).unwrap();
        assert_relative_eq!(tau.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hanging_rest_pose_is_a_gravity_equilibrium() {
        // At zero angles every center of mass lies on or below each joint
        // axis line, so gravity exerts no torque about any axis.
        let (model, links, g) = setup();
        let tau = gravity_torques(&model, &links, &g, &JointVec::zeros()).unwrap();
        assert_relative_eq!(tau.norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn gravity_torques_match_potential_gradient() {
        let (model, links, g) = setup();
        for seed in [1, 2, 3, 4] {
            let q = rand_q(seed);
            let tau = gravity_torques(&model, &links, &g, &q).unwrap();
            let h = 1e-6;
            for i in 0..9 {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let vp = potential_energy(&model, &links, &g, &qp).unwrap();
                let vm = potential_energy(&model, &links, &g, &qm).unwrap();
                let fd = (vp - vm) / (2.0 * h);
                assert_relative_eq!(tau[i], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite() {
        let (model, links, _) = setup();
        for seed in [11, 22, 33, 44, 55] {
            let q = rand_q(seed);
            let m = mass_matrix(&model, &links, &q).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    assert_relative_eq!(m[(i, j)], m[(j, i)], epsilon = 1e-10);
                }
            }
            assert!(m.cholesky().is_some(), "mass matrix must be PD at seed {seed}");
        }
    }

    #[test]
    fn mass_matrix_columns_match_inverse_dynamics() {
        // Independent cross-check: with zero gravity and zero velocity,
        // inverse dynamics of a unit joint acceleration extracts a column.
        let (model, links, _) = setup();
        let g0 = Vector3::zeros();
        for seed in [5, 17] {
            let q = rand_q(seed);
            let m = mass_matrix(&model, &links, &q).unwrap();
            for j in 0..9 {
                let mut e = JointVec::zeros();
                e[j] = 1.0;
                let col = inverse_dynamics(&model, &links, &g0, &q, &JointVec::zeros(), &e).unwrap();
                for i in 0..9 {
                    assert_relative_eq!(m[(i, j)], col[i], epsilon = 1e-10, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn kinetic_energy_matches_mass_matrix_quadratic_form() {
        let (model, links, _) = setup();
        let q = rand_q(42);
        let qd = rand_q(43) * 0.7;
        let m = mass_matrix(&model, &links, &q).unwrap();
        let e_quad = 0.5 * (qd.transpose() * m * qd)[(0, 0)];
        let e_link = kinetic_energy(&model, &links, &q, &qd).unwrap();
        assert_relative_eq!(e_quad, e_link, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn inverse_dynamics_power_balance() {
        // τᵀ·q̇ must equal d(T + V)/dt along any trajectory, an independent
        // energy oracle for the Coriolis terms.
        let (model, links, g) = setup();
        let q = rand_q(3);
        let qd = rand_q(9) * 0.8;
        let qdd = rand_q(27) * 1.5;
        let tau = inverse_dynamics(&model, &links, &g, &q, &qd, &qdd).unwrap();
        let power = tau.dot(&qd);

        let h = 1e-6;
        let energy = |t: f64| {
            let qt = q + qd * t + qdd * (0.5 * t * t);
            let qdt = qd + qdd * t;
            kinetic_energy(&model, &links, &qt, &qdt).unwrap()
                + potential_energy(&model, &links, &g, &qt).unwrap()
        };
        let fd = (energy(h) - energy(-h)) / (2.0 * h);
        assert_relative_eq!(power, fd, epsilon = 1e-5, max_relative = 1e-5);
    }

    #[test]
    fn inverse_dynamics_reduces_to_gravity_at_rest() {
        let (model, links, g) = setup();
        let q = rand_q(8);
        let a = inverse_dynamics(&model, &links, &g, &q, &JointVec::zeros(), &JointVec::zeros()).unwrap();
        let b = gravity_torques(&model, &links, &g, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn friction_zero_velocity_is_exactly_zero() {
        let p = FrictionParams::<f64>::default();
        assert_eq!(friction_torque(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn friction_matches_frozen_worked_value() {
        let p = FrictionParams::<f64> {
            coulomb: 1.0,
            breakaway: 2.0,
            stribeck_velocity: 0.1,
            smoothing: 0.01,
        };
        let f = friction_torque(&p, 0.001).unwrap();
        assert_relative_eq!(f, 1.0534018735264086, epsilon = 1e-9);
        // Headline check: ≈ 1.0535 (0.06345 arctangent part + 0.99 Stribeck).
        assert!((f - 1.0535).abs() < 1e-3);
    }

    #[test]
    fn friction_is_continuous_through_zero() {
        let p = FrictionParams::<f64> {
            coulomb: 1.0,
            breakaway: 2.0,
            stribeck_velocity: 0.1,
            smoothing: 0.01,
        };
        let gap = friction_torque(&p, 1e-9).unwrap() - friction_torque(&p, -1e-9).unwrap();
        assert!(gap.abs() < 1e-6, "gap {gap}");
    }

    #[test]
    fn friction_is_odd_and_bounded() {
        let p = FrictionParams {
            coulomb: 1.0,
            breakaway: 2.0,
            stribeck_velocity: 0.1,
            smoothing: 0.01,
        };
        for i in 1..200 {
            let v = i as f64 * 0.01;
            let fp = friction_torque(&p, v).unwrap();
            let fm = friction_torque(&p, -v).unwrap();
            assert_relative_eq!(fp, -fm, epsilon = 1e-12);
            assert!(fp.abs() <= p.breakaway + 1e-12);
        }
    }

    #[test]
    fn friction_tends_to_coulomb_at_speed() {
        let p = FrictionParams::<f64> {
            coulomb: 1.0,
            breakaway: 2.0,
            stribeck_velocity: 0.1,
            smoothing: 0.01,
        };
        let f = friction_torque(&p, 1e5).unwrap();
        assert!((f - p.coulomb).abs() / p.coulomb < 1e-3);
    }

    #[test]
    fn friction_rejects_bad_parameters() {
        let p = FrictionParams { coulomb: 1.0, breakaway: 0.5, stribeck_velocity: 0.1, smoothing: 0.01 };
        assert!(matches!(
            friction_torque(&p, 0.1),
            Err(DynamicsError::InvalidFriction { .. })
        ));
        let p = FrictionParams { coulomb: 1.0, breakaway: 2.0, stribeck_velocity: 0.0, smoothing: 0.01 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn feedforward_decomposes_into_rigid_plus_friction() {
        let (model, links, g) = setup();
        let fr = [FrictionParams::default(); 9];
        let q = rand_q(12);
        let qd = rand_q(13) * 0.5;
        let qdd = rand_q(14);
        let total = feedforward_torques(&model, &links, &g, &fr, &q, &qd, &qdd).unwrap();
        let rigid = inverse_dynamics(&model, &links, &g, &q, &qd, &qdd).unwrap();
        let fric = friction_torques(&fr, &qd).unwrap();
        assert_eq!(total, rigid + fric);
    }

    #[test]
    fn rejects_non_finite_state() {
        let (model, links, g) = setup();
        let mut q = JointVec::zeros();
        q[2] = f64::INFINITY;
        assert!(matches!(
            gravity_torques(&model, &links, &g, &q),
            Err(DynamicsError::NonFinite { .. })
        ));
    }

    #[test]
    fn generic_scalar_f32_smoke() {
        let model: ChainModel<f32> = ChainModel::default_arm();
        let links: [LinkInertia<f32>; 9] = default_link_inertias();
        let g = Vector3::new(0.0f32, 0.0, -9.81);
        let tau = gravity_torques(&model, &links, &g, &JointVec::zeros()).unwrap();
        assert!(tau.norm() < 1e-4);
        let m = mass_matrix(&model, &links, &JointVec::zeros()).unwrap();
        assert!(m.cholesky().is_some());
    }
}
