//! Serial-chain kinematics for the 9-joint arm and the planar two-link
//! sub-model used by the donning-offset analysis.
//!
//! The chain is a fixed-order revolute serial chain: two scapular joints,
//! two shoulder joints, two elbow-part joints, and three wrist joints.
//! Three cuff/sensor frames ("binding points") ride on the upper arm,
//! forearm, and hand links.

use nalgebra::{Isometry3, Matrix2, OMatrix, Translation3, Unit, UnitQuaternion, Vector2, Vector3, U6};
use thiserror::Error;

use crate::{JointVec, Real, JOINT_COUNT};

/// Tolerance on `|sin θ2|` below which the planar two-link Jacobian is
/// treated as singular and refused inversion.
pub const PLANAR_SINGULARITY_TOL: f64 = 1e-6;

/// Identifier for each joint, in fixed proximal-to-distal order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum JointId {
    /// Scapular joint 1 (girdle elevation path).
    Sc1,
    /// Scapular joint 2.
    Sc2,
    /// Shoulder flexion/extension.
    Sh1,
    /// Shoulder adduction/abduction.
    Sh2,
    /// Upper-arm internal/external rotation (elbow part, axis along the upper arm).
    El1,
    /// Elbow flexion/extension.
    El2,
    /// Forearm pronation/supination (axis along the forearm).
    Wr1,
    /// Wrist flexion/extension.
    Wr2,
    /// Wrist ulnar/radial deviation.
    Wr3,
}

impl JointId {
    /// All joints in chain order.
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::Sc1,
        JointId::Sc2,
        JointId::Sh1,
        JointId::Sh2,
        JointId::El1,
        JointId::El2,
        JointId::Wr1,
        JointId::Wr2,
        JointId::Wr3,
    ];

    /// Zero-based position in the chain.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Joint at a zero-based chain position.
    pub fn from_index(index: usize) -> Option<JointId> {
        JointId::ALL.get(index).copied()
    }

    /// Short lower-case label (used in CSV headers and scenario files).
    pub fn label(self) -> &'static str {
        match self {
            JointId::Sc1 => "sc1",
            JointId::Sc2 => "sc2",
            JointId::Sh1 => "sh1",
            JointId::Sh2 => "sh2",
            JointId::El1 => "el1",
            JointId::El2 => "el2",
            JointId::Wr1 => "wr1",
            JointId::Wr2 => "wr2",
            JointId::Wr3 => "wr3",
        }
    }
}

/// The three strapped cuff/sensor locations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BindingSite {
    /// Upper-arm cuff.
    UpperArm,
    /// Forearm cuff.
    Forearm,
    /// Hand grip.
    Hand,
}

impl BindingSite {
    /// All binding sites in proximal-to-distal order.
    pub const ALL: [BindingSite; 3] = [BindingSite::UpperArm, BindingSite::Forearm, BindingSite::Hand];

    /// Zero-based storage index.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Short label used in CSV headers ("ua", "fa", "ha").
    pub fn label(self) -> &'static str {
        match self {
            BindingSite::UpperArm => "ua",
            BindingSite::Forearm => "fa",
            BindingSite::Hand => "ha",
        }
    }
}

/// One revolute joint: a fixed parent-frame transform followed by a rotation
/// about `axis` through the joint origin.
#[derive(Clone, Debug)]
pub struct JointDescriptor<S: Real> {
    /// Which joint this is; descriptors must appear in chain order.
    pub id: JointId,
    /// Fixed transform from the parent joint frame (or base) to this joint
    /// frame at zero angle.
    pub origin: Isometry3<S>,
    /// Rotation axis in this joint's local frame.
    pub axis: Unit<Vector3<S>>,
    /// Lower and upper joint limits (rad); the plant clamps to these.
    pub limits: (S, S),
}

/// A cuff/sensor frame rigidly attached to the link after `parent`.
#[derive(Clone, Debug)]
pub struct BindingPoint<S: Real> {
    /// The joint whose link carries this cuff.
    pub parent: JointId,
    /// Cuff frame expressed in the parent joint frame.
    pub offset: Isometry3<S>,
}

/// Errors raised by chain construction and kinematic queries.
#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    /// Joint descriptors are out of order or duplicated.
    #[error("joint at position {index} must be {expected:?}, found {found:?}")]
    JointOrder {
        index: usize,
        expected: JointId,
        found: JointId,
    },
    /// A binding point is attached to a link that cannot carry it.
    #[error("binding {site:?} cannot attach to joint {parent:?}")]
    BindingParent { site: BindingSite, parent: JointId },
    /// Joint limits are inverted or degenerate.
    #[error("joint {id:?} has invalid limits: lower {lo} >= upper {hi}")]
    InvalidLimits { id: JointId, lo: f64, hi: f64 },
    /// A Jacobian span starts distal to the binding's parent joint.
    #[error("span starting at {first:?} does not reach binding {site:?} (parent {parent:?})")]
    EmptySpan {
        first: JointId,
        site: BindingSite,
        parent: JointId,
    },
    /// Planar two-link geometry with non-positive segment lengths.
    #[error("segment lengths must be positive and finite, got l1 = {l1}, l2 = {l2}")]
    PlanarLengths { l1: f64, l2: f64 },
    /// Planar two-link configuration too close to a fold singularity.
    #[error("planar two-link is singular: |sin θ2| = {s2_abs:.3e} <= {tol:.3e}")]
    PlanarSingular { s2_abs: f64, tol: f64 },
    /// A non-finite value reached a kinematic query.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
}

/// Frames produced by forward kinematics, all expressed in the base frame.
#[derive(Clone, Debug)]
pub struct FrameSet<S: Real> {
    /// Frame of each joint after its own rotation (the frame of the link it
    /// drives). The frame origin is the joint origin.
    pub joints: [Isometry3<S>; JOINT_COUNT],
    /// Cuff/sensor frames, indexed by [`BindingSite::index`].
    pub bindings: [Isometry3<S>; 3],
}

impl<S: Real> FrameSet<S> {
    /// Frame of one binding site.
    #[inline]
    pub fn binding(&self, site: BindingSite) -> &Isometry3<S> {
        &self.bindings[site.index()]
    }
}

/// Geometric Jacobian with six task rows (linear velocity first, then
/// angular) and one column per spanned joint.
pub type Jacobian<S> = OMatrix<S, U6, nalgebra::Dyn>;

/// The 9-joint serial chain with its three binding points.
#[derive(Clone, Debug)]
pub struct ChainModel<S: Real> {
    joints: [JointDescriptor<S>; JOINT_COUNT],
    bindings: [BindingPoint<S>; 3],
}

impl<S: Real> ChainModel<S> {
    /// Builds a chain model, validating joint order, binding attachment, and
    /// joint limits.
    ///
    /// Binding attachment rules: the upper-arm cuff may ride on the link of
    /// `Sh1` or `Sh2`, the forearm cuff on `El1` or `El2`, and the hand grip
    /// always on `Wr3`.
    pub fn new(
        joints: [JointDescriptor<S>; JOINT_COUNT],
        bindings: [BindingPoint<S>; 3],
    ) -> Result<Self, ChainError> {
        for (i, jd) in joints.iter().enumerate() {
            let expected = JointId::from_index(i).expect("index in range");
            if jd.id != expected {
                return Err(ChainError::JointOrder {
                    index: i,
                    expected,
                    found: jd.id,
                });
            }
            let (lo, hi) = jd.limits;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ChainError::InvalidLimits {
                    id: jd.id,
                    lo: lo.as_f64(),
                    hi: hi.as_f64(),
                });
            }
        }
        let allowed: [&[JointId]; 3] = [
            &[JointId::Sh1, JointId::Sh2],
            &[JointId::El1, JointId::El2],
            &[JointId::Wr3],
        ];
        for site in BindingSite::ALL {
            let parent = bindings[site.index()].parent;
            if !allowed[site.index()].contains(&parent) {
                return Err(ChainError::BindingParent { site, parent });
            }
        }
        Ok(Self { joints, bindings })
    }

    /// Descriptor of one joint.
    #[inline]
    pub fn joint(&self, id: JointId) -> &JointDescriptor<S> {
        &self.joints[id.index()]
    }

    /// All joint descriptors in chain order.
    #[inline]
    pub fn joints(&self) -> &[JointDescriptor<S>; JOINT_COUNT] {
        &self.joints
    }

    /// One binding point.
    #[inline]
    pub fn binding(&self, site: BindingSite) -> &BindingPoint<S> {
        &self.bindings[site.index()]
    }

    /// Forward kinematics: joint frames and binding frames in the base frame.
    pub fn forward_kinematics(&self, q: &JointVec<S>) -> Result<FrameSet<S>, ChainError> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(ChainError::NonFinite {
                context: "forward_kinematics joint angles",
            });
        }
        let mut frames = [Isometry3::identity(); JOINT_COUNT];
        let mut t = Isometry3::identity();
        for (i, jd) in self.joints.iter().enumerate() {
            let spin = UnitQuaternion::from_axis_angle(&jd.axis, q[i]);
            t *= jd.origin * Isometry3::from_parts(Translation3::identity(), spin);
            frames[i] = t;
        }
        let mut bindings = [Isometry3::identity(); 3];
        for site in BindingSite::ALL {
            let bp = &self.bindings[site.index()];
            bindings[site.index()] = frames[bp.parent.index()] * bp.offset;
        }
        Ok(FrameSet { joints: frames, bindings })
    }

    /// Base-frame pose of one cuff.
    pub fn binding_frame(&self, q: &JointVec<S>, site: BindingSite) -> Result<Isometry3<S>, ChainError> {
        Ok(*self.forward_kinematics(q)?.binding(site))
    }

    /// Geometric Jacobian of a binding frame with respect to the joints from
    /// `first` through the binding's parent joint (inclusive).
    ///
    /// Column `i` is `[axis_i × (p − p_i); axis_i]` in base coordinates,
    /// where `p` is the cuff origin and `p_i` the joint origin, so
    /// `J · q̇_span` is the cuff twist (linear velocity stacked over angular
    /// velocity) and `Jᵀ · w` maps a base-frame wrench at the cuff into
    /// span joint torques.
    pub fn jacobian(
        &self,
        q: &JointVec<S>,
        first: JointId,
        site: BindingSite,
    ) -> Result<Jacobian<S>, ChainError> {
        let frames = self.forward_kinematics(q)?;
        self.jacobian_from_frames(&frames, first, site)
    }

    /// Same as [`ChainModel::jacobian`] but reuses already-computed frames.
    pub fn jacobian_from_frames(
        &self,
        frames: &FrameSet<S>,
        first: JointId,
        site: BindingSite,
    ) -> Result<Jacobian<S>, ChainError> {
        let parent = self.bindings[site.index()].parent;
        if first.index() > parent.index() {
            return Err(ChainError::EmptySpan { first, site, parent });
        }
        let cols = parent.index() - first.index() + 1;
        let p_point = frames.binding(site).translation.vector;
        let mut jac = Jacobian::<S>::zeros(cols);
        for c in 0..cols {
            let ji = first.index() + c;
            let frame = &frames.joints[ji];
            let axis_w = frame.rotation * self.joints[ji].axis.into_inner();
            let p_j = frame.translation.vector;
            let lin = axis_w.cross(&(p_point - p_j));
            for r in 0..3 {
                jac[(r, c)] = lin[r];
                jac[(r + 3, c)] = axis_w[r];
            }
        }
        Ok(jac)
    }
}

/// Default upper-arm segment length (m).
pub const DEFAULT_UPPER_ARM: f64 = 0.318;
/// Default forearm segment length (m).
pub const DEFAULT_FOREARM: f64 = 0.261;
/// Default fraction of the upper-arm length at which the upper-arm cuff sits.
pub const DEFAULT_UA_CUFF_FRACTION: f64 = 0.63;
/// Default fraction of the forearm length at which the forearm cuff sits.
pub const DEFAULT_FA_CUFF_FRACTION: f64 = 0.50;
/// Default distance from the wrist to the hand grip frame (m).
pub const DEFAULT_HAND_OFFSET: f64 = 0.06;

impl<S: Real> ChainModel<S> {
    /// Default arm geometry with the standard segment lengths.
    ///
    /// Base frame: x forward, y to the wearer's left, z up; at zero angles
    /// the whole chain — girdle suspension links included — hangs straight
    /// down the base z line, so zero angles is a gravity equilibrium. Axis
    /// layout (proximal to distal): girdle yaw about z, girdle elevation
    /// about x, shoulder flexion about −y, abduction about x, upper-arm
    /// rotation about the segment axis, elbow flexion about −y, forearm
    /// pronation about the segment axis, wrist flexion about −y, deviation
    /// about x.
    pub fn default_arm() -> Self {
        Self::with_segments(
            S::scalar(DEFAULT_UPPER_ARM),
            S::scalar(DEFAULT_FOREARM),
            S::scalar(DEFAULT_UA_CUFF_FRACTION),
            S::scalar(DEFAULT_FA_CUFF_FRACTION),
        )
    }

    /// Default arm geometry with custom segment lengths and cuff positions
    /// (cuff positions as fractions of the segment length).
    pub fn with_segments(upper_arm: S, forearm: S, ua_fraction: S, fa_fraction: S) -> Self {
        let z = Vector3::z_axis();
        let x = Vector3::x_axis();
        let neg_y = Unit::new_unchecked(-Vector3::y());
        let neg_z = Unit::new_unchecked(-Vector3::z());
        let wide = (S::scalar(-3.1), S::scalar(3.1));
        let elbow_lim = (S::scalar(-0.05), S::scalar(2.8));

        let trans = |x: f64, y: f64, z: f64| {
            Isometry3::from_parts(
                Translation3::new(S::scalar(x), S::scalar(y), S::scalar(z)),
                UnitQuaternion::identity(),
            )
        };
        let down = |len: S| {
            Isometry3::from_parts(
                Translation3::new(S::zero(), S::zero(), -len),
                UnitQuaternion::identity(),
            )
        };

        let joints = [
            JointDescriptor { id: JointId::Sc1, origin: Isometry3::identity(), axis: z, limits: (S::scalar(-0.8), S::scalar(0.8)) },
            JointDescriptor { id: JointId::Sc2, origin: trans(0.0, 0.0, -0.05), axis: x, limits: (S::scalar(-0.8), S::scalar(0.8)) },
            JointDescriptor { id: JointId::Sh1, origin: trans(0.0, 0.0, -0.10), axis: neg_y, limits: wide },
            JointDescriptor { id: JointId::Sh2, origin: Isometry3::identity(), axis: x, limits: wide },
            JointDescriptor { id: JointId::El1, origin: down(upper_arm), axis: neg_z, limits: wide },
            JointDescriptor { id: JointId::El2, origin: Isometry3::identity(), axis: neg_y, limits: elbow_lim },
            JointDescriptor { id: JointId::Wr1, origin: down(forearm), axis: neg_z, limits: wide },
            JointDescriptor { id: JointId::Wr2, origin: Isometry3::identity(), axis: neg_y, limits: (S::scalar(-1.5), S::scalar(1.5)) },
            JointDescriptor { id: JointId::Wr3, origin: Isometry3::identity(), axis: x, limits: (S::scalar(-1.0), S::scalar(1.0)) },
        ];

        // Cuff frames: x along the segment (distal), y forward, z toward the
        // wearer's right (the flexion axis), so flexion misalignment loads Tz
        // and abduction/rotation misalignment loads Ty.
        let cuff_rot = UnitQuaternion::from_basis_unchecked(&[
            -Vector3::z(), // local x -> base -z (distal, arm hanging)
            Vector3::x(),  // local y -> base +x (forward)
            -Vector3::y(), // local z -> base -y (wearer's right)
        ]);
        let cuff = |dist: S| Isometry3::from_parts(Translation3::new(S::zero(), S::zero(), -dist), cuff_rot);

        let bindings = [
            BindingPoint { parent: JointId::Sh2, offset: cuff(upper_arm * ua_fraction) },
            BindingPoint { parent: JointId::El2, offset: cuff(forearm * fa_fraction) },
            BindingPoint { parent: JointId::Wr3, offset: cuff(S::scalar(DEFAULT_HAND_OFFSET)) },
        ];

        Self::new(joints, bindings).expect("default geometry is valid")
    }
}

/// Planar two-link arm (segment lengths only); angles are measured from the
/// downward reference with flexion positive, and the elbow angle is relative
/// to the upper segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarTwoLink<S: Real> {
    l1: S,
    l2: S,
}

impl<S: Real> PlanarTwoLink<S> {
    /// Builds the two-link geometry; lengths must be positive and finite.
    pub fn new(l1: S, l2: S) -> Result<Self, ChainError> {
        if !(l1 > S::zero()) || !(l2 > S::zero()) || !l1.is_finite() || !l2.is_finite() {
            return Err(ChainError::PlanarLengths {
                l1: l1.as_f64(),
                l2: l2.as_f64(),
            });
        }
        Ok(Self { l1, l2 })
    }

    /// Proximal segment length.
    #[inline]
    pub fn l1(&self) -> S {
        self.l1
    }

    /// Distal segment length.
    #[inline]
    pub fn l2(&self) -> S {
        self.l2
    }

    /// Endpoint position for joint angles `(θ1, θ2)`.
    pub fn forward(&self, theta: (S, S)) -> Vector2<S> {
        let (t1, t2) = theta;
        Vector2::new(
            self.l1 * t1.cos() + self.l2 * (t1 + t2).cos(),
            self.l1 * t1.sin() + self.l2 * (t1 + t2).sin(),
        )
    }

    /// Endpoint-velocity Jacobian
    /// `[[−l1·S1 − l2·S12, −l2·S12], [l1·C1 + l2·C12, l2·C12]]`.
    pub fn jacobian(&self, theta: (S, S)) -> Matrix2<S> {
        let (t1, t2) = theta;
        let (s1, c1) = (t1.sin(), t1.cos());
        let (s12, c12) = ((t1 + t2).sin(), (t1 + t2).cos());
        Matrix2::new(
            -self.l1 * s1 - self.l2 * s12,
            -self.l2 * s12,
            self.l1 * c1 + self.l2 * c12,
            self.l2 * c12,
        )
    }

    /// Closed-form inverse of [`PlanarTwoLink::jacobian`].
    ///
    /// Fails with [`ChainError::PlanarSingular`] when `|sin θ2|` is at or
    /// below [`PLANAR_SINGULARITY_TOL`] (folded or fully extended elbow).
    pub fn jacobian_inverse(&self, theta: (S, S)) -> Result<Matrix2<S>, ChainError> {
        let (t1, t2) = theta;
        let s2 = t2.sin();
        if s2.abs().as_f64() <= PLANAR_SINGULARITY_TOL {
            return Err(ChainError::PlanarSingular {
                s2_abs: s2.abs().as_f64(),
                tol: PLANAR_SINGULARITY_TOL,
            });
        }
        let (s1, c1) = (t1.sin(), t1.cos());
        let (s12, c12) = ((t1 + t2).sin(), (t1 + t2).cos());
        let l1s2 = self.l1 * s2;
        let l1l2s2 = self.l1 * self.l2 * s2;
        Ok(Matrix2::new(
            c12 / l1s2,
            s12 / l1s2,
            -(self.l2 * c12 + self.l1 * c1) / l1l2s2,
            -(self.l2 * s12 + self.l1 * s1) / l1l2s2,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q9(vals: [f64; 9]) -> JointVec<f64> {
        JointVec::from_column_slice(&vals)
    }

    #[test]
    fn default_arm_is_valid_and_ordered() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        for (i, jd) in m.joints().iter().enumerate() {
            assert_eq!(jd.id.index(), i);
        }
        assert_eq!(m.binding(BindingSite::Hand).parent, JointId::Wr3);
    }

    #[test]
    fn rejects_bad_binding_parent() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let mut bindings = m.bindings.clone();
        bindings[0].parent = JointId::Wr1;
        let err = ChainModel::new(m.joints.clone(), bindings).unwrap_err();
        assert!(matches!(err, ChainError::BindingParent { site: BindingSite::UpperArm, .. }));
    }

    #[test]
    fn rejects_inverted_limits() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let mut joints = m.joints.clone();
        joints[2].limits = (1.0, -1.0);
        let err = ChainModel::new(joints, m.bindings.clone()).unwrap_err();
        assert!(matches!(err, ChainError::InvalidLimits { id: JointId::Sh1, .. }));
    }

    #[test]
    fn fk_zero_configuration_hangs_down() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let f = m.forward_kinematics(&q9([0.0; 9])).unwrap();
        // Wrist hangs on the base z line: girdle drop plus both segments.
        let wrist = f.joints[JointId::Wr3.index()].translation.vector;
        assert_relative_eq!(wrist.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(wrist.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            wrist.z,
            -(0.15 + DEFAULT_UPPER_ARM + DEFAULT_FOREARM),
            epsilon = 1e-12
        );
        // Hand cuff x axis points distally (down at zero pose).
        let x_axis = f.binding(BindingSite::Hand).rotation * Vector3::x();
        assert_relative_eq!(x_axis.dot(&Vector3::new(0.0, 0.0, -1.0)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fk_rejects_non_finite() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let mut q = q9([0.0; 9]);
        q[4] = f64::NAN;
        assert!(matches!(
            m.forward_kinematics(&q),
            Err(ChainError::NonFinite { .. })
        ));
    }

    #[test]
    fn shoulder_flexion_swings_arm_forward() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let mut q = q9([0.0; 9]);
        q[JointId::Sh1.index()] = std::f64::consts::FRAC_PI_2;
        let f = m.forward_kinematics(&q).unwrap();
        let wrist = f.joints[JointId::Wr3.index()].translation.vector;
        // Flexion about -y by +90° points the arm along +x (forward),
        // pivoting at the shoulder 0.15 m below the base origin.
        assert_relative_eq!(wrist.x, DEFAULT_UPPER_ARM + DEFAULT_FOREARM, epsilon = 1e-12);
        assert_relative_eq!(wrist.z, -0.15, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_spans_and_shape() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let q = q9([0.1, -0.2, 0.5, 0.3, -0.4, 1.1, 0.2, -0.1, 0.3]);
        let j = m.jacobian(&q, JointId::Sc2, BindingSite::UpperArm).unwrap();
        assert_eq!(j.ncols(), 3);
        let j = m.jacobian(&q, JointId::El1, BindingSite::Forearm).unwrap();
        assert_eq!(j.ncols(), 2);
        let j = m.jacobian(&q, JointId::Wr1, BindingSite::Hand).unwrap();
        assert_eq!(j.ncols(), 3);
        let j = m.jacobian(&q, JointId::Sc1, BindingSite::Hand).unwrap();
        assert_eq!(j.ncols(), 9);
        assert!(matches!(
            m.jacobian(&q, JointId::Wr1, BindingSite::UpperArm),
            Err(ChainError::EmptySpan { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m: ChainModel<f64> = ChainModel::default_arm();
        let q = q9([0.3, -0.1, 0.7, 0.25, -0.6, 1.2, 0.4, -0.3, 0.2]);
        let h = 1e-6;
        for site in BindingSite::ALL {
            let parent = m.binding(site).parent.index();
            let j = m.jacobian(&q, JointId::Sc1, site).unwrap();
            for c in 0..=parent {
                let mut qp = q;
                let mut qm = q;
                qp[c] += h;
                qm[c] -= h;
                let fp = m.binding_frame(&qp, site).unwrap();
                let fm = m.binding_frame(&qm, site).unwrap();
                let dv = (fp.translation.vector - fm.translation.vector) / (2.0 * h);
                for r in 0..3 {
                    assert_relative_eq!(j[(r, c)], dv[r], epsilon = 1e-6, max_relative = 1e-6);
                }
                // Angular part via quaternion difference.
                let dq = fp.rotation * fm.rotation.inverse();
                let w = dq.scaled_axis() / (2.0 * h);
                for r in 0..3 {
                    assert_relative_eq!(j[(r + 3, c)], w[r], epsilon = 1e-6, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn degenerate_chain_axes_through_point_give_zero_linear_rows() {
        // A joint whose axis passes through the cuff origin produces no
        // linear velocity there: use the hand site with all wrist joints
        // co-located and the grip at the wrist center.
        let m0: ChainModel<f64> = ChainModel::default_arm();
        let mut bindings = m0.bindings.clone();
        bindings[2].offset = Isometry3::identity();
        let m = ChainModel::new(m0.joints.clone(), bindings).unwrap();
        let q = q9([0.2, 0.1, 0.4, -0.3, 0.6, 0.9, -0.2, 0.3, 0.1]);
        let j = m.jacobian(&q, JointId::Wr1, BindingSite::Hand).unwrap();
        for c in 0..3 {
            for r in 0..3 {
                assert_relative_eq!(j[(r, c)], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn planar_jacobian_matches_frozen_example() {
        let p = PlanarTwoLink::new(1.0, 1.0).unwrap();
        let j = p.jacobian((0.0, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(j[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(0, 1)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(1, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_inverse_matches_frozen_example_and_round_trips() {
        let p = PlanarTwoLink::new(1.0, 1.0).unwrap();
        let th = (0.0, std::f64::consts::FRAC_PI_2);
        let ji = p.jacobian_inverse(th).unwrap();
        assert_relative_eq!(ji[(0, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(ji[(0, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ji[(1, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ji[(1, 1)], -1.0, epsilon = 1e-12);
        let prod = p.jacobian(th) * ji;
        assert_relative_eq!(prod, Matrix2::identity(), epsilon = 1e-12);
    }

    #[test]
    fn planar_inverse_rejects_singular_and_bad_lengths() {
        let p = PlanarTwoLink::new(1.0, 1.0).unwrap();
        assert!(matches!(
            p.jacobian_inverse((0.4, 0.0)),
            Err(ChainError::PlanarSingular { .. })
        ));
        assert!(matches!(
            PlanarTwoLink::new(0.0, 1.0),
            Err(ChainError::PlanarLengths { .. })
        ));
        assert!(matches!(
            PlanarTwoLink::<f64>::new(1.0, f64::NAN),
            Err(ChainError::PlanarLengths { .. })
        ));
    }

    #[test]
    fn generic_scalar_f32_smoke() {
        let m: ChainModel<f32> = ChainModel::default_arm();
        let q = JointVec::<f32>::zeros();
        let f = m.forward_kinematics(&q).unwrap();
        let wrist = f.joints[JointId::Wr3.index()].translation.vector;
        assert!((wrist.z + (0.15 + DEFAULT_UPPER_ARM + DEFAULT_FOREARM) as f32).abs() < 1e-6);
        let p = PlanarTwoLink::<f32>::new(1.0, 1.0).unwrap();
        let j = p.jacobian((0.0, std::f32::consts::FRAC_PI_2));
        assert!((j[(1, 0)] - 1.0).abs() < 1e-6);
    }
}
