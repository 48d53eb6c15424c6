//! Control framework and desk-scale simulator for a 9-DoF upper-limb
//! exoskeleton with three strapped force/torque sensing cuffs.
//!
//! The library is organised bottom-up:
//!
//! * [`chain`] — serial-chain kinematics (forward kinematics, geometric
//!   Jacobians) plus the planar two-link sub-model used for donning analysis.
//! * [`offset`] — donning-offset angles/rates between the wearer's arm and
//!   the exoskeleton rods, and the impedance disturbance torques they create.
//! * [`classify`] — per-cuff wrench channel classification and first-order
//!   low-pass filtering.
//! * [`bas`] — binding alignment: force/torque gain scheduling and the
//!   decoupled joint-torque mapping for each cuff.
//! * [`fcm`] — full-arm coordination: movement-intent gating, coordination
//!   gains, and base-anchored whole-arm torque distribution.
//! * [`dynamics`] — recursive Newton–Euler inverse dynamics, mass matrix,
//!   gravity, and smoothed Coulomb/Stribeck friction compensation.
//! * [`controller`] — the 80 Hz interaction controller combining model
//!   feedforward with the alignment and coordination strategies.
//! * [`sim`] — kinematic human intent, compliant binding interfaces, a
//!   torque-driven plant, the closed-loop runner, and steady-state metrics.
//! * [`scenario`] — JSON scenario schema and validation.
//! * [`checks`] — named self-checks for the CLI `check` subcommand.
//!
//! All math modules are generic over the [`Real`] scalar (f32 or f64);
//! concrete f64 aliases for the common types live at the crate root.

pub mod bas;
pub mod chain;
pub mod checks;
pub mod classify;
pub mod controller;
pub mod dynamics;
pub mod fcm;
pub mod offset;
pub mod scenario;
pub mod sim;

mod real;

pub use real::Real;

/// Number of actuated joints in the serial chain.
pub const JOINT_COUNT: usize = 9;

/// Joint-space vector (one entry per joint).
pub type JointVec<S> = nalgebra::SVector<S, JOINT_COUNT>;

/// Joint-space square matrix.
pub type JointMat<S> = nalgebra::SMatrix<S, JOINT_COUNT, JOINT_COUNT>;

/// Default scalar used by the simulator, scenario files, and the CLI.
pub type Scalar = f64;

/// Chain model at the default scalar.
pub type ChainModel = chain::ChainModel<Scalar>;
/// Wrench at the default scalar.
pub type Wrench = classify::Wrench<Scalar>;
/// Component classification at the default scalar.
pub type ComponentSet = classify::ComponentSet<Scalar>;
/// Controller at the default scalar.
pub type Controller = controller::Controller<Scalar>;
/// Controller output at the default scalar.
pub type ControlOutput = controller::ControlOutput<Scalar>;
