//! Rigid-body exoskeleton plant: forward dynamics integrated with a
//! fixed-step semi-implicit Euler scheme, joint-limit handling, and a
//! running energy ledger for integration-quality audits.
//!
//! The plant owns its own inertia and friction parameters, deliberately
//! distinct from the controller's estimates so compensation is imperfect.

use nalgebra::{linalg::Cholesky, DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::chain::ChainModel;
use crate::dynamics::{
    bias_torques, friction_torques, kinetic_energy, potential_energy, validate_inertias,
    DynamicsError, FrictionParams, LinkInertia,
};
use crate::{JointVec, Real, JOINT_COUNT};

/// Errors raised by plant construction or stepping.
#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    /// Parameters failed validation.
    #[error("invalid plant parameter {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    /// The state or an input became non-finite; the simulation must abort.
    #[error("non-finite plant quantity: {context}")]
    NonFinite { context: &'static str },
    /// The mass matrix lost positive definiteness (numerically blown up).
    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,
    /// Underlying dynamics error.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Physical parameters of the simulated exoskeleton.
#[derive(Clone, Copy, Debug)]
pub struct PlantParams<S: Real> {
    /// Link inertias the plant actually has.
    pub links: [LinkInertia<S>; JOINT_COUNT],
    /// Joint friction the plant actually has.
    pub friction: [FrictionParams<S>; JOINT_COUNT],
    /// Gravity vector (m/s², base coordinates).
    pub gravity: Vector3<S>,
    /// Integration substeps per control tick.
    pub substeps: u32,
    /// Control tick period (s); the substep is this divided by `substeps`.
    pub control_dt: S,
}

impl<S: Real> PlantParams<S> {
    /// Validates every parameter group.
    pub fn validate(&self) -> Result<(), PlantError> {
        validate_inertias(&self.links)?;
        for f in &self.friction {
            f.validate()?;
        }
        if self.gravity.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::InvalidParameter { what: "gravity", value: f64::NAN });
        }
        if self.substeps == 0 {
            return Err(PlantError::InvalidParameter { what: "substeps", value: 0.0 });
        }
        if !(self.control_dt > S::zero()) || !self.control_dt.is_finite() {
            return Err(PlantError::InvalidParameter {
                what: "control_dt",
                value: self.control_dt.as_f64(),
            });
        }
        Ok(())
    }
}

/// Instantaneous mechanical state of the plant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState<S: Real> {
    /// Joint angles (rad).
    pub q: JointVec<S>,
    /// Joint velocities (rad/s).
    pub qd: JointVec<S>,
}

/// Running work/energy bookkeeping, accumulated every substep with
/// midpoint velocities.
#[derive(Clone, Copy, Debug)]
pub struct EnergyLedger<S: Real> {
    /// Work injected by the commanded plus external torques (J).
    pub injected: S,
    /// Energy removed by friction and by joint-limit impacts (J).
    pub dissipated: S,
    /// Kinetic plus potential energy at construction (J).
    pub initial_energy: S,
    /// Cumulative magnitude of injected and dissipated work (J); the
    /// natural scale for judging the residual.
    pub scale: S,
}

impl<S: Real> EnergyLedger<S> {
    /// Signed audit residual: injected − dissipated − energy gained.
    pub fn residual(&self, current_energy: S) -> S {
        self.injected - self.dissipated - (current_energy - self.initial_energy)
    }

    /// Residual relative to the work scale (floored so an idle run is 0).
    pub fn relative_residual(&self, current_energy: S) -> S {
        let delta = (current_energy - self.initial_energy).abs();
        let denom = self.scale.max(delta).max(S::scalar(1e-6));
        self.residual(current_energy).abs() / denom
    }
}

/// The integrating plant.
#[derive(Clone, Debug)]
pub struct Plant<S: Real> {
    model: ChainModel<S>,
    params: PlantParams<S>,
    state: PlantState<S>,
    ledger: EnergyLedger<S>,
    limit_hits: u64,
}

impl<S: Real> Plant<S> {
    /// Builds a plant at rest at `q0`.
    pub fn new(
        model: ChainModel<S>,
        params: PlantParams<S>,
        q0: &JointVec<S>,
    ) -> Result<Self, PlantError> {
        Self::with_state(model, params, q0, &JointVec::zeros())
    }

    /// Builds a plant with an explicit initial velocity (used by coast-down
    /// and conservation audits).
    pub fn with_state(
        model: ChainModel<S>,
        params: PlantParams<S>,
        q0: &JointVec<S>,
        qd0: &JointVec<S>,
    ) -> Result<Self, PlantError> {
        params.validate()?;
        if q0.iter().any(|v| !v.is_finite()) || qd0.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFinite { context: "initial state" });
        }
        let state = PlantState { q: *q0, qd: *qd0 };
        let initial_energy = kinetic_energy(&model, &params.links, q0, qd0)?
            + potential_energy(&model, &params.links, &params.gravity, q0)?;
        let ledger = EnergyLedger {
            injected: S::zero(),
            dissipated: S::zero(),
            initial_energy,
            scale: S::zero(),
        };
        Ok(Self { model, params, state, ledger, limit_hits: 0 })
    }

    /// Current mechanical state.
    pub fn state(&self) -> &PlantState<S> {
        &self.state
    }

    /// The chain model the plant integrates.
    pub fn model(&self) -> &ChainModel<S> {
        &self.model
    }

    /// Plant parameters.
    pub fn params(&self) -> &PlantParams<S> {
        &self.params
    }

    /// Duration of one integration substep (s).
    pub fn substep_dt(&self) -> S {
        self.params.control_dt / S::scalar(f64::from(self.params.substeps))
    }

    /// Number of joint-limit clamp events so far.
    pub fn limit_hits(&self) -> u64 {
        self.limit_hits
    }

    /// The work/energy ledger.
    pub fn ledger(&self) -> &EnergyLedger<S> {
        &self.ledger
    }

    /// Total mechanical energy (kinetic + potential) of the current state.
    pub fn energy(&self) -> Result<S, PlantError> {
        let ke = kinetic_energy(&self.model, &self.params.links, &self.state.q, &self.state.qd)?;
        let pe = potential_energy(
            &self.model,
            &self.params.links,
            &self.params.gravity,
            &self.state.q,
        )?;
        Ok(ke + pe)
    }

    /// Advances one substep under the total joint torque `tau` (commanded
    /// plus external), held constant across the substep.
    ///
    /// Forward dynamics `q̈ = M⁻¹(τ − bias − friction)` followed by a
    /// semi-implicit Euler update; positions that leave a joint's limits
    /// are clamped and the impact resolved as an inelastic constraint
    /// impulse at the stopped joints, with the kinetic energy the stop
    /// removed booked as dissipation.
    pub fn substep(&mut self, tau: &JointVec<S>) -> Result<(), PlantError> {
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFinite { context: "applied torque" });
        }
        let h = self.substep_dt();
        let q = self.state.q;
        let qd = self.state.qd;
        let bias = bias_torques(&self.model, &self.params.links, &self.params.gravity, &q, &qd)?;
        let m = crate::dynamics::mass_matrix(&self.model, &self.params.links, &q)?;
        let chol = Cholesky::new(m).ok_or(PlantError::NotPositiveDefinite)?;

        // Velocity update without friction first.
        let qd_free = qd + chol.solve(&(tau - bias)) * h;

        // Stick–slip friction. The slip curve is evaluated at the
        // friction-free velocity; a joint whose curve torque over one
        // substep would arrest or reverse it (apparent inertia 1/(M⁻¹)ᵢᵢ)
        // is treated as stuck instead: its velocity is constrained to
        // exactly zero by a static holding torque solved jointly over the
        // stuck set and capped at the breakaway level. Explicitly
        // integrating the kinetic curve on a low-apparent-inertia axis
        // (the forearm/hand axial joints sit near 5e-4 kg·m²) would
        // overshoot zero every substep and chatter, pumping energy into
        // the joint instead of draining it; the constraint also lets the
        // arm genuinely park, holding position bit-exactly so encoder
        // differences upstream read zero rather than phantom creep.
        let minv = chol.inverse();
        let curve = friction_torques(&self.params.friction, &qd_free)?;
        let mut friction = JointVec::zeros();
        let mut stick = [0usize; JOINT_COUNT];
        let mut n_stick = 0;
        for i in 0..JOINT_COUNT {
            let arrest = qd_free[i].abs() / (h * minv[(i, i)]);
            if self.params.friction[i].breakaway > S::zero() && curve[i].abs() >= arrest {
                stick[n_stick] = i;
                n_stick += 1;
            } else {
                friction[i] = curve[i];
            }
        }
        let mut held = false;
        if n_stick > 0 {
            let stuck = &stick[..n_stick];
            // P·M⁻¹·Pᵀ over the stuck set: principal submatrix of SPD M⁻¹.
            let mut pmp = DMatrix::<S>::zeros(n_stick, n_stick);
            for (r, &i) in stuck.iter().enumerate() {
                for (c, &j) in stuck.iter().enumerate() {
                    pmp[(r, c)] = minv[(i, j)];
                }
            }
            let slip_effect = minv * friction;
            let rhs = DVector::<S>::from_iterator(
                n_stick,
                stuck.iter().map(|&i| qd_free[i] / h - slip_effect[i]),
            );
            let mut mu = Cholesky::new(pmp)
                .ok_or(PlantError::NotPositiveDefinite)?
                .solve(&rhs);
            held = true;
            for (r, &i) in stuck.iter().enumerate() {
                let cap = self.params.friction[i].breakaway;
                if mu[r].abs() > cap {
                    mu[r] = cap * mu[r].sgn();
                    held = false;
                }
            }
            for (r, &i) in stuck.iter().enumerate() {
                friction[i] = mu[r];
            }
        }
        let mut qd_new = qd_free - minv * friction * h;
        if held {
            // The solve zeroed the stuck joints exactly; remove roundoff so
            // the hold is bit-stable across substeps.
            for &i in &stick[..n_stick] {
                qd_new[i] = S::zero();
            }
        }
        let mut q_new = q + qd_new * h;

        // Work bookkeeping with midpoint velocity; for the velocity-level
        // identity M(q)(qd' − qd) = hΣτ this pairing makes the kinetic term
        // exact at frozen M.
        let qd_mid = (qd + qd_new) * S::scalar(0.5);
        let injected = tau.dot(&qd_mid) * h;
        let frictive = friction.dot(&qd_mid) * h;
        self.ledger.injected += injected;
        self.ledger.dissipated += frictive;
        self.ledger.scale += injected.abs() + frictive.abs();

        // Joint-limit stops: clamp position and resolve the impact as an
        // inelastic constraint impulse acting only at the stopped joints.
        // With P selecting those joints, qd' = qd + M⁻¹Pᵀλ subject to
        // P·qd' = 0, so λ = −(P·M⁻¹·Pᵀ)⁻¹·P·qd. Unlike naively zeroing the
        // stopped components (which, through the coupled mass matrix, acts
        // like bracing every joint and can add kinetic energy), this impulse
        // is guaranteed dissipative; the loss is booked in the ledger.
        let q_raw = q_new;
        let mut active = [0usize; JOINT_COUNT];
        let mut n_active = 0;
        for i in 0..JOINT_COUNT {
            let (lo, hi) = self.model.joints()[i].limits;
            if q_new[i] < lo {
                q_new[i] = lo;
                active[n_active] = i;
                n_active += 1;
            } else if q_new[i] > hi {
                q_new[i] = hi;
                active[n_active] = i;
                n_active += 1;
            }
        }
        let mut qd_stopped = qd_new;
        if n_active > 0 {
            self.limit_hits += 1;
            let active = &active[..n_active];
            // Columns of M⁻¹ for the stopped joints.
            let mut cols = [JointVec::zeros(); JOINT_COUNT];
            for (c, &i) in active.iter().enumerate() {
                let mut e = JointVec::zeros();
                e[i] = S::one();
                cols[c] = chol.solve(&e);
            }
            // P·M⁻¹·Pᵀ is a principal submatrix of an SPD matrix, hence SPD.
            let mut pmp = DMatrix::<S>::zeros(n_active, n_active);
            for (r, &i) in active.iter().enumerate() {
                for c in 0..n_active {
                    pmp[(r, c)] = cols[c][i];
                }
            }
            let rhs = DVector::<S>::from_iterator(n_active, active.iter().map(|&i| -qd_new[i]));
            let lambda = Cholesky::new(pmp)
                .ok_or(PlantError::NotPositiveDefinite)?
                .solve(&rhs);
            for (c, col) in cols[..n_active].iter().enumerate() {
                qd_stopped += col * lambda[c];
            }
            for &i in active {
                qd_stopped[i] = S::zero();
            }
            // Book the whole energy the stop removed: the impulse's kinetic
            // loss plus the (small) potential and mass-matrix shift from
            // snapping the position back onto the limit.
            let before = kinetic_energy(&self.model, &self.params.links, &q_raw, &qd_new)?
                + potential_energy(&self.model, &self.params.links, &self.params.gravity, &q_raw)?;
            let after = kinetic_energy(&self.model, &self.params.links, &q_new, &qd_stopped)?
                + potential_energy(&self.model, &self.params.links, &self.params.gravity, &q_new)?;
            self.ledger.dissipated += before - after;
            self.ledger.scale += (before - after).abs();
        }

        if q_new.iter().any(|v| !v.is_finite()) || qd_stopped.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFinite { context: "integrated state" });
        }
        self.state = PlantState { q: q_new, qd: qd_stopped };
        Ok(())
    }
}
