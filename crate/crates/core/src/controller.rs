//! Closed-loop joint torque controller: model feedforward plus
//! interaction-force feedback, with selectable alignment reshaping of the
//! movement channels and cross-binding coordination assistance.
//!
//! Every tick at the control rate the controller
//! 1. estimates joint rates and accelerations by backward differences and
//!    low-pass filters them,
//! 2. low-pass filters the three binding wrenches and splits them into
//!    movement / assistant / coupling / redundant channels,
//! 3. evaluates the model feedforward `τ_com`,
//! 4. forms the feedback torques for the active mode, and
//! 5. clamps the sum to the per-joint torque limits for the actuators.
//!
//! The command always decomposes exactly: `τ_cmd = τ_com + τ_int + τ_coord`
//! bit-for-bit, and the actuator torque is `τ_applied = clamp(τ_cmd)`.

use nalgebra::Vector3;
use thiserror::Error;

use crate::bas::{
    apply_bas, apply_mc_passthrough, bas_torques, movement_torques, BasConfig, BasError, PairGains,
};
use crate::chain::{BindingSite, ChainError, ChainModel};
use crate::classify::{classify, filter_wrench, ClassifyError, ComponentSet, LowPass, Wrench, WrenchFilter};
use crate::dynamics::{
    feedforward_torques, validate_inertias, DynamicsError, FrictionParams, LinkInertia,
};
use crate::fcm::{fcm_step, FcmConfig, FcmError, FcmOutput, FcmState, IntentMode};
use crate::{JointVec, Real, JOINT_COUNT};

/// Default control rate (Hz).
pub const DEFAULT_CONTROL_RATE_HZ: f64 = 80.0;
/// Default per-joint torque limits (N·m), proximal to distal.
pub const DEFAULT_TORQUE_LIMITS: [f64; JOINT_COUNT] = [40.0, 40.0, 40.0, 40.0, 20.0, 20.0, 8.0, 8.0, 8.0];

/// Feedback composition selected for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Model feedforward plus raw movement-channel pass-through.
    Ff,
    /// Movement channels reshaped by the alignment gains.
    Bas,
    /// Raw movement pass-through plus coordination assistance.
    Fcm,
    /// Alignment reshaping plus coordination assistance.
    BasFcm,
}

impl ControlMode {
    /// Whether the movement channels are reshaped by alignment gains.
    pub fn aligns(self) -> bool {
        matches!(self, ControlMode::Bas | ControlMode::BasFcm)
    }

    /// Whether coordination assistance is active.
    pub fn coordinates(self) -> bool {
        matches!(self, ControlMode::Fcm | ControlMode::BasFcm)
    }

    /// Stable lowercase name (used in file output).
    pub fn label(self) -> &'static str {
        match self {
            ControlMode::Ff => "ff",
            ControlMode::Bas => "bas",
            ControlMode::Fcm => "fcm",
            ControlMode::BasFcm => "bas_fcm",
        }
    }
}

/// Full controller configuration.
#[derive(Clone, Debug)]
pub struct ControllerConfig<S: Real> {
    /// Control rate (Hz); ticks are `1/rate` apart.
    pub control_rate_hz: S,
    /// Cutoff of the wrench and rate-estimate low-pass filters (Hz).
    pub filter_cutoff_hz: S,
    /// Feedback composition.
    pub mode: ControlMode,
    /// Alignment gain schedule.
    pub bas: BasConfig<S>,
    /// Coordination gating and gain parameters.
    pub fcm: FcmConfig<S>,
    /// Controller-side link inertia model.
    pub links: [LinkInertia<S>; JOINT_COUNT],
    /// Controller-side joint friction model.
    pub friction: [FrictionParams<S>; JOINT_COUNT],
    /// Gravity vector (m/s²).
    pub gravity: Vector3<S>,
    /// Per-joint command clamp (N·m), symmetric about zero.
    pub torque_limits: [S; JOINT_COUNT],
}

impl<S: Real> ControllerConfig<S> {
    /// Configuration with default models and the given mode.
    pub fn with_mode(mode: ControlMode) -> Self {
        let mut limits = [S::zero(); JOINT_COUNT];
        for (out, v) in limits.iter_mut().zip(DEFAULT_TORQUE_LIMITS) {
            *out = S::scalar(v);
        }
        Self {
            control_rate_hz: S::scalar(DEFAULT_CONTROL_RATE_HZ),
            filter_cutoff_hz: S::scalar(crate::classify::DEFAULT_FILTER_CUTOFF_HZ),
            mode,
            bas: BasConfig::default(),
            fcm: FcmConfig::default(),
            links: crate::dynamics::default_link_inertias(),
            friction: [FrictionParams::default(); JOINT_COUNT],
            gravity: Vector3::new(
                S::scalar(crate::dynamics::DEFAULT_GRAVITY[0]),
                S::scalar(crate::dynamics::DEFAULT_GRAVITY[1]),
                S::scalar(crate::dynamics::DEFAULT_GRAVITY[2]),
            ),
            torque_limits: limits,
        }
    }

    /// Validates the configuration.
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.control_rate_hz > S::zero()) || !self.control_rate_hz.is_finite() {
            return Err(ControllerError::InvalidConfig { what: "control rate must be > 0" });
        }
        if !(self.filter_cutoff_hz > S::zero()) || !self.filter_cutoff_hz.is_finite() {
            return Err(ControllerError::InvalidConfig { what: "filter cutoff must be > 0" });
        }
        self.bas.validate()?;
        self.fcm.validate()?;
        validate_inertias(&self.links)?;
        for f in &self.friction {
            f.validate()?;
        }
        if self.gravity.iter().any(|v| !v.is_finite()) {
            return Err(ControllerError::InvalidConfig { what: "gravity must be finite" });
        }
        // +∞ is a valid "no limit" sentinel; NaN and non-positive values are not.
        if self.torque_limits.iter().any(|l| !(*l > S::zero())) {
            return Err(ControllerError::InvalidConfig { what: "torque limits must be > 0" });
        }
        Ok(())
    }
}

/// Errors raised while constructing or stepping the controller.
#[derive(Debug, Error)]
pub enum ControllerError {
    /// Configuration value out of range.
    #[error("invalid controller config: {what}")]
    InvalidConfig { what: &'static str },
    /// Non-finite measurement or state.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// Kinematics failure.
    #[error(transparent)]
    Chain(#[from] ChainError),
    /// Channel-split or filter failure.
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    /// Alignment failure.
    #[error(transparent)]
    Bas(#[from] BasError),
    /// Coordination failure.
    #[error(transparent)]
    Fcm(#[from] FcmError),
    /// Model feedforward failure.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Clamps a torque vector to symmetric per-joint limits, flagging the joints
/// that saturated. A limit of `+∞` passes its joint through untouched.
pub fn torque_limit<S: Real>(
    tau: &JointVec<S>,
    limits: &[S; JOINT_COUNT],
) -> (JointVec<S>, [bool; JOINT_COUNT]) {
    let mut out = *tau;
    let mut flags = [false; JOINT_COUNT];
    for i in 0..JOINT_COUNT {
        if out[i] > limits[i] {
            out[i] = limits[i];
            flags[i] = true;
        } else if out[i] < -limits[i] {
            out[i] = -limits[i];
            flags[i] = true;
        }
    }
    (out, flags)
}

/// Everything one control tick produces.
#[derive(Clone, Debug)]
pub struct ControlOutput<S: Real> {
    /// Joint torque command `τ_com + τ_int + τ_coord` (N·m), exact sum
    /// before the actuator clamp.
    pub tau_command: JointVec<S>,
    /// Actuator torque: the command clamped to the per-joint limits.
    pub tau_applied: JointVec<S>,
    /// Model feedforward term `τ_com`.
    pub tau_feedforward: JointVec<S>,
    /// Interaction feedback from the movement channels (aligned or raw).
    pub tau_interaction: JointVec<S>,
    /// Coordination assistance torques (zero unless the mode enables them).
    pub tau_coordination: JointVec<S>,
    /// Which joints hit the torque clamp this tick.
    pub saturated: [bool; JOINT_COUNT],
    /// Low-pass-filtered binding wrenches, cuff frames.
    pub filtered: [Wrench<S>; 3],
    /// Channel split of the filtered wrenches.
    pub components: [ComponentSet<S>; 3],
    /// Alignment gains per binding and channel pair (unity when not aligning).
    pub pair_gains: [[PairGains<S>; 2]; 3],
    /// Elbow-stage intent decision.
    pub intent_elbow: IntentMode,
    /// Wrist-stage intent decision.
    pub intent_wrist: IntentMode,
    /// Elbow coordination gain (1 when the stage is off).
    pub k_elbow: S,
    /// Wrist coordination gain (1 when the stage is off).
    pub k_wrist: S,
    /// Filtered joint-rate estimate used by the feedforward.
    pub qd_estimate: JointVec<S>,
    /// Filtered joint-acceleration estimate used by the feedforward.
    pub qdd_estimate: JointVec<S>,
}

/// Stateful controller; construct once per run and call [`Controller::step`]
/// every tick.
#[derive(Clone, Debug)]
pub struct Controller<S: Real> {
    config: ControllerConfig<S>,
    model: ChainModel<S>,
    dt: S,
    wrench_filters: [WrenchFilter<S>; 3],
    qd_filter: LowPass<S, JOINT_COUNT>,
    qdd_filter: LowPass<S, JOINT_COUNT>,
    fcm_state: FcmState,
    prev_q: Option<JointVec<S>>,
    prev_prev_q: Option<JointVec<S>>,
}

impl<S: Real> Controller<S> {
    /// Builds a controller for the given arm model.
    pub fn new(model: ChainModel<S>, config: ControllerConfig<S>) -> Result<Self, ControllerError> {
        config.validate()?;
        let dt = S::one() / config.control_rate_hz;
        let wf = WrenchFilter::new(config.filter_cutoff_hz, dt)?;
        let qd_filter = LowPass::new(config.filter_cutoff_hz, dt)?;
        let qdd_filter = LowPass::new(config.filter_cutoff_hz, dt)?;
        Ok(Self {
            config,
            model,
            dt,
            wrench_filters: [wf.clone(), wf.clone(), wf],
            qd_filter,
            qdd_filter,
            fcm_state: FcmState::default(),
            prev_q: None,
            prev_prev_q: None,
        })
    }

    /// The arm model the controller plans against.
    pub fn model(&self) -> &ChainModel<S> {
        &self.model
    }

    /// The active configuration.
    pub fn config(&self) -> &ControllerConfig<S> {
        &self.config
    }

    /// Tick period (s).
    pub fn dt(&self) -> S {
        self.dt
    }

    /// Resets filters, intent state, and difference history.
    pub fn reset(&mut self) {
        for f in &mut self.wrench_filters {
            f.reset();
        }
        self.qd_filter.reset();
        self.qdd_filter.reset();
        self.fcm_state = FcmState::default();
        self.prev_q = None;
        self.prev_prev_q = None;
    }

    /// Runs one control tick from measured joint angles and raw binding
    /// wrenches (cuff frames, ordered upper arm / forearm / hand).
    pub fn step(
        &mut self,
        q: &JointVec<S>,
        raw_wrenches: &[Wrench<S>; 3],
    ) -> Result<ControlOutput<S>, ControllerError> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(ControllerError::NonFinite { context: "step q" });
        }
        for w in raw_wrenches {
            if !w.is_finite() {
                return Err(ControllerError::NonFinite { context: "step wrench" });
            }
        }

        // Rate and acceleration estimates: backward differences, zero until
        // enough history exists, then low-pass filtered.
        let qd_raw = match &self.prev_q {
            Some(prev) => (q - prev) / self.dt,
            None => JointVec::zeros(),
        };
        let qdd_raw = match (&self.prev_q, &self.prev_prev_q) {
            (Some(prev), Some(prev2)) => (q - prev * S::scalar(2.0) + prev2) / (self.dt * self.dt),
            _ => JointVec::zeros(),
        };
        let qd_est = self.qd_filter.step(&qd_raw);
        let qdd_est = self.qdd_filter.step(&qdd_raw);
        self.prev_prev_q = self.prev_q.take();
        self.prev_q = Some(*q);

        // Filter and split the binding wrenches.
        let sites = [BindingSite::UpperArm, BindingSite::Forearm, BindingSite::Hand];
        let mut filtered = [Wrench::zero(); 3];
        for i in 0..3 {
            filtered[i] = filter_wrench(&mut self.wrench_filters[i], &raw_wrenches[i]);
        }
        let components: [ComponentSet<S>; 3] = [
            classify(sites[0], &filtered[0]),
            classify(sites[1], &filtered[1]),
            classify(sites[2], &filtered[2]),
        ];

        // Model feedforward.
        let tau_feedforward = feedforward_torques(
            &self.model,
            &self.config.links,
            &self.config.gravity,
            &self.config.friction,
            q,
            &qd_est,
            &qdd_est,
        )?;

        // Interaction feedback over the decoupled spans. With alignment the
        // movement forces and assistant torques carry scheduled gains; in the
        // coordination-only mode the movement channels pass through (clamped)
        // with assistant torques dropped; the baseline maps the raw movement
        // channels with no gains at all.
        let (tau_interaction, pair_gains) = match self.config.mode {
            ControlMode::Bas | ControlMode::BasFcm => {
                let aligned = [
                    apply_bas(&components[0], &self.config.bas)?,
                    apply_bas(&components[1], &self.config.bas)?,
                    apply_bas(&components[2], &self.config.bas)?,
                ];
                let tau = bas_torques(&self.model, q, &aligned)?;
                let gains = [aligned[0].gains, aligned[1].gains, aligned[2].gains];
                (tau, gains)
            }
            ControlMode::Fcm => {
                let aligned = [
                    apply_mc_passthrough(&components[0], &self.config.bas)?,
                    apply_mc_passthrough(&components[1], &self.config.bas)?,
                    apply_mc_passthrough(&components[2], &self.config.bas)?,
                ];
                let tau = bas_torques(&self.model, q, &aligned)?;
                let gains = [aligned[0].gains, aligned[1].gains, aligned[2].gains];
                (tau, gains)
            }
            ControlMode::Ff => {
                let tau = movement_torques(&self.model, q, &components)?;
                let flat: [PairGains<S>; 2] = [
                    PairGains {
                        force: self.config.bas.pairs[0].force,
                        torque: self.config.bas.pairs[0].torque,
                        k_f: S::one(),
                        k_t: S::zero(),
                    },
                    PairGains {
                        force: self.config.bas.pairs[1].force,
                        torque: self.config.bas.pairs[1].torque,
                        k_f: S::one(),
                        k_t: S::zero(),
                    },
                ];
                (tau, [flat, flat, flat])
            }
        };

        // Coordination assistance.
        let (tau_coordination, fcm_out) = if self.config.mode.coordinates() {
            let out: FcmOutput<S> = fcm_step(
                &self.model,
                q,
                &components,
                &self.config.fcm,
                &mut self.fcm_state,
            )?;
            (out.torques, Some(out))
        } else {
            (JointVec::zeros(), None)
        };

        // Exact command sum; the actuator clamp is applied last.
        let tau_command = tau_feedforward + tau_interaction + tau_coordination;
        let (tau_applied, saturated) = torque_limit(&tau_command, &self.config.torque_limits);

        let (intent_elbow, intent_wrist, k_elbow, k_wrist) = match &fcm_out {
            Some(out) => (out.elbow_mode, out.wrist_mode, out.k_elbow, out.k_wrist),
            None => (IntentMode::JointOriented, IntentMode::JointOriented, S::one(), S::one()),
        };

        Ok(ControlOutput {
            tau_command,
            tau_applied,
            tau_feedforward,
            tau_interaction,
            tau_coordination,
            saturated,
            filtered,
            components,
            pair_gains,
            intent_elbow,
            intent_wrist,
            k_elbow,
            k_wrist,
            qd_estimate: qd_est,
            qdd_estimate: qdd_est,
        })
    }
}
