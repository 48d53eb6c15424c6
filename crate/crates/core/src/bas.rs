//! Binding alignment: gain-scheduled reshaping of each cuff wrench and the
//! decoupled mapping of the reshaped wrench into joint torques.
//!
//! Movement forces and assistant torques compete for authority at each cuff.
//! A sine-form gain on the movement force and a cosine-form gain on the
//! paired assistant torque hand authority to whichever is informative: near
//! zero force the assistant torque gets full weight (realignment), near the
//! force cap the movement force dominates (transparency).

use thiserror::Error;

use crate::chain::{BindingSite, ChainError, ChainModel, FrameSet, JointId};
use crate::classify::{Channel, ComponentSet, Wrench};
use crate::{JointVec, Real};

/// Default movement-force normalization bound (N).
pub const DEFAULT_F_MAX: f64 = 30.0;

/// A movement-force channel paired with the assistant-torque channel whose
/// gain it schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GainPair {
    /// Movement force channel.
    pub force: Channel,
    /// Assistant torque channel scheduled by that force.
    pub torque: Channel,
}

/// Configuration for the alignment stage.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BasConfig<S: Real> {
    /// Force magnitude at which the movement gain wraps (N). Forces are
    /// clamped to `±f_max` before gains are evaluated.
    pub f_max: S,
    /// The two force/torque pairings. Default: `(Fy, Tz)` and `(Fz, Ty)`.
    pub pairs: [GainPair; 2],
}

impl<S: Real> Default for BasConfig<S> {
    fn default() -> Self {
        Self {
            f_max: S::scalar(DEFAULT_F_MAX),
            pairs: [
                GainPair { force: Channel::Fy, torque: Channel::Tz },
                GainPair { force: Channel::Fz, torque: Channel::Ty },
            ],
        }
    }
}

/// Errors raised by alignment configuration or evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum BasError {
    /// `f_max` must be positive and finite.
    #[error("f_max must be positive and finite, got {f_max}")]
    InvalidFMax { f_max: f64 },
    /// Pairings must cover the transverse forces and assistant torques
    /// exactly once each.
    #[error("gain pairs must map {{Fy, Fz}} onto {{Ty, Tz}} one-to-one")]
    InvalidPairs,
    /// Non-finite input value.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// Underlying kinematics error.
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl<S: Real> BasConfig<S> {
    /// Validates the configuration.
    pub fn validate(&self) -> Result<(), BasError> {
        if !(self.f_max > S::zero()) || !self.f_max.is_finite() {
            return Err(BasError::InvalidFMax { f_max: self.f_max.as_f64() });
        }
        let forces = [self.pairs[0].force, self.pairs[1].force];
        let torques = [self.pairs[0].torque, self.pairs[1].torque];
        let forces_ok = forces.contains(&Channel::Fy)
            && forces.contains(&Channel::Fz)
            && forces[0] != forces[1];
        let torques_ok = torques.contains(&Channel::Ty)
            && torques.contains(&Channel::Tz)
            && torques[0] != torques[1];
        if !forces_ok || !torques_ok {
            return Err(BasError::InvalidPairs);
        }
        Ok(())
    }
}

/// Movement/assistant gain pair for a (clamped) movement force `f`.
///
/// `k_f = (sin|π·f/f_max| + 1)/2` rises from 1/2 at zero force to 1 at
/// `f_max/2`; `k_t = (cos|π·f/f_max| + 1)/2` falls from 1 at zero force to 0
/// at `f_max`. `f` is clamped to `±f_max` first.
pub fn gain_pair<S: Real>(f: S, f_max: S) -> Result<(S, S), BasError> {
    if !(f_max > S::zero()) || !f_max.is_finite() {
        return Err(BasError::InvalidFMax { f_max: f_max.as_f64() });
    }
    if !f.is_finite() {
        return Err(BasError::NonFinite { context: "gain_pair force" });
    }
    let f = f.clamp(-f_max, f_max);
    let arg = (S::pi() * f / f_max).abs();
    let half = S::scalar(0.5);
    Ok(((arg.sin() + S::one()) * half, (arg.cos() + S::one()) * half))
}

/// Per-pair gain evaluation recorded for tracing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGains<S: Real> {
    /// Movement force channel the gains were scheduled from.
    pub force: Channel,
    /// Assistant torque channel scaled by `k_t`.
    pub torque: Channel,
    /// Movement gain applied to the clamped force.
    pub k_f: S,
    /// Assistant gain applied to the torque.
    pub k_t: S,
}

/// A cuff wrench after alignment reshaping.
///
/// By construction the x force is zero at every site, the upper-arm and
/// forearm x torques are zero, and the hand grip torque passes through with
/// unit gain.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedWrench<S: Real> {
    /// Which cuff this wrench acts at.
    pub site: BindingSite,
    /// The reshaped wrench in the cuff frame.
    pub wrench: Wrench<S>,
    /// Gains used for each force/torque pairing (for tracing).
    pub gains: [PairGains<S>; 2],
}

/// Reshapes one classified cuff wrench with the scheduled gains.
pub fn apply_bas<S: Real>(
    set: &ComponentSet<S>,
    cfg: &BasConfig<S>,
) -> Result<AlignedWrench<S>, BasError> {
    cfg.validate()?;
    let mut w = Wrench::zero();
    let mut gains = [PairGains {
        force: Channel::Fy,
        torque: Channel::Tz,
        k_f: S::zero(),
        k_t: S::zero(),
    }; 2];
    for (slot, pair) in cfg.pairs.iter().enumerate() {
        let f_raw = set
            .movement_value(pair.force)
            .ok_or(BasError::InvalidPairs)?;
        if !f_raw.is_finite() {
            return Err(BasError::NonFinite { context: "apply_bas movement force" });
        }
        let f = f_raw.clamp(-cfg.f_max, cfg.f_max);
        let (k_f, k_t) = gain_pair(f, cfg.f_max)?;
        w.set_channel(pair.force, k_f * f);
        let t_raw = set.assistant_value(pair.torque).ok_or(BasError::InvalidPairs)?;
        if !t_raw.is_finite() {
            return Err(BasError::NonFinite { context: "apply_bas assistant torque" });
        }
        w.set_channel(pair.torque, k_t * t_raw);
        gains[slot] = PairGains { force: pair.force, torque: pair.torque, k_f, k_t };
    }
    // The hand grip torque is a movement channel with no assistant partner:
    // it passes through unscaled.
    if set.site == BindingSite::Hand {
        if let Some(tx) = set.movement_value(Channel::Tx) {
            w.set_channel(Channel::Tx, tx);
        }
    }
    Ok(AlignedWrench { site: set.site, wrench: w, gains })
}

/// Reshapes one classified cuff wrench with the movement gains pinned to 1
/// and the assistant gains pinned to 0.
///
/// Used when coordination runs without alignment: movement forces pass
/// through (still clamped to `±f_max`), assistant torques are dropped, and
/// the hand grip torque passes through as in [`apply_bas`].
pub fn apply_mc_passthrough<S: Real>(
    set: &ComponentSet<S>,
    cfg: &BasConfig<S>,
) -> Result<AlignedWrench<S>, BasError> {
    cfg.validate()?;
    let mut w = Wrench::zero();
    let mut gains = [PairGains {
        force: Channel::Fy,
        torque: Channel::Tz,
        k_f: S::one(),
        k_t: S::zero(),
    }; 2];
    for (slot, pair) in cfg.pairs.iter().enumerate() {
        let f_raw = set.movement_value(pair.force).ok_or(BasError::InvalidPairs)?;
        if !f_raw.is_finite() {
            return Err(BasError::NonFinite { context: "apply_mc_passthrough movement force" });
        }
        w.set_channel(pair.force, f_raw.clamp(-cfg.f_max, cfg.f_max));
        gains[slot] = PairGains {
            force: pair.force,
            torque: pair.torque,
            k_f: S::one(),
            k_t: S::zero(),
        };
    }
    if set.site == BindingSite::Hand {
        if let Some(tx) = set.movement_value(Channel::Tx) {
            w.set_channel(Channel::Tx, tx);
        }
    }
    Ok(AlignedWrench { site: set.site, wrench: w, gains })
}

/// First joint of the decoupled span serving each cuff.
///
/// Upper arm: scapular 2 through shoulder; forearm: the two elbow-part
/// joints; hand: the three wrist joints.
pub fn span_start(site: BindingSite) -> JointId {
    match site {
        BindingSite::UpperArm => JointId::Sc2,
        BindingSite::Forearm => JointId::El1,
        BindingSite::Hand => JointId::Wr1,
    }
}

/// Maps one cuff wrench (given in the cuff frame) through the transpose of
/// the span Jacobian into the full joint-torque vector.
fn scatter_span_torques<S: Real>(
    model: &ChainModel<S>,
    frames: &FrameSet<S>,
    site: BindingSite,
    wrench: &Wrench<S>,
    tau: &mut JointVec<S>,
) -> Result<(), ChainError> {
    let first = span_start(site);
    let jac = model.jacobian_from_frames(frames, first, site)?;
    // The wrench lives in the cuff frame; the Jacobian is base-frame.
    let rot = frames.binding(site).rotation;
    let w_base = Wrench::new(rot * wrench.force, rot * wrench.torque);
    let tau_span = jac.transpose() * w_base.as_vector();
    for (k, v) in tau_span.iter().enumerate() {
        tau[first.index() + k] += *v;
    }
    Ok(())
}

/// Joint torques from the three aligned cuff wrenches over the decoupled
/// spans. The first scapular joint is never driven by this mapping.
pub fn bas_torques<S: Real>(
    model: &ChainModel<S>,
    q: &JointVec<S>,
    aligned: &[AlignedWrench<S>; 3],
) -> Result<JointVec<S>, BasError> {
    let frames = model.forward_kinematics(q)?;
    let mut tau = JointVec::zeros();
    for a in aligned {
        scatter_span_torques(model, &frames, a.site, &a.wrench, &mut tau)?;
    }
    Ok(tau)
}

/// Baseline decoupled feedback: maps each cuff's *raw movement* wrench
/// (no gains, no assistant channels, no coupling) over the same spans.
pub fn movement_torques<S: Real>(
    model: &ChainModel<S>,
    q: &JointVec<S>,
    sets: &[ComponentSet<S>; 3],
) -> Result<JointVec<S>, BasError> {
    let frames = model.forward_kinematics(q)?;
    let mut tau = JointVec::zeros();
    for set in sets {
        let w = set.movement_wrench();
        scatter_span_torques(model, &frames, set.site, &w, &mut tau)?;
    }
    Ok(tau)
}
