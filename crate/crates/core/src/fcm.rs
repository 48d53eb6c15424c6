//! Full-arm coordination: movement-intent gating and whole-arm torque
//! distribution from the coupling forces measured at the cuffs.
//!
//! Distal forces recruit proximal joints through base-anchored Jacobian
//! spans so the whole arm follows a dragged hand or forearm. Each distal
//! stage (elbow, wrist) is gated by a movement-intent classifier with
//! hysteresis and scaled by a smooth coordination gain derived from the
//! balance between local and proximal movement-force magnitudes.

use thiserror::Error;

use crate::chain::{BindingSite, ChainError, ChainModel, JointId};
use crate::classify::{ComponentSet, Wrench};
use crate::{JointVec, Real};

/// Default movement-force threshold for intent gating (N).
pub const DEFAULT_FORCE_THRESHOLD: f64 = 3.0;
/// Default hysteresis band, as a fraction of the threshold.
pub const DEFAULT_HYSTERESIS_FRACTION: f64 = 0.10;
/// Default normalizing force for magnitude ratios (N).
pub const DEFAULT_NORMALIZER: f64 = 10.0;
/// Default coordination-gain slope.
pub const DEFAULT_LAMBDA: f64 = 2.0;

/// Movement intent for one coordination stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IntentMode {
    /// Only one arm part is active: coordinate nothing at this stage.
    JointOriented,
    /// Local and proximal parts are both active: coordinate the whole arm.
    TargetOriented,
}

/// Configuration for the coordination mechanism.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FcmConfig<S: Real> {
    /// Per-channel movement-force threshold for intent gating (N).
    pub threshold: S,
    /// Hysteresis band as a fraction of the threshold (switching out of the
    /// previous mode requires crossing the threshold by this margin).
    pub hysteresis_fraction: S,
    /// Normalizing force for the shoulder movement magnitude (N).
    pub shoulder_normalizer: S,
    /// Normalizing force for the elbow movement magnitude (N).
    pub elbow_normalizer: S,
    /// Normalizing force for the wrist movement magnitude (N).
    pub wrist_normalizer: S,
    /// Gain slope for the elbow stage.
    pub lambda_elbow: S,
    /// Gain slope for the wrist stage.
    pub lambda_wrist: S,
}

impl<S: Real> Default for FcmConfig<S> {
    fn default() -> Self {
        Self {
            threshold: S::scalar(DEFAULT_FORCE_THRESHOLD),
            hysteresis_fraction: S::scalar(DEFAULT_HYSTERESIS_FRACTION),
            shoulder_normalizer: S::scalar(DEFAULT_NORMALIZER),
            elbow_normalizer: S::scalar(DEFAULT_NORMALIZER),
            wrist_normalizer: S::scalar(DEFAULT_NORMALIZER),
            lambda_elbow: S::scalar(DEFAULT_LAMBDA),
            lambda_wrist: S::scalar(DEFAULT_LAMBDA),
        }
    }
}

/// Errors raised by coordination configuration or evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum FcmError {
    /// Config values out of range.
    #[error("invalid coordination config: {what}")]
    InvalidConfig { what: &'static str },
    /// Magnitude ratio with a zero denominator.
    #[error("degenerate magnitude ratio: local {a_local}, proximal {a_proximal}")]
    DegenerateRatio { a_local: f64, a_proximal: f64 },
    /// Non-finite input value.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    /// Underlying kinematics error.
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl<S: Real> FcmConfig<S> {
    /// Validates the configuration.
    pub fn validate(&self) -> Result<(), FcmError> {
        let pos = |v: S| v > S::zero() && v.is_finite();
        if !pos(self.threshold) {
            return Err(FcmError::InvalidConfig { what: "threshold must be positive" });
        }
        if !(self.hysteresis_fraction >= S::zero())
            || !(self.hysteresis_fraction < S::one())
            || !self.hysteresis_fraction.is_finite()
        {
            return Err(FcmError::InvalidConfig { what: "hysteresis fraction must be in [0, 1)" });
        }
        if !pos(self.shoulder_normalizer) || !pos(self.elbow_normalizer) || !pos(self.wrist_normalizer) {
            return Err(FcmError::InvalidConfig { what: "normalizers must be positive" });
        }
        if !pos(self.lambda_elbow) || !pos(self.lambda_wrist) {
            return Err(FcmError::InvalidConfig { what: "gain slopes must be positive" });
        }
        Ok(())
    }
}

/// Classifies movement intent for one stage from local and proximal
/// movement-force magnitudes.
///
/// Base rule (zero hysteresis): the stage is joint-oriented when *all*
/// local magnitudes are below the threshold **or** *all* proximal
/// magnitudes are below it; it is target-oriented exactly when some local
/// magnitude and some proximal magnitude both reach the threshold. With a
/// nonzero band, leaving `previous` requires crossing the threshold by the
/// band in the escape direction.
pub fn classify_intent<S: Real>(
    local: &[S],
    proximal: &[S],
    threshold: S,
    hysteresis_band: S,
    previous: IntentMode,
) -> IntentMode {
    let some_at_or_above = |vals: &[S], th: S| vals.iter().any(|v| v.abs() >= th);
    match previous {
        IntentMode::JointOriented => {
            let th = threshold + hysteresis_band;
            if some_at_or_above(local, th) && some_at_or_above(proximal, th) {
                IntentMode::TargetOriented
            } else {
                IntentMode::JointOriented
            }
        }
        IntentMode::TargetOriented => {
            let th = threshold - hysteresis_band;
            let all_below_local = !some_at_or_above(local, th);
            let all_below_proximal = !some_at_or_above(proximal, th);
            if all_below_local || all_below_proximal {
                IntentMode::JointOriented
            } else {
                IntentMode::TargetOriented
            }
        }
    }
}

/// Signed imbalance `p` between a local and a proximal normalized
/// magnitude: `a_local/a_proximal − 1` when the local side dominates,
/// `1 − a_proximal/a_local` otherwise (negative when proximal dominates).
pub fn magnitude_ratio<S: Real>(a_local: S, a_proximal: S) -> Result<S, FcmError> {
    if !a_local.is_finite() || !a_proximal.is_finite() {
        return Err(FcmError::NonFinite { context: "magnitude_ratio" });
    }
    if a_local <= S::zero() || a_proximal <= S::zero() {
        return Err(FcmError::DegenerateRatio {
            a_local: a_local.as_f64(),
            a_proximal: a_proximal.as_f64(),
        });
    }
    let ratio = a_local / a_proximal;
    Ok(if ratio < S::one() {
        S::one() - a_proximal / a_local
    } else {
        ratio - S::one()
    })
}

/// Smooth coordination gain `k = (2/π)·atan(λ·p) + 1`, strictly inside
/// `(0, 2)` and equal to 1 at balance.
pub fn coordination_gain<S: Real>(p: S, lambda: S) -> S {
    (S::scalar(2.0) / S::pi()) * (lambda * p).atan() + S::one()
}

/// Hysteresis memory for the two gated stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FcmState {
    /// Elbow-stage mode from the previous tick.
    pub elbow: IntentMode,
    /// Wrist-stage mode from the previous tick.
    pub wrist: IntentMode,
}

impl Default for FcmState {
    fn default() -> Self {
        Self {
            elbow: IntentMode::JointOriented,
            wrist: IntentMode::JointOriented,
        }
    }
}

/// Result of one coordination evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FcmOutput<S: Real> {
    /// Joint torques from all three stages.
    pub torques: JointVec<S>,
    /// Elbow-stage intent this tick.
    pub elbow_mode: IntentMode,
    /// Wrist-stage intent this tick.
    pub wrist_mode: IntentMode,
    /// Coordination gain applied to the elbow stage (1 when inactive).
    pub k_elbow: S,
    /// Coordination gain applied to the wrist stage (1 when inactive).
    pub k_wrist: S,
}

/// First joint of the base-anchored span for each stage's cuff.
///
/// Shoulder stage spans the four girdle/shoulder joints; the elbow stage
/// spans from the second scapular joint through the elbow pair; the wrist
/// stage spans from the second scapular joint through the wrist triple.
pub fn stage_span_start(site: BindingSite) -> JointId {
    match site {
        BindingSite::UpperArm => JointId::Sc1,
        BindingSite::Forearm => JointId::Sc2,
        BindingSite::Hand => JointId::Sc2,
    }
}

/// Evaluates the coordination mechanism for one tick.
///
/// `sets` are the classified cuff wrenches in site order (upper arm,
/// forearm, hand). `state` carries the hysteresis memory and is updated.
pub fn fcm_step<S: Real>(
    model: &ChainModel<S>,
    q: &JointVec<S>,
    sets: &[ComponentSet<S>; 3],
    cfg: &FcmConfig<S>,
    state: &mut FcmState,
) -> Result<FcmOutput<S>, FcmError> {
    cfg.validate()?;
    let frames = model.forward_kinematics(q)?;
    let band = cfg.threshold * cfg.hysteresis_fraction;

    let ua = &sets[BindingSite::UpperArm.index()];
    let fa = &sets[BindingSite::Forearm.index()];
    let ha = &sets[BindingSite::Hand.index()];

    let mag_ua = ua.movement_force_magnitudes();
    let mag_fa = fa.movement_force_magnitudes();
    let mag_ha = ha.movement_force_magnitudes();
    let mag_proximal_wrist: Vec<S> = mag_fa.iter().chain(&mag_ua).copied().collect();

    let a_s = ua.movement_force_norm() / cfg.shoulder_normalizer;
    let a_e = fa.movement_force_norm() / cfg.elbow_normalizer;
    let a_w = ha.movement_force_norm() / cfg.wrist_normalizer;

    let mut tau = JointVec::zeros();
    let mut scatter = |site: BindingSite, wrench: &Wrench<S>| -> Result<(), FcmError> {
        let first = stage_span_start(site);
        let jac = model.jacobian_from_frames(&frames, first, site)?;
        let rot = frames.binding(site).rotation;
        let w_base = Wrench::new(rot * wrench.force, rot * wrench.torque);
        let tau_span = jac.transpose() * w_base.as_vector();
        for (k, v) in tau_span.iter().enumerate() {
            tau[first.index() + k] += *v;
        }
        Ok(())
    };

    // Shoulder stage: ungated, unit gain.
    scatter(BindingSite::UpperArm, &ua.coordination_wrench())?;

    // Elbow stage.
    let elbow_mode = classify_intent(&mag_fa, &mag_ua, cfg.threshold, band, state.elbow);
    state.elbow = elbow_mode;
    let mut k_elbow = S::one();
    if elbow_mode == IntentMode::TargetOriented {
        match magnitude_ratio(a_e, a_s) {
            Ok(p) => {
                k_elbow = coordination_gain(p, cfg.lambda_elbow);
                let w = fa.coordination_wrench();
                let scaled = Wrench::new(w.force * k_elbow, w.torque * k_elbow);
                scatter(BindingSite::Forearm, &scaled)?;
            }
            Err(FcmError::DegenerateRatio { .. }) => {
                // Defensive: treat this tick as joint-oriented.
            }
            Err(e) => return Err(e),
        }
    }

    // Wrist stage: local wrist magnitude against the combined arm activity.
    let wrist_mode = classify_intent(&mag_ha, &mag_proximal_wrist, cfg.threshold, band, state.wrist);
    state.wrist = wrist_mode;
    let mut k_wrist = S::one();
    if wrist_mode == IntentMode::TargetOriented {
        match magnitude_ratio(a_w, a_e + a_s) {
            Ok(p) => {
                k_wrist = coordination_gain(p, cfg.lambda_wrist);
                let w = ha.coordination_wrench();
                let scaled = Wrench::new(w.force * k_wrist, w.torque * k_wrist);
                scatter(BindingSite::Hand, &scaled)?;
            }
            Err(FcmError::DegenerateRatio { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    Ok(FcmOutput {
        torques: tau,
        elbow_mode,
        wrist_mode,
        k_elbow,
        k_wrist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn sets_from(
        ua: Wrench<f64>,
        fa: Wrench<f64>,
        ha: Wrench<f64>,
    ) -> [ComponentSet<f64>; 3] {
        [
            classify(BindingSite::UpperArm, &ua),
            classify(BindingSite::Forearm, &fa),
            classify(BindingSite::Hand, &ha),
        ]
    }

    fn force(y: f64, z: f64) -> Wrench<f64> {
        Wrench::new(Vector3::new(0.0, y, z), Vector3::zeros())
    }

    #[test]
    fn intent_truth_table_without_hysteresis() {
        let th = 3.0;
        let lo = [1.0, 0.5];
        let hi = [4.0, 0.5];
        // All 8 combinations of (local above?, proximal above?, previous).
        for prev in [IntentMode::JointOriented, IntentMode::TargetOriented] {
            for (local, local_hot) in [(lo, false), (hi, true)] {
                for (proximal, proximal_hot) in [(lo, false), (hi, true)] {
                    let got = classify_intent(&local, &proximal, th, 0.0, prev);
                    let want = if local_hot && proximal_hot {
                        IntentMode::TargetOriented
                    } else {
                        IntentMode::JointOriented
                    };
                    assert_eq!(got, want, "local_hot={local_hot} proximal_hot={proximal_hot} prev={prev:?}");
                }
            }
        }
    }

    #[test]
    fn intent_uses_magnitudes() {
        let got = classify_intent(&[-4.0], &[-5.0], 3.0, 0.0, IntentMode::JointOriented);
        assert_eq!(got, IntentMode::TargetOriented);
    }

    #[test]
    fn hysteresis_blocks_chatter_inside_band() {
        let th = 3.0;
        let band = 0.3;
        // Oscillates across the bare threshold but stays inside the band.
        let mut mode = IntentMode::JointOriented;
        for v in [2.9, 3.1, 2.9, 3.2, 2.95] {
            mode = classify_intent(&[v], &[10.0], th, band, mode);
            assert_eq!(mode, IntentMode::JointOriented);
        }
        // A decisive push escapes.
        mode = classify_intent(&[3.5], &[10.0], th, band, mode);
        assert_eq!(mode, IntentMode::TargetOriented);
        // Now the same in-band oscillation cannot drop it back.
        for v in [3.1, 2.9, 3.1, 2.8] {
            mode = classify_intent(&[v], &[10.0], th, band, mode);
            assert_eq!(mode, IntentMode::TargetOriented);
        }
        mode = classify_intent(&[2.5], &[10.0], th, band, mode);
        assert_eq!(mode, IntentMode::JointOriented);
    }

    #[test]
    fn ratio_matches_frozen_examples() {
        assert_relative_eq!(magnitude_ratio(1.0, 2.0).unwrap(), -1.0, epsilon = 1e-12);
        assert_relative_eq!(magnitude_ratio(2.0, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(magnitude_ratio(1.5, 1.5).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ratio_rejects_degenerate_inputs() {
        assert!(matches!(
            magnitude_ratio(0.0, 1.0),
            Err(FcmError::DegenerateRatio { .. })
        ));
        assert!(matches!(
            magnitude_ratio(1.0, 0.0),
            Err(FcmError::DegenerateRatio { .. })
        ));
    }

    #[test]
    fn gain_matches_frozen_examples_and_bounds() {
        assert_relative_eq!(coordination_gain(0.0, 2.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(coordination_gain(1.0, 1.0), 1.5, epsilon = 1e-12);
        assert_relative_eq!(coordination_gain(1e9, 2.0), 2.0, epsilon = 1e-6);
        assert_relative_eq!(coordination_gain(-1e9, 2.0), 0.0, epsilon = 1e-6);
        // Strict bounds and odd symmetry about 1 on a dense grid.
        for i in -1000..=1000 {
            let p = i as f64 * 0.01;
            let k = coordination_gain(p, 2.0);
            assert!(k > 0.0 && k < 2.0);
            assert_relative_eq!(k + coordination_gain(-p, 2.0), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_is_monotone_in_p() {
        let mut prev = -1.0;
        for i in -500..=500 {
            let k = coordination_gain(i as f64 * 0.02, 2.0);
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn zero_wrenches_produce_zero_torques_and_joint_mode() {
        let model: ChainModel<f64> = ChainModel::default_arm();
        let q = JointVec::from_column_slice(&[0.1, 0.0, 0.4, 0.2, -0.3, 1.0, 0.1, 0.0, 0.2]);
        let sets = sets_from(Wrench::zero(), Wrench::zero(), Wrench::zero());
        let mut state = FcmState::default();
        let out = fcm_step(&model, &q, &sets, &FcmConfig::default(), &mut state).unwrap();
        assert_relative_eq!(out.torques.norm(), 0.0, epsilon = 1e-12);
        assert_eq!(out.elbow_mode, IntentMode::JointOriented);
        assert_eq!(out.wrist_mode, IntentMode::JointOriented);
        assert_eq!(out.k_elbow, 1.0);
        assert_eq!(out.k_wrist, 1.0);
    }

    #[test]
    fn joint_oriented_stage_contributes_nothing() {
        let model: ChainModel<f64> = ChainModel::default_arm();
        let q = JointVec::from_column_slice(&[0.0, 0.1, 0.5, 0.1, -0.2, 1.2, 0.0, 0.1, 0.0]);
        // Strong forearm force, quiet shoulder: elbow stage stays
        // joint-oriented, so only the shoulder stage (x force) contributes.
        let sets = sets_from(
            Wrench::new(Vector3::new(2.0, 0.5, 0.4), Vector3::zeros()),
            Wrench::new(Vector3::new(1.0, 8.0, 6.0), Vector3::zeros()),
            Wrench::zero(),
        );
        let mut state = FcmState::default();
        let out = fcm_step(&model, &q, &sets, &FcmConfig::default(), &mut state).unwrap();
        assert_eq!(out.elbow_mode, IntentMode::JointOriented);
        // Elbow-pair rows would be driven by a forearm stage; they must
        // carry only what the shoulder stage puts there — which is nothing,
        // since the shoulder span ends at the shoulder pair.
        assert_relative_eq!(out.torques[4], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.torques[5], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stage_locality_matches_spans() {
        let model: ChainModel<f64> = ChainModel::default_arm();
        let q = JointVec::from_column_slice(&[0.2, -0.1, 0.6, 0.3, -0.4, 1.1, 0.2, -0.1, 0.3]);
        // All stages active.
        let sets = sets_from(force(5.0, 4.0), force(6.0, 3.0), force(5.0, 5.0));
        let mut state = FcmState::default();
        let out = fcm_step(&model, &q, &sets, &FcmConfig::default(), &mut state).unwrap();
        assert_eq!(out.elbow_mode, IntentMode::TargetOriented);
        assert_eq!(out.wrist_mode, IntentMode::TargetOriented);
        // Nothing anywhere outside the union of spans: all joints are inside
        // the wrist span except joint 0, which only the shoulder stage touches.
        // Distal rows (wrist triple) must be exactly the wrist stage's rows.
        assert!(out.torques.iter().skip(1).any(|t| t.abs() > 0.0));
    }

    #[test]
    fn torques_match_dense_selection_matrix_oracle() {
        // Independent oracle: dense block selection matrices applied to the
        // stage torque vectors computed from full base Jacobians.
        let model: ChainModel<f64> = ChainModel::default_arm();
        let q = JointVec::from_column_slice(&[0.15, -0.2, 0.7, 0.25, -0.35, 1.05, 0.2, -0.15, 0.25]);
        let ua = Wrench::new(Vector3::new(2.0, 4.0, 3.5), Vector3::new(0.3, 0.1, -0.2));
        let fa = Wrench::new(Vector3::new(-1.0, 5.0, 4.0), Vector3::new(0.2, -0.3, 0.4));
        let ha = Wrench::new(Vector3::new(1.5, 4.5, 3.6), Vector3::new(0.6, 0.2, -0.1));
        let sets = sets_from(ua, fa, ha);
        let mut state = FcmState::default();
        let cfg = FcmConfig::default();
        let out = fcm_step(&model, &q, &sets, &cfg, &mut state).unwrap();
        assert_eq!(out.elbow_mode, IntentMode::TargetOriented);
        assert_eq!(out.wrist_mode, IntentMode::TargetOriented);

        // Oracle: recompute stage torques densely.
        let frames = model.forward_kinematics(&q).unwrap();
        let mut expected = [0.0f64; 9];
        let stage = |site: BindingSite, w: &Wrench<f64>, scale: f64, expected: &mut [f64; 9]| {
            let first = stage_span_start(site).index();
            let parent = model.binding(site).parent.index();
            let full = model.jacobian(&q, JointId::Sc1, site).unwrap();
            let rot = frames.binding(site).rotation;
            let f = rot * (w.force * scale);
            let t = rot * (w.torque * scale);
            let wv = [f.x, f.y, f.z, t.x, t.y, t.z];
            // Dense selection: identity rows over the span, zero elsewhere.
            let mut tau_span = vec![0.0; parent - first + 1];
            for (k, item) in tau_span.iter_mut().enumerate() {
                let col = first + k;
                let mut sum = 0.0;
                for row in 0..6 {
                    sum += full[(row, col)] * wv[row];
                }
                *item = sum;
            }
            let mut sel = vec![vec![0.0; tau_span.len()]; 9];
            for (k, row) in sel.iter_mut().enumerate().skip(first).take(tau_span.len()) {
                row[k - first] = 1.0;
            }
            for (r, row) in sel.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    expected[r] += s * tau_span[c];
                }
            }
        };

        let shoulder_w = sets[0].coordination_wrench();
        let elbow_w = sets[1].coordination_wrench();
        let wrist_w = sets[2].coordination_wrench();
        stage(BindingSite::UpperArm, &shoulder_w, 1.0, &mut expected);
        stage(BindingSite::Forearm, &elbow_w, out.k_elbow, &mut expected);
        stage(BindingSite::Hand, &wrist_w, out.k_wrist, &mut expected);

        for i in 0..9 {
            assert_relative_eq!(out.torques[i], expected[i], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn shoulder_stage_is_linear_in_axial_force() {
        let model: ChainModel<f64> = ChainModel::default_arm();
        let q = JointVec::from_column_slice(&[0.1, -0.1, 0.5, 0.2, -0.3, 1.0, 0.1, -0.1, 0.2]);
        let mk = |fx: f64| {
            sets_from(
                Wrench::new(Vector3::new(fx, 1.0, 1.0), Vector3::zeros()),
                Wrench::zero(),
                Wrench::zero(),
            )
        };
        let mut s1 = FcmState::default();
        let mut s2 = FcmState::default();
        let t1 = fcm_step(&model, &q, &mk(2.0), &FcmConfig::default(), &mut s1).unwrap();
        let t2 = fcm_step(&model, &q, &mk(4.0), &FcmConfig::default(), &mut s2).unwrap();
        for i in 0..9 {
            assert_relative_eq!(t2.torques[i], 2.0 * t1.torques[i], epsilon = 1e-12);
        }
        // Spans: the shoulder stage only reaches the first four joints.
        for i in 4..9 {
            assert_eq!(t1.torques[i], 0.0);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = FcmConfig::<f64>::default();
        cfg.threshold = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FcmConfig::<f64>::default();
        cfg.hysteresis_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FcmConfig::<f64>::default();
        cfg.wrist_normalizer = -1.0;
        assert!(cfg.validate().is_err());
    }
}
