//! Wrench channel classification and sensor filtering.
//!
//! Each cuff's six measured channels are split by role: movement channels
//! (the wearer's motion intent for that arm part), assistant channels
//! (misalignment torques used for realignment), coupling channels (forces
//! recruited for whole-arm coordination; some alias movement channels),
//! and redundant channels (recorded but attenuated).
//!
//! A first-order low-pass filter conditions the raw sensor stream before
//! classification.

use nalgebra::{SVector, Vector3, Vector6};
use thiserror::Error;

use crate::chain::BindingSite;
use crate::Real;

/// Default sensor low-pass cutoff (Hz).
pub const DEFAULT_FILTER_CUTOFF_HZ: f64 = 10.0;
/// Default attenuation factor applied to redundant channels downstream.
pub const DEFAULT_RC_ATTENUATION: f64 = 0.0;

/// One of the six wrench channels of a cuff sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Channel {
    /// Force along the cuff x axis (along the limb segment).
    Fx,
    /// Force along the cuff y axis.
    Fy,
    /// Force along the cuff z axis.
    Fz,
    /// Torque about the cuff x axis.
    Tx,
    /// Torque about the cuff y axis.
    Ty,
    /// Torque about the cuff z axis.
    Tz,
}

impl Channel {
    /// All channels in wrench-vector order (forces then torques).
    pub const ALL: [Channel; 6] = [
        Channel::Fx,
        Channel::Fy,
        Channel::Fz,
        Channel::Tx,
        Channel::Ty,
        Channel::Tz,
    ];

    /// Position in the 6-vector layout (forces 0..3, torques 3..6).
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// True for force channels, false for torque channels.
    #[inline]
    pub fn is_force(self) -> bool {
        matches!(self, Channel::Fx | Channel::Fy | Channel::Fz)
    }

    /// Lower-case label ("fx" … "tz").
    pub fn label(self) -> &'static str {
        match self {
            Channel::Fx => "fx",
            Channel::Fy => "fy",
            Channel::Fz => "fz",
            Channel::Tx => "tx",
            Channel::Ty => "ty",
            Channel::Tz => "tz",
        }
    }
}

/// A force/torque pair measured or applied at a cuff frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench<S: Real> {
    /// Force (N).
    pub force: Vector3<S>,
    /// Torque (N·m).
    pub torque: Vector3<S>,
}

impl<S: Real> Wrench<S> {
    /// Zero wrench.
    #[inline]
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }

    /// Builds a wrench from force and torque vectors.
    #[inline]
    pub fn new(force: Vector3<S>, torque: Vector3<S>) -> Self {
        Self { force, torque }
    }

    /// Reads one channel.
    #[inline]
    pub fn channel(&self, ch: Channel) -> S {
        match ch {
            Channel::Fx => self.force.x,
            Channel::Fy => self.force.y,
            Channel::Fz => self.force.z,
            Channel::Tx => self.torque.x,
            Channel::Ty => self.torque.y,
            Channel::Tz => self.torque.z,
        }
    }

    /// Writes one channel.
    #[inline]
    pub fn set_channel(&mut self, ch: Channel, value: S) {
        match ch {
            Channel::Fx => self.force.x = value,
            Channel::Fy => self.force.y = value,
            Channel::Fz => self.force.z = value,
            Channel::Tx => self.torque.x = value,
            Channel::Ty => self.torque.y = value,
            Channel::Tz => self.torque.z = value,
        }
    }

    /// Stacked 6-vector, forces first.
    #[inline]
    pub fn as_vector(&self) -> Vector6<S> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    /// Wrench from a stacked 6-vector (forces first).
    #[inline]
    pub fn from_vector(v: &Vector6<S>) -> Self {
        Self {
            force: Vector3::new(v[0], v[1], v[2]),
            torque: Vector3::new(v[3], v[4], v[5]),
        }
    }

    /// True when all components are finite.
    #[inline]
    pub fn is_finite(&self) -> bool {
        self.as_vector().iter().all(|v| v.is_finite())
    }
}

/// Fixed channel routing for one binding site.
#[derive(Clone, Copy, Debug)]
pub struct Routing {
    /// Movement channels (motion intent for this arm part).
    pub movement: &'static [Channel],
    /// Assistant channels (realignment torques).
    pub assistant: &'static [Channel],
    /// Coupling channels with their own independent value.
    pub coupling_uncoupled: &'static [Channel],
    /// Coupling channels that alias movement-channel values.
    pub coupling_coupled: &'static [Channel],
    /// Redundant channels (recorded, attenuated downstream).
    pub redundant: &'static [Channel],
}

const UA_ROUTING: Routing = Routing {
    movement: &[Channel::Fy, Channel::Fz],
    assistant: &[Channel::Ty, Channel::Tz],
    coupling_uncoupled: &[Channel::Fx],
    coupling_coupled: &[],
    redundant: &[Channel::Tx],
};

const FA_ROUTING: Routing = Routing {
    movement: &[Channel::Fy, Channel::Fz],
    assistant: &[Channel::Ty, Channel::Tz],
    coupling_uncoupled: &[Channel::Fx],
    coupling_coupled: &[Channel::Fy, Channel::Fz],
    redundant: &[Channel::Tx],
};

const HA_ROUTING: Routing = Routing {
    movement: &[Channel::Tx, Channel::Fy, Channel::Fz],
    assistant: &[Channel::Ty, Channel::Tz],
    coupling_uncoupled: &[Channel::Fx],
    coupling_coupled: &[Channel::Fy, Channel::Fz],
    redundant: &[],
};

/// The routing table for one binding site.
pub fn routing(site: BindingSite) -> &'static Routing {
    match site {
        BindingSite::UpperArm => &UA_ROUTING,
        BindingSite::Forearm => &FA_ROUTING,
        BindingSite::Hand => &HA_ROUTING,
    }
}

/// A classified cuff wrench: each category lists `(channel, value)` pairs.
///
/// Classification is value-preserving: every routed value equals the input
/// channel exactly. Coupled coupling entries are aliases of movement
/// channels (same channel, same value) and are flagged by living in
/// `coupling_coupled`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet<S: Real> {
    /// Which cuff this classification belongs to.
    pub site: BindingSite,
    /// Movement channels.
    pub movement: Vec<(Channel, S)>,
    /// Assistant channels.
    pub assistant: Vec<(Channel, S)>,
    /// Coupling channels with independent values.
    pub coupling_uncoupled: Vec<(Channel, S)>,
    /// Coupling channels aliasing movement values.
    pub coupling_coupled: Vec<(Channel, S)>,
    /// Redundant channels (raw values; apply [`ComponentSet::attenuated_redundant`]).
    pub redundant: Vec<(Channel, S)>,
}

impl<S: Real> ComponentSet<S> {
    /// Value of one movement channel, if routed.
    pub fn movement_value(&self, ch: Channel) -> Option<S> {
        self.movement.iter().find(|(c, _)| *c == ch).map(|(_, v)| *v)
    }

    /// Value of one assistant channel, if routed.
    pub fn assistant_value(&self, ch: Channel) -> Option<S> {
        self.assistant.iter().find(|(c, _)| *c == ch).map(|(_, v)| *v)
    }

    /// Redundant channels scaled by the attenuation factor.
    pub fn attenuated_redundant(&self, factor: S) -> Vec<(Channel, S)> {
        self.redundant.iter().map(|(c, v)| (*c, *v * factor)).collect()
    }

    /// Magnitudes of the force-type movement channels (used for intent
    /// gating and coordination ratios).
    pub fn movement_force_magnitudes(&self) -> Vec<S> {
        self.movement
            .iter()
            .filter(|(c, _)| c.is_force())
            .map(|(_, v)| v.abs())
            .collect()
    }

    /// Euclidean norm of the force-type movement channels.
    pub fn movement_force_norm(&self) -> S {
        self.movement
            .iter()
            .filter(|(c, _)| c.is_force())
            .map(|(_, v)| *v * *v)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }

    /// The wrench containing only movement channels (others zero).
    pub fn movement_wrench(&self) -> Wrench<S> {
        let mut w = Wrench::zero();
        for (c, v) in &self.movement {
            w.set_channel(*c, *v);
        }
        w
    }

    /// The coordination wrench: uncoupled coupling channels plus the
    /// movement-aliased coupling channels (torque rows stay zero).
    pub fn coordination_wrench(&self) -> Wrench<S> {
        let mut w = Wrench::zero();
        for (c, v) in self.coupling_uncoupled.iter().chain(&self.coupling_coupled) {
            w.set_channel(*c, *v);
        }
        w
    }
}

/// Splits a cuff wrench into its per-role channel lists.
pub fn classify<S: Real>(site: BindingSite, wrench: &Wrench<S>) -> ComponentSet<S> {
    let r = routing(site);
    let pick = |chs: &'static [Channel]| -> Vec<(Channel, S)> {
        chs.iter().map(|c| (*c, wrench.channel(*c))).collect()
    };
    ComponentSet {
        site,
        movement: pick(r.movement),
        assistant: pick(r.assistant),
        coupling_uncoupled: pick(r.coupling_uncoupled),
        coupling_coupled: pick(r.coupling_coupled),
        redundant: pick(r.redundant),
    }
}

/// Errors raised by filter construction.
#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    /// Cutoff or sample time not positive and finite.
    #[error("invalid filter parameters: cutoff {cutoff_hz} Hz, dt {dt} s")]
    InvalidFilter { cutoff_hz: f64, dt: f64 },
}

/// First-order low-pass filter over an N-vector signal.
///
/// Discretized as `y += α (x − y)` with `α = dt / (dt + 1/(2π·cutoff))`,
/// which has exactly unit DC gain. State starts at zero.
#[derive(Clone, Debug)]
pub struct LowPass<S: Real, const N: usize> {
    alpha: S,
    state: SVector<S, N>,
}

impl<S: Real, const N: usize> LowPass<S, N> {
    /// Builds a filter for the given cutoff (Hz) and sample time (s).
    pub fn new(cutoff_hz: S, dt: S) -> Result<Self, ClassifyError> {
        if !(cutoff_hz > S::zero()) || !(dt > S::zero()) || !cutoff_hz.is_finite() || !dt.is_finite() {
            return Err(ClassifyError::InvalidFilter {
                cutoff_hz: cutoff_hz.as_f64(),
                dt: dt.as_f64(),
            });
        }
        let rc = S::one() / (S::two_pi() * cutoff_hz);
        Ok(Self {
            alpha: dt / (dt + rc),
            state: SVector::zeros(),
        })
    }

    /// The discrete blend factor α.
    #[inline]
    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// Current filter output.
    #[inline]
    pub fn state(&self) -> &SVector<S, N> {
        &self.state
    }

    /// Advances the filter one sample and returns the new output.
    pub fn step(&mut self, input: &SVector<S, N>) -> SVector<S, N> {
        self.state += (input - self.state) * self.alpha;
        self.state
    }

    /// Resets the state to zero.
    pub fn reset(&mut self) {
        self.state = SVector::zeros();
    }
}

/// Six-channel wrench filter.
pub type WrenchFilter<S> = LowPass<S, 6>;

/// Filters a wrench one step.
pub fn filter_wrench<S: Real>(filter: &mut WrenchFilter<S>, raw: &Wrench<S>) -> Wrench<S> {
    Wrench::from_vector(&filter.step(&raw.as_vector()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_wrench() -> Wrench<f64> {
        Wrench::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.1, 0.2, 0.3))
    }

    #[test]
    fn upper_arm_routing_matches_table() {
        let set = classify(BindingSite::UpperArm, &sample_wrench());
        assert_eq!(set.movement, vec![(Channel::Fy, 2.0), (Channel::Fz, 3.0)]);
        assert_eq!(set.assistant, vec![(Channel::Ty, 0.2), (Channel::Tz, 0.3)]);
        assert_eq!(set.coupling_uncoupled, vec![(Channel::Fx, 1.0)]);
        assert!(set.coupling_coupled.is_empty());
        assert_eq!(set.redundant, vec![(Channel::Tx, 0.1)]);
    }

    #[test]
    fn forearm_routing_aliases_movement_forces() {
        let set = classify(BindingSite::Forearm, &sample_wrench());
        assert_eq!(set.movement, vec![(Channel::Fy, 2.0), (Channel::Fz, 3.0)]);
        assert_eq!(set.coupling_coupled, vec![(Channel::Fy, 2.0), (Channel::Fz, 3.0)]);
        assert_eq!(set.coupling_uncoupled, vec![(Channel::Fx, 1.0)]);
        assert_eq!(set.redundant, vec![(Channel::Tx, 0.1)]);
    }

    #[test]
    fn hand_routing_includes_grip_torque_as_movement() {
        let set = classify(BindingSite::Hand, &sample_wrench());
        assert_eq!(
            set.movement,
            vec![(Channel::Tx, 0.1), (Channel::Fy, 2.0), (Channel::Fz, 3.0)]
        );
        assert_eq!(set.assistant, vec![(Channel::Ty, 0.2), (Channel::Tz, 0.3)]);
        assert!(set.redundant.is_empty());
    }

    #[test]
    fn every_channel_routed_exactly_once_outside_aliases() {
        for site in BindingSite::ALL {
            let r = routing(site);
            let mut seen = [0usize; 6];
            for ch in r
                .movement
                .iter()
                .chain(r.assistant)
                .chain(r.coupling_uncoupled)
                .chain(r.redundant)
            {
                seen[ch.index()] += 1;
            }
            assert_eq!(seen, [1; 6], "site {site:?}");
            // Aliased coupling channels must point at movement channels.
            for ch in r.coupling_coupled {
                assert!(r.movement.contains(ch), "site {site:?} channel {ch:?}");
            }
        }
    }

    #[test]
    fn classification_preserves_values_and_scales_linearly() {
        let w = sample_wrench();
        for site in BindingSite::ALL {
            let set = classify(site, &w);
            for (c, v) in set
                .movement
                .iter()
                .chain(&set.assistant)
                .chain(&set.coupling_uncoupled)
                .chain(&set.coupling_coupled)
                .chain(&set.redundant)
            {
                assert_eq!(*v, w.channel(*c), "site {site:?} channel {c:?}");
            }
            // Linearity under input scaling, exact for the routing map.
            let w2 = Wrench::new(w.force * 2.0, w.torque * 2.0);
            let set2 = classify(site, &w2);
            for ((_, a), (_, b)) in set.movement.iter().zip(&set2.movement) {
                assert_eq!(*b, *a * 2.0);
            }
        }
    }

    #[test]
    fn redundant_attenuation_defaults_to_zero() {
        let set = classify(BindingSite::UpperArm, &sample_wrench());
        let att = set.attenuated_redundant(DEFAULT_RC_ATTENUATION);
        assert_eq!(att, vec![(Channel::Tx, 0.0)]);
    }

    #[test]
    fn coordination_wrench_forms() {
        let w = sample_wrench();
        let ua = classify(BindingSite::UpperArm, &w).coordination_wrench();
        assert_eq!(ua.force, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(ua.torque, Vector3::zeros());
        let fa = classify(BindingSite::Forearm, &w).coordination_wrench();
        assert_eq!(fa.force, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(fa.torque, Vector3::zeros());
        let ha = classify(BindingSite::Hand, &w).coordination_wrench();
        assert_eq!(ha.force, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(ha.torque, Vector3::zeros());
    }

    #[test]
    fn lowpass_alpha_matches_frozen_value() {
        // dt = 1/80 s, cutoff = 10 Hz.
        let f = WrenchFilter::<f64>::new(10.0, 1.0 / 80.0).unwrap();
        assert_relative_eq!(f.alpha(), 0.439900846488443, epsilon = 1e-12);
    }

    #[test]
    fn lowpass_unit_step_first_sample_equals_alpha() {
        let mut f = WrenchFilter::<f64>::new(10.0, 1.0 / 80.0).unwrap();
        let step = Wrench::new(Vector3::new(1.0, 1.0, 1.0), Vector3::new(1.0, 1.0, 1.0));
        let out = filter_wrench(&mut f, &step);
        for ch in Channel::ALL {
            assert_relative_eq!(out.channel(ch), f.alpha(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lowpass_dc_gain_is_one() {
        let mut f = WrenchFilter::<f64>::new(10.0, 1.0 / 80.0).unwrap();
        let step = Wrench::new(Vector3::new(2.0, -1.0, 0.5), Vector3::new(0.2, 0.0, -0.3));
        let mut out = Wrench::zero();
        for _ in 0..2000 {
            out = filter_wrench(&mut f, &step);
        }
        for ch in Channel::ALL {
            assert_relative_eq!(out.channel(ch), step.channel(ch), epsilon = 1e-12);
        }
    }

    #[test]
    fn lowpass_zero_input_stays_zero() {
        let mut f = WrenchFilter::<f64>::new(10.0, 1.0 / 80.0).unwrap();
        for _ in 0..10 {
            let out = filter_wrench(&mut f, &Wrench::zero());
            assert_eq!(out, Wrench::zero());
        }
    }

    #[test]
    fn lowpass_rejects_bad_parameters() {
        assert!(WrenchFilter::<f64>::new(0.0, 1.0 / 80.0).is_err());
        assert!(WrenchFilter::<f64>::new(10.0, 0.0).is_err());
        assert!(WrenchFilter::<f64>::new(f64::NAN, 0.01).is_err());
    }

    #[test]
    fn wrench_vector_round_trip() {
        let w = sample_wrench();
        let v = w.as_vector();
        assert_eq!(Wrench::from_vector(&v), w);
        assert_eq!(v[1], 2.0);
        assert_eq!(v[3], 0.1);
    }
}
