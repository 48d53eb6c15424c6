//! Per-tick trace rows with a pinned, documented column layout.
//!
//! The column order is part of the tool's compatibility contract: golden
//! files compare the emitted CSV byte-for-byte. Columns:
//!
//! | group | columns |
//! |---|---|
//! | time | `tick`, `t` |
//! | plant state | `q1..q9`, `qd1..qd9` |
//! | torques | `tau_cmd1..9` (unclamped sum), `tau_bas1..9`, `tau_fcm1..9` |
//! | filtered wrenches | `ua_fx..ua_tz`, `fa_fx..fa_tz`, `ha_fx..ha_tz` |
//! | intent | `intent_elbow`, `intent_wrist` (0 joint-oriented, 1 target-oriented) |
//! | gains | `k_elbow`, `k_wrist`, then `ua_kf1, ua_kt1, ua_kf2, ua_kt2, fa_…, ha_…` |
//! | clamps | `sat1..sat9` (0/1, torque limit engaged) |
//!
//! Numbers are formatted with the shortest round-trip representation, so a
//! parsed trace reproduces the exact binary values.

use crate::bas::PairGains;
use crate::chain::BindingSite;
use crate::classify::{Channel, Wrench};
use crate::controller::ControlOutput;
use crate::fcm::IntentMode;
use crate::{JointVec, Real, JOINT_COUNT};

/// One control tick's record.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow<S: Real> {
    /// Control tick index, starting at 0.
    pub tick: u64,
    /// Time at the start of the tick (s).
    pub t: S,
    /// Plant joint angles at the start of the tick (rad).
    pub q: JointVec<S>,
    /// Plant joint velocities at the start of the tick (rad/s).
    pub qd: JointVec<S>,
    /// Commanded torque: the exact feedforward + feedback sum (N·m).
    pub tau_cmd: JointVec<S>,
    /// Alignment feedback torque contribution (N·m).
    pub tau_bas: JointVec<S>,
    /// Coordination feedback torque contribution (N·m).
    pub tau_fcm: JointVec<S>,
    /// Low-pass-filtered sensor wrenches, upper arm / forearm / hand.
    pub filtered: [Wrench<S>; 3],
    /// Elbow-stage intent classification.
    pub intent_elbow: IntentMode,
    /// Wrist-stage intent classification.
    pub intent_wrist: IntentMode,
    /// Elbow coordination gain.
    pub k_elbow: S,
    /// Wrist coordination gain.
    pub k_wrist: S,
    /// Alignment gain pairs per binding site.
    pub pair_gains: [[PairGains<S>; 2]; 3],
    /// Torque-limit engagement flags per joint.
    pub saturated: [bool; JOINT_COUNT],
}

/// Binding-site prefixes in column order.
const SITE_PREFIXES: [&str; 3] = ["ua", "fa", "ha"];

impl<S: Real> TraceRow<S> {
    /// Builds a row from the plant state and controller output of one tick.
    pub fn from_tick(
        tick: u64,
        t: S,
        q: &JointVec<S>,
        qd: &JointVec<S>,
        out: &ControlOutput<S>,
    ) -> Self {
        Self {
            tick,
            t,
            q: *q,
            qd: *qd,
            tau_cmd: out.tau_command,
            tau_bas: out.tau_interaction,
            tau_fcm: out.tau_coordination,
            filtered: out.filtered,
            intent_elbow: out.intent_elbow,
            intent_wrist: out.intent_wrist,
            k_elbow: out.k_elbow,
            k_wrist: out.k_wrist,
            pair_gains: out.pair_gains,
            saturated: out.saturated,
        }
    }

    /// Column names, in emission order.
    pub fn headers() -> Vec<String> {
        let mut cols = vec!["tick".to_string(), "t".to_string()];
        for name in ["q", "qd", "tau_cmd", "tau_bas", "tau_fcm"] {
            for j in 1..=JOINT_COUNT {
                cols.push(format!("{name}{j}"));
            }
        }
        for site in SITE_PREFIXES {
            for ch in Channel::ALL {
                cols.push(format!("{site}_{}", ch.label()));
            }
        }
        cols.push("intent_elbow".to_string());
        cols.push("intent_wrist".to_string());
        cols.push("k_elbow".to_string());
        cols.push("k_wrist".to_string());
        for site in SITE_PREFIXES {
            for pair in 1..=2 {
                cols.push(format!("{site}_kf{pair}"));
                cols.push(format!("{site}_kt{pair}"));
            }
        }
        for j in 1..=JOINT_COUNT {
            cols.push(format!("sat{j}"));
        }
        cols
    }

    /// The row as CSV fields, matching [`TraceRow::headers`].
    pub fn record(&self) -> Vec<String> {
        let num = |v: S| format!("{}", v.as_f64());
        let mode_flag = |m: IntentMode| match m {
            IntentMode::JointOriented => "0".to_string(),
            IntentMode::TargetOriented => "1".to_string(),
        };
        let mut fields = vec![self.tick.to_string(), num(self.t)];
        for vec in [&self.q, &self.qd, &self.tau_cmd, &self.tau_bas, &self.tau_fcm] {
            for j in 0..JOINT_COUNT {
                fields.push(num(vec[j]));
            }
        }
        for wrench in &self.filtered {
            for ch in Channel::ALL {
                fields.push(num(wrench.channel(ch)));
            }
        }
        fields.push(mode_flag(self.intent_elbow));
        fields.push(mode_flag(self.intent_wrist));
        fields.push(num(self.k_elbow));
        fields.push(num(self.k_wrist));
        for site in &self.pair_gains {
            for pair in site {
                fields.push(num(pair.k_f));
                fields.push(num(pair.k_t));
            }
        }
        for flag in &self.saturated {
            fields.push(if *flag { "1" } else { "0" }.to_string());
        }
        fields
    }

    /// Filtered value of one sensor channel at one site.
    pub fn channel_value(&self, site: BindingSite, ch: Channel) -> S {
        self.filtered[site.index()].channel(ch)
    }
}
