//! Aggregate metrics over a trace: mean/spread/extreme of absolute channel
//! values, hysteretic zero-crossing counts, and noise propagation through
//! the first-order low-pass filter.
//!
//! All aggregates run over the steady-state window: the first
//! [`STEADY_STATE_SKIP_S`] seconds of a trace are discarded so filter and
//! plant start-up transients do not pollute comparisons.

use thiserror::Error;

use crate::chain::BindingSite;
use crate::classify::Channel;
use crate::sim::intent::Movement;
use crate::sim::trace::TraceRow;
use crate::{Real, JOINT_COUNT};

/// Start-up interval excluded from every aggregate (s).
pub const STEADY_STATE_SKIP_S: f64 = 0.5;

/// Errors raised by metric computation.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    /// No samples to aggregate.
    #[error("empty sample window: {context}")]
    Empty { context: &'static str },
}

/// Mean of absolute values.
pub fn mav<S: Real>(xs: &[S]) -> Result<S, MetricsError> {
    if xs.is_empty() {
        return Err(MetricsError::Empty { context: "mav" });
    }
    let sum = xs.iter().fold(S::zero(), |acc, x| acc + x.abs());
    Ok(sum / S::scalar(xs.len() as f64))
}

/// Population standard deviation of absolute values.
pub fn mad<S: Real>(xs: &[S]) -> Result<S, MetricsError> {
    if xs.is_empty() {
        return Err(MetricsError::Empty { context: "mad" });
    }
    let mean = mav(xs)?;
    let var = xs
        .iter()
        .fold(S::zero(), |acc, x| {
            let d = x.abs() - mean;
            acc + d * d
        })
        / S::scalar(xs.len() as f64);
    Ok(var.sqrt())
}

/// Largest absolute value.
pub fn max_abs<S: Real>(xs: &[S]) -> Result<S, MetricsError> {
    if xs.is_empty() {
        return Err(MetricsError::Empty { context: "max_abs" });
    }
    Ok(xs.iter().fold(S::zero(), |acc, x| acc.max(x.abs())))
}

/// Counts sign changes with a hysteretic deadband.
///
/// The signal must exceed `+deadband` to register positive and fall below
/// `−deadband` to register negative; samples inside the band keep the last
/// registered sign, so noise within the band cannot produce crossings.
pub fn zero_crossings<S: Real>(xs: &[S], deadband: S) -> usize {
    let mut count = 0;
    let mut sign: i8 = 0;
    for x in xs {
        let new_sign = if *x > deadband {
            1
        } else if *x < -deadband {
            -1
        } else {
            0
        };
        if new_sign != 0 {
            if sign != 0 && new_sign != sign {
                count += 1;
            }
            sign = new_sign;
        }
    }
    count
}

/// Standard deviation of white noise after the one-pole low-pass
/// `y += α (x − y)`: the input std scales by `sqrt(α / (2 − α))`.
pub fn filtered_noise_std<S: Real>(raw_std: S, alpha: S) -> S {
    raw_std * (alpha / (S::scalar(2.0) - alpha)).sqrt()
}

/// Aggregates for one named signal.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats<S: Real> {
    /// Signal name as it appears in the metrics CSV.
    pub channel: String,
    /// Mean absolute value over the steady window.
    pub mav: S,
    /// Population standard deviation of the absolute values.
    pub mad: S,
    /// Peak absolute value.
    pub max: S,
}

/// Full metrics table for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics<S: Real> {
    /// Mode label the run used.
    pub mode: String,
    /// Scenario name.
    pub scenario: String,
    /// Per-signal aggregates: the 18 filtered wrench channels, the 9 joint
    /// speeds, and the endpoint speed, in that order.
    pub channels: Vec<ChannelStats<S>>,
}

impl<S: Real> Metrics<S> {
    /// Looks up one signal's stats by name.
    pub fn channel(&self, name: &str) -> Option<&ChannelStats<S>> {
        self.channels.iter().find(|c| c.channel == name)
    }

    /// CSV header for the metrics table.
    pub fn headers() -> Vec<String> {
        ["channel", "mav", "mad", "max", "mode", "scenario"]
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    /// CSV records, one per signal.
    pub fn records(&self) -> Vec<Vec<String>> {
        self.channels
            .iter()
            .map(|c| {
                vec![
                    c.channel.clone(),
                    format!("{}", c.mav.as_f64()),
                    format!("{}", c.mad.as_f64()),
                    format!("{}", c.max.as_f64()),
                    self.mode.clone(),
                    self.scenario.clone(),
                ]
            })
            .collect()
    }
}

/// Rows of the steady-state window (time at or past the skip interval).
pub fn steady_window<S: Real>(rows: &[TraceRow<S>]) -> &[TraceRow<S>] {
    let skip = S::scalar(STEADY_STATE_SKIP_S);
    let start = rows.partition_point(|r| r.t < skip);
    &rows[start..]
}

/// Computes the full metrics table for a finished run.
///
/// `endpoint_speed` must parallel `rows` (one sample per tick).
pub fn compute_metrics<S: Real>(
    rows: &[TraceRow<S>],
    endpoint_speed: &[S],
    mode: &str,
    scenario: &str,
) -> Result<Metrics<S>, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty { context: "trace" });
    }
    let skip = S::scalar(STEADY_STATE_SKIP_S);
    let start = rows.partition_point(|r| r.t < skip);
    let window = &rows[start..];
    if window.is_empty() {
        return Err(MetricsError::Empty { context: "steady-state window" });
    }
    let speeds = endpoint_speed.get(start..).unwrap_or(&[]);
    if speeds.len() != window.len() {
        return Err(MetricsError::Empty { context: "endpoint speed series" });
    }

    let mut channels = Vec::new();
    let mut push = |name: String, xs: &[S]| -> Result<(), MetricsError> {
        channels.push(ChannelStats {
            channel: name,
            mav: mav(xs)?,
            mad: mad(xs)?,
            max: max_abs(xs)?,
        });
        Ok(())
    };

    for site in [BindingSite::UpperArm, BindingSite::Forearm, BindingSite::Hand] {
        for ch in Channel::ALL {
            let xs: Vec<S> = window.iter().map(|r| r.channel_value(site, ch)).collect();
            push(format!("{}_{}", site.label(), ch.label()), &xs)?;
        }
    }
    for j in 0..JOINT_COUNT {
        let xs: Vec<S> = window.iter().map(|r| r.qd[j]).collect();
        push(format!("qd{}", j + 1), &xs)?;
    }
    push("endpoint_speed".to_string(), speeds)?;

    Ok(Metrics {
        mode: mode.to_string(),
        scenario: scenario.to_string(),
        channels,
    })
}

/// The seven movement-channel names whose transparency the mode comparison
/// judges: the force pairs at the arm cuffs and the hand's grip channels.
pub fn movement_channel_names() -> [String; 7] {
    [
        "ua_fy".into(),
        "ua_fz".into(),
        "fa_fy".into(),
        "fa_fz".into(),
        "ha_tx".into(),
        "ha_fy".into(),
        "ha_fz".into(),
    ]
}

/// Peak misalignment-torque score for a movement over the steady window.
///
/// Single-joint movements score the peak absolute value of their channel;
/// compound movements score the peak of the summed channel magnitudes at
/// each instant.
pub fn assistant_peak<S: Real>(rows: &[TraceRow<S>], movement: Movement) -> Result<S, MetricsError> {
    let window = steady_window(rows);
    if window.is_empty() {
        return Err(MetricsError::Empty { context: "assistant peak window" });
    }
    let channels = movement.assistant_channels();
    let mut peak = S::zero();
    for row in window {
        let sum = channels
            .iter()
            .fold(S::zero(), |acc, (site, ch)| acc + row.channel_value(*site, *ch).abs());
        peak = peak.max(sum);
    }
    Ok(peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_signal_has_mav_value_and_zero_mad() {
        let xs = [-2.5f64; 400];
        assert_relative_eq!(mav(&xs).unwrap(), 2.5);
        assert_relative_eq!(mad(&xs).unwrap(), 0.0);
        assert_relative_eq!(max_abs(&xs).unwrap(), 2.5);
    }

    #[test]
    fn alternating_signal_has_mav_and_zero_mad() {
        let xs: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 3.0 } else { -3.0 }).collect();
        assert_relative_eq!(mav(&xs).unwrap(), 3.0);
        assert_relative_eq!(mad(&xs).unwrap(), 0.0);
    }

    #[test]
    fn spreadsheet_style_reference_values() {
        // Hand-checked: |x| = [1, 2, 3, 4] → mean 2.5, population variance
        // ((1.5)² + (0.5)² + (0.5)² + (1.5)²)/4 = 1.25.
        let xs = [1.0f64, -2.0, 3.0, -4.0];
        assert_relative_eq!(mav(&xs).unwrap(), 2.5);
        assert_relative_eq!(mad(&xs).unwrap(), 1.25f64.sqrt());
        assert_relative_eq!(max_abs(&xs).unwrap(), 4.0);
    }

    #[test]
    fn empty_windows_are_rejected() {
        let xs: [f64; 0] = [];
        assert!(mav(&xs).is_err());
        assert!(mad(&xs).is_err());
        assert!(max_abs(&xs).is_err());
        assert!(compute_metrics::<f64>(&[], &[], "ff", "s").is_err());
    }

    #[test]
    fn zero_crossings_count_signed_transitions() {
        let xs = [0.5f64, 1.0, -1.0, 1.0, -1.0, -0.5, 1.0];
        assert_eq!(zero_crossings(&xs, 0.1), 4);
        // Monotone signal: none.
        let xs = [0.1f64, 0.2, 0.3];
        assert_eq!(zero_crossings(&xs, 0.05), 0);
    }

    #[test]
    fn deadband_blocks_noise_crossings() {
        // Oscillation strictly inside the band never registers.
        let xs: Vec<f64> = (0..200).map(|k| if k % 2 == 0 { 0.04 } else { -0.04 }).collect();
        assert_eq!(zero_crossings(&xs, 0.05), 0);
        // The same oscillation outside the band registers every flip.
        assert_eq!(zero_crossings(&xs, 0.03), 199);
    }

    #[test]
    fn filtered_noise_std_matches_simulation() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let alpha = 0.44f64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let mut y = 0.0;
        let mut samples = Vec::with_capacity(200_000);
        for _ in 0..200_000 {
            let x: f64 = normal.sample(&mut rng);
            y += alpha * (x - y);
            samples.push(y);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
            / samples.len() as f64;
        let predicted = filtered_noise_std(1.0, alpha);
        assert_relative_eq!(var.sqrt(), predicted, max_relative = 0.02);
    }
}
