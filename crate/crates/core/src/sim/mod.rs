//! Desk-scale closed-loop simulation: a scripted human reference arm drives
//! spring-damper cuff bindings on a rigid-body exoskeleton plant, the
//! controller closes the loop on the sensed cuff wrenches at the control
//! rate, and per-tick traces plus aggregate metrics are produced.
//!
//! Layout:
//! - [`intent`]: scripted human motion (hold, joint sinusoids, planar
//!   rounded-square target path with minimum-jerk timing).
//! - [`binding`]: cuff spring-damper wrench, active-force caps, and the
//!   noisy, range-limited sensor model.
//! - [`plant`]: forward dynamics and the fixed-step semi-implicit Euler
//!   integrator with joint-limit handling and an energy ledger.
//! - [`runner`]: the 80 Hz loop tying intent, bindings, controller, and
//!   plant together; donning-offset disturbance injection.
//! - [`trace`]: per-tick rows with a pinned CSV layout.
//! - [`metrics`]: MAV/MAD/max aggregates, zero-crossing counts, and the
//!   steady-state window logic.

pub mod binding;
pub mod intent;
pub mod metrics;
pub mod plant;
pub mod runner;
pub mod trace;

pub use binding::{measure_wrench, spring_wrench, BindingParams, SensorParams};
pub use intent::{HumanIntent, IntentProfile, Movement, SquarePath};
pub use metrics::{
    compute_metrics, filtered_noise_std, mad, mav, max_abs, zero_crossings, ChannelStats,
    Metrics, MetricsError, STEADY_STATE_SKIP_S,
};
pub use plant::{EnergyLedger, Plant, PlantError, PlantParams, PlantState};
pub use runner::{run_scenario, DonningConfig, SimConfig, SimError, SimResult};
pub use trace::TraceRow;
