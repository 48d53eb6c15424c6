//! The closed loop: scripted intent drives a kinematic reference arm whose
//! cuff attachments pull on the exoskeleton plant through spring-damper
//! bindings; the controller sees the noisy cuff sensors at the control rate
//! and its clamped command drives the plant between ticks.
//!
//! Donning-length mismatch is injected as an extra flexion-axis torque at
//! the arm cuffs, computed by the planar two-rod offset model from the
//! reference motion, so imperfect cuff placement disturbs exactly the
//! misalignment channels the alignment strategy watches.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{BindingSite, ChainModel, FrameSet, JointId};
use crate::classify::Wrench;
use crate::controller::{Controller, ControllerConfig};
use crate::offset::{
    disturbance_torques, offset_angles, offset_rates, BindingImpedance, DonningGeometry,
    ElbowBranch, OffsetRateForm,
};
use crate::sim::binding::{
    cap_wrench, measure_wrench, spring_wrench, BindingParams, FrameMotion, SensorParams,
};
use crate::sim::intent::HumanIntent;
use crate::sim::plant::{Plant, PlantParams, PlantState};
use crate::sim::trace::TraceRow;
use crate::{JointVec, Real};

/// Donning-mismatch model: planar segment lengths of the wearer versus the
/// device rods, and the rotational impedance of the cuff straps.
#[derive(Clone, Copy, Debug)]
pub struct DonningConfig<S: Real> {
    /// Human versus exoskeleton planar segment lengths.
    pub geometry: DonningGeometry<S>,
    /// Rotational stiffness/damping converting offset angles to torques.
    pub impedance: BindingImpedance<S>,
    /// How the forearm offset rate is assembled.
    pub rate_form: OffsetRateForm,
}

/// Complete configuration of one simulation run.
#[derive(Clone, Debug)]
pub struct SimConfig<S: Real> {
    /// Scenario name, carried into metrics.
    pub name: String,
    /// Exoskeleton chain geometry (the kinematic reference uses the same
    /// chain, so coincident joint states mean relaxed bindings).
    pub model: ChainModel<S>,
    /// Controller configuration, including the mode under test.
    pub controller: ControllerConfig<S>,
    /// Plant-side inertia/friction/integration parameters.
    pub plant: PlantParams<S>,
    /// Scripted human intent.
    pub intent: HumanIntent<S>,
    /// Spring-damper binding parameters per cuff.
    pub bindings: [BindingParams<S>; 3],
    /// Sensor noise and range model.
    pub sensors: SensorParams<S>,
    /// Optional donning-length mismatch injection.
    pub donning: Option<DonningConfig<S>>,
    /// Run duration (s).
    pub duration_s: S,
    /// RNG seed for sensor noise.
    pub seed: u64,
}

/// Errors raised before or during a run.
#[derive(Debug, Error)]
pub enum SimError {
    /// Configuration rejected before the loop started.
    #[error("invalid scenario configuration: {what}")]
    InvalidConfig { what: String },
    /// The loop aborted; diagnostics carry the tick and the cause.
    #[error("simulation aborted at tick {tick} (t = {time:.4} s): {what}")]
    Abort { tick: u64, time: f64, what: String },
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct SimResult<S: Real> {
    /// Per-tick trace rows.
    pub rows: Vec<TraceRow<S>>,
    /// Endpoint (hand-frame) linear speed per tick (m/s).
    pub endpoint_speed: Vec<S>,
    /// Energy-audit residual relative to the injected/dissipated scale.
    pub energy_relative_residual: S,
    /// Joint-limit clamp events in the plant.
    pub limit_hits: u64,
    /// Count of (tick, cuff) sensor readings that hit a range limit.
    pub sensor_saturations: u64,
    /// Plant state after the last tick.
    pub final_state: PlantState<S>,
}

const SITES: [BindingSite; 3] = [BindingSite::UpperArm, BindingSite::Forearm, BindingSite::Hand];

/// Cuff frame + twist for every binding site of a chain in state (q, qd).
fn site_motions<S: Real>(
    model: &ChainModel<S>,
    frames: &FrameSet<S>,
    qd: &JointVec<S>,
) -> Result<[FrameMotion<S>; 3], String> {
    let mut out = [FrameMotion::still(frames.joints[0]); 3];
    for site in SITES {
        let jac = model
            .jacobian_from_frames(frames, JointId::Sc1, site)
            .map_err(|e| e.to_string())?;
        let span = jac.ncols();
        let twist = &jac * qd.rows(0, span);
        out[site.index()] = FrameMotion {
            pose: *frames.binding(site),
            linear: Vector3::new(twist[0], twist[1], twist[2]),
            angular: Vector3::new(twist[3], twist[4], twist[5]),
        };
    }
    Ok(out)
}

/// Flexion-axis disturbance torques (upper arm, forearm) from the donning
/// two-rod model at the reference's current sagittal endpoint.
fn donning_torques<S: Real>(
    donning: &DonningConfig<S>,
    q_h: &JointVec<S>,
    qd_h: &JointVec<S>,
) -> Result<(S, S), String> {
    let theta = (q_h[JointId::Sh1.index()], q_h[JointId::El2.index()]);
    let endpoint = donning.geometry.human.forward(theta);
    let rates_vec = Vector2::new(qd_h[JointId::Sh1.index()], qd_h[JointId::El2.index()]);
    let velocity = donning.geometry.human.jacobian(theta) * rates_vec;
    let angles = offset_angles(&donning.geometry, endpoint, ElbowBranch::Down)
        .map_err(|e| e.to_string())?;
    let rates = offset_rates(
        &donning.geometry,
        endpoint,
        velocity,
        ElbowBranch::Down,
        donning.rate_form,
    )
    .map_err(|e| e.to_string())?;
    let torques = disturbance_torques(&angles, &rates, &donning.impedance);
    Ok((torques.upper_arm, torques.forearm))
}

/// Physical binding wrenches (cuff frames) for the current reference and
/// plant states: spring-damper, donning injection, then the active cap.
fn physical_wrenches<S: Real>(
    cfg: &SimConfig<S>,
    q_h: &JointVec<S>,
    qd_h: &JointVec<S>,
    state: &PlantState<S>,
) -> Result<[Wrench<S>; 3], String> {
    let frames_h = cfg.model.forward_kinematics(q_h).map_err(|e| e.to_string())?;
    let frames_e = cfg.model.forward_kinematics(&state.q).map_err(|e| e.to_string())?;
    let reference = site_motions(&cfg.model, &frames_h, qd_h)?;
    let cuffs = site_motions(&cfg.model, &frames_e, &state.qd)?;
    let injection = match &cfg.donning {
        Some(d) => {
            let (ua, fa) = donning_torques(d, q_h, qd_h)?;
            [ua, fa, S::zero()]
        }
        None => [S::zero(); 3],
    };
    let mut out = [Wrench::zero(); 3];
    for site in SITES {
        let i = site.index();
        let mut w = spring_wrench(&reference[i], &cuffs[i], &cfg.bindings[i]);
        w.torque.z += injection[i];
        out[i] = cap_wrench(&w, cfg.intent.force_cap, cfg.intent.torque_cap);
    }
    Ok(out)
}

/// Joint torques the cuff wrenches exert on the plant, summed over sites.
fn external_torques<S: Real>(
    model: &ChainModel<S>,
    q: &JointVec<S>,
    wrenches: &[Wrench<S>; 3],
) -> Result<JointVec<S>, String> {
    let frames = model.forward_kinematics(q).map_err(|e| e.to_string())?;
    let mut tau = JointVec::zeros();
    for site in SITES {
        let i = site.index();
        let rot = frames.binding(site).rotation;
        let force = rot * wrenches[i].force;
        let torque = rot * wrenches[i].torque;
        let jac = model
            .jacobian_from_frames(&frames, JointId::Sc1, site)
            .map_err(|e| e.to_string())?;
        for c in 0..jac.ncols() {
            let mut dot = S::zero();
            for r in 0..3 {
                dot += jac[(r, c)] * force[r] + jac[(r + 3, c)] * torque[r];
            }
            tau[c] += dot;
        }
    }
    Ok(tau)
}

/// Validates the configuration, naming the offending piece.
fn validate_config<S: Real>(cfg: &SimConfig<S>) -> Result<(), SimError> {
    let bad = |what: String| Err(SimError::InvalidConfig { what });
    if let Err(e) = cfg.controller.validate() {
        return bad(format!("controller: {e}"));
    }
    if let Err(e) = cfg.plant.validate() {
        return bad(format!("plant: {e}"));
    }
    if let Err(e) = cfg.intent.validate() {
        return bad(format!("intent: {e}"));
    }
    for site in SITES {
        if let Err(e) = cfg.bindings[site.index()].validate() {
            return bad(format!("binding {}: {e}", site.label()));
        }
    }
    if let Err(e) = cfg.sensors.validate() {
        return bad(format!("sensors: {e}"));
    }
    if !(cfg.duration_s > S::zero()) || !cfg.duration_s.is_finite() {
        return bad(format!("duration_s: {}", cfg.duration_s.as_f64()));
    }
    let dt_controller = S::one() / cfg.controller.control_rate_hz;
    let mismatch = (cfg.plant.control_dt - dt_controller).abs();
    if mismatch.as_f64() > 1e-12 {
        return bad(format!(
            "plant.control_dt {} does not match the controller period {}",
            cfg.plant.control_dt.as_f64(),
            dt_controller.as_f64()
        ));
    }
    Ok(())
}

/// Runs one scenario to completion.
///
/// Deterministic: the same configuration and seed produce the identical
/// trace. The RNG is consumed only by the sensor model, in fixed site and
/// axis order, once per cuff per tick.
pub fn run_scenario<S: Real>(cfg: &SimConfig<S>) -> Result<SimResult<S>, SimError> {
    validate_config(cfg)?;
    let q0 = cfg
        .intent
        .initial_pose()
        .map_err(|e| SimError::InvalidConfig { what: format!("intent: {e}") })?;
    let mut plant = Plant::new(cfg.model.clone(), cfg.plant, &q0)
        .map_err(|e| SimError::InvalidConfig { what: format!("plant: {e}") })?;
    let mut controller = Controller::new(cfg.model.clone(), cfg.controller.clone())
        .map_err(|e| SimError::InvalidConfig { what: format!("controller: {e}") })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let dt = cfg.plant.control_dt;
    let ticks = (cfg.duration_s / dt).round().as_f64().max(1.0) as u64;
    let substeps = cfg.plant.substeps;
    let sub_dt = plant.substep_dt();

    let mut rows = Vec::with_capacity(ticks as usize);
    let mut endpoint_speed = Vec::with_capacity(ticks as usize);
    let mut sensor_saturations = 0u64;

    let abort = |tick: u64, t: S, what: String| SimError::Abort {
        tick,
        time: t.as_f64(),
        what,
    };

    for tick in 0..ticks {
        let t = dt * S::scalar(tick as f64);
        let (q_h, qd_h) = cfg
            .intent
            .sample(t)
            .map_err(|e| abort(tick, t, format!("intent: {e}")))?;
        let physical = physical_wrenches(cfg, &q_h, &qd_h, plant.state())
            .map_err(|e| abort(tick, t, e))?;
        let mut measured = [Wrench::zero(); 3];
        for site in SITES {
            let (m, saturated) = measure_wrench(&physical[site.index()], &cfg.sensors, &mut rng);
            measured[site.index()] = m;
            sensor_saturations += u64::from(saturated);
        }
        let state = *plant.state();
        let out = controller
            .step(&state.q, &measured)
            .map_err(|e| abort(tick, t, format!("controller: {e}")))?;
        rows.push(TraceRow::from_tick(tick, t, &state.q, &state.qd, &out));

        // Endpoint speed from the hand-site Jacobian at the tick state.
        let frames = cfg
            .model
            .forward_kinematics(&state.q)
            .map_err(|e| abort(tick, t, e.to_string()))?;
        let jac = cfg
            .model
            .jacobian_from_frames(&frames, JointId::Sc1, BindingSite::Hand)
            .map_err(|e| abort(tick, t, e.to_string()))?;
        let twist = &jac * state.qd.rows(0, jac.ncols());
        endpoint_speed.push(Vector3::new(twist[0], twist[1], twist[2]).norm());

        // Integrate to the next tick under the zero-order-hold command.
        for sub in 0..substeps {
            let t_sub = t + sub_dt * S::scalar(f64::from(sub));
            let (q_h, qd_h) = cfg
                .intent
                .sample(t_sub)
                .map_err(|e| abort(tick, t_sub, format!("intent: {e}")))?;
            let physical = physical_wrenches(cfg, &q_h, &qd_h, plant.state())
                .map_err(|e| abort(tick, t_sub, e))?;
            let tau_ext = external_torques(&cfg.model, &plant.state().q, &physical)
                .map_err(|e| abort(tick, t_sub, e))?;
            plant
                .substep(&(out.tau_applied + tau_ext))
                .map_err(|e| abort(tick, t_sub, e.to_string()))?;
        }
    }

    let energy = plant
        .energy()
        .map_err(|e| abort(ticks, cfg.duration_s, e.to_string()))?;
    Ok(SimResult {
        rows,
        endpoint_speed,
        energy_relative_residual: plant.ledger().relative_residual(energy),
        limit_hits: plant.limit_hits(),
        sensor_saturations,
        final_state: *plant.state(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControlMode;
    use crate::dynamics::{
        default_link_inertias, scaled_inertias, FrictionParams, DEFAULT_GRAVITY,
    };
    use crate::offset::BindingImpedance;
    use crate::sim::intent::{IntentProfile, Movement, SquarePath};
    use crate::chain::PlanarTwoLink;
    use crate::JOINT_COUNT;
    use approx::assert_relative_eq;

    fn base_config(mode: ControlMode, profile: IntentProfile<f64>) -> SimConfig<f64> {
        let model = ChainModel::default_arm();
        let controller = ControllerConfig::with_mode(mode);
        let gravity = Vector3::from(DEFAULT_GRAVITY);
        let plant = PlantParams {
            links: scaled_inertias(&default_link_inertias(), 1.05),
            friction: {
                let f = FrictionParams::default().scaled(1.2);
                [f; JOINT_COUNT]
            },
            gravity,
            substeps: 10,
            control_dt: 1.0 / 80.0,
        };
        let mut posture = JointVec::zeros();
        posture[2] = 0.3; // shoulder flexion
        posture[5] = 1.2; // elbow bent
        SimConfig {
            name: "test".to_string(),
            model,
            controller,
            plant,
            intent: HumanIntent {
                posture,
                profile,
                planar: PlanarTwoLink::new(0.33, 0.27).unwrap(),
                force_cap: 60.0,
                torque_cap: 12.0,
            },
            bindings: [BindingParams::default(); 3],
            sensors: SensorParams::default(),
            donning: None,
            duration_s: 1.0,
            seed: 11,
        }
    }

    #[test]
    fn identical_configs_and_seeds_reproduce_the_trace() {
        let cfg = base_config(
            ControlMode::BasFcm,
            IntentProfile::JointSine {
                movement: Movement::ElbowFlex,
                amplitude: 0.3,
                peak_speed: 1.0,
            },
        );
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.record(), rb.record());
        }
        assert_eq!(a.endpoint_speed, b.endpoint_speed);
    }

    #[test]
    fn different_seeds_differ() {
        let mut cfg = base_config(ControlMode::Ff, IntentProfile::Hold);
        let a = run_scenario(&cfg).unwrap();
        cfg.seed = 99;
        let b = run_scenario(&cfg).unwrap();
        let differs = a
            .rows
            .iter()
            .zip(&b.rows)
            .any(|(ra, rb)| ra.filtered[0].force != rb.filtered[0].force);
        assert!(differs);
    }

    #[test]
    fn zero_intent_run_stays_near_the_start() {
        // Hanging at rest with no scripted motion: only sensor noise moves
        // anything, and friction keeps the plant essentially still.
        let mut cfg = base_config(ControlMode::BasFcm, IntentProfile::Hold);
        cfg.intent.posture = JointVec::zeros();
        cfg.duration_s = 3.0;
        let result = run_scenario(&cfg).unwrap();
        for row in &result.rows {
            for j in 0..JOINT_COUNT {
                assert!(
                    row.q[j].abs() < 1e-3,
                    "joint {j} drifted to {} at tick {}",
                    row.q[j],
                    row.tick
                );
            }
        }
        assert_eq!(result.limit_hits, 0);
    }

    #[test]
    fn coincident_start_has_relaxed_bindings() {
        let cfg = base_config(ControlMode::Ff, IntentProfile::Hold);
        let (q_h, qd_h) = cfg.intent.sample(0.0).unwrap();
        let state = PlantState { q: q_h, qd: qd_h };
        let w = physical_wrenches(&cfg, &q_h, &qd_h, &state).unwrap();
        for site in SITES {
            assert_relative_eq!(w[site.index()].force.norm(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(w[site.index()].torque.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_audit_holds_on_a_driven_run() {
        let mut cfg = base_config(
            ControlMode::BasFcm,
            IntentProfile::JointSine {
                movement: Movement::ArmLift,
                amplitude: 0.3,
                peak_speed: 1.0,
            },
        );
        cfg.duration_s = 5.0;
        let result = run_scenario(&cfg).unwrap();
        assert!(
            result.energy_relative_residual < 5e-3,
            "energy audit residual {}",
            result.energy_relative_residual
        );
    }

    #[test]
    fn plant_tracks_the_reference_through_the_bindings() {
        // Slow elbow sine: by mid-run the plant elbow must follow the
        // reference to within a loose band in every mode.
        for mode in [ControlMode::Ff, ControlMode::BasFcm] {
            let cfg = base_config(
                mode,
                IntentProfile::JointSine {
                    movement: Movement::ElbowFlex,
                    amplitude: 0.3,
                    peak_speed: 0.5,
                },
            );
            let result = run_scenario(&cfg).unwrap();
            let last = result.rows.last().unwrap();
            let t_end = last.t;
            let (q_h, _) = cfg.intent.sample(t_end).unwrap();
            let err = (last.q[5] - q_h[5]).abs();
            assert!(
                err < 0.25,
                "mode {mode:?}: elbow lags the reference by {err} rad"
            );
        }
    }

    #[test]
    fn donning_mismatch_disturbs_the_flexion_channels() {
        let make = |donning: Option<DonningConfig<f64>>| {
            let mut cfg = base_config(
                ControlMode::Ff,
                IntentProfile::JointSine {
                    movement: Movement::ArmLift,
                    amplitude: 0.25,
                    peak_speed: 1.0,
                },
            );
            cfg.sensors.force_noise_std = 0.0;
            cfg.sensors.torque_noise_std = 0.0;
            cfg.donning = donning;
            cfg.duration_s = 2.0;
            run_scenario(&cfg).unwrap()
        };
        let without = make(None);
        let with = make(Some(DonningConfig {
            geometry: DonningGeometry {
                human: PlanarTwoLink::new(0.33, 0.27).unwrap(),
                exo: PlanarTwoLink::new(0.318, 0.261).unwrap(),
            },
            impedance: BindingImpedance::default(),
            rate_form: OffsetRateForm::ChainRule,
        }));
        let peak = |result: &SimResult<f64>| {
            result
                .rows
                .iter()
                .map(|r| r.channel_value(BindingSite::UpperArm, crate::classify::Channel::Tz).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(
            peak(&with) > 4.0 * peak(&without).max(1e-6),
            "donning injection should dominate the flexion channel: with {} without {}",
            peak(&with),
            peak(&without)
        );
    }

    #[test]
    fn square_path_scenario_runs_and_moves_the_endpoint() {
        let mut cfg = base_config(
            ControlMode::BasFcm,
            IntentProfile::TargetPath {
                path: SquarePath::standard(),
                peak_speed: 0.8,
            },
        );
        cfg.duration_s = 3.0;
        let result = run_scenario(&cfg).unwrap();
        let peak_speed = result.endpoint_speed.iter().copied().fold(0.0, f64::max);
        assert!(peak_speed > 0.3, "endpoint should actually move, peak {peak_speed}");
        assert_eq!(result.rows.len(), 240);
    }

    #[test]
    fn saturation_flags_raise_on_absurd_stiffness() {
        // A violent reference (peak cuff acceleration near 90 m/s²) dragged
        // through very stiff undamped springs transmits forces well past
        // the ±50 N sensor range.
        let mut cfg = base_config(
            ControlMode::Ff,
            IntentProfile::JointSine {
                movement: Movement::ShoulderFlex,
                amplitude: 0.4,
                peak_speed: 8.0,
            },
        );
        for b in &mut cfg.bindings {
            b.linear_stiffness = Vector3::repeat(50_000.0);
            b.linear_damping = Vector3::repeat(0.0);
        }
        cfg.duration_s = 2.0;
        match run_scenario(&cfg) {
            Ok(result) => {
                assert!(result.sensor_saturations > 0, "stiff bindings should saturate sensors");
            }
            // Blowing up instead is acceptable for this stress input; the
            // abort must carry diagnostics.
            Err(SimError::Abort { what, .. }) => assert!(!what.is_empty()),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let mut cfg = base_config(ControlMode::Ff, IntentProfile::Hold);
        cfg.duration_s = 0.0;
        assert!(matches!(run_scenario(&cfg), Err(SimError::InvalidConfig { .. })));
        let mut cfg = base_config(ControlMode::Ff, IntentProfile::Hold);
        cfg.plant.control_dt = 1.0 / 100.0;
        assert!(matches!(run_scenario(&cfg), Err(SimError::InvalidConfig { .. })));
        let mut cfg = base_config(ControlMode::Ff, IntentProfile::Hold);
        cfg.bindings[1].linear_stiffness.x = -5.0;
        assert!(matches!(run_scenario(&cfg), Err(SimError::InvalidConfig { .. })));
    }
}
