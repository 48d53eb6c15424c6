//! Named self-check suites: fast, deterministic verifications of the
//! library's core invariants, runnable from the command line.
//!
//! Each suite returns a [`CheckReport`] with a pass/fail verdict and a
//! one-line detail. A suite can be run with a deliberately injected fault to
//! demonstrate that the harness actually detects violations.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{BindingSite, ChainModel, JointId, PlanarTwoLink};
use crate::classify::Wrench;
use crate::controller::{ControlMode, Controller, ControllerConfig};
use crate::dynamics::{
    default_link_inertias, mass_matrix, scaled_inertias, FrictionParams, DEFAULT_GRAVITY,
};
use crate::offset::BindingImpedance;
use crate::sim::binding::{BindingParams, SensorParams};
use crate::sim::intent::{HumanIntent, IntentProfile, Movement};
use crate::sim::plant::{Plant, PlantParams, PlantState};
use crate::sim::runner::{run_scenario, SimConfig};
use crate::{JointVec, Scalar, JOINT_COUNT};

/// Outcome of one self-check suite.
#[derive(Clone, Debug)]
pub struct CheckReport {
    /// Suite name (one of [`SUITE_NAMES`]).
    pub name: &'static str,
    /// Whether every probe in the suite passed.
    pub passed: bool,
    /// One-line summary of what was measured.
    pub detail: String,
}

/// Errors from the suite runner itself (not from a failing check).
#[derive(Debug, Error)]
pub enum CheckError {
    /// The requested suite name does not exist.
    #[error("unknown check suite `{name}`; available: {}", SUITE_NAMES.join(", "))]
    UnknownSuite { name: String },
}

/// All suite names, in execution order.
pub const SUITE_NAMES: [&str; 8] = [
    "jacobian_fd",
    "planar_inverse",
    "lowpass_dc",
    "alignment_gain_bounds",
    "coordination_gain_identity",
    "mass_matrix_spd",
    "energy_balance",
    "determinism",
];

/// Runs every suite; `inject` poisons the named suite with a deliberate bug
/// so its failure path can be demonstrated end to end.
pub fn run_all(inject: Option<&str>) -> Result<Vec<CheckReport>, CheckError> {
    if let Some(name) = inject {
        if !SUITE_NAMES.contains(&name) {
            return Err(CheckError::UnknownSuite { name: name.to_string() });
        }
    }
    Ok(SUITE_NAMES
        .iter()
        .map(|name| run_suite(name, inject == Some(name)).expect("suite names are exhaustive"))
        .collect())
}

/// Runs a single named suite; `inject` enables its deliberate fault.
pub fn run_suite(name: &str, inject: bool) -> Result<CheckReport, CheckError> {
    let report = match name {
        "jacobian_fd" => jacobian_fd(inject),
        "planar_inverse" => planar_inverse(inject),
        "lowpass_dc" => lowpass_dc(inject),
        "alignment_gain_bounds" => alignment_gain_bounds(inject),
        "coordination_gain_identity" => coordination_gain_identity(inject),
        "mass_matrix_spd" => mass_matrix_spd(inject),
        "energy_balance" => energy_balance(inject),
        "determinism" => determinism(inject),
        _ => return Err(CheckError::UnknownSuite { name: name.to_string() }),
    };
    Ok(report)
}

/// Draws a joint vector uniformly inside the model's limits (shrunk a little
/// so finite-difference probes stay in range).
fn random_configuration(model: &ChainModel<Scalar>, rng: &mut ChaCha8Rng) -> JointVec<Scalar> {
    let mut q = JointVec::zeros();
    for (i, joint) in model.joints().iter().enumerate() {
        let (lo, hi) = joint.limits;
        let margin = 0.01 * (hi - lo);
        q[i] = rng.gen_range(lo + margin..hi - margin);
    }
    q
}

/// Central finite-difference Jacobian of a binding pose: linear rows from
/// the origin position, angular rows from the rotation log.
fn numeric_jacobian(
    model: &ChainModel<Scalar>,
    q: &JointVec<Scalar>,
    first: JointId,
    site: BindingSite,
    h: Scalar,
) -> nalgebra::OMatrix<Scalar, nalgebra::U6, nalgebra::Dyn> {
    let parent_span = model.binding(site).parent.index() + 1 - first.index();
    let mut jac = nalgebra::OMatrix::<Scalar, nalgebra::U6, nalgebra::Dyn>::zeros(parent_span);
    for (col, joint) in (first.index()..first.index() + parent_span).enumerate() {
        let mut qp = *q;
        let mut qm = *q;
        qp[joint] += h;
        qm[joint] -= h;
        let fp = model.forward_kinematics(&qp).expect("fk");
        let fm = model.forward_kinematics(&qm).expect("fk");
        let bp = fp.binding(site);
        let bm = fm.binding(site);
        let dp = (bp.translation.vector - bm.translation.vector) / (2.0 * h);
        let drot = (bp.rotation * bm.rotation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, col)] = dp[r];
            jac[(r + 3, col)] = drot[r];
        }
    }
    jac
}

fn jacobian_fd(inject: bool) -> CheckReport {
    let model = ChainModel::<Scalar>::default_arm();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11CE);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let q = random_configuration(&model, &mut rng);
        for site in BindingSite::ALL {
            let mut analytic = model.jacobian(&q, JointId::Sc1, site).expect("jacobian");
            if inject {
                analytic[(0, 0)] += 1e-3;
            }
            let numeric = numeric_jacobian(&model, &q, JointId::Sc1, site, 1e-6);
            let scale = analytic.norm().max(1.0);
            let err = (analytic - numeric).norm() / scale;
            worst = worst.max(err);
        }
    }
    CheckReport {
        name: "jacobian_fd",
        passed: worst < 1e-6,
        detail: format!(
            "max relative gap vs central differences {worst:.3e} over 50 configurations x 3 sites (bound 1e-6)"
        ),
    }
}

fn planar_inverse(inject: bool) -> CheckReport {
    let link = PlanarTwoLink::new(0.33, 0.27).expect("planar link");
    let mut rng = ChaCha8Rng::seed_from_u64(0x2D);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let theta = (rng.gen_range(-1.5..1.5), rng.gen_range(0.2..2.8));
        let jac = link.jacobian(theta);
        let mut inv = link.jacobian_inverse(theta).expect("away from singularity");
        if inject {
            inv *= 1.0001;
        }
        let gap = (inv * jac - nalgebra::Matrix2::identity()).norm();
        worst = worst.max(gap);
    }
    CheckReport {
        name: "planar_inverse",
        passed: worst < 1e-9,
        detail: format!(
            "max |J^-1 J - I| {worst:.3e} over 200 non-singular configurations (bound 1e-9)"
        ),
    }
}

fn lowpass_dc(inject: bool) -> CheckReport {
    let model = ChainModel::<Scalar>::default_arm();
    let mut controller =
        Controller::new(model, ControllerConfig::with_mode(ControlMode::Ff)).expect("controller");
    let q = JointVec::zeros();
    let mut input = Wrench::zero();
    input.force = Vector3::new(3.0, -2.0, 5.0);
    input.torque = Vector3::new(0.4, -0.2, 0.1);
    let wrenches = [input, Wrench::zero(), Wrench::zero()];
    let mut out = None;
    for _ in 0..400 {
        out = Some(controller.step(&q, &wrenches).expect("step"));
    }
    let filtered = out.expect("at least one tick").filtered[0];
    let target = if inject { input.force * 1.01 } else { input.force };
    let gap = (filtered.force - target).norm().max((filtered.torque - input.torque).norm());
    CheckReport {
        name: "lowpass_dc",
        passed: gap < 1e-9,
        detail: format!("steady-state filter output vs constant input gap {gap:.3e} after 400 ticks (bound 1e-9)"),
    }
}

fn alignment_gain_bounds(inject: bool) -> CheckReport {
    let f_max = 30.0;
    let eval = |f: f64| crate::bas::gain_pair(f, f_max).expect("gain pair");
    let (kf0, kt0) = eval(0.0);
    let (kf_half, _) = eval(f_max / 2.0);
    let (_, kt_max) = eval(f_max);
    let offset = if inject { 0.01 } else { 0.0 };
    let mut worst_endpoint = (kf0 + offset - 0.5)
        .abs()
        .max((kt0 - 1.0).abs())
        .max((kf_half - 1.0).abs())
        .max(kt_max.abs());
    let mut in_bounds = true;
    for k in 0..=2000 {
        let f = f_max * k as f64 / 2000.0;
        let (kf, kt) = eval(f);
        in_bounds &= (0.0..=1.0).contains(&kf) && (0.0..=1.0).contains(&kt);
    }
    worst_endpoint = worst_endpoint.max(if in_bounds { 0.0 } else { 1.0 });
    CheckReport {
        name: "alignment_gain_bounds",
        passed: worst_endpoint < 1e-12 && in_bounds,
        detail: format!(
            "endpoint gap {worst_endpoint:.3e} (bound 1e-12); gains within [0,1] on a 2001-point grid: {in_bounds}"
        ),
    }
}

fn coordination_gain_identity(inject: bool) -> CheckReport {
    let lambda: f64 = 2.0;
    let offset = if inject { 1e-3 } else { 0.0 };
    let k0 = crate::fcm::coordination_gain(0.0, lambda) + offset;
    let mut worst_sym = (k0 - 1.0).abs();
    let mut in_range = true;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=2000 {
        let p = -3.0 + 6.0 * k as f64 / 2000.0;
        let kc = crate::fcm::coordination_gain(p, lambda);
        let mirrored = crate::fcm::coordination_gain(-p, lambda);
        worst_sym = worst_sym.max((mirrored - (2.0 - kc)).abs());
        in_range &= kc > 0.0 && kc < 2.0;
        monotone &= kc >= prev;
        prev = kc;
    }
    CheckReport {
        name: "coordination_gain_identity",
        passed: worst_sym < 1e-12 && in_range && monotone,
        detail: format!(
            "unit value & odd-symmetry gap {worst_sym:.3e} (bound 1e-12); range (0,2): {in_range}; monotone: {monotone}"
        ),
    }
}

fn mass_matrix_spd(inject: bool) -> CheckReport {
    let model = ChainModel::<Scalar>::default_arm();
    let links = default_link_inertias::<Scalar>();
    let mut rng = ChaCha8Rng::seed_from_u64(0x57D);
    let mut worst_asym = 0.0_f64;
    let mut all_pd = true;
    for _ in 0..50 {
        let q = random_configuration(&model, &mut rng);
        let mut m = mass_matrix(&model, &links, &q).expect("mass matrix");
        if inject {
            m[(0, 1)] += 1e-6;
        }
        worst_asym = worst_asym.max((m - m.transpose()).norm());
        all_pd &= nalgebra::Cholesky::new(m).is_some();
    }
    CheckReport {
        name: "mass_matrix_spd",
        passed: worst_asym < 1e-10 && all_pd,
        detail: format!(
            "max |M - M^T| {worst_asym:.3e} over 50 configurations (bound 1e-10); positive definite: {all_pd}"
        ),
    }
}

fn energy_balance(inject: bool) -> CheckReport {
    // A coasting chain (no gravity, no friction, zero torque) must keep its
    // kinetic energy over 2 s of integration at the 1/800 s substep.
    let model = ChainModel::<Scalar>::default_arm();
    let params = PlantParams {
        links: default_link_inertias(),
        friction: [FrictionParams::default().scaled(0.0); JOINT_COUNT],
        gravity: Vector3::zeros(),
        substeps: 10,
        control_dt: 1.0 / 80.0,
    };
    let mut q0 = JointVec::zeros();
    q0[JointId::Sh1.index()] = 0.5;
    q0[JointId::Sh2.index()] = 0.2;
    q0[JointId::El2.index()] = 1.0;
    let qd0 = JointVec::from_column_slice(&[
        0.10, -0.10, 0.20, 0.15, -0.20, 0.25, -0.15, 0.10, 0.20,
    ]);
    let mut plant = Plant::with_state(model, params, &q0, &qd0).expect("plant");
    let start = plant.energy().expect("energy");
    let mut peak = 0.0_f64;
    let zero = JointVec::zeros();
    let mut worst = 0.0_f64;
    for _ in 0..(80 * 2 * 10) {
        plant.substep(&zero).expect("substep");
        let PlantState { qd, .. } = plant.state();
        peak = peak.max(qd.norm());
        worst = worst.max((plant.energy().expect("energy") - start).abs());
    }
    let mut drift = worst / start;
    if inject {
        drift += 1.0;
    }
    let hits = plant.limit_hits();
    CheckReport {
        name: "energy_balance",
        passed: drift < 1e-3 && hits == 0,
        detail: format!(
            "coasting-chain relative kinetic-energy drift {drift:.3e} over 2 s (bound 1e-3), peak joint speed {peak:.2} rad/s, limit hits {hits}"
        ),
    }
}

/// A small closed-loop scenario used by the determinism suite.
fn small_config(seed: u64) -> SimConfig<Scalar> {
    let mut posture = JointVec::zeros();
    posture[JointId::Sh1.index()] = 0.3;
    posture[JointId::El2.index()] = 1.2;
    SimConfig {
        name: "self_check".into(),
        model: ChainModel::default_arm(),
        controller: ControllerConfig::with_mode(ControlMode::BasFcm),
        plant: PlantParams {
            links: scaled_inertias(&default_link_inertias(), 1.05),
            friction: [FrictionParams::default().scaled(1.2); JOINT_COUNT],
            gravity: Vector3::from(DEFAULT_GRAVITY),
            substeps: 10,
            control_dt: 1.0 / 80.0,
        },
        intent: HumanIntent {
            posture,
            profile: IntentProfile::JointSine {
                movement: Movement::ElbowFlex,
                amplitude: 0.25,
                peak_speed: 1.0,
            },
            planar: PlanarTwoLink::new(0.33, 0.27).expect("planar"),
            force_cap: 60.0,
            torque_cap: 12.0,
        },
        bindings: [BindingParams::default(); 3],
        sensors: SensorParams::default(),
        donning: None,
        duration_s: 0.5,
        seed,
    }
}

fn determinism(inject: bool) -> CheckReport {
    let first = run_scenario(&small_config(42)).expect("run");
    let second_seed = if inject { 43 } else { 42 };
    let second = run_scenario(&small_config(second_seed)).expect("run");
    let same_len = first.rows.len() == second.rows.len();
    let mut identical = same_len;
    if same_len {
        for (a, b) in first.rows.iter().zip(second.rows.iter()) {
            if a.record() != b.record() {
                identical = false;
                break;
            }
        }
    }
    CheckReport {
        name: "determinism",
        passed: identical,
        detail: format!(
            "two runs, same seed: {} rows, traces bit-identical: {identical}",
            first.rows.len()
        ),
    }
}

/// A tiny demonstration offset computation used by the CLI's check summary
/// header to show which donning geometry the defaults describe.
pub fn default_donning_summary() -> String {
    let human = PlanarTwoLink::new(0.33, 0.27).expect("planar");
    let exo = PlanarTwoLink::new(crate::chain::DEFAULT_UPPER_ARM, crate::chain::DEFAULT_FOREARM)
        .expect("planar");
    let geom = crate::offset::DonningGeometry { human, exo };
    let endpoint = Vector2::new(0.34, 0.2);
    let angles =
        crate::offset::offset_angles(&geom, endpoint, crate::offset::ElbowBranch::Down)
            .expect("within both annuli");
    let torques = crate::offset::disturbance_torques(
        &angles,
        &crate::offset::OffsetRates { upper_arm: 0.0, forearm: 0.0 },
        &BindingImpedance::default(),
    );
    format!(
        "default donning geometry: angle offsets ({:+.4}, {:+.4}) rad -> static torques ({:+.3}, {:+.3}) N*m at (0.34, 0.20) m",
        angles.upper_arm, angles.forearm, torques.upper_arm, torques.forearm
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_clean() {
        for report in run_all(None).expect("known suites") {
            assert!(report.passed, "suite {} failed: {}", report.name, report.detail);
        }
    }

    #[test]
    fn injected_faults_are_detected_by_their_suite() {
        for name in SUITE_NAMES {
            let report = run_suite(name, true).expect("known suite");
            assert!(!report.passed, "suite {name} should detect its injected fault");
        }
    }

    #[test]
    fn unknown_suite_names_are_rejected() {
        assert!(run_suite("bogus", false).is_err());
        assert!(run_all(Some("bogus")).is_err());
    }

    #[test]
    fn suite_list_matches_the_dispatcher() {
        for name in SUITE_NAMES {
            assert!(run_suite(name, false).is_ok());
        }
    }
}
