//! `exoarm` command line: closed-loop scenario runs, movement speed sweeps,
//! and the named self-check suites.
//!
//! Exit codes: `0` success, `2` input/validation failure (bad flags, a
//! missing or invalid scenario file, unknown mode/movement/suite names),
//! `3` runtime failure (simulation abort, a failing check suite, or an
//! output I/O error). Bad input never terminates by panic.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exoarm::checks::{self, CheckReport};
use exoarm::controller::ControlMode;
use exoarm::scenario::{
    ArmSection, BindingSection, ControllerSection, DonningSection, IntentSection, PlantSection,
    ScenarioError, ScenarioFile, SensorSection,
};
use exoarm::sim::intent::Movement;
use exoarm::sim::metrics::{assistant_peak, compute_metrics, Metrics};
use exoarm::sim::runner::{run_scenario, SimError};
use exoarm::sim::trace::TraceRow;
use exoarm::{Scalar, JOINT_COUNT};

/// Desk-scale closed-loop exoskeleton simulator: scenario runs, speed
/// sweeps, and self-check suites.
#[derive(Parser)]
#[command(name = "exoarm", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write trace + metrics CSVs.
    Run(RunArgs),
    /// Sweep joint-sine peak speeds across movements and modes.
    Sweep(SweepArgs),
    /// Run the named self-check suites.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Control mode: ff, bas, fcm, bas-fcm, or all (one trace per mode,
    /// shared seed) [default: the scenario's own mode].
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,
    /// Override the scenario's sensor-noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $EXOARM_OUT, else the current directory].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated peak joint speeds (rad/s) [default: 0.5,1.0,...,3.5].
    #[arg(long, value_delimiter = ',', value_name = "RAD_S")]
    speeds: Option<Vec<f64>>,
    /// Comma-separated movement names [default: the six sweep movements].
    #[arg(long, value_delimiter = ',', value_name = "NAME")]
    movements: Option<Vec<String>>,
    /// Comma-separated control modes [default: ff,bas].
    #[arg(long, value_delimiter = ',', value_name = "MODE")]
    modes: Option<Vec<String>>,
    /// Sensor-noise seed shared by every run in the sweep.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory [default: $EXOARM_OUT, else the current directory].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// List suite names without running them.
    #[arg(long)]
    list: bool,
    /// Run only this suite.
    #[arg(long, value_name = "SUITE")]
    only: Option<String>,
    /// Poison the named suite with its deliberate fault; the run must then
    /// report that suite as failing.
    #[arg(long, value_name = "SUITE")]
    inject: Option<String>,
}

/// A failure with its exit-code class.
#[derive(Debug)]
enum CliError {
    /// Bad input or configuration: exit 2.
    Invalid(String),
    /// Failure while running or writing output: exit 3.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn invalid(e: ScenarioError) -> CliError {
    CliError::Invalid(e.to_string())
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig { .. } => CliError::Invalid(e.to_string()),
        SimError::Abort { .. } => CliError::Runtime(e.to_string()),
    }
}

/// Output directory: the flag wins, then `$EXOARM_OUT`, then the current
/// directory; created if absent.
fn resolve_out(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os("EXOARM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| {
        CliError::Runtime(format!("cannot create output directory `{}`: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn parse_mode(label: &str) -> Result<ControlMode, CliError> {
    match label {
        "ff" => Ok(ControlMode::Ff),
        "bas" => Ok(ControlMode::Bas),
        "fcm" => Ok(ControlMode::Fcm),
        "bas-fcm" | "bas_fcm" => Ok(ControlMode::BasFcm),
        other => Err(CliError::Invalid(format!(
            "unknown mode `{other}`; expected ff, bas, fcm, or bas-fcm"
        ))),
    }
}

fn write_csv<I>(path: &std::path::Path, headers: &[String], records: I) -> Result<usize, CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io_err = |e: csv::Error| CliError::Runtime(format!("cannot write `{}`: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot open `{}`: {e}", path.display())))?;
    writer.write_record(headers).map_err(io_err)?;
    let mut rows = 0usize;
    for record in records {
        writer.write_record(&record).map_err(io_err)?;
        rows += 1;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("cannot flush `{}`: {e}", path.display())))?;
    Ok(rows)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scenario).map_err(|e| {
        CliError::Invalid(format!("cannot read scenario `{}`: {e}", args.scenario.display()))
    })?;
    let file = ScenarioFile::from_json(&text).map_err(invalid)?;
    file.validate().map_err(invalid)?;
    let out = resolve_out(args.out)?;

    let modes: Vec<ControlMode> = match args.mode.as_deref() {
        None => vec![file.mode],
        Some("all") => vec![ControlMode::Ff, ControlMode::Bas, ControlMode::Fcm, ControlMode::BasFcm],
        Some(label) => vec![parse_mode(label)?],
    };
    let single = modes.len() == 1;

    let mut tables: Vec<Metrics<Scalar>> = Vec::new();
    for mode in modes {
        let cfg = file.build(Some(mode), args.seed).map_err(invalid)?;
        let result = run_scenario(&cfg).map_err(sim_err)?;
        let metrics = compute_metrics(&result.rows, &result.endpoint_speed, mode.label(), &file.name)
            .map_err(|e| CliError::Runtime(format!("metrics for mode {}: {e}", mode.label())))?;

        let trace_name = if single {
            "trace.csv".to_string()
        } else {
            format!("trace_{}.csv", mode.label())
        };
        let trace_path = out.join(trace_name);
        let rows = write_csv(
            &trace_path,
            &TraceRow::<Scalar>::headers(),
            result.rows.iter().map(|r| r.record()),
        )?;

        println!(
            "run {} mode={} seed={}: {} ticks, energy residual {:.3e}, limit hits {}, sensor saturations {}",
            file.name,
            mode.label(),
            cfg.seed,
            result.rows.len(),
            result.energy_relative_residual,
            result.limit_hits,
            result.sensor_saturations,
        );
        println!("  wrote {} ({rows} rows)", trace_path.display());
        tables.push(metrics);
    }

    let metrics_path = out.join("metrics.csv");
    let rows = write_csv(
        &metrics_path,
        &Metrics::<Scalar>::headers(),
        tables.iter().flat_map(|m| m.records()),
    )?;
    println!("  wrote {} ({rows} rows)", metrics_path.display());
    Ok(())
}

/// Sweep scenario: a gravity-loaded posture (flexed shoulder, bent elbow)
/// driven by one movement's joint sinusoid at a fixed 0.3 rad amplitude, so
/// the commanded peak speed is the only variable across the grid. Duration
/// covers two full cycles past the steady-state skip, clamped to [3, 10] s.
/// Strap impedance is softened and sensor ranges widened relative to the
/// library defaults so the misalignment torques stay inside the human caps
/// and the measurement range instead of railing at every speed.
fn sweep_scenario(movement: Movement, peak_speed: f64, seed: u64) -> ScenarioFile {
    const AMPLITUDE: f64 = 0.3;
    let omega = peak_speed / AMPLITUDE;
    let period = std::f64::consts::TAU / omega;
    let duration_s = (0.5 + 2.0 * period).clamp(3.0, 10.0);
    let mut posture = [0.0; JOINT_COUNT];
    posture[2] = 0.3;
    posture[5] = 1.2;
    ScenarioFile {
        schema: 1,
        name: format!("sweep_{}_{}", movement.label(), (peak_speed * 10.0).round() as i64),
        mode: ControlMode::Ff,
        duration_s,
        seed,
        arm: ArmSection::default(),
        posture,
        intent: IntentSection::JointSine { movement, amplitude: AMPLITUDE, peak_speed },
        force_cap: 60.0,
        torque_cap: 12.0,
        binding: BindingSection::default(),
        donning: Some(DonningSection { stiffness: 60.0, damping: 2.0 }),
        sensors: SensorSection { force_range: 200.0, torque_range: 40.0, ..SensorSection::default() },
        plant: PlantSection::default(),
        controller: ControllerSection::default(),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let speeds = args.speeds.unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
    for &s in &speeds {
        if !s.is_finite() || s <= 0.0 {
            return Err(CliError::Invalid(format!("sweep speed {s} must be positive and finite")));
        }
    }
    let movements: Vec<Movement> = match &args.movements {
        None => Movement::SWEEP.to_vec(),
        Some(labels) => labels
            .iter()
            .map(|l| {
                Movement::from_label(l).ok_or_else(|| {
                    let known: Vec<&str> = Movement::ALL.iter().map(|m| m.label()).collect();
                    CliError::Invalid(format!(
                        "unknown movement `{l}`; expected one of: {}",
                        known.join(", ")
                    ))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let modes: Vec<ControlMode> = match &args.modes {
        None => vec![ControlMode::Ff, ControlMode::Bas],
        Some(labels) => labels.iter().map(|l| parse_mode(l)).collect::<Result<_, _>>()?,
    };
    let out = resolve_out(args.out)?;

    let mut records: Vec<Vec<String>> = Vec::new();
    for &movement in &movements {
        for &speed in &speeds {
            for &mode in &modes {
                let file = sweep_scenario(movement, speed, args.seed);
                let cfg = file.build(Some(mode), None).map_err(invalid)?;
                let result = run_scenario(&cfg).map_err(sim_err)?;
                let peak = assistant_peak(&result.rows, movement)
                    .map_err(|e| CliError::Runtime(format!("sweep metrics: {e}")))?;
                println!(
                    "sweep {} mode={} speed={:.1} rad/s: peak assist {:.4} N·m",
                    movement.label(),
                    mode.label(),
                    speed,
                    peak,
                );
                records.push(vec![
                    movement.label().to_string(),
                    mode.label().to_string(),
                    format!("{speed}"),
                    format!("{peak}"),
                ]);
            }
        }
    }

    let path = out.join("sweep.csv");
    let headers: Vec<String> =
        ["movement", "mode", "speed_rad_s", "peak_assist"].iter().map(|s| s.to_string()).collect();
    let rows = write_csv(&path, &headers, records)?;
    println!("wrote {} ({rows} rows)", path.display());
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), CliError> {
    if args.list {
        for name in checks::SUITE_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    if let (Some(only), Some(inject)) = (&args.only, &args.inject) {
        if only != inject {
            return Err(CliError::Invalid(format!(
                "--inject {inject} does not match --only {only}"
            )));
        }
    }
    let reports: Vec<CheckReport> = match &args.only {
        Some(name) => vec![checks::run_suite(name, args.inject.is_some())
            .map_err(|e| CliError::Invalid(e.to_string()))?],
        None => checks::run_all(args.inject.as_deref())
            .map_err(|e| CliError::Invalid(e.to_string()))?,
    };

    let mut failed = 0usize;
    for report in &reports {
        let verdict = if report.passed { "ok  " } else { "FAIL" };
        println!("{verdict} {}: {}", report.name, report.detail);
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {} check suites failed",
            reports.len()
        )));
    }
    println!("all {} check suites passed", reports.len());
    Ok(())
}
